"""Conserved integrals, the action functional and the stability quantity Q.

The three conserved integrals of a momentum field ``m`` on background ``k``
are

    F1 = int (m - k),
    F2 = int (1/m - 1/k),
    F3 = int (m_x^2/m^5 + 1/(4 m^3) - 1/(4 k^3)),

and the solitary wave ``mu`` is a critical point of
``Lambda = F3 + omega1 F1 + omega2 F2``. The combinations
``calF = F2 + F1/k^2`` and ``calG = F3 + 3 F1/(4 k^4)`` split the action as
``Lambda = calG - gamma calF`` with ``gamma = -omega2``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from ._numerics import d1, d2, integrate
from .errors import DomainError
from .wave_profile import WaveParameters, WaveProfile, validate_parameters

WHICH = ("F1", "F2", "F3", "calF", "calG", "Lambda")


def _check_positive(m):
    m = np.asarray(m, dtype=float)
    if not np.all(m > 0.0):
        raise DomainError(f"momentum must be positive, min m = {np.min(m):.3e}")
    return m


def spectral_derivative(f, dx, order=1):
    """Derivative of a periodic sample vector via the FFT."""
    f = np.asarray(f, dtype=float)
    K = 2.0 * np.pi * np.fft.rfftfreq(len(f), d=dx)
    return np.fft.irfft((1j * K) ** order * np.fft.rfft(f), n=len(f))


def conserved_integrals(m, k: float, dx: float, periodic: bool = False,
                        m_x=None, richardson: bool = False,
                        order: int = 2) -> tuple[float, float, float]:
    """F1, F2, F3 of samples ``m`` with spacing ``dx``.

    On a decaying grid the integrals use composite Simpson and ``m_x`` from
    centered differences of the given ``order`` unless supplied. With
    ``periodic=True`` the samples are one period of a periodic field; the
    derivative is spectral and the integrals are rectangle sums, which are
    spectrally accurate for periodic integrands.
    """
    m = _check_positive(m)
    if m_x is None:
        m_x = spectral_derivative(m, dx) if periodic else d1(m, dx, order)
    g1 = m - k
    g2 = (k - m) / (m * k)
    g3 = m_x**2 / m**5 + 0.25 / m**3 - 0.25 / k**3
    if periodic:
        return tuple(float(np.sum(g) * dx) for g in (g1, g2, g3))
    return tuple(integrate(g, dx, richardson) for g in (g1, g2, g3))


def action_values(F, params: WaveParameters) -> dict:
    """Lambda, calF and calG from a triple (F1, F2, F3)."""
    F1, F2, F3 = F
    k = params.k
    return {"Lambda": F3 + params.omega1 * F1 + params.omega2 * F2,
            "calF": F2 + F1 / k**2,
            "calG": F3 + 0.75 * F1 / k**4}


def variational_derivative(which: str, m, params: WaveParameters, dx: float,
                           m_x=None, m_xx=None, order: int = 2):
    """Pointwise first variation of one of the functionals at ``m``.

    ``m_x`` and ``m_xx`` default to centered differences of the given order;
    pass them explicitly to use exact derivatives.
    """
    if which not in WHICH:
        raise ValueError(f"unknown functional {which!r}; expected one of {WHICH}")
    m = _check_positive(m)
    k = params.k
    if which == "F1":
        return np.ones_like(m)
    if which == "F2":
        return -1.0 / m**2
    if which == "calF":
        return 1.0 / k**2 - 1.0 / m**2
    if m_x is None:
        m_x = d1(m, dx, order)
    if m_xx is None:
        m_xx = d2(m, dx, order)
    f3 = -2.0 * m_xx / m**5 + 5.0 * m_x**2 / m**6 - 0.75 / m**4
    if which == "F3":
        return f3
    if which == "calG":
        return 0.75 / k**4 + f3
    return f3 + params.omega1 - params.omega2 / m**2


def euler_lagrange_residual(profile: WaveProfile, analytic: bool = True) -> float:
    """Sup-norm of the first variation of the action at the profile.

    By default the exact derivatives of mu carried by the profile are used,
    so the residual measures the profile error itself. With
    ``analytic=False`` they are replaced by centered differences, whose
    truncation error then dominates.
    """
    if analytic:
        r = variational_derivative("Lambda", profile.mu, profile.params, profile.dx,
                                   m_x=profile.mu_xi, m_xx=profile.mu_xixi)
    else:
        r = variational_derivative("Lambda", profile.mu, profile.params, profile.dx)
    return float(np.max(np.abs(r)))


def q_quadrature(profile: WaveProfile) -> float:
    """Simpson quadrature of t + 1/t - 2 with t = sqrt(1 - (phi-k)/beta).

    The integrand is evaluated as ``pt^2 / ((1+t)^2 t)`` with
    ``pt = (phi-k)/beta``, which is free of cancellation in the tails.
    """
    p = profile.params
    pt = (profile.phi - p.k) / p.beta
    rad = 1.0 - pt
    if np.any(rad <= 0.0):
        raise DomainError("radicand 1 - (phi-k)/beta is not positive; corrupted profile")
    t = np.sqrt(rad)
    return integrate(pt * pt / ((1.0 + t) ** 2 * t), profile.dx)


def q_closed_form(c: float, k: float) -> float:
    validate_parameters(c, k)
    A = c - k * k
    B = c - 3.0 * k * k
    return 8.0 * math.log((math.sqrt(A) + math.sqrt(B)) / (math.sqrt(2.0) * k)) \
        - 8.0 * math.sqrt(B / A)


def dq_dk_closed_form(c: float, k: float) -> float:
    validate_parameters(c, k)
    A = c - k * k
    B = c - 3.0 * k * k
    return -8.0 * c / (k * A) * math.sqrt(B / A)


@dataclass(frozen=True)
class FunctionalReport:
    c: float
    k: float
    F1: float
    F2: float
    F3: float
    Lambda: float
    calF: float
    calG: float
    Q_quad: float
    Q_closed: float
    dQdk_closed: float
    el_residual_sup: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


SWEEP_HEADER = "c,k,Q_quad,Q_closed,dQdk,el_residual"


def functional_report(profile: WaveProfile) -> FunctionalReport:
    """Every functional of the solitary wave, with exact derivatives of mu."""
    p = profile.params
    F = conserved_integrals(profile.mu, p.k, profile.dx, m_x=profile.mu_xi)
    act = action_values(F, p)
    return FunctionalReport(p.c, p.k, *F, act["Lambda"], act["calF"], act["calG"],
                            q_quadrature(profile), q_closed_form(p.c, p.k),
                            dq_dk_closed_form(p.c, p.k),
                            euler_lagrange_residual(profile))


def sweep_row(report: FunctionalReport) -> str:
    """One line of the functional sweep CSV (see ``SWEEP_HEADER``)."""
    vals = (report.c, report.k, report.Q_quad, report.Q_closed,
            report.dQdk_closed, report.el_residual_sup)
    return ",".join(f"{v:.17g}" for v in vals)
