"""Parameters and construction of smooth solitary-wave profiles.

A solitary wave of speed ``c`` on background ``k`` is the homoclinic orbit
of the travelling-wave ODE

    phi'' = phi - a / (c + phi'^2 - phi^2),   a = k (c - k^2),

leaving the crest ``(phi1, 0)`` and approaching the saddle ``(k, 0)``. The
momentum profile follows pointwise from ``phi`` as
``mu = k sqrt((c - k^2) / (c + 3k^2 - 4k phi))``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._numerics import d2
from .errors import DomainError, IntegrationError, ParameterError, ResolutionWarning

# Distance from the crest at which the integrator leaves the full phase-plane
# system for the reduced flow along the level curve. Fixed in xi so that the
# construction is a smooth function of (c, k) and commutes with scaling.
SWITCH_XI = 1.0
# Minimum number of grid steps across the crest of mu before warning.
CREST_POINTS_WARN = 5.0


@dataclass(frozen=True)
class WaveParameters:
    """Wave speed, background level and every constant derived from them.

    All derived values are computed once, from ``c`` and ``k`` only, in the
    order listed in :func:`validate_parameters`.
    """

    c: float
    k: float
    a: float
    E: float
    phi1: float
    beta: float
    h: float
    phi0_resc: float
    omega1: float
    omega2: float
    M_ck: float
    ess_edge: float
    kappa: float

    @property
    def A(self) -> float:
        """The recurring combination c - k^2."""
        return self.c - self.k * self.k

    @property
    def gamma(self) -> float:
        """Coefficient of the F2 term in the action, equal to -omega2."""
        return -self.omega2

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def admissible_window(c: float) -> tuple[float, float]:
    """Open interval of background levels admitting smooth solitary waves."""
    return math.sqrt(c) / 3.0, math.sqrt(3.0 * c) / 3.0


def validate_parameters(c: float, k: float) -> WaveParameters:
    """Check admissibility of ``(c, k)`` and compute the derived constants.

    Raises
    ------
    ParameterError
        If ``c <= 0`` or ``k`` lies outside the open window
        ``(sqrt(c)/3, sqrt(3c)/3)``, i.e. unless ``9k^2 > c`` and ``3k^2 < c``.
    """
    c = float(c)
    k = float(k)
    if not (math.isfinite(c) and math.isfinite(k)):
        raise ParameterError(f"c and k must be finite, got c={c!r}, k={k!r}")
    if c <= 0.0:
        raise ParameterError(f"wave speed c must be positive, got c={c!r}")
    lo, hi = admissible_window(c)
    window = f"admissible window (sqrt(c)/3, sqrt(3c)/3) = ({lo:.6g}, {hi:.6g})"
    if k <= 0.0 or not 9.0 * k * k > c:
        raise ParameterError(
            f"k={k!r} violates the lower bound k > sqrt(c)/3 = {lo:.6g}; {window}")
    if not 3.0 * k * k < c:
        raise ParameterError(
            f"k={k!r} violates the upper bound k < sqrt(3c)/3 = {hi:.6g}; {window}")

    # fixed evaluation order
    kk = k * k
    A = c - kk
    a = k * A
    E = kk * (2.0 * c - 3.0 * kk)
    sqrt2A = math.sqrt(2.0 * A)
    phi1 = sqrt2A - k
    beta = A / (4.0 * k)
    h = 8.0 * kk / A
    phi0_resc = 4.0 * k * (sqrt2A - 2.0 * k) / A
    omega1 = (c - 9.0 * kk) / (4.0 * kk * kk * A)
    omega2 = -(c + 3.0 * kk) / (2.0 * kk * A)
    sqrtA = math.sqrt(A)
    M_ck = k * sqrtA / (2.0 * math.sqrt(2.0) * k - sqrtA)
    ess_edge = (c - 3.0 * kk) / (kk * kk * k * A)
    kappa = math.sqrt((c - 3.0 * kk) / A)
    return WaveParameters(c=c, k=k, a=a, E=E, phi1=phi1, beta=beta, h=h,
                          phi0_resc=phi0_resc, omega1=omega1, omega2=omega2,
                          M_ck=M_ck, ess_edge=ess_edge, kappa=kappa)


def level_curve_psi2(phi, params: WaveParameters):
    """phi_xi^2 on the homoclinic level curve as a function of phi.

    Evaluates ``phi^2 - c + sqrt((c-k^2)(c+3k^2-4k phi))`` in the algebraically
    equivalent form ``s^2 (1 - h/(1+r)^2)`` with ``s = phi - k`` and
    ``r = sqrt((c+3k^2-4k phi)/(c-k^2))``, which has no cancellation near the
    saddle. Accepts scalars or arrays.
    """
    k, A = params.k, params.A
    phi = np.asarray(phi, dtype=float)
    s = phi - k
    rad = 1.0 - 4.0 * k * s / A
    if np.any(rad < 0.0):
        raise DomainError("negative radicand c + 3k^2 - 4k phi in level curve")
    r = np.sqrt(rad)
    out = s * s * (1.0 - params.h / (1.0 + r) ** 2)
    return float(out) if out.ndim == 0 else out


def default_grid(params: WaveParameters) -> tuple[float, float]:
    """Default (dx, L): dx = 0.01 min(1, 1/kappa), L = max(30, 30/kappa)."""
    kap = params.kappa
    return 0.01 * min(1.0, 1.0 / kap), max(30.0, 30.0 / kap)


def crest_width(params: WaveParameters) -> float:
    """Curvature length sqrt(M / |mu_xixi(0)|) of the momentum crest.

    Shrinks to zero as k approaches sqrt(c)/3, where the wave steepens.
    """
    M = params.M_ck
    mu_xixi0 = 2.0 * (params.phi1 - M) * M**3 / params.a
    return math.sqrt(M / abs(mu_xixi0))


def _readonly(x):
    x = np.ascontiguousarray(x, dtype=float)
    x.flags.writeable = False
    return x


@dataclass(frozen=True)
class WaveProfile:
    """Solitary-wave samples on the symmetric grid ``xi = dx * (-n..n)``.

    ``phi_xixi`` and ``mu_xixi`` come from the ODE and the analytic chain
    rule, not from differencing. Arrays are read-only.
    """

    params: WaveParameters
    xi: np.ndarray
    phi: np.ndarray
    phi_xi: np.ndarray
    phi_xixi: np.ndarray
    mu: np.ndarray
    mu_xi: np.ndarray
    mu_xixi: np.ndarray
    tail_error: float
    dx: float
    L: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("xi", "phi", "phi_xi", "phi_xixi", "mu", "mu_xi", "mu_xixi"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_half(self) -> int:
        """Index of xi = 0."""
        return (len(self.xi) - 1) // 2

    @classmethod
    def constant(cls, params: WaveParameters, dx: float, L: float) -> "WaveProfile":
        """The equilibrium phi = mu = k on the same kind of grid."""
        n = int(round(L / dx))
        xi = dx * np.arange(-n, n + 1, dtype=float)
        z = np.zeros_like(xi)
        kk = np.full_like(xi, params.k)
        return cls(params, xi, kk, z, z, kk.copy(), z, z, 0.0, dx, n * dx,
                   {"method": "constant"})

    def with_fields(self, **changes) -> "WaveProfile":
        """Copy with some sampled fields replaced (used to build test inputs)."""
        return dataclasses.replace(self, **changes)

    def to_csv(self, path) -> None:
        """Write ``xi,phi,phi_xi,mu,mu_xi`` with 17 significant digits."""
        data = np.column_stack([self.xi, self.phi, self.phi_xi, self.mu, self.mu_xi])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="xi,phi,phi_xi,mu,mu_xi", comments="")


def _integrate_half(params: WaveParameters, dx: float, n: int):
    """RK4 from the crest to xi = n dx. Returns phi, phi_xi on [0, n dx]."""
    c, k, a, A, h = params.c, params.k, params.a, params.A, params.h
    floor = 0.5 * (c - params.phi1**2)
    ns = min(n, int(round(SWITCH_XI / dx)))
    phi = np.empty(n + 1)
    psi = np.empty(n + 1)
    p, q = params.phi1, 0.0
    phi[0], psi[0] = p, q

    def f2(p, q):
        den = c + q * q - p * p
        if not den > floor:
            raise IntegrationError(
                f"denominator c + phi_xi^2 - phi^2 = {den:.3e} fell below floor "
                f"{floor:.3e}; step dx={dx} too large or parameters invalid")
        return q, p - a / den

    # The saddle is unstable for the forward flow of the full system, so
    # roundoff grows like exp(kappa xi). After the crest region we follow the
    # reduced stable flow phi' = -sqrt(psi^2(phi)) on the exact level curve.
    def f1(p):
        s = p - k
        rad = 1.0 - 4.0 * k * s / A
        if rad < 0.0:
            raise IntegrationError("left the level curve (negative radicand)")
        w = s * s * (1.0 - h / (1.0 + math.sqrt(rad)) ** 2)
        return -math.sqrt(w) if w > 0.0 else 0.0

    hdx = 0.5 * dx
    sdx = dx / 6.0
    for i in range(n):
        if i < ns:
            a1, b1 = f2(p, q)
            a2, b2 = f2(p + hdx * a1, q + hdx * b1)
            a3, b3 = f2(p + hdx * a2, q + hdx * b2)
            a4, b4 = f2(p + dx * a3, q + dx * b3)
            p += sdx * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            q += sdx * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        else:
            a1 = f1(p)
            a2 = f1(p + hdx * a1)
            a3 = f1(p + hdx * a2)
            a4 = f1(p + dx * a3)
            p += sdx * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            q = f1(p)
        phi[i + 1] = p
        psi[i + 1] = q
    if not np.all(np.isfinite(phi)):
        raise IntegrationError("non-finite values in profile integration")
    return phi, psi, ns


def _assemble(params, dx, phi_h, psi_h, meta):
    c, k, a, A = params.c, params.k, params.a, params.A
    n = len(phi_h) - 1
    phi = np.concatenate([phi_h[:0:-1], phi_h])
    phi_xi = np.concatenate([-psi_h[:0:-1], psi_h])
    xi = dx * np.arange(-n, n + 1, dtype=float)
    s = phi - k
    rad = 1.0 - 4.0 * k * s / A
    if np.any(rad <= 0.0):
        raise IntegrationError("profile left the admissible range of phi")
    mu = k / np.sqrt(rad)
    phi_xixi = phi - mu
    mu_xi = 2.0 * phi_xi * mu**3 / a
    mu_xixi = 2.0 * phi_xixi * mu**3 / a + 12.0 * phi_xi**2 * mu**5 / a**2
    tail = float(abs(phi_h[-1] - k))
    return WaveProfile(params, xi, phi, phi_xi, phi_xixi, mu, mu_xi, mu_xixi,
                       tail, dx, n * dx, meta)


def construct_profile(params: WaveParameters, dx: float | None = None,
                      L: float | None = None, tail_tol: float | None = None,
                      max_L: float | None = None) -> WaveProfile:
    """Integrate the solitary wave from its crest and mirror it to [-L, L].

    Parameters
    ----------
    params : WaveParameters
    dx : float, optional
        Grid spacing. Default ``0.01 min(1, 1/kappa)``.
    L : float, optional
        Half-length. Default ``max(30, 30/kappa)``. Rounded to a whole
        number of steps.
    tail_tol : float, optional
        If given, ``L`` is grown geometrically until ``|phi(L) - k|`` drops
        below this value, up to ``max_L``.
    max_L : float, optional
        Cap on the half-length, default ``100 max(30, 30/kappa)``.

    Raises
    ------
    IntegrationError
        If the ODE denominator leaves its positive range, or the tail
        tolerance cannot be met within ``max_L``.
    """
    dx0, L0 = default_grid(params)
    dx = dx0 if dx is None else float(dx)
    if not dx > 0.0:
        raise DomainError(f"dx must be positive, got {dx!r}")
    if max_L is None:
        max_L = 100.0 * L0
    if L is None:
        if tail_tol is None:
            L = L0
        else:
            # first guess from the linear decay rate, then grow
            s1 = params.phi1 - params.k
            L = max(SWITCH_XI, math.log(max(s1 / tail_tol, 1.0)) / params.kappa)
    L = float(L)
    if not L > 0.0:
        raise DomainError(f"L must be positive, got {L!r}")
    width = crest_width(params)
    if width < CREST_POINTS_WARN * dx:
        warnings.warn(f"crest of mu has curvature length {width:.3g}, only "
                      f"{width / dx:.2g} steps of dx={dx:g}; refine dx",
                      ResolutionWarning, stacklevel=2)
    while True:
        n = max(int(round(L / dx)), 2)
        phi_h, psi_h, ns = _integrate_half(params, dx, n)
        meta = {"method": "rk4-crest", "switch_xi": ns * dx, "dx": dx, "L": n * dx}
        prof = _assemble(params, dx, phi_h, psi_h, meta)
        if tail_tol is None or prof.tail_error <= tail_tol:
            return prof
        if L >= max_L:
            raise IntegrationError(
                f"tail error {prof.tail_error:.3e} above tolerance {tail_tol:.3e} "
                f"at maximum half-length L={L:.6g}")
        L = min(1.5 * L, max_L)


@dataclass(frozen=True)
class ResidualReport:
    """Sup-norm residuals of a sampled profile."""

    ode: float
    level_set: float
    mu_relation: float


def profile_residuals(profile: WaveProfile) -> ResidualReport:
    """ODE, level-set and momentum residuals, using centered phi_xixi."""
    p = profile.params
    phi, px, mu = profile.phi, profile.phi_xi, profile.mu
    pxx = d2(phi, profile.dx)
    ode = (phi - pxx) * (px**2 - phi**2 + p.c) - p.a
    w = phi**2 - px**2
    level = w * w - 2.0 * p.c * w + 4.0 * p.a * phi - p.E
    rel = mu - (phi - pxx)
    return ResidualReport(float(np.max(np.abs(ode))), float(np.max(np.abs(level))),
                          float(np.max(np.abs(rel))))


@dataclass(frozen=True)
class ScalingReport:
    lam: float
    sup_diff: float
    crest_diff: float


def scaling_covariance_check(params: WaveParameters, lam: float,
                             dx: float | None = None, L: float | None = None
                             ) -> ScalingReport:
    """Compare the profile at (lam^2 c, lam k) with lam times the one at (c, k).

    Both profiles share one xi grid. Returns the sup of the difference and
    the difference of the closed-form crest values.
    """
    lam = float(lam)
    if not lam > 0.0:
        raise ParameterError(f"scaling factor must be positive, got {lam!r}")
    scaled = validate_parameters(lam * lam * params.c, lam * params.k)
    dx0, L0 = default_grid(params)
    dx = dx0 if dx is None else dx
    L = L0 if L is None else L
    base = construct_profile(params, dx=dx, L=L)
    other = construct_profile(scaled, dx=dx, L=L)
    diff = float(np.max(np.abs(other.phi - lam * base.phi)))
    return ScalingReport(lam, diff, abs(scaled.phi1 - lam * params.phi1))
