"""Hessian operator of the action, its spectrum, and related checks.

The Sturm-Liouville operator

    L f = -(mu^-5 f')' + V f,
    V = 5 mu'' mu^-6 - 15 mu'^2 mu^-7 + (3/2) mu^-5 - gamma mu^-3,

is discretized in conservative flux form on the interior of the profile
grid with homogeneous Dirichlet ends. The full second variation of the
action at the wave is ``2 L``; the factor matters only for the
inner-product quantities (:func:`vk_inner_product`,
:func:`hessian_identity_residual`) and not for eigenvalue signs.
"""
from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal, solve_banded

from ._numerics import cumulative, d1, d2
from .errors import (AmbiguityError, ConditioningWarning, DomainError, ParityError,
                     ResolutionWarning, SolverError)
from .functionals import conserved_integrals, dq_dk_closed_form, variational_derivative
from .wave_profile import WaveProfile, construct_profile, validate_parameters

# Ratio between the second variation of the action and the operator L.
SECOND_VARIATION_FACTOR = 2.0
# Warn when the smallest even eigenvalue is below ess_edge / SINGULARITY_WARN.
SINGULARITY_WARN = 200.0


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric tridiagonal operator on the interior points of a grid.

    ``diag`` and ``off`` act on the unknowns ``xi[1:-1]``; ``potential`` and
    ``p_half`` are kept on the full grid and its half-points.
    """

    diag: np.ndarray
    off: np.ndarray
    xi: np.ndarray
    dx: float
    potential: np.ndarray
    p_half: np.ndarray
    bc: str = "dirichlet"

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def norm(self) -> float:
        """Infinity norm (max absolute row sum)."""
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.off)
        r[1:] += np.abs(self.off)
        return float(r.max())


def hessian_potential(profile: WaveProfile):
    """Potential V on the full grid, from the exact derivatives of mu."""
    p = profile.params
    mu, mx, mxx = profile.mu, profile.mu_xi, profile.mu_xixi
    return (5.0 * mxx / mu**6 - 15.0 * mx**2 / mu**7
            + 1.5 / mu**5 - p.gamma / mu**3)


def _tridiagonal(p, V, dx):
    ph = 0.5 * (p[1:] + p[:-1])
    diag = (ph[:-1] + ph[1:]) / dx**2 + V[1:-1]
    off = -ph[1:-1] / dx**2
    return diag, off, ph


def assemble_hessian(profile: WaveProfile) -> DiscreteOperator:
    """Flux-form discretization of L with p = mu^-5 averaged to half-points."""
    mu = profile.mu
    if not np.all(mu > 0.0):
        raise DomainError("mu must be positive to assemble the Hessian")
    dx = profile.dx
    edge = profile.params.ess_edge
    if dx * np.sqrt(edge) > 0.5:
        warnings.warn(f"dx*sqrt(ess_edge) = {dx * np.sqrt(edge):.3g} > 0.5; grid too "
                      "coarse to resolve the operator", ResolutionWarning, stacklevel=2)
    V = hessian_potential(profile)
    diag, off, ph = _tridiagonal(mu**-5.0, V, dx)
    return DiscreteOperator(diag, off, np.array(profile.xi), dx, V, ph)


@dataclass(frozen=True)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


def _checked(op, w, v):
    if len(w) == 0:
        return Eigenpairs(w, v, 0.0)
    res = np.array([np.linalg.norm(op.matvec(v[:, j]) - w[j] * v[:, j])
                    for j in range(len(w))])
    worst = float(res.max())
    if worst >= 1e-10 * op.norm():
        raise SolverError(f"eigenpair residual {worst:.3e} exceeds "
                          f"1e-10*||A|| = {1e-10 * op.norm():.3e}")
    return Eigenpairs(w, v, worst)


def lowest_eigenpairs(op: DiscreteOperator, n: int) -> Eigenpairs:
    """The ``n`` smallest eigenvalues and orthonormal eigenvectors.

    Uses bisection with inverse iteration on the tridiagonal matrix. Raises
    :class:`SolverError` if any residual ``||Av - lam v||`` is not below
    ``1e-10 ||A||``.
    """
    n = int(n)
    if not 1 <= n <= op.size:
        raise ValueError(f"n must be in [1, {op.size}], got {n}")
    w, v = eigh_tridiagonal(op.diag, op.off, select="i", select_range=(0, n - 1))
    return _checked(op, w, v)


def eigenpairs_below(op: DiscreteOperator, upper: float) -> Eigenpairs:
    """All eigenpairs with eigenvalue strictly below ``upper``."""
    lo = float(np.min(op.diag) - 2.0 * np.max(np.abs(op.off), initial=0.0)) - 1.0
    hi = np.nextafter(upper, -np.inf)
    if hi <= lo:
        return Eigenpairs(np.empty(0), np.empty((op.size, 0)), 0.0)
    w, v = eigh_tridiagonal(op.diag, op.off, select="v", select_range=(lo, hi))
    return _checked(op, w, v)


def _correlation(v, w) -> float:
    nv, nw = np.linalg.norm(v), np.linalg.norm(w)
    if nv == 0.0 or nw == 0.0:
        return 0.0
    return float(np.clip(np.dot(v, w) / (nv * nw), -1.0, 1.0))


@dataclass(frozen=True)
class VKResult:
    """Constrained inner product computed two ways.

    ``vk_value`` comes from solving the second-variation system on even
    functions; ``vk_crosscheck`` from a finite difference of Q over the
    family; ``vk_closed`` from the closed form of dQ/dk. ``operator_value``
    is the same inner product taken with L itself (twice ``vk_value``).
    ``condition_estimate`` is the 2-norm condition number of the folded
    matrix; ``singularity_ratio`` is ess_edge over its smallest eigenvalue
    magnitude, a resolution-independent indicator of near-singularity.
    """

    vk_value: float
    vk_crosscheck: float
    vk_closed: float
    operator_value: float
    condition_estimate: float
    singularity_ratio: float
    dk: float


def _folded_system(profile: WaveProfile):
    """L restricted to even functions on [0, L], Dirichlet at xi = L.

    Row 0 uses the reflection f(-dx) = f(dx). The matrix is returned in
    banded storage together with a symmetrizing similarity (weights).
    """
    n = profile.n_half
    dx = profile.dx
    V = hessian_potential(profile)[n:]
    p = profile.mu**-5.0
    ph = 0.5 * (p[1:] + p[:-1])[n:]   # ph[j] sits at xi = (j + 1/2) dx
    N = n                             # unknowns j = 0..n-1
    dg = np.empty(N)
    up = np.zeros(N)
    lo = np.zeros(N)
    dg[0] = 2.0 * ph[0] / dx**2 + V[0]
    up[0] = -2.0 * ph[0] / dx**2
    dg[1:] = (ph[:N - 1] + ph[1:N]) / dx**2 + V[1:N]
    up[1:N - 1] = -ph[1:N - 1] / dx**2
    lo[1:N] = -ph[0:N - 1] / dx**2
    ab = np.zeros((3, N))
    ab[0, 1:] = up[:-1]
    ab[1] = dg
    ab[2, :-1] = lo[1:]
    return ab, dg, up, lo


def _folded_condition(dg, up, lo) -> tuple[float, float]:
    # D^(1/2) A D^(-1/2) with D = diag(1/2, 1, 1, ...) is symmetric
    sym_off = np.sqrt(up[:-1] * lo[1:])
    lam = eigh_tridiagonal(dg, sym_off, eigvals_only=True, select="i",
                           select_range=(0, min(3, len(dg) - 1)))
    top = eigh_tridiagonal(dg, sym_off, eigvals_only=True, select="i",
                           select_range=(len(dg) - 1, len(dg) - 1))
    small = float(np.min(np.abs(lam)))
    return (np.inf if small == 0.0 else abs(top[0]) / small), small


def vk_inner_product(profile: WaveProfile, dk: float = 1e-4) -> VKResult:
    """Inner product of b = dcalF/dm with the inverse second variation.

    The kernel of L is odd while b is even, so the solve is carried out on
    the even subspace by folding the grid to [0, L].
    """
    p = profile.params
    n = profile.n_half
    mu = profile.mu
    b = variational_derivative("calF", mu, p, profile.dx)
    scale = np.max(np.abs(b))
    if np.max(np.abs(b - b[::-1])) > 1e-12 * max(scale, 1e-300):
        raise ParityError("right-hand side is not even; cannot fold the solve")
    ab, dg, up, lo = _folded_system(profile)
    cond, small = _folded_condition(dg, up, lo)
    ratio = np.inf if small == 0.0 else p.ess_edge / small
    if ratio > SINGULARITY_WARN:
        warnings.warn(f"folded Hessian solve is close to singular: smallest even "
                      f"eigenvalue {small:.3e}, ess_edge/|lambda| = {ratio:.3g}, "
                      f"condition estimate {cond:.3e}", ConditioningWarning, stacklevel=2)
    bh = b[n:-1]
    y = solve_banded((1, 1), SECOND_VARIATION_FACTOR * ab, bh)
    if not np.all(np.isfinite(y)):
        raise SolverError("non-finite solution in folded Hessian solve")
    dx = profile.dx
    vk = float(dx * (y[0] * bh[0] + 2.0 * np.dot(y[1:], bh[1:])))

    prefactor = p.A**2 / (4.0 * p.c)
    Qp = _k_calF(p.c, p.k + dk, profile.dx, profile.L)
    Qm = _k_calF(p.c, p.k - dk, profile.dx, profile.L)
    cross = prefactor * (Qp - Qm) / (2.0 * dk)
    closed = prefactor * dq_dk_closed_form(p.c, p.k)
    return VKResult(vk, float(cross), float(closed), SECOND_VARIATION_FACTOR * vk,
                    float(cond), float(ratio), dk)


def _k_calF(c, k, dx, L):
    prof = construct_profile(validate_parameters(c, k), dx=dx, L=L)
    F1, F2, _ = conserved_integrals(prof.mu, k, dx, m_x=prof.mu_xi)
    return k * F2 + F1 / k


def apply_hessian(profile: WaveProfile, f, order: int = 4):
    """L f on the full grid using the expanded form -p f'' - p' f' + V f.

    ``p' = -5 mu^-6 mu_xi`` is exact; f' and f'' use centered stencils of
    the given order. Used where the 2nd-order flux form is too coarse.
    """
    mu = profile.mu
    p = mu**-5.0
    dp = -5.0 * mu**-6.0 * profile.mu_xi
    f = np.asarray(f, dtype=float)
    dx = profile.dx
    return -p * d2(f, dx, order) - dp * d1(f, dx, order) + hessian_potential(profile) * f


@dataclass(frozen=True)
class IdentityReport:
    """Residual of 2 L (k mu_k - mu) = (4c/(c-k^2)^2) dcalF/dm."""

    residual_sup: float
    rhs_sup: float
    dk: float
    order: int
    k_order: int


def family_derivative(profile: WaveProfile, dk: float = 1e-4, k_order: int = 2):
    """Centered difference of mu in k at fixed c on the profile's grid.

    ``k_order=2`` uses the points k +- dk, ``k_order=4`` adds k +- 2 dk.
    """
    p = profile.params

    def mu_at(kk):
        prof = construct_profile(validate_parameters(p.c, kk), dx=profile.dx, L=profile.L)
        return prof.mu

    if k_order == 2:
        return (mu_at(p.k + dk) - mu_at(p.k - dk)) / (2.0 * dk)
    if k_order == 4:
        return (8.0 * (mu_at(p.k + dk) - mu_at(p.k - dk))
                - (mu_at(p.k + 2 * dk) - mu_at(p.k - 2 * dk))) / (12.0 * dk)
    raise ValueError(f"unsupported k_order {k_order}")


def hessian_identity_residual(profile: WaveProfile, dk: float = 1e-4,
                              order: int = 4, k_order: int = 2) -> IdentityReport:
    """Check the second variation on k mu_k - mu against dcalF/dm.

    The operator is applied with stencils of the given ``order`` in xi and
    mu_k comes from a centered difference of order ``k_order``. With the
    defaults the O(dk^2) error of mu_k dominates. The sup-norm is taken over
    interior points, two points away from the truncation ends.
    """
    p = profile.params
    y = p.k * family_derivative(profile, dk, k_order) - profile.mu
    lhs = SECOND_VARIATION_FACTOR * apply_hessian(profile, y, order)
    rhs = 4.0 * p.c / p.A**2 * variational_derivative("calF", profile.mu, p, profile.dx)
    r = (lhs - rhs)[2:-2]
    return IdentityReport(float(np.max(np.abs(r))), float(np.max(np.abs(rhs))), dk,
                          order, k_order)


@dataclass(frozen=True)
class SpectralReport:
    """Eigenvalues below the essential edge and derived diagnostics."""

    c: float
    k: float
    dx: float
    L: float
    n_grid: int
    eigenvalues: list
    tol_zero: float
    negative_count: int
    zero_count: int
    positive_count: int
    kernel_eigenvalue: float
    kernel_correlation: float
    gap: float | None
    ess_edge: float
    end_potential: float
    vk_value: float | None = None
    vk_crosscheck: float | None = None
    vk_closed: float | None = None
    condition_estimate: float | None = None
    singularity_ratio: float | None = None
    findings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def spectral_report(profile: WaveProfile, with_vk: bool = True,
                    dk: float = 1e-4) -> SpectralReport:
    """Count negative, near-zero and positive eigenvalues below the edge.

    ``tol_zero = 10 dx^2 ess_edge``. Count violations are recorded in
    ``findings`` rather than raised.
    """
    p = profile.params
    op = assemble_hessian(profile)
    pairs = eigenpairs_below(op, p.ess_edge)
    w = pairs.values
    dx = profile.dx
    tol0 = 10.0 * dx * dx * p.ess_edge
    neg = int(np.sum(w < -tol0))
    zero_mask = np.abs(w) <= tol0
    nzero = int(np.sum(zero_mask))
    pos = int(np.sum(w > tol0))
    mux = profile.mu_xi[1:-1]
    if len(w):
        j = int(np.argmin(np.abs(w)))
        lam0 = float(w[j])
        corr = _correlation(pairs.vectors[:, j], mux)
    else:
        lam0, corr = float("nan"), 0.0
    above = w[w > tol0]
    gap = float(above[0]) if len(above) else None

    findings = []
    if neg != 1:
        findings.append(f"expected 1 eigenvalue below -tol_zero, found {neg}")
    if nzero != 1:
        findings.append(f"expected 1 eigenvalue in [-tol_zero, tol_zero], found {nzero}")
    elif abs(corr) <= 0.999:
        findings.append(f"near-zero eigenvector correlation with mu_xi is {corr:.6f}")

    vk = None
    if with_vk:
        vk = vk_inner_product(profile, dk)
    return SpectralReport(
        c=p.c, k=p.k, dx=dx, L=profile.L, n_grid=len(profile.xi),
        eigenvalues=[float(x) for x in w], tol_zero=tol0,
        negative_count=neg, zero_count=nzero, positive_count=pos,
        kernel_eigenvalue=lam0, kernel_correlation=corr, gap=gap,
        ess_edge=p.ess_edge, end_potential=float(op.potential[0]),
        vk_value=vk.vk_value if vk else None,
        vk_crosscheck=vk.vk_crosscheck if vk else None,
        vk_closed=vk.vk_closed if vk else None,
        condition_estimate=vk.condition_estimate if vk else None,
        singularity_ratio=vk.singularity_ratio if vk else None,
        findings=findings)


@dataclass(frozen=True)
class LiouvilleReport:
    eigenvalues_hessian: np.ndarray
    eigenvalues_transformed: np.ndarray
    max_abs_discrepancy: float
    max_rel_discrepancy: float
    tolerance: float
    dz: float
    q_end: float


def liouville_potential(profile: WaveProfile):
    """Potential of the Schrodinger-form operator, on the xi grid.

    The correction term is the one produced by the change of variables
    dz = (c + phi_xi^2 - phi^2)^(-5/2) dxi together with the rescaling of
    the eigenfunction; every term of it carries a decaying factor.
    """
    p = profile.params
    a = p.a
    mu, mx, mxx = profile.mu, profile.mu_xi, profile.mu_xixi
    px, pxx = profile.phi_xi, profile.phi_xixi
    q = (5.0 * mxx / mu**6 - 15.0 * mx**2 / mu**7
         - 2.5 / a * pxx / mu**3 + 8.75 / a**2 * px**2 / mu)
    return 1.5 / mu**5 - p.gamma / mu**3 + q, q


def liouville_check(profile: WaveProfile, n: int = 2) -> LiouvilleReport:
    """Compare the lowest ``n`` eigenvalues of L and of its Schrodinger form.

    The new variable z is the cumulative Simpson integral of
    ``(c + phi_xi^2 - phi^2)^(-5/2)`` from 0, extended oddly. The potential
    is cubic-spline resampled onto a uniform z grid with as many points as
    the xi grid, where the operator is ``-a^-5 d^2/dz^2 + W``.
    """
    p = profile.params
    nh = profile.n_half
    dx = profile.dx
    den = p.c + profile.phi_xi**2 - profile.phi**2
    zh = cumulative(den[nh:] ** -2.5, dx)
    z = np.concatenate([-zh[:0:-1], zh])
    if not np.all(np.diff(z) > 0.0):
        raise DomainError("z map is not strictly increasing (integrand too sharply "
                          "peaked for Simpson weights); refine dx")
    W, q = liouville_potential(profile)
    npts = len(z)
    zg = np.linspace(z[0], z[-1], npts)
    if zg[0] < z[0] or zg[-1] > z[-1]:
        raise DomainError("uniform z grid falls outside the computed z range")
    dz = float(zg[1] - zg[0])
    Wz = CubicSpline(z, W)(zg)
    lap = p.a**-5 / dz**2
    tr = DiscreteOperator(2.0 * lap + Wz[1:-1], -lap * np.ones(npts - 3), zg, dz,
                          Wz, np.full(npts - 1, p.a**-5))
    e_tr = lowest_eigenpairs(tr, n).values
    e_h = lowest_eigenpairs(assemble_hessian(profile), n).values
    diff = np.abs(e_tr - e_h)
    rel = diff / np.maximum(np.abs(e_h), 1e-300)
    V = hessian_potential(profile)
    tol = 5.0 * max(dx * dx, dz * dz) * float(np.max(np.abs(V)))
    return LiouvilleReport(e_h, e_tr, float(diff.max()), float(rel.max()), tol, dz,
                           float(max(abs(q[0]), abs(q[-1]))))


@dataclass(frozen=True)
class CasimirReport:
    """Sup-norms of the Hamiltonian operator applied to dF2/dm and dF3/dm.

    ``r2``/``r3`` use the integration constants fitted by least squares;
    ``raw2``/``raw3`` use antiderivatives that vanish at the right end.
    """

    r2: float
    r3: float
    raw2: float
    raw3: float
    constants2: tuple
    constants3: tuple
    means2: tuple
    means3: tuple


def _antiderivative(g, dx, stage, tol):
    G = cumulative(g, dx)
    total = G[-1]
    scale = float(np.sum(np.abs(g)) * dx)
    if abs(total) > tol * scale + 1e-300:
        raise AmbiguityError(
            f"{stage} inverse derivative: integrand mean {total:.3e} is not zero "
            f"(relative {abs(total) / max(scale, 1e-300):.3e}, tolerance {tol:.1e})")
    return G - total, float(total)


def helmholtz_dirichlet(g, dx, order=4):
    """Solve (d^2 - 1) u = g with u = 0 at both ends.

    ``order=4`` uses the Numerov scheme, ``order=2`` the standard
    three-point stencil.
    """
    g = np.asarray(g, dtype=float)
    n = len(g)
    ab = np.zeros((3, n))
    rhs = np.empty(n)
    if order == 4:
        ab[0, 1:] = 1.0 / dx**2 - 1.0 / 12.0
        ab[2, :-1] = 1.0 / dx**2 - 1.0 / 12.0
        ab[1] = -2.0 / dx**2 - 10.0 / 12.0
        rhs[1:-1] = (g[2:] + 10.0 * g[1:-1] + g[:-2]) / 12.0
    elif order == 2:
        ab[0, 1:] = 1.0 / dx**2
        ab[2, :-1] = 1.0 / dx**2
        ab[1] = -2.0 / dx**2 - 1.0
        rhs[1:-1] = g[1:-1]
    else:
        raise ValueError(f"unsupported order {order}")
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    rhs[0] = rhs[-1] = 0.0
    return solve_banded((1, 1), ab, rhs)


def apply_hamiltonian_operator(m, f, dx, order=4, constants=(0.0, 0.0),
                               mean_tol=1e-6):
    """Apply d m d^-1 m (d^2-1)^-1 d m d^-1 m d to ``f``.

    Each inverse derivative is the cumulative integral normalized to vanish
    at the right end, plus the corresponding entry of ``constants``. Returns
    the result and the two integrand means that were checked against zero.
    """
    m = np.asarray(m, dtype=float)
    g = m * d1(f, dx, order)
    g, mean1 = _antiderivative(g, dx, "first", mean_tol)
    g = g + constants[0]
    out, mean2 = _outer_chain(m, g, dx, order, constants[1], mean_tol)
    return out, (mean1, mean2)


def _outer_chain(m, g3, dx, order, c2, mean_tol):
    g = d1(m * g3, dx, order)
    g = helmholtz_dirichlet(g, dx, order)
    g, mean2 = _antiderivative(m * g, dx, "second", mean_tol)
    return d1(m * (g + c2), dx, order), mean2


def casimir_residual(m, k: float, dx: float, order: int = 4,
                     mean_tol: float = 1e-6) -> CasimirReport:
    """Casimir check of F2 and F3 for the momentum samples ``m``.

    The chain is linear in the two integration constants, so the result for
    arbitrary constants is ``J0 f + C1 P + C2 m_x`` where ``J0`` uses the
    right-end normalization and ``P`` is the outer chain applied to the
    constant 1. The constants are fitted by least squares and the residual
    of the best fit is reported.

    Raises
    ------
    AmbiguityError
        If an integrand handed to an inverse derivative does not have zero
        mean to relative tolerance ``mean_tol``.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(m > 0.0):
        raise DomainError("momentum must be positive")
    if max(abs(m[0] - k), abs(m[-1] - k)) > 1e-6 * k:
        raise DomainError("m - k does not decay at the grid ends")
    P, _ = _outer_chain(m, np.ones_like(m), dx, order, 0.0, mean_tol)
    mx = d1(m, dx, order)
    basis = np.column_stack([P, mx])
    out = []
    f2 = -1.0 / m**2
    f3 = (-2.0 * d2(m, dx, order) / m**5 + 5.0 * d1(m, dx, order) ** 2 / m**6
          - 0.75 / m**4)
    for f in (f2, f3):
        J0, means = apply_hamiltonian_operator(m, f, dx, order, mean_tol=mean_tol)
        if np.max(np.abs(basis)) > 0.0:
            coef = np.linalg.lstsq(basis, -J0, rcond=None)[0]
        else:
            coef = np.zeros(2)
        out.append((float(np.max(np.abs(J0 + basis @ coef))),
                    float(np.max(np.abs(J0))), tuple(float(x) for x in coef), means))
    (r2, raw2, c2, m2), (r3, raw3, c3, m3) = out
    return CasimirReport(r2, r3, raw2, raw3, c2, c3, m2, m3)
