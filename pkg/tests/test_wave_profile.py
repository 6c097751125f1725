import io
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mchwave.errors import DomainError, IntegrationError, ParameterError, ResolutionWarning
from mchwave.wave_profile import (WaveProfile, construct_profile, crest_width,
                                  level_curve_psi2, profile_residuals,
                                  scaling_covariance_check, validate_parameters)

# 30-digit evaluations at (c, k) = (1, 0.4), rounded to double
FROZEN = {
    "a": 0.336, "E": 0.2432, "phi1": 0.89614813968157205, "beta": 0.525,
    "h": 1.5238095238095238, "phi0_resc": 0.94504407558394675,
    "omega1": -5.115327380952381, "omega2": -5.505952380952381,
    "M_ck": 1.7062895561320524, "ess_edge": 60.453869047619048,
    "kappa": 0.78679579246944315,
}


@st.composite
def admissible(draw):
    c = draw(st.floats(0.05, 20.0))
    lo, hi = math.sqrt(c) / 3, math.sqrt(3 * c) / 3
    t = draw(st.floats(1e-3, 1 - 1e-3))
    return c, lo + t * (hi - lo)


def xi_of_phi(phi, p):
    """Closed-form position of a level phi on the right half of the wave."""
    w = 1 + np.sqrt(1 - (phi - p.k) / p.beta)
    h = p.h
    r = np.sqrt(4 - h)
    return (-2 * np.arccosh(w / np.sqrt(h))
            + 2 / r * (np.log((2 * w - h + r * np.sqrt(np.maximum(w * w - h, 0))) / (2 - w))
                       - np.log(np.sqrt(h))))


class TestParameters:
    def test_frozen_constants(self, params):
        for name, val in FROZEN.items():
            assert getattr(params, name) == pytest.approx(val, rel=1e-14, abs=1e-15), name

    def test_crest_value_matches_reported_digits(self, params):
        assert params.phi1 == pytest.approx(0.896148140, abs=5e-10)

    @pytest.mark.parametrize("k", [1 / 3, 0.3, 0.0, -0.4])
    def test_rejects_below_window(self, k):
        with pytest.raises(ParameterError, match="lower bound"):
            validate_parameters(1.0, k)

    @pytest.mark.parametrize("k", [0.6, 1.0])
    def test_rejects_above_window(self, k):
        with pytest.raises(ParameterError, match=r"upper bound.*0\.57735"):
            validate_parameters(1.0, k)

    @pytest.mark.parametrize("c", [0.0, -1.0, float("nan")])
    def test_rejects_bad_speed(self, c):
        with pytest.raises(ParameterError):
            validate_parameters(c, 0.4)

    @given(st.floats(0.01, 10.0), st.floats(0.0, 3.0))
    def test_window_is_sharp(self, c, k):
        accepted = True
        try:
            validate_parameters(c, k)
        except ParameterError:
            accepted = False
        assert accepted == (k > 0 and 9 * k * k > c and 3 * k * k < c)

    @given(admissible())
    def test_invariants(self, ck):
        c, k = ck
        p = validate_parameters(c, k)
        assert p.a > 0 and p.E > 0 and c - 3 * k * k > 0
        assert math.sqrt(3 * c) / 6 < p.beta < 2 * math.sqrt(c) / 3
        assert 1 < p.h < 4
        assert 0 < p.phi0_resc < 1
        assert k < p.phi1 and p.phi1**2 < c
        assert p.ess_edge > 0 and p.kappa > 0
        assert p.M_ck > p.phi1
        # the crest momentum is mu at phi = phi1; the naive denominator cancels
        # near the upper endpoint, hence the loose comparison
        assert p.M_ck == pytest.approx(k * math.sqrt(p.A / (c + 3 * k * k - 4 * k * p.phi1)),
                                       rel=1e-7)

    @given(admissible())
    def test_background_is_critical_point(self, ck):
        p = validate_parameters(*ck)
        k = p.k
        val = p.omega1 - p.omega2 / k**2 - 0.75 / k**4
        assert abs(val) <= 1e-12 * (abs(p.omega1) + abs(p.omega2) / k**2 + 0.75 / k**4)


class TestLevelCurve:
    def test_equilibrium_and_turning_point(self, params):
        assert level_curve_psi2(params.k, params) == 0.0
        assert abs(level_curve_psi2(params.phi1, params)) < 1e-15

    def test_value(self, params):
        assert level_curve_psi2(0.6, params) == pytest.approx(0.020908465674332242, rel=1e-13)

    def test_negative_radicand(self, params):
        with pytest.raises(DomainError):
            level_curve_psi2(10.0, params)

    @given(admissible(), st.floats(0.0, 1.0))
    def test_matches_direct_form_and_level_set(self, ck, t):
        p = validate_parameters(*ck)
        phi = p.k + t * (p.phi1 - p.k)
        psi2 = level_curve_psi2(phi, p)
        direct = phi**2 - p.c + math.sqrt(p.A * (p.c + 3 * p.k**2 - 4 * p.k * phi))
        assert psi2 == pytest.approx(direct, abs=1e-12 * p.c)
        w = phi**2 - psi2
        assert abs(w * w - 2 * p.c * w + 4 * p.a * phi - p.E) < 1e-12 * p.c**2

    def test_vectorized(self, params):
        phi = np.linspace(params.k, params.phi1, 11)
        out = level_curve_psi2(phi, params)
        assert out.shape == (11,) and np.all(out[1:-1] > 0)


class TestConstruction:
    def test_crest_and_tail(self, profile_40, params):
        assert np.max(profile_40.phi) == pytest.approx(0.896148140, abs=1e-7)
        assert profile_40.phi[-1] - params.k < 1e-9
        assert profile_40.tail_error < 1e-12

    def test_default_grid(self, profile, params):
        assert profile.dx == 0.01
        assert profile.L == pytest.approx(max(30, 30 / params.kappa), abs=profile.dx)

    def test_max_mu(self, profile, params):
        assert np.max(profile.mu) == pytest.approx(params.M_ck, abs=1e-6)

    def test_closed_form_positions(self, profile, params):
        # phi decreases from the crest, so each sample sits at a known xi
        n = profile.n_half
        xi, phi = profile.xi[n:], profile.phi[n:]
        sel = (phi - params.k > 1e-6) & (xi > 0.05)
        assert np.max(np.abs(xi_of_phi(phi[sel], params) - xi[sel])) < 1e-8

    def test_symmetry_exact(self, profile):
        assert np.array_equal(profile.phi, profile.phi[::-1])
        assert np.array_equal(profile.mu, profile.mu[::-1])
        assert np.array_equal(profile.phi_xi, -profile.phi_xi[::-1])
        assert np.array_equal(profile.mu_xi, -profile.mu_xi[::-1])

    def test_bounds_chain(self, profile, params):
        p = params
        assert np.all(profile.phi > p.k) and np.all(profile.phi <= p.phi1)
        assert np.argmax(profile.phi) == profile.n_half
        assert np.all(profile.mu > p.k) and np.all(profile.mu <= p.M_ck * (1 + 1e-12))
        den = p.c + profile.phi_xi**2 - profile.phi**2
        assert den.min() >= (p.c - p.phi1**2) * (1 - 1e-12)
        assert den.max() <= p.A + np.max(profile.phi_xi**2) + 1e-12

    def test_mu_relation_pointwise(self, profile, params):
        p = params
        ref = p.k * np.sqrt(p.A / (p.c + 3 * p.k**2 - 4 * p.k * profile.phi))
        assert np.max(np.abs(profile.mu - ref)) < 1e-13

    def test_monotone(self, profile, params):
        n = profile.n_half
        s = profile.phi[n:] - params.k
        d = np.diff(profile.phi[n:])
        assert np.all(d[s[1:] > 1e-14] < 0)

    def test_tail_decay_rate(self, profile, params):
        n = profile.n_half
        xi, s = profile.xi[n:], profile.phi[n:] - params.k
        sel = xi > profile.L - math.log(10) / params.kappa
        slope = np.polyfit(xi[sel], np.log(s[sel]), 1)[0]
        assert -slope == pytest.approx(params.kappa, rel=0.02)

    def test_tail_tolerance_grows_L(self, params):
        prof = construct_profile(params, dx=0.02, tail_tol=1e-10)
        assert prof.tail_error <= 1e-10

    def test_tail_tolerance_unreachable(self, params):
        with pytest.raises(IntegrationError, match="tail error"):
            construct_profile(params, dx=0.02, L=5.0, tail_tol=1e-12, max_L=8.0)

    def test_integration_failure(self):
        with pytest.raises(IntegrationError, match="floor"):
            construct_profile(validate_parameters(1.0, 0.4), dx=1.5, L=10.0)

    def test_crest_resolution_warning(self):
        with pytest.warns(ResolutionWarning):
            construct_profile(validate_parameters(1.0, 0.34), dx=0.01, L=5.0)

    def test_crest_width_shrinks_towards_left_end(self):
        ws = [crest_width(validate_parameters(1.0, k)) for k in (0.36, 0.4, 0.5)]
        assert ws[0] < ws[1] < ws[2]

    def test_immutable(self, profile):
        with pytest.raises(ValueError):
            profile.phi[0] = 1.0

    def test_csv_roundtrip(self, params):
        prof = construct_profile(params, dx=0.05, L=5.0)
        buf = io.StringIO()
        prof.to_csv(buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == "xi,phi,phi_xi,mu,mu_xi"
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 1], prof.phi)
        assert np.array_equal(data[:, 4], prof.mu_xi)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(0.05, 0.95))
    def test_level_set_residual_any_params(self, c, t):
        # kept away from the left end, where the crest needs very fine grids
        lo, hi = math.sqrt(c) / 3, math.sqrt(3 * c) / 3
        p = validate_parameters(c, lo + t * (hi - lo))
        dx = min(0.01, crest_width(p) / 10)
        prof = construct_profile(p, dx=dx, L=min(30 / p.kappa, 60))
        assert profile_residuals(prof).level_set < 1e-8 * max(1.0, p.c**2)


class TestResiduals:
    def test_constant_field(self, params):
        r = profile_residuals(WaveProfile.constant(params, 0.01, 5.0))
        assert r.ode < 1e-11 and r.mu_relation < 1e-11 and abs(r.level_set) < 1e-15

    def test_second_order(self, params):
        coarse = profile_residuals(construct_profile(params, dx=0.02, L=30))
        fine = profile_residuals(construct_profile(params, dx=0.01, L=30))
        assert coarse.ode / fine.ode == pytest.approx(4, rel=0.1)
        assert coarse.mu_relation / fine.mu_relation == pytest.approx(4, rel=0.1)
        assert fine.level_set < 1e-8

    def test_detects_corruption(self, profile):
        bad = profile.with_fields(phi=1.01 * profile.phi)
        assert profile_residuals(bad).ode > 1e-3


class TestScaling:
    def test_identity(self, params):
        r = scaling_covariance_check(params, 1.0, dx=0.02, L=20)
        assert r.sup_diff == 0.0 and r.crest_diff == 0.0

    def test_lambda_two(self, params):
        r = scaling_covariance_check(params, 2.0, dx=0.005, L=40)
        assert r.sup_diff < 1e-6
        assert r.crest_diff < 1e-15

    @pytest.mark.parametrize("lam", [0.7, 1.5, 3.0])
    def test_other_factors(self, params, lam):
        assert scaling_covariance_check(params, lam, dx=0.01, L=20).sup_diff < 1e-12

    def test_bad_lambda(self, params):
        with pytest.raises(ParameterError):
            scaling_covariance_check(params, -1.0)

    @given(st.floats(0.3, 3.0))
    def test_crest_closed_form(self, lam):
        p = validate_parameters(1.0, 0.4)
        q = validate_parameters(lam * lam, 0.4 * lam)
        assert q.phi1 == pytest.approx(lam * p.phi1, rel=1e-14)
