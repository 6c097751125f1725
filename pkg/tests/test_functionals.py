import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mchwave.errors import DomainError, ParameterError
from mchwave.functionals import (SWEEP_HEADER, action_values, conserved_integrals,
                                 dq_dk_closed_form, euler_lagrange_residual,
                                 functional_report, q_closed_form, q_quadrature,
                                 spectral_derivative, sweep_row, variational_derivative)
from mchwave.wave_profile import WaveProfile, construct_profile, validate_parameters

Q_FROZEN = 2.209348890080017
DQ_FROZEN = -18.733233154034361


@st.composite
def admissible(draw):
    c = draw(st.floats(0.05, 20.0))
    lo, hi = math.sqrt(c) / 3, math.sqrt(3 * c) / 3
    t = draw(st.floats(1e-3, 1 - 1e-3))
    return c, lo + t * (hi - lo)


def gaussian_field(k=0.4, amp=0.3, s=1.5, L=20.0, dx=0.01):
    x = np.arange(-L, L + dx / 2, dx)
    return x, k + amp * np.exp(-(x / s) ** 2)


class TestConservedIntegrals:
    def test_background_is_zero(self):
        assert conserved_integrals(np.full(101, 0.4), 0.4, 0.1) == (0.0, 0.0, 0.0)

    def test_gaussian_mass(self):
        x, m = gaussian_field()
        F1, F2, F3 = conserved_integrals(m, 0.4, 0.01)
        assert F1 == pytest.approx(0.3 * 1.5 * math.sqrt(math.pi), rel=1e-12)
        assert F2 < 0

    def test_gaussian_against_quad(self):
        from scipy.integrate import quad
        k, amp, s = 0.4, 0.3, 1.5
        g = lambda x: k + amp * math.exp(-(x / s) ** 2)
        gx = lambda x: -2 * x / s**2 * amp * math.exp(-(x / s) ** 2)
        F2 = quad(lambda x: 1 / g(x) - 1 / k, -20, 20, epsabs=1e-13)[0]
        F3 = quad(lambda x: gx(x) ** 2 / g(x) ** 5 + 0.25 / g(x) ** 3 - 0.25 / k**3,
                  -20, 20, epsabs=1e-13)[0]
        x, m = gaussian_field(k, amp, s)
        mx = -2 * x / s**2 * (m - k)
        _, f2, f3 = conserved_integrals(m, k, 0.01, m_x=mx)
        assert f2 == pytest.approx(F2, rel=1e-10)
        assert f3 == pytest.approx(F3, rel=1e-10)

    def test_periodic_is_spectral(self):
        L = 40.0
        N = 256
        x = -L / 2 + L * np.arange(N) / N
        m = 0.4 + 0.3 * np.exp(-(x / 1.5) ** 2)
        F1 = conserved_integrals(m, 0.4, L / N, periodic=True)[0]
        assert F1 == pytest.approx(0.3 * 1.5 * math.sqrt(math.pi), rel=1e-13)

    def test_spectral_derivative(self):
        N, L = 128, 2 * np.pi
        x = L * np.arange(N) / N
        assert np.allclose(spectral_derivative(np.sin(3 * x), L / N), 3 * np.cos(3 * x),
                           atol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            conserved_integrals(np.array([0.4, -0.1, 0.4]), 0.4, 0.1)

    def test_refinement_stable(self, profile_40, profile_fine):
        p = profile_40.params
        F = conserved_integrals(profile_40.mu, p.k, profile_40.dx, m_x=profile_40.mu_xi)
        G = conserved_integrals(profile_fine.mu, p.k, profile_fine.dx, m_x=profile_fine.mu_xi)
        assert np.max(np.abs(np.subtract(F, G))) < 1e-7

    def test_richardson_needs_odd_panels(self):
        with pytest.raises(ValueError):
            conserved_integrals(np.full(8, 0.5), 0.4, 0.1, richardson=True)


class TestVariations:
    @given(admissible())
    def test_background_critical(self, ck):
        p = validate_parameters(*ck)
        m = np.full(11, p.k)
        r = variational_derivative("Lambda", m, p, 0.1)
        scale = abs(p.omega1) + abs(p.omega2) / p.k**2 + 0.75 / p.k**4
        assert np.max(np.abs(r)) <= 1e-12 * scale

    def test_action_split(self, params):
        F = (0.3, -0.2, 0.5)
        v = action_values(F, params)
        assert v["Lambda"] == pytest.approx(v["calG"] + params.omega2 * v["calF"], rel=1e-14)

    def test_first_variation_matches_directional_derivative(self, params):
        x, m = gaussian_field(dx=0.005)
        dx = 0.005
        f = np.exp(-((x - 0.5) / 2) ** 2)
        t = 1e-5
        plus = action_values(conserved_integrals(m + t * f, params.k, dx, order=4), params)
        minus = action_values(conserved_integrals(m - t * f, params.k, dx, order=4), params)
        fd = (plus["Lambda"] - minus["Lambda"]) / (2 * t)
        dL = variational_derivative("Lambda", m, params, dx, order=4)
        from mchwave._numerics import integrate
        assert integrate(dL * f, dx) == pytest.approx(fd, rel=1e-6)

    @given(admissible())
    def test_split_coefficient(self, ck):
        c, k = ck
        p = validate_parameters(c, k)
        gamma = (c + 3 * k * k) / (2 * k * k * (c - k * k))
        assert p.gamma == pytest.approx(gamma, rel=1e-13)
        F = (0.7, -1.3, 2.1)
        v = action_values(F, p)
        assert v["Lambda"] == pytest.approx(v["calG"] - gamma * v["calF"], rel=1e-12, abs=1e-12)

    def test_unknown_name(self, params):
        with pytest.raises(ValueError, match="unknown"):
            variational_derivative("F4", np.ones(5), params, 0.1)

    def test_euler_lagrange_small(self, profile):
        assert euler_lagrange_residual(profile) < 1e-6

    def test_euler_lagrange_second_order(self, params):
        a = euler_lagrange_residual(construct_profile(params, dx=0.02, L=30))
        b = euler_lagrange_residual(construct_profile(params, dx=0.01, L=30))
        assert a / b >= 3.6

    def test_euler_lagrange_detects_wrong_wave(self, params):
        prof = WaveProfile.constant(params, 0.01, 5.0)
        bumped = prof.with_fields(mu=prof.mu + 0.01 * np.exp(-prof.xi**2))
        assert euler_lagrange_residual(bumped, analytic=False) > 1e-3


class TestQ:
    def test_frozen_values(self):
        assert q_closed_form(1.0, 0.4) == pytest.approx(Q_FROZEN, rel=1e-14)
        assert dq_dk_closed_form(1.0, 0.4) == pytest.approx(DQ_FROZEN, rel=1e-14)

    def test_quadrature(self, profile):
        assert abs(q_quadrature(profile) - Q_FROZEN) < 1e-6

    def test_quadrature_refines(self, profile_fine):
        assert abs(q_quadrature(profile_fine) - Q_FROZEN) < 1e-8

    def test_family_derivative_of_calF(self):
        # d/dk [k calF] over neighbouring profiles reproduces dQ/dk
        dk, vals = 1e-4, []
        for kk in (0.4 - dk, 0.4 + dk):
            prof = construct_profile(validate_parameters(1.0, kk), dx=0.005, L=40)
            F = conserved_integrals(prof.mu, kk, prof.dx, m_x=prof.mu_xi)
            vals.append(kk * action_values(F, prof.params)["calF"])
        fd = (vals[1] - vals[0]) / (2 * dk)
        assert abs(fd - DQ_FROZEN) / abs(DQ_FROZEN) < 5e-3

    def test_corrupted_profile(self, profile):
        bad = profile.with_fields(phi=profile.phi + 1.0)
        with pytest.raises(DomainError):
            q_quadrature(bad)

    def test_outside_window(self):
        with pytest.raises(ParameterError):
            q_closed_form(1.0, 0.6)

    @given(admissible())
    def test_positive_and_decreasing(self, ck):
        c, k = ck
        assert q_closed_form(c, k) > 0
        assert dq_dk_closed_form(c, k) < 0

    @given(admissible())
    def test_derivative_consistent(self, ck):
        c, k = ck
        hi = math.sqrt(3 * c) / 3
        h = 1e-6 * min(k - math.sqrt(c) / 3, hi - k, k)
        fd = (q_closed_form(c, k + h) - q_closed_form(c, k - h)) / (2 * h)
        assert fd == pytest.approx(dq_dk_closed_form(c, k), rel=1e-4)

    @given(admissible(), st.floats(0.2, 5.0))
    def test_scale_invariant(self, ck, lam):
        c, k = ck
        assert q_closed_form(lam**2 * c, lam * k) == pytest.approx(q_closed_form(c, k),
                                                                     rel=1e-9, abs=1e-12)


class TestReport:
    def test_report(self, profile):
        rep = functional_report(profile)
        assert rep.Q_closed == pytest.approx(Q_FROZEN)
        assert rep.el_residual_sup < 1e-6
        d = json.loads(rep.to_json())
        assert set(d) >= {"F1", "F2", "F3", "Lambda", "calF", "calG"}
        # calF = F2 + F1/k^2
        assert rep.calF == pytest.approx(rep.F2 + rep.F1 / 0.16, rel=1e-14)

    def test_sweep_row(self, profile):
        row = sweep_row(functional_report(profile))
        assert len(row.split(",")) == len(SWEEP_HEADER.split(","))
        assert float(row.split(",")[1]) == 0.4
