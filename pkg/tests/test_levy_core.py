import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from risknet.levy_core import (
    ClaimLaw,
    DomainError,
    LevyModel,
    ScaleEval,
    laplace_exponent,
    phi_root,
    scale_derivatives_at_zero,
    scale_w,
    scale_z,
)

# Reference values from tests/oracles/derive_values.py (mpmath de Hoog inversion,
# 40 digits, no risknet code involved).
HYP_W = {0.5: 0.3948134607152228, 2.0: 0.48481804865111595, 5.0: 0.58988460460667644}
HYP_Z_THETA03 = {2.0: 1.1505588172497203, 4.0: 1.2600195673356421}
HYP_PHI_Q005 = 0.027769071139012903


def exp_ruin_closed_form(c, lam, mu, x):
    rho = lam / (c * mu)
    return rho * math.exp(-mu * (1 - rho) * x)


models = st.builds(
    lambda c, lam, p, m1, m2: LevyModel(c, lam, ClaimLaw.hyperexponential([p, 1 - p], [m1, m2])),
    c=st.floats(0.5, 5.0),
    lam=st.floats(0.1, 3.0),
    p=st.floats(0.05, 0.95),
    m1=st.floats(0.3, 4.0),
    m2=st.floats(0.3, 4.0),
).filter(lambda m: abs(m.claim.rates[0] - m.claim.rates[1]) > 1e-2)


class TestClaimLaw:
    def test_exponential_moments(self):
        law = ClaimLaw.exponential(2.0)
        assert law.mean == pytest.approx(0.5)
        assert law.density_at_zero == pytest.approx(2.0)
        assert law.transform(1.0) == pytest.approx(2.0 / 3.0)

    def test_hyperexponential_mean_matches_tail_quadrature(self):
        law = ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0])
        tail = lambda x: 0.3 * math.exp(-0.5 * x) + 0.7 * math.exp(-3.0 * x)
        assert law.mean == pytest.approx(integrate.quad(tail, 0, np.inf)[0], rel=1e-10)

    def test_phase_type_matches_erlang(self):
        law = ClaimLaw.phase_type([1.0, 0.0], [[-2.0, 2.0], [0.0, -2.0]])
        th = np.array([0.0, 0.5, 3.0])
        np.testing.assert_allclose(law.transform(th), (2.0 / (2.0 + th)) ** 2, rtol=1e-14)
        assert law.mean == pytest.approx(1.0)
        assert law.density_at_zero == pytest.approx(0.0)

    @pytest.mark.parametrize("bad", [
        lambda: ClaimLaw.exponential(0.0),
        lambda: ClaimLaw.hyperexponential([0.5, 0.4], [1.0, 2.0]),
        lambda: ClaimLaw.phase_type([1.0], [[1.0]]),
        lambda: ClaimLaw.phase_type([0.5, 0.5], [[-1.0, -0.5], [0.0, -1.0]]),
    ])
    def test_invalid_laws_rejected(self, bad):
        with pytest.raises(ValueError):
            bad()

    def test_transform_outside_strip_is_domain_error(self):
        with pytest.raises(DomainError):
            ClaimLaw.exponential(1.0).transform(-1.5)

    def test_scaled_law(self):
        law = ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0]).scaled(2.0)
        assert law.mean == pytest.approx(2 * (0.3 / 0.5 + 0.7 / 3.0))


class TestLaplaceExponent:
    def test_zero_at_origin(self, exp_model):
        assert laplace_exponent(exp_model, 0.0) == 0.0

    def test_value(self, exp_model):
        assert laplace_exponent(exp_model, 1.0) == pytest.approx(1.5)

    def test_linear_asymptote(self, exp_model):
        assert laplace_exponent(exp_model, 1e8) / 1e8 == pytest.approx(2.0, rel=1e-7)

    def test_negative_argument_rejected(self, exp_model):
        with pytest.raises(DomainError):
            laplace_exponent(exp_model, -0.1)

    @given(models, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_convexity(self, m, a, b):
        mid = m.kappa(0.5 * (a + b))
        assert mid <= 0.5 * (m.kappa(a) + m.kappa(b)) + 1e-10


class TestPhiRoot:
    def test_positive_loading_gives_zero(self, exp_model):
        assert phi_root(exp_model, 0.0) == 0.0

    def test_exponential_value(self, exp_model):
        assert phi_root(exp_model, 1.0) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_critical_loading(self):
        m = LevyModel(1.0, 1.0, ClaimLaw.exponential(1.0))
        assert phi_root(m, 0.0) == 0.0

    def test_hyperexponential_oracle(self, hyp_model):
        assert phi_root(hyp_model, 0.05) == pytest.approx(HYP_PHI_Q005, rel=1e-12)

    def test_negative_drift_has_positive_root(self):
        m = LevyModel(1.0, 2.0, ClaimLaw.exponential(1.0))
        assert phi_root(m, 0.0) == pytest.approx(1.0, abs=1e-12)

    @given(models, st.floats(0.0, 3.0))
    def test_root_residual(self, m, q):
        s = phi_root(m, q)
        assert abs(float(m.kappa(s)) - q) < 1e-12 * max(1.0, q, s * m.c)


class TestScaleW:
    def test_value_at_zero(self, hyp_model):
        assert scale_w(ScaleEval(hyp_model, 0.3), 0.0) == pytest.approx(1 / 3.0)

    def test_exponential_closed_form(self, exp_model):
        assert scale_w(ScaleEval(exp_model), 1.0) == pytest.approx(1 - 0.5 * math.exp(-0.5), rel=1e-14)

    def test_vanishes_on_negatives(self, exp_model):
        assert scale_w(ScaleEval(exp_model, 0.2), -1.0) == 0.0

    @pytest.mark.parametrize("x", sorted(HYP_W))
    def test_hyperexponential_oracle(self, hyp_model, x):
        assert ScaleEval(hyp_model, 0.05).W(x) == pytest.approx(HYP_W[x], rel=1e-12)

    def test_exponential_matches_inversion(self, exp_model):
        ev = ScaleEval(exp_model, 0.1)
        x = np.array([0.1, 1.0, 5.0, 12.0, 20.0])
        np.testing.assert_allclose(ev.W(x), ev.W_by_inversion(x), rtol=1e-8)

    def test_phase_type_matches_inversion(self, erlang_model):
        ev = ScaleEval(erlang_model, 0.2)
        assert ev.mode == "residue"
        x = np.array([0.3, 2.0, 7.0])
        np.testing.assert_allclose(ev.W(x), ev.W_by_inversion(x), rtol=1e-8)

    def test_brownian_part_uses_residues(self):
        m = LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0), sigma=0.5)
        ev = ScaleEval(m, 0.1)
        assert ev.W(0.0) == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(ev.W([0.5, 3.0]), ev.W_by_inversion([0.5, 3.0]), rtol=1e-8)

    def test_critical_exponential_is_linear(self):
        ev = ScaleEval(LevyModel(1.0, 1.0, ClaimLaw.exponential(1.0)), 0.0)
        assert ev.mode == "linear"
        assert ev.W(2.0) == pytest.approx(3.0)

    def test_clustered_roots_fall_back_to_inversion(self, caplog):
        # zero drift at q = 0 makes s = 0 a double root of kappa(s) = 0
        law = ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0])
        m = LevyModel(1.5 * law.mean, 1.5, law)
        with caplog.at_level("WARNING"):
            ev = ScaleEval(m, 0.0)
        assert ev.mode == "inversion"
        assert "clustered" in caplog.text
        val, _ = integrate.quad(lambda x: math.exp(-x) * ev.W(x), 0, 60, epsabs=1e-12, limit=200)
        assert val == pytest.approx(1.0 / float(m.kappa(1.0)), rel=1e-7)

    def test_nearly_merged_roots(self):
        # zero drift, q = 1e-9: Phi and the next root are 5e-5 apart with residues near 1e4;
        # reference from mpmath de Hoog inversion at 50 digits
        law = ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0])
        ev = ScaleEval(LevyModel(1.25, 1.5, law), 1e-9)
        assert ev.mode == "residue"
        assert ev.W(2.0) == pytest.approx(2.03211110987383, rel=1e-11)
        assert abs(float(ev.model.kappa(ev.phi)) - 1e-9) < 1e-15

    @given(models, st.floats(0.0, 1.0))
    def test_nondecreasing_and_log_concave(self, m, q):
        ev = ScaleEval(m, q)
        x = np.linspace(0.0, 10.0, 201)
        w = ev.W(x)
        assert np.all(np.diff(w) >= -1e-12 * w[1:])
        lw = np.log(w)
        assert np.all(lw[2:] - 2 * lw[1:-1] + lw[:-2] <= 1e-9)

    @given(models, st.floats(0.0, 1.0))
    def test_transform_identity(self, m, q):
        ev = ScaleEval(m, q)
        theta = ev.phi + 1.0
        # the integrand decays at least like e^{-x}: the tail beyond 50 is below 1e-21
        val, _ = integrate.quad(lambda x: math.exp(-theta * x) * ev.W(x), 0, 50.0, epsabs=1e-14,
                                limit=200)
        assert val == pytest.approx(1.0 / (float(m.kappa(theta)) - q), rel=1e-6)


class TestScaleZ:
    def test_normalization(self, hyp_model):
        ev = ScaleEval(hyp_model, 0.1)
        for th in (0.0, 0.4, 3.0):
            assert scale_z(ev, 0.0, th) == pytest.approx(1.0)

    def test_at_root_is_exponential(self, hyp_model):
        ev = ScaleEval(hyp_model, 0.1)
        x = np.array([0.5, 2.0, 4.0])
        np.testing.assert_allclose(ev.Z(x, ev.phi), np.exp(ev.phi * x), rtol=1e-12)

    def test_q_zero_is_one(self, exp_model):
        assert scale_z(ScaleEval(exp_model), 1.0, 0.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("x", sorted(HYP_Z_THETA03))
    def test_hyperexponential_oracle(self, hyp_model, x):
        assert ScaleEval(hyp_model, 0.05).Z(x, 0.3) == pytest.approx(HYP_Z_THETA03[x], rel=1e-12)

    def test_theta_zero_is_one_plus_q_wbar(self, hyp_model):
        ev = ScaleEval(hyp_model, 0.2)
        x = 3.0
        wbar = integrate.quad(ev.W, 0, x, epsabs=1e-13)[0]
        assert ev.Z(x, 0.0) == pytest.approx(1 + 0.2 * wbar, rel=1e-10)

    def test_near_root_branch_is_continuous(self, hyp_model):
        ev = ScaleEval(hyp_model, 0.1)
        th = ev.phi
        assert ev.Z(3.0, th + 2e-3) == pytest.approx(ev.Z(3.0, th + 5e-4), rel=1e-2)
        a, b = ev.Z(3.0, th + 1.0001e-3 * (1 + th)), ev.Z(3.0, th + 0.9999e-3 * (1 + th))
        assert a == pytest.approx(b, rel=1e-6)

    @given(models, st.floats(0.0, 1.0), st.floats(0.0, 3.0), st.floats(0.1, 8.0))
    def test_derivative_identity(self, m, q, theta, x):
        ev = ScaleEval(m, q)
        h = 1e-5
        fd = (ev.Z(x + h, theta) - ev.Z(x - h, theta)) / (2 * h)
        rhs = theta * ev.Z(x, theta) - ev.W(x) * (float(m.kappa(theta)) - q)
        assert fd == pytest.approx(rhs, rel=1e-6, abs=1e-6)
        assert ev.dZ(x, theta) == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_phase_type_quadrature_route(self, erlang_model):
        ev = ScaleEval(erlang_model, 0.2)
        g = float(erlang_model.kappa(0.7)) - 0.2
        integral = integrate.quad(lambda y: math.exp(-0.7 * y) * ev.W(y), 0, 2.0, epsabs=1e-13)[0]
        assert ev.Z(2.0, 0.7) == pytest.approx(math.exp(1.4) * (1 - g * integral), rel=1e-9)


class TestDerivativesAtZero:
    def test_unit_model(self):
        ev = ScaleEval(LevyModel(1.0, 1.0, ClaimLaw.exponential(1.0)), 0.0)
        assert scale_derivatives_at_zero(ev) == pytest.approx((1.0, 1.0, 0.0))

    def test_discounted(self, exp_model):
        ev = ScaleEval(exp_model, 1.0)
        w0, w1, w2 = scale_derivatives_at_zero(ev)
        assert (w0, w1, w2) == pytest.approx((0.5, 0.5, 0.25))
        # confirmed against the exponential closed form
        assert ev.dW(0.0) == pytest.approx(w1, rel=1e-12)
        assert ev.d2W(0.0) == pytest.approx(w2, rel=1e-12)

    @given(models, st.floats(0.0, 2.0))
    def test_match_finite_differences(self, m, q):
        ev = ScaleEval(m, q)
        w0, w1, w2 = scale_derivatives_at_zero(ev)
        h = 1e-4
        assert ev.W(0.0) == pytest.approx(w0)
        assert (ev.W(h) - ev.W(0.0)) / h == pytest.approx(w1, abs=10 * h * (abs(w2) + w1 + 1))
        assert ev.dW(0.0) == pytest.approx(w1, rel=1e-9, abs=1e-12)
        assert ev.d2W(0.0) == pytest.approx(w2, rel=1e-8, abs=1e-10)

    def test_brownian_rejected(self):
        ev = ScaleEval(LevyModel(1.0, 1.0, ClaimLaw.exponential(1.0), sigma=0.3), 0.0)
        with pytest.raises(DomainError):
            scale_derivatives_at_zero(ev)


def test_ruin_from_scale_function(exp_model):
    ev = ScaleEval(exp_model)
    # Psi(x) = 1 - kappa'(0) W(x)
    for x in (0.0, 0.5, 3.0):
        assert 1 - exp_model.drift * ev.W(x) == pytest.approx(exp_ruin_closed_form(2, 1, 1, x), rel=1e-13)
