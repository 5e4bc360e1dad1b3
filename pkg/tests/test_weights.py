import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grushinlab import ad
from grushinlab.errors import DomainError, ParameterError
from grushinlab.weights import (
    select_lambda_regular,
    RegularWeights, SingularWeights, WeightParams, default_lambda,
    eval_regular, eval_singular, phase_jet, select_big_m, select_mu,
    time_factor_jet, verify_weight_properties,
)


def params(gamma=1.0, sigma=0.0, eps=0.0, T=2.0, s=1.0, lam=0.25, **kw):
    return WeightParams.default(gamma=gamma, sigma=sigma, epsilon=eps,
                                horizon=T, s=s, lam=lam, **kw)


class TestParameterSelection:
    def test_mu_gamma_one(self):
        # sup = 4 * 8 / 4 = 8 at (x,y) = (1, 1/2)
        assert select_mu(1.0, 1.0) == 10.0

    def test_mu_gamma_zero(self):
        assert select_mu(0.0, 1.0) == 3.0

    def test_mu_margin_is_delta0_plus_one(self):
        for g, d0 in [(0.5, 1.0), (1.0, 0.25), (2.0, 3.0)]:
            sup = (2 + 2 * g) * 2.0 ** (1 + 2 * g) / 4.0
            assert select_mu(g, d0) - sup == pytest.approx(d0 + 1.0, abs=0)

    def test_mu_boundary_condition(self):
        # at gamma=1 the condition itself requires mu > 8 as delta0 -> 0
        assert select_mu(1.0, 1e-12) > 8.0

    def test_mu_rejects_bad_input(self):
        with pytest.raises(ParameterError):
            select_mu(-1.0, 1.0)
        with pytest.raises(ParameterError):
            select_mu(1.0, 0.0)

    def test_big_m(self):
        assert select_big_m(1.0, 10.0) == 11.0
        assert select_big_m(1.0, 3.0) == 4.0
        # degenerate input still returns mu + 1; flagged elsewhere
        assert select_big_m(1.0, 0.0) == 1.0

    def test_big_m_makes_phase_minimum_one(self):
        pr = params()
        jet = phase_jet(pr, 1.0, 0.0)
        assert jet[(0, 0)] == pytest.approx(1.0, abs=0)

    def test_params_validation(self):
        with pytest.raises(ParameterError):
            params(sigma=0.25)
        with pytest.raises(ParameterError):
            params(gamma=-1.0)
        with pytest.raises(ParameterError):
            params(tau=3.5)
        pr = WeightParams.default(gamma=1.0, mu=1.0)
        with pytest.raises(ParameterError):
            pr.check_slope()


class TestPointValues:
    def test_phase_at_center(self):
        # gamma=1, mu=10, M=11: 1 * 1/4 - 10 + 11 = 1.25
        wp = eval_singular(params(), 1.0, 0.5, 1.0)
        assert wp.phase[(0, 0)] == pytest.approx(1.25, abs=1e-15)

    def test_phase_x_slope(self):
        wp = eval_singular(params(), 1.0, 0.5, 1.0)
        assert wp.phase[(1, 0)] == pytest.approx(-9.0, abs=1e-15)
        assert wp.phase[(1, 0)] < -1.0  # below -delta0

    def test_time_factor_midpoint(self):
        xi = time_factor_jet(2.0, 1.0)
        assert xi[0] == pytest.approx(1.0, abs=0)

    def test_time_factor_domain(self):
        pr = params()
        fam = SingularWeights(pr)
        for t in (0.0, pr.horizon, -0.5, pr.horizon + 1.0):
            with pytest.raises(DomainError):
                fam.log_weight_jet(0.5, 0.5, t)

    def test_regular_values(self):
        pr = params(lam=5.0)
        wp = eval_regular(pr, 0.0, 0.0, 0.0)
        assert wp.phase[(0, 0, 0)] == pytest.approx(25.0, abs=1e-12)
        assert wp.phase[(0, 0, 1)] == pytest.approx(10.0, abs=0)
        assert wp.phase[(0, 0, 2)] == -2.0

    def test_regular_time_vertex(self):
        pr = params(lam=5.0, T=1.0)
        fam = RegularWeights(pr)
        jet = fam.phase_jet3(0.3, 0.4, pr.lam)  # t = lam is the vertex
        assert jet[(0, 0, 1)] == 0.0
        assert jet[(1, 0, 1)] == 0.0 and jet[(0, 1, 1)] == 0.0


def jet_oracle_spatial(build, x, y, orders):
    """Each closed-form entry (i+1,j)/(i,j+1) must equal the dual derivative
    of the entry one order below."""
    worst = 0.0
    for (i, j) in orders:
        if (i + 1, j) in orders:
            dx = ad.derive(lambda u, v: build(u, v)[(i, j)], 0)(x, y)
            ref = build(x, y)[(i + 1, j)]
            worst = max(worst, rel_err(dx, ref))
        if (i, j + 1) in orders:
            dy = ad.derive(lambda u, v: build(u, v)[(i, j)], 1)(x, y)
            ref = build(x, y)[(i, j + 1)]
            worst = max(worst, rel_err(dy, ref))
    return worst


def rel_err(a, b):
    scale = max(abs(a), abs(b), 1e-30)
    return abs(a - b) / scale


class TestDerivativeOracle:
    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95),
           st.floats(0.3, 2.5), st.floats(0.0, 0.2))
    def test_phase_jet_matches_duals(self, x, y, gamma, eps):
        pr = WeightParams.default(gamma=max(gamma, 0.1), epsilon=eps)
        orders = list(phase_jet(pr, x, y).keys())
        worst = jet_oracle_spatial(lambda u, v: phase_jet(pr, u, v),
                                   x, y, orders)
        assert worst < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95),
           st.floats(0.05, 1.95))
    def test_singular_log_weight_matches_duals(self, x, y, t):
        pr = params()
        fam = SingularWeights(pr)
        worst = 0.0
        jet = fam.log_weight_jet(x, y, t)
        for (i, j, k) in jet:
            for axis, nxt in ((0, (i + 1, j, k)), (1, (i, j + 1, k)),
                              (2, (i, j, k + 1))):
                if nxt not in jet:
                    continue
                d = ad.derive(
                    lambda u, v, w: fam.log_weight_jet(u, v, w)[(i, j, k)],
                    axis)(x, y, t)
                worst = max(worst, rel_err(d, jet[nxt]))
        assert worst < 1e-8

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95),
           st.floats(0.0, 1.0), st.floats(1.1, 4.0))
    def test_regular_log_weight_matches_duals(self, x, y, t, lam):
        pr = params(lam=lam, T=1.0)
        fam = RegularWeights(pr)
        jet = fam.log_weight_jet(x, y, t)
        worst = 0.0
        for (i, j, k) in jet:
            for axis, nxt in ((0, (i + 1, j, k)), (1, (i, j + 1, k)),
                              (2, (i, j, k + 1))):
                if nxt not in jet:
                    continue
                d = ad.derive(
                    lambda u, v, w: fam.log_weight_jet(u, v, w)[(i, j, k)],
                    axis)(x, y, t)
                worst = max(worst, rel_err(d, jet[nxt]))
        assert worst < 1e-8

    def test_weight_jet_matches_duals(self):
        pr = params()
        fam = SingularWeights(pr)
        rng = np.random.default_rng(7)
        for _ in range(20):
            x, y = rng.uniform(0.1, 0.9, 2)
            t = rng.uniform(0.2, 1.8)
            jet = fam.weight_jet(x, y, t)
            for (i, j, k) in jet:
                for axis, nxt in ((0, (i + 1, j, k)), (1, (i, j + 1, k)),
                                  (2, (i, j, k + 1))):
                    if nxt not in jet:
                        continue
                    d = ad.derive(
                        lambda u, v, w: fam.weight_jet(u, v, w)[(i, j, k)],
                        axis)(x, y, t)
                    assert rel_err(d, jet[nxt]) < 1e-8

    def test_time_factor_matches_duals(self):
        for t in np.linspace(0.13, 1.87, 11):
            d1 = ad.derive(lambda u: time_factor_jet(2.0, u)[0])(t)
            d2 = ad.derive(lambda u: time_factor_jet(2.0, u)[1])(t)
            jet = time_factor_jet(2.0, t)
            assert rel_err(d1, jet[1]) < 1e-10
            assert rel_err(d2, jet[2]) < 1e-10


class TestWeightBehaviour:
    def test_weight_in_unit_interval(self):
        pr = params()
        fam = SingularWeights(pr)
        for t in np.linspace(0.1, 1.9, 7):
            th = fam.weight_jet(0.4, 0.6, t)[(0, 0, 0)]
            assert 0.0 <= th < 1.0

    def test_weight_vanishes_monotonically_near_zero(self):
        # small s keeps the weight representable down to t ~ T/100
        pr = params(s=1e-3)
        fam = SingularWeights(pr)
        ts = np.linspace(pr.horizon / 10, 1e-3, 40)
        vals = [fam.weight_jet(0.3, 0.5, t)[(0, 0, 0)] for t in ts]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < vals[0]
        assert vals[0] > 0.0

    def test_regular_weight_positive_at_t0(self):
        pr = params(lam=2.0, T=1.0)
        fam = RegularWeights(pr)
        assert fam.weight_jet(0.5, 0.5, 0.0)[(0, 0, 0)] > 0.0

    def test_regular_positivity_guard(self):
        bad = WeightParams.default(gamma=1.0, lam=0.2, horizon=1.0, mu=10.0)
        with pytest.raises(ParameterError):
            RegularWeights(bad).check_positive()


class TestPropertyReport:
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("sigma", [0.0, 0.1, 0.24])
    def test_default_parameters_admissible(self, gamma, sigma):
        pr = WeightParams.default(gamma=gamma, sigma=sigma, epsilon=0.01,
                                  horizon=1.0)
        for kind in ("singular", "regular"):
            if kind == "regular":
                pr_k = WeightParams.default(
                    gamma=gamma, sigma=sigma, epsilon=0.01, horizon=1.0,
                    lam=select_lambda_regular(pr.mu, 0.01, 1.0))
            else:
                pr_k = pr
            rep = verify_weight_properties(pr_k, nx=64, ny=64, nt=32,
                                           kind=kind)
            assert rep.admissible, [r.property_id for r in rep.failures()]

    def test_slope_violation_named(self):
        pr = WeightParams.default(gamma=1.0, mu=1.0, epsilon=0.0)
        rep = verify_weight_properties(pr, nx=64, ny=64, nt=16)
        bad = rep.row("phase_x_below_minus_delta0")
        assert not bad.passed
        assert bad.worst_x == pytest.approx(1.0, abs=1e-12)
        assert bad.worst_y == pytest.approx(0.5, abs=0.02)
        assert not rep.admissible

    def test_boundary_sign_rows_pass(self):
        rep = verify_weight_properties(params(), nx=32, ny=32, nt=8)
        for pid in ("tilted_phase_y_nonnegative_y0",
                    "tilted_phase_y_nonpositive_y1",
                    "tilted_phase_x_nonpositive_x0",
                    "tilted_phase_x_nonpositive_x1"):
            assert rep.row(pid).passed

    def test_time_factor_constant_close_to_analytic(self):
        # |xi_t| / xi^(5/4) = 4|2t - T|, so the mesh constant is < 4T
        T = 1.0
        rep = verify_weight_properties(params(T=T), nx=16, ny=16, nt=64)
        c = rep.row("time_factor_derivative_bound").constant
        assert c == pytest.approx(4 * T, rel=0.05)
        assert c < 4 * T

    def test_csv_round_trip(self):
        rep = verify_weight_properties(params(), nx=16, ny=16, nt=8)
        text = rep.to_csv()
        header = text.splitlines()[0]
        assert header == ("property_id,pass,worst_x,worst_y,worst_t,"
                          "margin,constant_C")
        assert len(text.splitlines()) == len(rep.rows) + 1
