import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from setcf.latent import adjustment_Q, normal_cdf, normal_score
from setcf.models import (BinaryRoy, cf_box, DynamicTwoPeriod, Multinomial, OrderedChoice, make_model,
                          predict_additive_mean, predict_binary)
from setcf.rset import Box, Interval, sample_grid
from setcf.theta import Cell, InfeasibleThetaError, ThetaPoint

from conftest import PI2, TRUE, random_design

rho_st = st.floats(-0.95, 0.95)


class TestAdjustment:
    def test_exogenous(self):
        assert adjustment_Q(0.3, 0.9, 0.0) == pytest.approx(normal_score(0.3))

    def test_all_half(self):
        assert adjustment_Q(0.5, 0.5, 0.5) == 0.0

    def test_marginal_is_standard_normal(self):
        u = np.random.default_rng(1).random((100_000, 2))
        draws = adjustment_Q(u[:, 0], u[:, 1], 0.6)
        assert sps.kstest(draws, "norm").pvalue > 0.01

    def test_clamped_tails_finite(self):
        assert np.isfinite(adjustment_Q(0.0, 1.0, 0.3))


class TestPredictBinary:
    model = BinaryRoy()

    def test_singleton_complete(self):
        m = BinaryRoy(observed_control=True)
        th = ThetaPoint((0.2, 0.5), (0.5,))
        t_lo, t_hi = m.thresholds(Cell((1,), (), (0.4,)), th)
        assert t_lo == t_hi

    @given(rho_st, st.floats(0.05, 0.95))
    def test_exogenous_collapse(self, rho, pi):
        th = ThetaPoint((0.2, 0.5), (0.0,), {((1,), ()): pi})
        for d in (0, 1):
            t_lo, t_hi = self.model.thresholds(Cell((d,), (), (1,)), th)
            assert t_lo == pytest.approx(t_hi, abs=1e-14)
            assert t_lo == pytest.approx(normal_cdf(0.2 + 0.5 * d))

    @given(rho_st, st.floats(0.05, 0.95), st.integers(0, 1))
    def test_matches_grid(self, rho, pi, d):
        th = ThetaPoint((0.2, 0.5), (rho,), {((1,), ()): pi})
        cell = Cell((d,), (), (1,))
        h = self.model.h(cell.d, cell.x, th)
        vals = [h(v) for v in sample_grid(self.model.cf(cell, th), 1000)]
        t_lo, t_hi = self.model.thresholds(cell, th)
        assert t_lo == pytest.approx(min(vals), abs=1e-6)
        assert t_hi == pytest.approx(max(vals), abs=1e-6)

    def test_generic_helper(self):
        t = predict_binary(lambda v: v[0] ** 2, Interval(0.2, 0.5))
        assert t == pytest.approx((0.04, 0.25))


class TestPredictOrdered:
    model = OrderedChoice(n_x=0)
    cell = Cell((1,), (), (0,))

    def theta(self, rho, pi=0.5):
        return ThetaPoint((0.3,), (rho,), {((0,), ()): pi}, cutoffs=(-0.5, 0.8))

    def test_exogenous_containment_equals_capacity(self):
        out = self.model.predict_ordered(self.cell, self.theta(0.0))
        assert out["cont0"] == pytest.approx(out["cap0"], abs=1e-14)
        assert out["cont6"] == pytest.approx(out["cap6"], abs=1e-14)

    def test_strong_dependence_limits(self):
        # an uninformative control set makes g range over the clamped scores
        out = self.model.predict_ordered(self.cell, self.theta(0.999, pi=1.0))
        assert out["cont0"] < 1e-3 and out["cap0"] > 1 - 1e-3

    def test_matches_simulation(self):
        from setcf.oracles import oracle_containment
        th = self.theta(0.6, 0.55)
        for event in ({0}, {6}, {0, 3}, {3, 6}):
            p, se = oracle_containment(self.model, event, self.cell, th, eta_draws=100_000, seed=4)
            assert abs(self.model.containment(event, self.cell, th) - p) <= 3 * se + 2e-3


class TestPredictMultinomial:
    model = Multinomial(J=3)

    def test_singleton_is_argmax(self):
        th = TRUE["multinomial"][0]
        box = Box(((0.4, 0.4), (0.7, 0.7)))
        eta = np.array([0.2, 0.6, 0.7])
        u = self.model.utility_fn(eta, (1,), th)((0.4, 0.7))
        assert self.model.predict_multinomial(eta, (1,), (), box, th) == {int(np.argmax(u)) + 1}

    def test_relabeling_symmetry(self):
        th = ThetaPoint((0.1,) * 6, (0.3,) * 6, PI2)
        box = Box(((0.2, 0.8), (0.2, 0.8)))
        eta = np.array([0.3, 0.5, 0.8])
        base = self.model.predict_multinomial(eta, (0,), (), box, th)
        for perm in itertools.permutations(range(3)):
            got = self.model.predict_multinomial(eta[list(perm)], (0,), (), box, th)
            assert got == {perm.index(j - 1) + 1 for j in base}

    @given(st.integers(0, 2**31 - 1))
    def test_union_of_grid_argmaxes(self, seed):
        rng = np.random.default_rng(seed)
        model, th, cells = random_design("multinomial", rng)
        cell = cells[rng.integers(len(cells))]
        box = cf_box(model.cf(cell, th))
        eta = rng.uniform(0.02, 0.98, 3)
        got = model.predict_multinomial(eta, cell.d, (), box, th)
        u = model.utility_fn(eta, cell.d, th)
        # dense grid in normal scores is a subset of the exact prediction
        grid_union = set()
        axis0 = normal_cdf(np.linspace(normal_score(box.lo[0]), normal_score(box.hi[0]), 100))
        axis1 = normal_cdf(np.linspace(normal_score(box.lo[1]), normal_score(box.hi[1]), 100))
        for v in itertools.product(axis0, axis1):
            grid_union.add(int(np.argmax(u(np.array(v)))) + 1)
        assert grid_union <= got
        # anything extra must be within a whisker of optimal somewhere in the box
        for j in got - grid_union:
            gap = min(max(u(np.array(v))) - u(np.array(v))[j - 1] for v in itertools.product(axis0, axis1))
            assert gap < 0.05

    def test_needs_two_options(self):
        with pytest.raises(ValueError):
            Multinomial(J=1)


class TestAdditiveMean:
    def test_singleton_zero_width(self):
        iv = predict_additive_mean(1.0, lambda v: 2 * v[0], Interval(0.3, 0.3))
        assert iv.lo == iv.hi == pytest.approx(1.6)

    def test_zero_lambda(self):
        iv = predict_additive_mean(0.7, lambda v: 0.0, Interval(0.0, 1.0))
        assert (iv.lo, iv.hi) == (0.7, 0.7)

    @given(rho_st, st.floats(0.05, 0.95), st.integers(0, 1))
    def test_width_matches_grid(self, rho, pi, d):
        model = BinaryRoy(outcome="continuous")
        th = ThetaPoint((0.0, 1.0), (rho,), {((1,), ()): pi})
        cell = Cell((d,), (), (1,))
        iv = model.mean_interval(cell, th)
        lam = model.lam(cell.d, (), th)
        vals = [lam(v) for v in sample_grid(model.cf(cell, th), 2001)]
        assert iv.hi - iv.lo == pytest.approx(max(vals) - min(vals), abs=1e-6)

    def test_censored_truncation_flag(self):
        from setcf.rset import TruncationWarning
        model = make_model("censored")
        th = ThetaPoint((0.0, 1.0), (0.5,), {((0,), ()): 0.5})
        with pytest.warns(TruncationWarning):
            iv = model.mean_interval(Cell((0.0,), (), (0,)), th)
        # lambda increasing in v: inf sits on the truncation bound, sup on the endpoint
        assert iv.lo == pytest.approx(-5.0) and iv.hi == pytest.approx(-0.25)

    def test_interval_bound_ordering(self):
        model = make_model("interval")
        for slope, rho, d_l, width in itertools.product((0.0, 0.5, 2.0), (-0.5, 0.5), (-1.0, 0.5), (0.0, 1.5)):
            th = ThetaPoint((0.1, slope), (rho,), {((0,), ()): 0.2})
            iv = model.mean_interval(Cell((d_l, d_l + width), (), (0,)), th)
            assert iv.lo <= iv.hi + 1e-12

    def test_interval_requires_increasing(self):
        with pytest.raises(InfeasibleThetaError):
            make_model("interval").mean_interval(Cell((0.0, 1.0), (), (0,)),
                                                 ThetaPoint((0.0, -1.0), (0.1,), {((0,), ()): 0.0}))


class TestProperties:
    @given(st.sampled_from(["binary_roy", "ordered", "random_coef", "dynamic"]), st.integers(0, 2**31 - 1))
    def test_exogeneity_collapses_thresholds(self, kind, seed):
        rng = np.random.default_rng(seed)
        model, th, cells = random_design(kind, rng)
        th = th.replace(f_params=(0.0,) * len(th.f_params))
        cell = cells[rng.integers(len(cells))]
        if kind == "ordered":
            g_lo, g_hi = model.g_range(cell, th)
            assert g_lo == g_hi == 0.0
        else:
            fn = model.y2_thresholds if kind == "dynamic" else model.thresholds
            t_lo, t_hi = fn(cell, th)
            assert t_lo == pytest.approx(t_hi, abs=1e-12)

    def test_dynamic_blocks_ordering(self):
        model = DynamicTwoPeriod()
        th = TRUE["dynamic"][0]
        for d, z in itertools.product(itertools.product((0, 1), repeat=3), itertools.product((0, 1), repeat=2)):
            for lo, hi in model.blocks(Cell(d, (), z), th).values():
                assert 0.0 <= lo <= hi <= 1.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown model kind"):
            make_model("probit")
