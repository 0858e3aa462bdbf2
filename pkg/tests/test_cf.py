import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setcf import cf
from setcf.rset import Box, FiniteSet, Interval, TaggedUnion, contains, sample_grid
from setcf.theta import InfeasibleThetaError, ThetaPoint


def pi_theta(table):
    return ThetaPoint((0.0,), (0.0,), table)


class TestBinaryRoy:
    def test_branches(self):
        th = pi_theta({((1,), ()): 0.6})
        assert cf.cf_binary_roy(1, (1,), (), th) == Interval(0.0, 0.6)
        assert cf.cf_binary_roy(0, (1,), (), th) == Interval(0.6, 1.0)

    def test_uninformative(self):
        th = pi_theta({((1,), ()): 1.0})
        assert cf.cf_binary_roy(1, (1,), (), th) == Interval(0.0, 1.0)

    def test_out_of_range_index(self):
        with pytest.raises(InfeasibleThetaError):
            cf.cf_binary_roy(1, (1,), (), pi_theta({((1,), ()): 1.2}))


class TestRandomCoef:
    th = pi_theta({((0,), ()): 0.35, ((1,), ()): 0.6})

    def test_z1_d1_leaves_v0_free(self):
        s = cf.cf_random_coef(1, 1, (), self.th)
        assert contains(s, (0.99, 0.6)) and contains(s, (0.0, 0.1))
        assert not contains(s, (0.5, 0.61))

    def test_z0_d0(self):
        s = cf.cf_random_coef(0, 0, (), self.th)
        assert contains(s, (0.35, 0.9)) and not contains(s, (0.3, 0.5))

    def test_area_matches_propensity(self):
        # Monte-Carlo area of the (d=1, z=1) region
        s = cf.cf_random_coef(1, 1, (), self.th)
        pts = np.random.default_rng(0).random((20000, 2))
        area = np.mean([contains(s, p) for p in pts])
        assert abs(area - 0.6) < 3 * np.sqrt(0.24 / 20000)

    def test_binary_instrument_only(self):
        with pytest.raises(ValueError):
            cf.cf_random_coef(1, 2, (), self.th)


class TestDynamic:
    def table(self, value=None):
        out = {}
        for d1, x in itertools.product((0, 1), [()]):
            out[("mu1", d1, x)] = 0.4 if value is None else value
        for z1 in (0, 1):
            out[("pi1", z1, ())] = 0.55 if value is None else value
        for y1, d1, z2 in itertools.product((0, 1), repeat=3):
            out[("pi2", y1, d1, z2, ())] = 0.3 if value is None else value
        return pi_theta(out)

    def test_branch_selection(self):
        th = self.table()
        box = cf.cf_dynamic(1, 1, 0, (0, 1), (), th)
        assert box == Box(((0.0, 0.4), (0.0, 0.55), (0.3, 1.0)))

    def test_all_half(self):
        box = cf.cf_dynamic(1, 1, 1, (0, 0), (), self.table(0.5))
        assert box == Box(((0, 0.5), (0, 0.5), (0, 0.5)))

    @given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), st.floats(0.01, 0.99))
    def test_vertices_satisfy_threshold_equations(self, y1, d1, d2, value):
        th = self.table(value)
        box = cf.cf_dynamic(y1, d1, d2, (1, 0), (), th)
        for u1, v1, v2 in sample_grid(box, 2):
            assert (value >= u1) if y1 else (value <= u1)
            assert (value >= v1) if d1 else (value <= v1)
            assert (value >= v2) if d2 else (value <= v2)


class TestEntry:
    def theta(self, a=0.3, b=0.7):
        table = {}
        for j, z in itertools.product((1, 2), (0, 1)):
            table[("entry", j, 1, z, ())] = a
            table[("entry", j, 0, z, ())] = b
        return pi_theta(table)

    def test_multiplicity_box(self):
        regions = cf.entry_regions((0, 0), (), self.theta())
        assert regions["multi"] == Box(((0.3, 0.7), (0.3, 0.7)))

    def test_no_interaction_zero_area(self):
        regions = cf.entry_regions((0, 0), (), self.theta(0.5, 0.5))
        lo, hi = regions["multi"].lo, regions["multi"].hi
        assert np.prod(hi - lo) == 0.0

    def test_substitutes_required(self):
        with pytest.raises(ValueError):
            cf.entry_regions((0, 0), (), self.theta(0.7, 0.3))

    def test_outcome_branches(self):
        th = self.theta()
        s00 = cf.cf_entry_game((0, 0), (0, 0), (), th)
        assert isinstance(s00, TaggedUnion) and len(s00.parts) == 2
        s10 = cf.cf_entry_game((1, 0), (0, 0), (), th)
        assert contains(s10, (0.5, 0.5, 1)) and not contains(s10, (0.5, 0.5, 0))
        s01 = cf.cf_entry_game((0, 1), (0, 0), (), th)
        assert contains(s01, (0.5, 0.5, 0)) and not contains(s01, (0.5, 0.5, 1))


class TestContinuousTreatment:
    def test_censored(self):
        th = pi_theta({((0,), ()): 0.5})
        assert cf.cf_censored(2.0, (0,), (), th) == Interval(1.5, 1.5)
        assert cf.cf_censored(0.0, (0,), (), th) == Interval(-np.inf, -0.5)

    def test_interval_point_observation(self):
        v, d = cf.cf_interval_treatment(1.0, 1.0, (0,), (), pi_theta({((0,), ()): 0.2}))
        assert v == Interval(0.8, 0.8) and d == Interval(1.0, 1.0)

    def test_interval_wide(self):
        v, d = cf.cf_interval_treatment(0.0, 2.0, (0,), (), pi_theta({((0,), ()): 0.0}))
        assert v == Interval(0.0, 2.0) and d == Interval(0.0, 2.0)


class TestLocalPreference:
    cutoffs = (0.5, 0.5, 0.5)

    def test_singleton_when_a_equals_b(self):
        # school 1 feasible; report lists 2 first so a = b = 2
        s = cf.cf_local_pref((0.7, 0.8, 0.2), [2, 1], self.cutoffs, 1)
        assert s == FiniteSet(((2, 2),))

    def test_second_branch_adds_unlisted_feasible(self):
        # a = 1, b = 0, school 3 feasible but unlisted
        s = cf.cf_local_pref((0.7, 0.2, 0.9), [1], self.cutoffs, 1)
        assert set(s.elements) == {(1, 0), (1, 3)}

    def test_ties_rejected(self):
        with pytest.raises(ValueError):
            cf.cf_local_pref((0.5, 0.2, 0.9), [1], self.cutoffs, 1)

    def test_exhaustive_truth_table(self):
        """Every true preference consistent with a stable report yields its Q_j in the set."""
        J, cut = 3, self.cutoffs
        score_grid = [s for s in itertools.product((0.3, 0.7), repeat=J)]
        options = list(range(J + 1))
        checked = 0
        for scores, order in itertools.product(score_grid, itertools.permutations(options)):
            acceptable = list(order[:order.index(0)])
            feasible = {0} | {k + 1 for k in range(J) if scores[k] > cut[k]}
            fav = next(o for o in order if o in feasible)
            for j in range(1, J + 1):
                truth = (next(o for o in order if o in feasible | {j}), next(o for o in order if o in feasible - {j}))
                for size in range(0, 2):  # K = 1
                    for report in itertools.combinations(acceptable, size):
                        report = [o for o in order if o in report]
                        assigned = next((o for o in report if o in feasible), 0)
                        if assigned != fav:
                            continue
                        s = cf.cf_local_pref(scores, report, cut, j)
                        assert truth in s.elements, (scores, order, report, j)
                        checked += 1
        assert checked > 100
