import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import ndtri

from setcf.containment import (build_table, capacity, complement, containment, containment_binary,
                               containment_multinomial_mc, containment_ordered, event_class)
from setcf.latent import normal_cdf, normal_score
from setcf.models import BinaryRoy, Multinomial, OrderedChoice
from setcf.oracles import oracle_containment
from setcf.rset import Box
from setcf.theta import Cell, ThetaPoint

from conftest import DISCRETE_KINDS, PI2, random_design


class TestBinary:
    def test_complete_model(self):
        m = BinaryRoy(observed_control=True)
        # choose mu so H = 0.7 at v = 0.5
        th = ThetaPoint((float(np.sqrt(0.75) * ndtri(0.7)), 0.0), (0.5,))
        c1 = containment_binary({1}, (0,), (), (0.5,), th, m)
        c0 = containment_binary({0}, (0,), (), (0.5,), th, m)
        assert c1 == pytest.approx(0.7) and c0 == pytest.approx(0.3) and c0 + c1 == pytest.approx(1.0)

    def test_incompleteness_gap(self):
        th = ThetaPoint((0.2, 0.5), (0.6,), {((1,), ()): 1.0})
        c1 = containment_binary({1}, (1,), (), (1,), th)
        c0 = containment_binary({0}, (1,), (), (1,), th)
        assert c0 + c1 < 1.0

    def test_matches_simulation(self):
        model = BinaryRoy()
        th = ThetaPoint((0.2, 0.5), (-0.5,), PI2)
        for d, z in itertools.product((0, 1), (0, 1)):
            cell = Cell((d,), (), (z,))
            for event in ({0}, {1}):
                p, _ = oracle_containment(model, event, cell, th, eta_draws=100_000, seed=d + 2 * z)
                assert model.containment(event, cell, th) == pytest.approx(p, abs=0.005)


class TestOrdered:
    model = OrderedChoice(n_x=0)

    def test_redundancy_identity(self, rng):
        for _ in range(20):
            th = ThetaPoint((rng.normal(),), (rng.uniform(-0.9, 0.9),), {((0,), ()): rng.uniform(0.1, 0.9)},
                            cutoffs=(-0.5, 0.7))
            cell = Cell((int(rng.integers(2)),), (), (0,))
            lhs = containment_ordered({0, 6}, cell.d, (), (0,), th, self.model)
            rhs = (containment_ordered({0}, cell.d, (), (0,), th, self.model)
                   + containment_ordered({6}, cell.d, (), (0,), th, self.model))
            assert lhs == pytest.approx(rhs, abs=1e-15)

    def test_standard_normal_case(self):
        th = ThetaPoint((0.0,), (0.0,), {((0,), ()): 0.5}, cutoffs=(-1.0, 1.0))
        assert containment_ordered({0}, (1,), (), (0,), th, self.model) == pytest.approx(normal_cdf(-1.0))
        assert containment_ordered({6}, (1,), (), (0,), th, self.model) == pytest.approx(1 - normal_cdf(1.0))

    def test_every_entry_matches_simulation(self):
        th = ThetaPoint((0.4,), (0.5,), {((0,), ()): 0.4}, cutoffs=(-0.6, 0.9))
        for d in (0, 1):
            cell = Cell((d,), (), (0,))
            for event in event_class((0, 3, 6)):
                p, se = oracle_containment(self.model, event, cell, th, eta_draws=200_000, seed=11 + d)
                # the floor covers grid resolution where se vanishes
                assert abs(self.model.containment(event, cell, th) - p) <= 3 * se + 1e-3

    def test_capacity_formula(self):
        th = ThetaPoint((0.4,), (0.5,), {((0,), ()): 0.4}, cutoffs=(-0.6, 0.9))
        cell = Cell((1,), (), (0,))
        g_lo, g_hi = self.model.g_range(cell, th)
        scale = np.sqrt(1 - 0.25)
        expected = normal_cdf((-0.6 - 0.4 - g_lo) / scale)
        assert capacity(self.model, {0}, cell, th) == pytest.approx(expected, abs=1e-12)


class TestMultinomial:
    model = Multinomial(J=3)
    theta = ThetaPoint((0, 0.2, -0.1, 0, 0.3, 0.1), (0.3, 0.2, -0.4, 0.1, 0.0, 0.5), PI2)

    def test_full_support(self):
        assert containment_multinomial_mc({1, 2, 3}, (1,), (), (0,), self.theta, n_draws=1000) == (1.0, 0.0)

    def test_draw_floor(self):
        with pytest.raises(ValueError):
            containment_multinomial_mc({1}, (1,), (), (0,), self.theta, n_draws=999)

    def test_complete_limit_two_options(self):
        model = Multinomial(J=2)
        th = ThetaPoint((0.0, 0.3, 0.0, 0.0), (0.4, 0.0, -0.2, 0.0), PI2)
        box = Box(((0.6, 0.6), (0.5, 0.5)))
        est, se = containment_multinomial_mc({2}, (0,), (), (0,), th, n_draws=200_000, seed=2, model=model,
                                             cf=box)
        # P(u2 > u1) with u_j = mu_j + load_j n(v) + scale_j eps_j, v fixed
        shift = 0.3 + (-0.2 - 0.4) * float(normal_score(0.6))
        s1, s2 = np.sqrt(1 - 0.16), np.sqrt(1 - 0.04)
        f = lambda e: normal_cdf((shift + s2 * e) / s1) * np.exp(-0.5 * e * e) / np.sqrt(2 * np.pi)
        exact = integrate.quad(f, -12, 12)[0]
        assert abs(est - exact) <= 3 * se + 1e-4

    def test_monotone_under_shared_seed(self):
        events = event_class(self.model.support)
        cell = Cell((1,), (), (1,))
        values = {e: containment(self.model, e, cell, self.theta, n_draws=2000, seed=5)[0] for e in events}
        for a, b in itertools.product(events, events):
            if a <= b:
                assert values[a] <= values[b]

    def test_superadditive(self):
        cell = Cell((0,), (), (1,))
        c = lambda e: containment(self.model, e, cell, self.theta, n_draws=4000, seed=1)[0]
        assert c({1, 2}) >= c({1}) + c({2}) - 1e-15


class TestEventClass:
    def test_binary(self):
        assert event_class((0, 1)) == [frozenset({0}), frozenset({1})]

    def test_ordered_pruned(self):
        got = event_class((0, 3, 6), prune=True, kind="ordered")
        assert set(got) == {frozenset({0}), frozenset({6}), frozenset({0, 3}), frozenset({3, 6})}

    def test_three_unpruned(self):
        assert len(event_class((1, 2, 3))) == 6

    def test_too_large(self):
        with pytest.raises(ValueError, match="manually"):
            event_class(range(9))


class TestTable:
    @given(st.sampled_from(DISCRETE_KINDS), st.integers(0, 2**31 - 1))
    def test_conjugacy_and_bounds(self, kind, seed):
        rng = np.random.default_rng(seed)
        model, th, cells = random_design(kind, rng)
        cells = [cells[i] for i in rng.choice(len(cells), 2, replace=False)]
        table = build_table(model, th, cells, n_draws=1000, seed=seed)
        for (event, cell), (cont, cap, _) in table.entries.items():
            comp = complement(event, model.support)
            assert cont + table.capacity(comp, cell) == pytest.approx(1.0, abs=1e-12)
            assert -1e-12 <= cont <= cap + 1e-12 <= 1.0 + 2e-12

    def test_completeness_limit(self):
        model = BinaryRoy(observed_control=True)
        th = ThetaPoint((0.2, 0.5), (0.4,))
        table = build_table(model, th, [Cell((1,), (), (0.3,))])
        cell = Cell((1,), (), (0.3,))
        assert table.containment({0}, cell) + table.containment({1}, cell) == pytest.approx(1.0)
        assert table.containment({1}, cell) == pytest.approx(table.capacity({1}, cell))

    def test_csv(self, tmp_path):
        model = OrderedChoice(n_x=0)
        th = ThetaPoint((0.3,), (0.4,), {((0,), ()): 0.5}, cutoffs=(-0.5, 0.8))
        table = build_table(model, th, [Cell((1,), (), (0,))])
        path = tmp_path / "table.csv"
        table.to_csv(path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert set(rows[0]) == {"cell", "event", "containment", "capacity", "se"}
