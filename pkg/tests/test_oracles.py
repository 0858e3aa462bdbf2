import itertools

import numpy as np
import pytest

from setcf.dgp import DgpConfig, population_cells
from setcf.inference import lfp_solve
from setcf.models import BinaryRoy, DynamicTwoPeriod, Multinomial, make_model
from setcf.oracles import (oracle_containment, oracle_dynamic_blocks, oracle_lfp, oracle_region_small,
                           prediction_members)
from setcf.theta import Cell, InfeasibleThetaError, ThetaPoint

from conftest import TRUE


class TestOracleContainment:
    def test_full_support(self):
        th = TRUE["multinomial"][0]
        p, _ = oracle_containment(Multinomial(), {1, 2, 3}, Cell((1,), (), (0,)), th, eta_draws=500,
                                  v_resolution=20)
        assert p == 1.0

    def test_singleton_cf_is_choice_frequency(self):
        model = BinaryRoy(observed_control=True)
        th = ThetaPoint((0.2, 0.5), (0.5,))
        cell = Cell((1,), (), (0.4,))
        p, se = oracle_containment(model, {1}, cell, th, eta_draws=50_000, seed=1)
        h = model.h(cell.d, cell.x, th)((0.4,))
        assert abs(p - h) <= 3 * se

    def test_members_nonempty(self):
        th, options = TRUE["ordered"]
        m = make_model("ordered", **options)
        eta = np.random.default_rng(0).random((1000, 1))
        members = prediction_members(m, Cell((0,), (), (1,)), th, eta, 50)
        assert members.any(axis=1).all()


class TestOracleRegion:
    cfg = DgpConfig("binary_roy", TRUE["binary_roy"][0], 10)

    def test_truth_accepted_and_pi_shift_rejected(self):
        stats = population_cells(self.cfg)
        th0 = self.cfg.theta
        shifted = th0.with_pi({((1,), ()): 0.4})
        mask = oracle_region_small(BinaryRoy(), [th0, shifted], stats)
        assert mask.tolist() == [True, False]


class TestOracleLfp:
    def test_unconstrained(self):
        alt = np.array([0.2, 0.5, 0.3])
        q = oracle_lfp((0, 1, 2), {}, alt)
        np.testing.assert_allclose(q, alt, atol=2e-5)

    def test_complete_model(self):
        cont = {frozenset({0}): 0.2, frozenset({1}): 0.8}
        np.testing.assert_allclose(oracle_lfp((0, 1), cont, [0.5, 0.5]), [0.2, 0.8], atol=1e-12)

    def test_matches_solver(self, rng):
        for _ in range(10):
            c = rng.dirichlet(np.ones(4))[:3] * 0.9
            cont = {frozenset({0}): c[0], frozenset({1}): c[1], frozenset({2}): c[2]}
            alt = rng.dirichlet(np.ones(3))
            np.testing.assert_allclose(oracle_lfp((0, 1, 2), cont, alt), lfp_solve((0, 1, 2), cont, alt),
                                       atol=1e-3)

    def test_infeasible(self):
        with pytest.raises(InfeasibleThetaError):
            oracle_lfp((0, 1), {frozenset({0}): 0.6, frozenset({1}): 0.6}, [0.5, 0.5])

    def test_large_support_rejected(self):
        with pytest.raises(ValueError):
            oracle_lfp((0, 1, 2, 3), {}, [0.25] * 4)


def test_dynamic_blocks_agree():
    model = DynamicTwoPeriod()
    th = TRUE["dynamic"][0]
    for d, z in itertools.islice(itertools.product(itertools.product((0, 1), repeat=3),
                                                   itertools.product((0, 1), repeat=2)), 0, 32, 5):
        cell = Cell(d, (), z)
        exact = model.blocks(cell, th)
        brute = oracle_dynamic_blocks(model, cell, th, resolution=40)
        for name in exact:
            # brute force sits inside the exact range and approaches its ends
            assert exact[name][0] <= brute[name][0] + 1e-12
            assert brute[name][1] <= exact[name][1] + 1e-12
            assert brute[name][0] - exact[name][0] < 1e-3 and exact[name][1] - brute[name][1] < 1e-3
