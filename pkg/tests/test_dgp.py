import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from setcf.cells import estimate_cells, estimate_dynamic
from setcf.dgp import (DgpConfig, SchoolConfig, entry_equilibria, latent_points, population_cells, row_cells,
                       simulate, simulate_school)
from setcf.rset import contains
from setcf.theta import ThetaPoint

from conftest import PI2, TRUE


def config(kind, n=2000, seed=0, **kw):
    theta, opts = TRUE[kind]
    return DgpConfig(kind, theta, n, seed, model_options=opts, **kw)


@pytest.mark.parametrize("kind", sorted(TRUE))
def test_reproducible(kind):
    a, b = simulate(config(kind, 500, 3)), simulate(config(kind, 500, 3))
    pd.testing.assert_frame_equal(a.observed, b.observed)
    pd.testing.assert_frame_equal(a.latent, b.latent)
    assert len(a) == 500
    assert not set(a.latent.columns) & set(a.observed.columns) - {"d_star"}


@pytest.mark.parametrize("kind", sorted(TRUE))
def test_latent_membership(kind):
    data = simulate(config(kind, 1500, 8))
    model = config(kind).model
    theta = TRUE[kind][0]
    for cell, v in zip(row_cells(data), latent_points(data)):
        s = model.cf(cell, theta)
        if kind == "interval":
            s = s[0]
        assert contains(s, v), (cell, v)


def test_exogenous_correlation():
    th = ThetaPoint((0.2, 0.5), (0.0,), PI2)
    data = simulate(DgpConfig("binary_roy", th, 20000, 5))
    r = np.corrcoef(data.latent["u"], data.latent["v"])[0, 1]
    assert abs(r) < 3 / np.sqrt(20000)


def test_propensity_within_binomial_error():
    data = simulate(config("binary_roy", 10_000, 2))
    obs = data.observed
    for z, pi in ((0, 0.3), (1, 0.7)):
        sub = obs[obs.z == z]
        assert abs(sub.d.mean() - pi) <= 3 * np.sqrt(pi * (1 - pi) / len(sub))


def test_entry_without_interaction_has_no_multiplicity():
    table = {}
    for j, z in itertools.product((1, 2), (0, 1)):
        table[("entry", j, 1, z, ())] = 0.5
        table[("entry", j, 0, z, ())] = 0.5
    th = ThetaPoint((0.1, 0.5, 0.4), (0.3, -0.2, 0.4), table)
    for v1, v2 in np.random.default_rng(0).random((2000, 2)):
        assert len(entry_equilibria(v1, v2, (0.5, 0.5), (0.5, 0.5))) == 1
    data = simulate(DgpConfig("entry", th, 500, 1))
    assert len(data) == 500


def test_conditional_independence_of_noise():
    # within fine v-strata the latent outcome noise does not load on z
    data = simulate(config("binary_roy", 40_000, 4))
    lat, z = data.latent, data.observed.z.to_numpy(float)
    strata = np.minimum((lat.v.to_numpy() * 20).astype(int), 19)
    resid_u = lat.u.to_numpy() - pd.Series(lat.u).groupby(strata).transform("mean").to_numpy()
    resid_z = z - pd.Series(z).groupby(strata).transform("mean").to_numpy()
    slope = resid_z @ resid_u / (resid_z @ resid_z)
    se = np.sqrt(np.var(resid_u - slope * resid_z) / (resid_z @ resid_z))
    assert abs(slope) <= 3 * se


@pytest.mark.parametrize("kind", ["binary_roy", "ordered"])
def test_population_cells_match_simulation(kind):
    cfg = config(kind, 60_000, 6)
    pop = population_cells(cfg)
    data = simulate(cfg)
    emp = estimate_cells(data.observed, data.schema, support=cfg.model.support)
    assert set(pop.cells) == set(emp.cells)
    for cell, rec in emp.cells.items():
        se = rec.se_probs()
        assert np.all(np.abs(rec.probs - pop.cells[cell].probs) <= 4 * se + 1e-3)


def test_population_dynamic_matches_simulation():
    cfg = config("dynamic", 80_000, 9)
    pop = population_cells(cfg)
    data = simulate(cfg)
    emp = estimate_dynamic(data.observed, data.schema)
    for cell, rec in emp.cells.items():
        if rec.count < 400:
            continue
        assert abs(rec.probs[1] - pop.cells[cell].probs[1]) <= 4 * rec.se_probs()[1] + 1e-3


def test_population_continuous_mean():
    th, _ = TRUE["binary_roy"]
    cfg = DgpConfig("binary_roy", th, 50_000, 1, model_options={"outcome": "continuous"})
    pop = population_cells(cfg)
    data = simulate(cfg)
    emp = estimate_cells(data.observed, data.schema)
    for cell, rec in emp.cells.items():
        assert abs(rec.mean - pop.cells[cell].mean) <= 4 * rec.se_mean


class TestSchool:
    def test_reproducible(self):
        a = simulate_school(SchoolConfig(300, seed=2))
        b = simulate_school(SchoolConfig(300, seed=2))
        pd.testing.assert_frame_equal(a[0], b[0])

    @given(st.integers(0, 1000))
    def test_stable_reports(self, seed):
        obs, lat = simulate_school(SchoolConfig(40, seed=seed))
        cut = 0.5
        for (_, row), pref in zip(obs.iterrows(), lat.preference):
            order = [int(o) for o in pref.split()]
            feasible = {0} | {k for k in (1, 2, 3) if row[f"s{k}"] >= cut}
            fav = next(o for o in order if o in feasible)
            listed = [int(row[c]) for c in ("r1", "r2") if row[c] != 0]
            assert row.assigned == fav
            assert listed == [o for o in order if o in listed]
            assert fav == 0 or fav in listed

    def test_truthful_lists_every_school(self):
        obs, _ = simulate_school(SchoolConfig(50, seed=1, truthful=True))
        reports = obs[["r1", "r2", "r3"]].to_numpy()
        assert all(sorted(r) == [1, 2, 3] for r in reports)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SchoolConfig(10, cutoffs=(0.5,))
