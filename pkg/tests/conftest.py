"""Shared designs: true parameters per kind and random parameter draws."""
import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from setcf.models import make_model
from setcf.theta import Cell, ThetaPoint

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PI2 = {((0,), ()): 0.3, ((1,), ()): 0.7}


def dynamic_pi(mu1=(0.4, 0.6), pi1=(0.35, 0.65)):
    table = {("mu1", 0, ()): mu1[0], ("mu1", 1, ()): mu1[1], ("pi1", 0, ()): pi1[0], ("pi1", 1, ()): pi1[1]}
    for y1, d1, z2 in itertools.product((0, 1), repeat=3):
        table[("pi2", y1, d1, z2, ())] = 0.3 + 0.1 * y1 + 0.1 * d1 + 0.2 * z2
    return table


def entry_pi():
    table = {}
    for j, z in itertools.product((1, 2), (0, 1)):
        table[("entry", j, 1, z, ())] = 0.3 + 0.1 * z
        table[("entry", j, 0, z, ())] = 0.7 + 0.1 * z
    return table


# true parameter and model options per kind, used for simulation designs
TRUE = {
    "binary_roy": (ThetaPoint((0.2, 0.5), (0.5,), PI2), {}),
    "ordered": (ThetaPoint((0.5,), (-0.4,), PI2, cutoffs=(-0.5, 0.8)), {"n_x": 0}),
    "random_coef": (ThetaPoint((0.2, 0.5), (0.3, -0.4), PI2), {}),
    "multinomial": (ThetaPoint((0, 0.2, -0.1, 0, 0.3, 0.1), (0.3, 0.2, -0.4, 0.1, 0.0, 0.5), PI2), {}),
    "dynamic": (ThetaPoint(tuple(np.linspace(0.2, 0.8, 8)), (0.3, 0.2, -0.3, 0.25, 0.3, -0.2), dynamic_pi()), {}),
    "entry": (ThetaPoint((0.1, 0.5, 0.4), (0.3, -0.2, 0.4), entry_pi()), {}),
    "censored": (ThetaPoint((0.1, 0.5), (0.3,), {((0,), ()): 0.2, ((1,), ()): 0.8}), {}),
    "interval": (ThetaPoint((0.1, 0.5), (0.3,), {((0,), ()): 0.2, ((1,), ()): 0.8}), {}),
}

DISCRETE_KINDS = ("binary_roy", "ordered", "random_coef", "multinomial", "dynamic")


def random_pi(rng, keys) -> dict:
    return {k: float(rng.uniform(0.05, 0.95)) for k in keys}


def random_design(kind: str, rng):
    """(model, theta, cells) with parameters drawn at random for a discrete kind."""
    if kind == "binary_roy":
        model = make_model(kind)
        f = tuple(rng.uniform(-0.95, 0.95, size=rng.integers(1, 3)))
        theta = ThetaPoint(tuple(rng.uniform(-2, 2, 2)), f, random_pi(rng, PI2))
        cells = [Cell((d,), (), (z,)) for d in (0, 1) for z in (0, 1)]
    elif kind == "ordered":
        model = make_model(kind, n_x=1)
        cut = np.sort(rng.uniform(-2, 2, 2))
        keys = [((z,), (x,)) for z in (0, 1) for x in (0, 1)]
        theta = ThetaPoint(tuple(rng.uniform(-2, 2, 2)), (rng.uniform(-0.95, 0.95),), random_pi(rng, keys),
                           cutoffs=tuple(cut))
        cells = [Cell((d,), (x,), (z,)) for d in (0, 1) for x in (0, 1) for z in (0, 1)]
    elif kind == "random_coef":
        model = make_model(kind)
        r = rng.uniform(-0.65, 0.65, 2)
        theta = ThetaPoint(tuple(rng.uniform(-2, 2, 2)), tuple(r), random_pi(rng, PI2))
        cells = [Cell((d,), (), (z,)) for d in (0, 1) for z in (0, 1)]
    elif kind == "multinomial":
        model = make_model(kind, J=3)
        theta = ThetaPoint(tuple(rng.uniform(-1, 1, 6)), tuple(rng.uniform(-0.6, 0.6, 6)), random_pi(rng, PI2))
        cells = [Cell((d,), (), (z,)) for d in (0, 1) for z in (0, 1)]
    elif kind == "dynamic":
        model = make_model(kind)
        keys = list(dynamic_pi())
        theta = ThetaPoint(tuple(rng.uniform(0.02, 0.98, 8)), tuple(rng.uniform(-0.4, 0.4, 6)),
                           random_pi(rng, keys))
        cells = [Cell(d, (), z) for d in itertools.product((0, 1), repeat=3)
                 for z in itertools.product((0, 1), repeat=2)]
    else:
        raise ValueError(kind)
    return model, theta, cells


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
