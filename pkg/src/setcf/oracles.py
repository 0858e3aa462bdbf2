"""Brute-force reference computations used to validate the fast paths.

Each oracle works from the model equations directly (latent draws, dense
grids, exhaustive search) and shares no code with the closed forms it checks
beyond the normal-score helpers.
"""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .latent import normal_cdf, normal_score
from .models import BinaryRoy, Multinomial, OrderedChoice, as_event
from .theta import Cell, InfeasibleThetaError, ThetaPoint

V_RESOLUTION_1D = 400
V_RESOLUTION_2D = 200
ETA_DRAWS = 100_000
CHUNK = 2_000


def _draws(seed: int, n: int, width: int) -> np.ndarray:
    return np.random.Generator(np.random.Philox(key=seed + 7919)).random((n, width))


def _score_axis(lo: float, hi: float, resolution: int) -> np.ndarray:
    """Points of [lo, hi] equally spaced in the normal-score coordinate, endpoints included."""
    w = np.linspace(normal_score(lo), normal_score(hi), resolution)
    return np.clip(np.concatenate([[lo], normal_cdf(w[1:-1]), [hi]]), lo, hi)


def _selection_grid_1d(cell: Cell, theta: ThetaPoint, model, resolution: int) -> np.ndarray:
    """Grid over {v : D = 1{pi >= v}} from the selection equation, boundary included."""
    if getattr(model, "observed_control", False):
        return np.array([float(cell.z[0])])
    pi = theta.pi((cell.z, cell.x))
    lo, hi = (0.0, pi) if cell.d[0] == 1 else (pi, 1.0)
    return _score_axis(lo, hi, resolution)


def _selection_grid_2d(cell: Cell, theta: ThetaPoint, resolution: int) -> np.ndarray:
    z = int(cell.z[0])
    pis = (theta.pi(((0,), cell.x)), theta.pi(((1,), cell.x)))
    axes = [_score_axis(0.0, 1.0, resolution), _score_axis(0.0, 1.0, resolution)]
    axes[z] = _score_axis(0.0, pis[z], resolution) if cell.d[0] == 1 else _score_axis(pis[z], 1.0, resolution)
    v0, v1 = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([v0.ravel(), v1.ravel()])


def prediction_members(model, cell: Cell, theta: ThetaPoint, eta: np.ndarray, v_resolution: int = None) -> np.ndarray:
    """(n, |Y|) indicator that outcome y is predicted at some grid v, per draw."""
    support = tuple(model.support)
    if isinstance(model, Multinomial):
        grid = _selection_grid_2d(cell, theta, v_resolution or V_RESOLUTION_2D)
        J = model.J
        mu = np.asarray(theta.mu_params[:J]) + np.asarray(theta.mu_params[J:]) * cell.d[0]
        load = np.asarray(theta.f_params).reshape(J, -1)
        scale = np.sqrt(1.0 - (load ** 2).sum(axis=1))
        shift = normal_score(grid) @ load.T  # (G, J)
        out = np.zeros((len(eta), J), dtype=bool)
        for start in range(0, len(eta), 200):
            e = normal_score(eta[start:start + 200])  # (n, J)
            util = mu[None, None, :] + shift[None, :, :] + scale[None, None, :] * e[:, None, :]
            top = util.max(axis=2, keepdims=True)
            best = util >= top - 1e-12 * (1.0 + np.abs(top))
            out[start:start + 200] = best.any(axis=1)
        return out
    v = _selection_grid_1d(cell, theta, model, v_resolution or V_RESOLUTION_1D)
    d = cell.d[0]
    if isinstance(model, OrderedChoice):
        rho = theta.f_params[0]
        p = theta.mu_params
        hiv = cell.x[0] if model.n_x else 0.0
        mu = p[0] * d + (p[1] * d * hiv if model.n_x else 0.0) + float(np.dot(p[2:], cell.x[1:]))
    elif isinstance(model, BinaryRoy):
        rho = theta.f_params[d] if len(theta.f_params) == 2 else theta.f_params[0]
        mu = theta.mu_params[0] + theta.mu_params[1] * d + float(np.dot(theta.mu_params[2:], cell.x))
    else:
        raise NotImplementedError(f"no containment oracle for kind {model.kind}")
    out = np.zeros((len(eta), len(support)), dtype=bool)
    g = rho * normal_score(v)
    for start in range(0, len(eta), CHUNK):
        e = np.sqrt(1.0 - rho ** 2) * normal_score(eta[start:start + CHUNK, 0])
        u = g[None, :] + e[:, None]  # latent U at every (draw, v)
        if isinstance(model, OrderedChoice):
            c_lo, c_hi = theta.cutoffs
            s = mu + u
            y = np.where(s <= c_lo, 0, np.where(s <= c_hi, 1, 2))
        else:
            y = (mu >= u).astype(int)
        for k in range(len(support)):
            out[start:start + CHUNK, k] = (y == k).any(axis=1)
    return out


def oracle_containment(model, event, cell: Cell, theta: ThetaPoint, eta_draws: int = ETA_DRAWS,
                       v_resolution: int = None, seed: int = 0, members: np.ndarray = None) -> tuple:
    """(frequency, se) of {prediction set over the v-grid lies inside event}."""
    support = tuple(model.support)
    if members is None:
        width = model.J if isinstance(model, Multinomial) else 1
        members = prediction_members(model, cell, theta, _draws(seed, eta_draws, width), v_resolution)
    event = as_event(event)
    outside = [k for k, y in enumerate(support) if y not in event]
    inside = ~members[:, outside].any(axis=1) if outside else np.ones(len(members), dtype=bool)
    p = float(inside.mean())
    return p, float(np.sqrt(max(p * (1 - p), 1e-12) / len(members)))


def oracle_region_small(model, points: Sequence[ThetaPoint], stats, events=None, tol: float = 1e-9) -> np.ndarray:
    """Exhaustive acceptance at slack 0 (+tol) with exact containment values.

    A point is accepted iff every Artstein inequality holds and every
    selection index it carries equals the cell propensity.
    """
    support = tuple(model.support)
    if events is None:
        events = [frozenset(c) for r in range(1, len(support)) for c in itertools.combinations(support, r)]
    mask = np.zeros(len(points), dtype=bool)
    for p, theta in enumerate(points):
        ok = True
        for key, (pi_hat, _) in stats.propensity.items():
            if key in theta.pi_table and abs(theta.pi_table[key] - pi_hat) > tol:
                ok = False
                break
        for cell, rec in stats.cells.items():
            if not ok:
                break
            for event in events:
                prob = sum(rec.probs[support.index(y)] for y in event)
                if model.containment(event, cell, theta) > prob + tol:
                    ok = False
                    break
        mask[p] = ok
    return mask


def _coordinate_range(support, cont: dict, k: int) -> tuple:
    """[lo, hi] for q_k implied by the declared containment values alone."""
    y = support[k]
    lo = float(cont.get(frozenset({y}), 0.0))
    rest = frozenset(support) - {y}
    hi = 1.0 - float(cont.get(rest, 0.0))
    return max(lo, 0.0), min(hi, 1.0)


def oracle_lfp(support: Sequence, cont: dict, alternative, resolution: int = None) -> np.ndarray:
    """Grid search for max sum p log q under q(A) >= C(A).

    The search covers the coordinate ranges implied by singleton and
    co-singleton constraints (endpoints included): 10^4 points for two
    outcomes; for three, a 501 x 501 grid over the two narrowest coordinates
    followed by a local refinement at 1/200 of the step.
    """
    support = tuple(support)
    p = np.asarray(alternative, dtype=float)
    masks = [(np.array([y in as_event(e) for y in support]), float(v)) for e, v in cont.items()]

    def best_of(q):
        ok = (q >= -1e-12).all(axis=1)
        for m, v in masks:
            ok &= q[:, m].sum(axis=1) >= v - 1e-12
        if not ok.any():
            return None
        q = q[ok]
        with np.errstate(divide="ignore"):
            val = np.where(p > 0, p * np.log(np.maximum(q, 1e-300)), 0.0).sum(axis=1)
        return q[int(np.argmax(val))]

    ranges = [_coordinate_range(support, cont, k) for k in range(len(support))]
    if any(lo > hi + 1e-12 for lo, hi in ranges):
        raise InfeasibleThetaError("no distribution satisfies the containment constraints")
    if len(support) == 2:
        lo, hi = ranges[1]
        q1 = np.linspace(lo, max(hi, lo), resolution or 10_001)
        best = best_of(np.column_stack([1 - q1, q1]))
    elif len(support) == 3:
        n = resolution or 501
        # free coordinates: the two narrowest ranges; the widest is implied
        order = np.argsort([hi - lo for lo, hi in ranges])
        a, b, c = (int(i) for i in order)

        def assemble(qa, qb):
            q = np.empty((qa.size, 3))
            q[:, a], q[:, b] = qa.ravel(), qb.ravel()
            q[:, c] = 1.0 - q[:, a] - q[:, b]
            return q

        axes = [np.linspace(ranges[i][0], max(ranges[i]), n) for i in (a, b)]
        best = best_of(assemble(*np.meshgrid(*axes, indexing="ij")))
        if best is not None:
            steps = [max(ax[1] - ax[0], 1e-12) if len(ax) > 1 else 0.0 for ax in axes]
            fine = [best[i] + np.linspace(-2 * h, 2 * h, 801) for i, h in zip((a, b), steps)]
            fine = [np.clip(f, *ranges[i]) for f, i in zip(fine, (a, b))]
            best = best_of(assemble(*np.meshgrid(*fine, indexing="ij")))
    else:
        raise ValueError("simplex oracle supports two or three outcomes")
    if best is None:
        raise InfeasibleThetaError("no distribution satisfies the containment constraints")
    return best


def oracle_dynamic_blocks(model, cell: Cell, theta: ThetaPoint, resolution: int = 60) -> dict:
    """(inf, sup) of each sequential node probability over a dense latent grid.

    The control box over (U1, V1, V2) is covered by ``resolution`` points per
    coordinate (endpoints included) and node probabilities come straight from
    the chained conditional laws.
    """
    y1, d1, d2 = cell.d
    z1, z2 = cell.z
    x = cell.x
    mu1 = theta.pi(("mu1", d1, x))
    pi1 = theta.pi(("pi1", z1, x))
    pi2 = theta.pi(("pi2", y1, d1, z2, x))
    side = lambda flag, idx: (0.0, idx) if flag == 1 else (idx, 1.0)
    u1 = np.linspace(*side(y1, mu1), resolution)
    v1 = np.linspace(*side(d1, pi1), resolution)
    v2 = np.linspace(*side(d2, pi2), resolution)
    ch = model.chain(theta)
    gu, gv1, gv2 = np.meshgrid(u1, v1, v2, indexing="ij")
    prev3 = np.column_stack([gv1.ravel(), gu.ravel(), gv2.ravel()])  # chain order V1, U1, V2
    mu2 = model.mu2(y1, d1, d2, theta)
    h_y2 = ch.conditional_cdf(3, np.full(len(prev3), mu2), prev3)
    hu, hv = np.meshgrid(u1, v1, indexing="ij")
    prev2 = np.column_stack([hv.ravel(), hu.ravel()])
    h_d2 = ch.conditional_cdf(2, np.full(len(prev2), pi2), prev2)
    h_y1 = ch.conditional_cdf(1, np.full(len(v1), mu1), v1[:, None])
    return {name: (float(h.min()), float(h.max())) for name, h in (("y2", h_y2), ("d2", h_d2), ("y1", h_y1))}


def oracle_functional_mc(functional, model, theta: ThetaPoint, n_draws: int = 400_000, seed: int = 0) -> tuple:
    """(estimate, se) of a structural functional from simulated potential outcomes.

    Potential outcomes share the draw (V, eta) across treatment arms.
    """
    u = _draws(seed, n_draws, 2)
    v, eta = u[:, 0], u[:, 1]
    f = functional

    def outcome(d, x):
        if isinstance(model, OrderedChoice):
            rho = theta.f_params[0]
            p = theta.mu_params
            mu = p[0] * d + (p[1] * d * x[0] if model.n_x else 0.0) + float(np.dot(p[2:], x[1:]))
            s = mu + rho * normal_score(v) + np.sqrt(1 - rho ** 2) * normal_score(eta)
            c_lo, c_hi = theta.cutoffs
            return np.where(s <= c_lo, 0.0, np.where(s <= c_hi, 3.0, 6.0))
        rho = theta.f_params[d] if len(theta.f_params) == 2 else theta.f_params[0]
        mu = theta.mu_params[0] + theta.mu_params[1] * d + float(np.dot(theta.mu_params[2:], x))
        latent = rho * normal_score(v) + np.sqrt(1 - rho ** 2) * normal_score(eta)
        return (mu >= latent).astype(float) if model.outcome == "binary" else mu + latent

    weights = f.weights()
    pick = np.searchsorted(np.cumsum([w for _, w in weights]), _draws(seed + 1, n_draws, 1)[:, 0], side="right")
    pick = np.minimum(pick, len(weights) - 1)
    sample = np.empty(n_draws)
    for i, (x, _) in enumerate(weights):
        rows = pick == i
        if f.name == "ASF":
            sample[rows] = outcome(f.d, x)[rows]
        elif f.name in ("DSF", "QSF"):
            sample[rows] = outcome(f.d, x)[rows] if f.name == "QSF" else (outcome(f.d, x) <= f.y)[rows]
        elif f.name == "PRSF":
            treat = theta.pi((f.z, x)) >= v
            sample[rows] = np.where(treat, outcome(1, x), outcome(0, x))[rows]
        else:
            base = min(model.support)
            sample[rows] = ((outcome(0, x) <= base) & (outcome(1, x) > base))[rows]
    if f.name == "QSF":
        return float(np.quantile(sample, f.tau, method="inverted_cdf")), np.nan
    return float(sample.mean()), float(sample.std() / np.sqrt(n_draws))
