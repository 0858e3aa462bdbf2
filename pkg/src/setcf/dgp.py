"""Seeded data-generating processes for every model kind and exact population cells."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .cells import CellRecord, CellStats, Schema
from .latent import normal_cdf, normal_score, residual_scale, vquad
from .models import (BinaryRoy, DynamicTwoPeriod, EntryGame, Multinomial, OrderedChoice, RandomCoefSel,
                     CensoredSel, IntervalTreatment, ModelSpec, make_model)
from .theta import Cell, ThetaPoint, stable_key

CHUNK = 1 << 16


@dataclass(frozen=True)
class DgpConfig:
    """Synthetic design.

    Attributes
    ----------
    kind : model kind name (see ``models.KINDS``)
    theta : true parameter point
    n : number of rows
    seed : master seed
    z_values : instrument support, drawn uniformly (per instrument for two-instrument kinds)
    x_values : covariate support (tuples), drawn uniformly
    control_values : optional finite support for an observed control (singleton-CF designs)
    p_s : entry-game equilibrium selection probability
    model_options : keyword options for the model kind
    """

    kind: str
    theta: ThetaPoint
    n: int
    seed: int = 0
    z_values: tuple = (0, 1)
    x_values: tuple = ((),)
    control_values: Optional[tuple] = None
    p_s: float = 0.5
    model_options: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        object.__setattr__(self, "x_values", tuple(tuple(x) if isinstance(x, (tuple, list)) else (x,)
                                                   for x in self.x_values))
        opts = self.model_options
        if isinstance(opts, dict):
            opts = tuple(sorted(opts.items()))
        object.__setattr__(self, "model_options", tuple(opts))

    @property
    def model(self) -> ModelSpec:
        return make_model(self.kind, **dict(self.model_options))


@dataclass
class Dataset:
    """Observable rows plus a latent sidecar kept apart from estimation code."""

    kind: str
    observed: pd.DataFrame
    latent: pd.DataFrame
    schema: Schema

    def __len__(self):
        return len(self.observed)

    def to_csv(self, path, latent_path=None) -> None:
        self.observed.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        if latent_path is not None:
            self.latent.to_csv(latent_path, index=False, float_format="%.10g", lineterminator="\n")


def chunk_uniforms(seed: int, n: int, width: int, stream: int = 0) -> np.ndarray:
    """(n, width) uniforms from per-chunk counter-based generators."""
    out = np.empty((n, width))
    for c, start in enumerate(range(0, n, CHUNK)):
        stop = min(n, start + CHUNK)
        gen = np.random.Generator(np.random.Philox(key=stable_key(int(seed), int(stream), c)))
        out[start:stop] = gen.random((stop - start, width))
    return out


def _pick(values, u) -> list:
    values = list(values)
    idx = np.minimum((u * len(values)).astype(int), len(values) - 1)
    return [values[i] for i in idx]


def _pi_lookup(theta: ThetaPoint, keys) -> np.ndarray:
    return np.array([theta.pi(k) for k in keys])


def default_schema(model: ModelSpec, n_x: Optional[int] = None) -> Schema:
    n_x = model.n_x if n_x is None else n_x
    xs = tuple(f"x{k + 1}" for k in range(n_x))
    if isinstance(model, DynamicTwoPeriod):
        return Schema("y", ("y1", "d1", "d2"), xs, ("z1", "z2"))
    if isinstance(model, EntryGame):
        return Schema("y", ("d1", "d2"), xs, ("z1", "z2"))
    if isinstance(model, IntervalTreatment):
        return Schema("y", ("d_l", "d_u"), xs, ("z",))
    return Schema("y", ("d",), xs, ("z",))


def simulate(config: DgpConfig) -> Dataset:
    """Draw a dataset for the configured kind."""
    model = config.model
    sim = {
        BinaryRoy: _sim_threshold, OrderedChoice: _sim_threshold, RandomCoefSel: _sim_random_coef,
        Multinomial: _sim_multinomial, DynamicTwoPeriod: _sim_dynamic, EntryGame: _sim_entry,
        CensoredSel: _sim_censored, IntervalTreatment: _sim_interval,
    }[type(model)]
    obs, lat = sim(config, model)
    x_cols = {f"x{k + 1}": [x[k] for x in obs.pop("_x")] for k in range(len(config.x_values[0]))}
    observed = pd.DataFrame({**{k: v for k, v in obs.items()}, **x_cols})
    schema = default_schema(model, len(config.x_values[0]))
    observed = observed[[schema.y, *schema.d, *schema.x, *schema.z]]
    return Dataset(config.kind, observed, pd.DataFrame(lat), schema)


def _draw_zx(config: DgpConfig, u_z, u_x):
    return _pick(config.z_values, u_z), _pick(config.x_values, u_x)


def _sim_threshold(config, model):
    th = config.theta
    n = config.n
    u = chunk_uniforms(config.seed, n, 4)
    z, x = _draw_zx(config, u[:, 0], u[:, 1])
    if config.control_values is not None:
        v = np.asarray(_pick(config.control_values, u[:, 2]), dtype=float)
        z_col = v
        pi = _pi_lookup(th, [((vi,), xi) for vi, xi in zip(v, x)])
    else:
        v = u[:, 2]
        z_col = np.asarray(z)
        pi = _pi_lookup(th, [((zi,), xi) for zi, xi in zip(z, x)])
    d = (pi >= v).astype(int)
    eta = u[:, 3]
    mu = np.array([model.mu(di, xi, th) for di, xi in zip(d, x)])
    if isinstance(model, OrderedChoice):
        rho = th.rho
        latent_u = rho * normal_score(v) + np.sqrt(1 - rho ** 2) * normal_score(eta)
        c_lo, c_hi = th.cutoffs
        s = mu + latent_u
        y = np.where(s <= c_lo, 0, np.where(s <= c_hi, 3, 6))
    else:
        rho = np.array([model.rho(di, th) for di in d])
        latent_u = rho * normal_score(v) + np.sqrt(1 - rho ** 2) * normal_score(eta)
        y = (mu >= latent_u).astype(int) if model.outcome == "binary" else mu + latent_u
    return {"y": y, "d": d, "z": z_col, "_x": x}, {"v": v, "u": latent_u, "eta": eta}


def _sim_random_coef(config, model):
    th = config.theta
    u = chunk_uniforms(config.seed, config.n, 5)
    z, x = _draw_zx(config, u[:, 0], u[:, 1])
    z = np.asarray(z, dtype=int)
    v = u[:, 2:4]
    pi = np.array([th.pi(((zi,), xi)) for zi, xi in zip(z, x)])
    d = (pi >= v[np.arange(len(z)), z]).astype(int)
    r = model.loadings(th)
    latent_u = normal_score(v) @ np.asarray(r) + residual_scale(r) * normal_score(u[:, 4])
    mu = np.array([model.mu(di, xi, th) for di, xi in zip(d, x)])
    y = (mu >= latent_u).astype(int) if model.outcome == "binary" else mu + latent_u
    return {"y": y, "d": d, "z": z, "_x": x}, {"v0": v[:, 0], "v1": v[:, 1], "u": latent_u}


def _sim_multinomial(config, model):
    th = config.theta
    J = model.J
    u = chunk_uniforms(config.seed, config.n, 4 + J)
    z, x = _draw_zx(config, u[:, 0], u[:, 1])
    z = np.asarray(z, dtype=int)
    v = u[:, 2:4]
    if model.selection == "random_coef":
        pi = np.array([th.pi(((zi,), xi)) for zi, xi in zip(z, x)])
        d = (pi >= v[np.arange(len(z)), z]).astype(int)
        scores = normal_score(v)
    else:
        pi = np.array([th.pi(((zi,), xi)) for zi, xi in zip(z, x)])
        d = (pi >= v[:, 0]).astype(int)
        scores = normal_score(v[:, :1])
    load, sc = model.loadings(th), model.scales(th)
    util = np.stack([model.utilities(di, th) for di in (0, 1)])[d]
    util = util + scores @ load.T + sc * normal_score(u[:, 4:4 + J])
    y = np.argmax(util, axis=1) + 1  # lowest index on ties
    lat = {"v0": v[:, 0], "v1": v[:, 1]}
    lat.update({f"eta{j + 1}": u[:, 4 + j] for j in range(J)})
    return {"y": y, "d": d, "z": z, "_x": x}, lat


def _sim_dynamic(config, model):
    th = config.theta
    u = chunk_uniforms(config.seed, config.n, 7)
    z1 = _pick(config.z_values, u[:, 0])
    z2 = _pick(config.z_values, u[:, 1])
    x = _pick(config.x_values, u[:, 2])
    lat = model.chain(th).sample(u[:, 3:7])  # columns V1, U1, V2, U2
    v1, u1, v2, u2 = lat.T
    pi1 = np.array([th.pi(("pi1", a, xi)) for a, xi in zip(z1, x)])
    d1 = (pi1 >= v1).astype(int)
    mu1 = np.array([th.pi(("mu1", int(a), xi)) for a, xi in zip(d1, x)])
    y1 = (mu1 >= u1).astype(int)
    pi2 = np.array([th.pi(("pi2", int(a), int(b), c, xi)) for a, b, c, xi in zip(y1, d1, z2, x)])
    d2 = (pi2 >= v2).astype(int)
    mu2 = np.array([model.mu2(a, b, c, th) for a, b, c in zip(y1, d1, d2)])
    y2 = (mu2 >= u2).astype(int)
    return ({"y": y2, "y1": y1, "d1": d1, "d2": d2, "z1": z1, "z2": z2, "_x": x},
            {"u1": u1, "v1": v1, "v2": v2, "u2": u2})


def entry_equilibria(v1: float, v2: float, a, b) -> list:
    """Pure-strategy Nash equilibria by checking best responses at all four profiles."""
    out = []
    for d1, d2 in itertools.product((0, 1), repeat=2):
        idx1 = a[0] if d2 == 1 else b[0]
        idx2 = a[1] if d1 == 1 else b[1]
        if d1 == int(idx1 >= v1) and d2 == int(idx2 >= v2):
            out.append((d1, d2))
    return out


def _sim_entry(config, model):
    th = config.theta
    u = chunk_uniforms(config.seed, config.n, 7)
    z1 = _pick(config.z_values, u[:, 0])
    z2 = _pick(config.z_values, u[:, 1])
    x = _pick(config.x_values, u[:, 2])
    v1, v2 = u[:, 3], u[:, 4]
    vs = (u[:, 5] < config.p_s).astype(int)
    d = np.empty((config.n, 2), dtype=int)
    for i in range(config.n):
        key = lambda j, other, zj: th.pi(("entry", j, other, zj, x[i]))
        a = (key(1, 1, z1[i]), key(2, 1, z2[i]))
        b = (key(1, 0, z1[i]), key(2, 0, z2[i]))
        eq = entry_equilibria(v1[i], v2[i], a, b)
        if len(eq) == 1:
            d[i] = eq[0]
        elif sorted(eq) == [(0, 1), (1, 0)]:
            d[i] = (1, 0) if vs[i] == 1 else (0, 1)
        else:
            raise AssertionError(f"unexpected equilibrium set {eq} under substitutes")
    r1, r2, rs = th.f_params
    noise = residual_scale((r1, r2)) * normal_score(u[:, 6])
    lam = r1 * normal_score(v1) + r2 * normal_score(v2) + rs * (vs - 0.5)
    mu = np.array([model.mu(di, xi, th) for di, xi in zip(d, x)])
    y = mu + lam + noise
    return ({"y": y, "d1": d[:, 0], "d2": d[:, 1], "z1": z1, "z2": z2, "_x": x},
            {"v1": v1, "v2": v2, "vs": vs})


def _sim_censored(config, model):
    th = config.theta
    u = chunk_uniforms(config.seed, config.n, 4)
    z, x = _draw_zx(config, u[:, 0], u[:, 1])
    v = normal_score(u[:, 2])
    pi_star = np.array([th.pi(((zi,), xi)) for zi, xi in zip(z, x)])
    d = np.maximum(pi_star + v, 0.0)
    rho = th.rho
    y = np.array([model.mu(di, xi, th) for di, xi in zip(d, x)]) + rho * v + np.sqrt(1 - rho ** 2) * normal_score(u[:, 3])
    return {"y": y, "d": d, "z": z, "_x": x}, {"v": v}


def _sim_interval(config, model):
    th = config.theta
    u = chunk_uniforms(config.seed, config.n, 4)
    z, x = _draw_zx(config, u[:, 0], u[:, 1])
    v = normal_score(u[:, 2])
    pi_star = np.array([th.pi(((zi,), xi)) for zi, xi in zip(z, x)])
    d_star = pi_star + v
    d_l = np.floor(d_star)
    rho = th.rho
    y = np.array([model.mu(ds, xi, th) for ds, xi in zip(d_star, x)]) + rho * v + np.sqrt(1 - rho ** 2) * normal_score(u[:, 3])
    return {"y": y, "d_l": d_l, "d_u": d_l + 1.0, "z": z, "_x": x}, {"v": v, "d_star": d_star}


def latent_points(dataset: Dataset) -> np.ndarray:
    """True control in the coordinates of the kind's control set."""
    lat = dataset.latent
    cols = {"binary_roy": ["v"], "ordered": ["v"], "random_coef": ["v0", "v1"], "multinomial": ["v0", "v1"],
            "dynamic": ["u1", "v1", "v2"], "entry": ["v1", "v2", "vs"], "censored": ["v"], "interval": ["v"]}
    return lat[cols[dataset.kind]].to_numpy(float)


def row_cells(dataset: Dataset) -> list:
    s = dataset.schema
    obs = dataset.observed
    d = obs[list(s.d)].to_numpy()
    x = obs[list(s.x)].to_numpy() if s.x else np.empty((len(obs), 0))
    z = obs[list(s.z)].to_numpy()
    conv = lambda row: tuple(v.item() if hasattr(v, "item") else v for v in row)
    return [Cell(conv(a), conv(b), conv(c)) for a, b, c in zip(d, x, z)]


# ----------------------------------------------------------------------------
# exact population cells


def _uniform_pick_probs(values) -> dict:
    values = list(values)
    return {v: 1.0 / len(values) for v in values}


def population_cells(config: DgpConfig, theta: Optional[ThetaPoint] = None, n_quad: int = 64) -> CellStats:
    """Exact conditional outcome laws (or means) per cell under the DGP.

    Supported kinds: binary_roy (both outcomes, including observed discrete
    controls), ordered, dynamic.
    """
    model = config.model
    th = config.theta if theta is None else theta
    if isinstance(model, DynamicTwoPeriod):
        return _population_dynamic(config, model, th, n_quad)
    if not isinstance(model, (BinaryRoy, OrderedChoice)):
        raise NotImplementedError(f"population cells not available for kind {config.kind}")
    stats = CellStats(model.support, exact=True)
    big = 10 ** 12
    pz = _uniform_pick_probs(config.control_values if config.control_values is not None else config.z_values)
    for zv, x in itertools.product(pz, config.x_values):
        z = (zv,)
        pi = th.pi((z, x))
        stats.propensity[(z, x)] = (pi, big)
        for d in (0, 1):
            if config.control_values is not None:
                lo = hi = zv
                if d != int(pi >= zv):
                    continue
            else:
                lo, hi = (0.0, pi) if d == 1 else (pi, 1.0)
                if hi - lo <= 0:
                    continue
            cell = Cell((d,), x, z)
            if lo == hi:
                nodes, weights = np.array([lo]), np.array([1.0])
            else:
                nodes, weights = vquad(lo, hi, n_quad)
                weights = weights / weights.sum()
            mu = model.mu(d, x, th)
            if isinstance(model, OrderedChoice):
                rho = th.rho
                g = rho * normal_score(nodes)
                c_lo, c_hi = th.cutoffs
                scale = np.sqrt(1 - rho ** 2)
                p0 = float(weights @ normal_cdf((c_lo - mu - g) / scale))
                p6 = float(weights @ (1 - normal_cdf((c_hi - mu - g) / scale)))
                stats.cells[cell] = CellRecord(big, probs=np.array([p0, 1 - p0 - p6, p6]))
            elif model.outcome == "binary":
                rho = model.rho(d, th)
                p1 = float(weights @ normal_cdf((mu - rho * normal_score(nodes)) / np.sqrt(1 - rho ** 2)))
                stats.cells[cell] = CellRecord(big, probs=np.array([1 - p1, p1]))
            else:
                rho = model.rho(d, th)
                mean = mu + float(weights @ (rho * normal_score(nodes)))
                stats.cells[cell] = CellRecord(big, mean=mean, var=0.0)
    return stats


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _population_dynamic(config, model: DynamicTwoPeriod, th: ThetaPoint, n_quad: int) -> CellStats:
    """Nested quadrature in conditional-probability coordinates over (V1, U1, V2)."""
    ch = model.chain(th)
    t, w = _gl(min(n_quad, 40))
    stats = CellStats((0, 1), exact=True)
    big = 10 ** 12
    stats.blocks = {"d2": {}, "y1": {}}
    for z1, z2, x in itertools.product(config.z_values, config.z_values, config.x_values):
        pi1 = th.pi(("pi1", z1, x))
        stats.propensity[("pi1", z1, x)] = (pi1, big)
        for d1 in (0, 1):
            lo1, hi1 = (0.0, pi1) if d1 else (pi1, 1.0)
            if hi1 <= lo1:
                continue
            v1 = lo1 + (hi1 - lo1) * t  # V1 uniform on its branch
            w1 = w * (hi1 - lo1)
            mu1 = th.pi(("mu1", d1, x))
            y1_mass = {}
            for y1 in (0, 1):
                # U1 | V1 on its branch, via conditional cdf coordinates
                ulo, uhi = (0.0, mu1) if y1 else (mu1, 1.0)
                prev1 = v1[:, None]
                clo = ch.conditional_cdf(1, np.full(len(t), ulo), prev1)
                chi = ch.conditional_cdf(1, np.full(len(t), uhi), prev1)
                pu = clo[:, None] + (chi - clo)[:, None] * t[None, :]  # (i, j)
                wu = w1[:, None] * (chi - clo)[:, None] * w[None, :]
                u1 = ch.conditional_quantile(1, pu.ravel(), np.repeat(v1, len(t))[:, None])
                v1r = np.repeat(v1, len(t))
                wu = wu.ravel()
                mass_y1 = wu.sum()
                pi2 = th.pi(("pi2", y1, d1, z2, x))
                prev2 = np.column_stack([v1r, u1])
                dlo = ch.conditional_cdf(2, np.zeros(len(u1)), prev2)
                dpi = ch.conditional_cdf(2, np.full(len(u1), pi2), prev2)
                dhi = ch.conditional_cdf(2, np.ones(len(u1)), prev2)
                mass_d2 = {1: float(wu @ (dpi - dlo)), 0: float(wu @ (dhi - dpi))}
                stats.blocks["d2"][Cell((y1, d1), x, (z1, z2))] = (mass_d2[1] / (mass_d2[0] + mass_d2[1]), big)
                for d2 in (0, 1):
                    a, b = (dlo, dpi) if d2 else (dpi, dhi)
                    pv = a[:, None] + (b - a)[:, None] * t[None, :]
                    wv = (wu[:, None] * (b - a)[:, None] * w[None, :]).ravel()
                    v2 = ch.conditional_quantile(2, pv.ravel(), np.repeat(prev2, len(t), axis=0))
                    prev3 = np.column_stack([np.repeat(v1r, len(t)), np.repeat(u1, len(t)), v2])
                    mu2 = model.mu2(y1, d1, d2, th)
                    h = ch.conditional_cdf(3, np.full(len(v2), mu2), prev3)
                    mass = wv.sum()
                    if mass <= 0:
                        continue
                    p1 = float(wv @ h) / mass
                    stats.cells[Cell((y1, d1, d2), x, (z1, z2))] = CellRecord(big, probs=np.array([1 - p1, p1]))
                y1_mass[y1] = mass_y1
            stats.blocks["y1"][Cell((d1,), x, (z1,))] = (y1_mass[1] / (y1_mass[0] + y1_mass[1]), big)
    return stats


# ----------------------------------------------------------------------------
# school assignment with strategic reports


@dataclass(frozen=True)
class SchoolConfig:
    """Synthetic school-choice market.

    Students draw scores S ~ U[0,1]^J and a random strict preference over
    {0, 1..J}. Reports list up to ``max_list`` acceptable schools in true
    order and always include the true best feasible school (stability), so
    the assignment is the true favourite among feasible options.

    Y = mu1(assigned) + m(Q_focal) + noise, where Q_focal is the true local
    preference at the focal school and m absorbs mu2 and lambda.
    """

    n: int
    seed: int = 0
    J: int = 3
    max_list: int = 2
    cutoffs: tuple = (0.5, 0.5, 0.5)
    mu1: tuple = (0.0, 1.0, 0.5, 0.8)  # options 0..J
    focal: int = 1
    m_slope: tuple = (0.4, -0.3)  # m((k, l)) = m_slope[0] * k + m_slope[1] * l
    noise: float = 1.0
    truthful: bool = False  # list every acceptable school, all schools acceptable

    def __post_init__(self):
        if len(self.cutoffs) != self.J or len(self.mu1) != self.J + 1:
            raise ValueError("cutoffs need J entries and mu1 needs J + 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def m(self, pair) -> float:
        return self.m_slope[0] * pair[0] + self.m_slope[1] * pair[1]


def _true_local_pref(order, scores, cutoffs, j) -> tuple:
    feasible = {0} | {k + 1 for k in range(len(scores)) if scores[k] >= cutoffs[k]}
    best = lambda opts: next(o for o in order if o in opts)
    return best(feasible | {j}), best(feasible - {j})


def simulate_school(config: SchoolConfig) -> tuple:
    """(observed, latent) frames: observed holds y, s1..sJ, r1..rK, assigned."""
    J, K = config.J, config.max_list if not config.truthful else config.J
    u = chunk_uniforms(config.seed, config.n, 2 * J + 3 + J, stream=7)
    scores = u[:, :J]
    obs, lat = [], []
    for i in range(config.n):
        rank_keys = u[i, J:2 * J + 1]
        if config.truthful:
            rank_keys = rank_keys.copy()
            rank_keys[0] = 2.0  # outside option last
        order = [int(o) for o in np.argsort(rank_keys)]  # most preferred first
        acceptable = order[:order.index(0)]
        s = scores[i]
        feasible = {0} | {k + 1 for k in range(J) if s[k] >= config.cutoffs[k]}
        fav = next(o for o in order if o in feasible)
        if config.truthful:
            listed = list(acceptable)
        else:
            others = [o for o in acceptable if o != fav]
            pick = np.argsort(u[i, 2 * J + 1:2 * J + 1 + len(others)]) if others else []
            room = K - (1 if fav != 0 else 0)
            n_extra = int(u[i, -1] * (min(room, len(others)) + 1))
            chosen = {others[p] for p in list(pick)[:n_extra]}
            if fav != 0:
                chosen.add(fav)
            listed = [o for o in order if o in chosen]
        report = listed + [0] * (K - len(listed))
        assigned = next((o for o in listed if o in feasible), 0)
        q_focal = _true_local_pref(order, s, config.cutoffs, config.focal)
        obs.append((assigned, *s, *report))
        lat.append((" ".join(map(str, order)), q_focal[0], q_focal[1]))
    observed = pd.DataFrame(obs, columns=["assigned", *[f"s{k + 1}" for k in range(J)],
                                          *[f"r{k + 1}" for k in range(K)]])
    latent = pd.DataFrame(lat, columns=["preference", "q_first", "q_second"])
    noise = config.noise * normal_score(chunk_uniforms(config.seed, config.n, 1, stream=8)[:, 0])
    mu1 = np.asarray(config.mu1)[observed["assigned"].to_numpy()]
    m = config.m_slope[0] * latent["q_first"].to_numpy() + config.m_slope[1] * latent["q_second"].to_numpy()
    observed.insert(0, "y", mu1 + m + noise)
    return observed, latent
