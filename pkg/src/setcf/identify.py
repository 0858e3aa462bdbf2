"""Restriction checks per parameter point, grid sweeps and functional bounds.

``slack`` is a diagnostic tolerance on population restrictions evaluated at
sample cell statistics; the default multiplier is 2 x the largest cell SE.
Finite-sample tests live in ``inference``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import Bounds, LinearConstraint, milp

from . import functionals as fn
from .cells import CellStats
from .cf import cf_local_pref, reported_local_pref
from .containment import DEFAULT_DRAWS, containment, event_class
from .grid import GridSpec, ParamArrays
from .models import (BinaryRoy, DynamicTwoPeriod, ModelSpec, OrderedChoice, as_event, containment_from_thresholds,
                     ordered_table)
from .latent import normal_score
from .theta import Cell, ThetaPoint, _tup

SLACK_MULTIPLIER = 2.0
CONSTRAINTS = ("mts", "mtr")
METHODS = ("full-independence", "mean-independence")


class RefutedError(RuntimeError):
    """The identified region is empty, so functionals are undefined."""


def default_slack(stats: CellStats, multiplier: float = SLACK_MULTIPLIER) -> float:
    return multiplier * stats.max_se()


# ----------------------------------------------------------------------------
# propensity restrictions


@dataclass
class PropensityTable:
    """Estimated selection probabilities keyed like ``ThetaPoint.pi``."""

    values: dict
    counts: dict
    flagged: tuple = ()  # keys without treatment variation

    def se(self, key) -> float:
        p, n = self.values[key], self.counts[key]
        return float(np.sqrt(p * (1 - p) / n))

    def gap(self, theta: ThetaPoint) -> float:
        """Largest |pi_theta - pi_hat| over keys the point carries (-inf if none)."""
        table = theta.pi_table
        gaps = [abs(table[k] - v) for k, v in self.values.items() if k in table]
        return float(max(gaps)) if gaps else -np.inf

    def gap_array(self, arrays: ParamArrays) -> np.ndarray:
        out = np.full(len(arrays), -np.inf)
        keys = arrays.points[0].pi_table
        for k, v in self.values.items():
            if k in keys:
                out = np.maximum(out, np.abs(arrays.pi(k) - v))
        return out

    def feasible(self, theta: ThetaPoint, slack: float) -> bool:
        return self.gap(theta) <= slack


def pi_restricted(stats: CellStats) -> PropensityTable:
    """Propensity table from cell statistics; cells with pi_hat in {0, 1} are flagged."""
    values = {k: p for k, (p, _) in stats.propensity.items()}
    counts = {k: n for k, (_, n) in stats.propensity.items()}
    flagged = tuple(k for k, p in values.items() if p in (0.0, 1.0))
    return PropensityTable(values, counts, flagged)


# ----------------------------------------------------------------------------
# single-point checks


def _events(model, events):
    return event_class(model.support) if events is None else [as_event(e) for e in events]


def artstein_violation(theta: ThetaPoint, stats: CellStats, model: ModelSpec, events=None,
                       n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> float:
    """max over cells and events of containment(A | cell) - P_hat(A | cell)."""
    if isinstance(model, DynamicTwoPeriod):
        return max(dynamic_check(theta, stats, model).values())
    events = _events(model, events)
    worst = -np.inf
    for cell in sorted(stats.cells, key=repr):
        for event in events:
            cont, _ = containment(model, event, cell, theta, n_draws, seed)
            worst = max(worst, cont - stats.prob(cell, event))
    return float(worst)


def artstein_check(theta: ThetaPoint, stats: CellStats, model: ModelSpec, events=None, slack: float = 0.0,
                   n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> tuple:
    """(pass, max_violation); the violation includes the propensity gap."""
    viol = max(artstein_violation(theta, stats, model, events, n_draws, seed), pi_restricted(stats).gap(theta))
    return viol <= slack, float(viol)


def aumann_check(theta: ThetaPoint, stats: CellStats, model: ModelSpec, slack: float = 0.0) -> tuple:
    """(pass, max_violation) with violation max(mu + lam_L - Ybar, Ybar - mu - lam_U) per cell."""
    worst = -np.inf
    for cell in sorted(stats.cells, key=repr):
        ybar = stats.cells[cell].mean
        iv = model.mean_interval(cell, theta)
        worst = max(worst, iv.lo - ybar, ybar - iv.hi)
    viol = max(float(worst), pi_restricted(stats).gap(theta))
    return viol <= slack, viol


def dynamic_check(theta: ThetaPoint, stats: CellStats, model: DynamicTwoPeriod) -> dict:
    """Largest violation per sequential block (y2, d2, y1) and the pi1 gap.

    Each block is a binary threshold restriction:
    P(node = 1) >= inf H and P(node = 0) >= 1 - sup H.
    """
    out = {"y2": -np.inf, "d2": -np.inf, "y1": -np.inf}
    for cell in sorted(stats.cells, key=repr):
        y1, d1, _ = cell.d
        blocks = model.blocks(cell, theta)
        observed = {
            "y2": stats.cells[cell].probs[1],
            "d2": stats.blocks["d2"][Cell((y1, d1), cell.x, cell.z)][0] if stats.blocks else None,
            "y1": stats.blocks["y1"][Cell((d1,), cell.x, cell.z[:1])][0] if stats.blocks else None,
        }
        for name, (t_lo, t_hi) in blocks.items():
            p1 = observed[name]
            if p1 is None:
                continue
            out[name] = max(out[name], t_lo - p1, (1.0 - t_hi) - (1.0 - p1))
    out["pi1"] = pi_restricted(stats).gap(theta)
    return {k: float(v) for k, v in out.items()}


@dataclass
class IntersectionBounds:
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return self.lower > self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def intersection_bounds_mu(d, x, theta: ThetaPoint, stats: CellStats, model: ModelSpec,
                           slack: float = 0.0) -> IntersectionBounds:
    """[sup_z (Ybar - lam_U), inf_z (Ybar - lam_L)] over instrument cells at (d, x).

    The mu part of ``theta`` is not used. An empty interval refutes the
    dependence and selection parameters.
    """
    d, x = _tup(d), _tup(x)
    cells = [c for c in sorted(stats.cells, key=repr) if c.d == d and c.x == x]
    if not cells:
        raise ValueError(f"no cells at d={d}, x={x}")
    lower, upper = -np.inf, np.inf
    for cell in cells:
        iv = model.mean_interval(cell, theta)
        shift = model.mu(cell.d, cell.x, theta)
        ybar = stats.cells[cell].mean
        lower = max(lower, ybar - (iv.hi - shift) - slack)
        upper = min(upper, ybar - (iv.lo - shift) + slack)
    return IntersectionBounds(float(lower), float(upper))


# ----------------------------------------------------------------------------
# vectorized sweeps


def _fast_kind(model) -> bool:
    return isinstance(model, (BinaryRoy, OrderedChoice))


def _control_range(model, arrays: ParamArrays, cell: Cell):
    if model.observed_control:
        v = float(cell.z[0])
        return np.full(len(arrays), v), np.full(len(arrays), v)
    pi = arrays.pi((cell.z, cell.x))
    if cell.d[0] == 1:
        return np.zeros_like(pi), pi
    return pi, np.ones_like(pi)


def containment_arrays(model: ModelSpec, points, cells: Sequence[Cell], events=None,
                       n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> np.ndarray:
    """(P, C, E) containment values for points x cells x events."""
    arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(points)
    events = _events(model, events)
    out = np.empty((len(arrays), len(cells), len(events)))
    if not _fast_kind(model) or not model.discrete:
        for p, theta in enumerate(arrays.points):
            for c, cell in enumerate(cells):
                for e, event in enumerate(events):
                    out[p, c, e] = containment(model, event, cell, theta, n_draws, seed)[0]
        return out
    for c, cell in enumerate(cells):
        lo, hi = _control_range(model, arrays, cell)
        mu = model.mu_vec(arrays.mu, cell.d, cell.x)
        if isinstance(model, OrderedChoice):
            rho = arrays.f[:, 0]
            ga, gb = rho * normal_score(lo), rho * normal_score(hi)
            table = ordered_table(mu, rho, (arrays.cutoffs[:, 0], arrays.cutoffs[:, 1]),
                                  np.minimum(ga, gb), np.maximum(ga, gb))
            full = frozenset(model.support)
            for e, event in enumerate(events):
                out[:, c, e] = 1.0 if event >= full else (0.0 if not event else table[event])
        else:
            t_lo, t_hi = model.h_range(mu, model.rho_vec(arrays.f, cell.d), lo, hi)
            for e, event in enumerate(events):
                if event == {1}:
                    out[:, c, e] = t_lo
                elif event == {0}:
                    out[:, c, e] = 1.0 - t_hi
                else:
                    out[:, c, e] = containment_from_thresholds(event, 0.0, 1.0)
    return out


def mean_interval_arrays(model: BinaryRoy, points, cells: Sequence[Cell]) -> tuple:
    """(P, C) lower and upper conditional-mean bounds for the continuous Roy outcome."""
    arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(points)
    lo_out = np.empty((len(arrays), len(cells)))
    hi_out = np.empty_like(lo_out)
    for c, cell in enumerate(cells):
        lo, hi = _control_range(model, arrays, cell)
        mu = model.mu_vec(arrays.mu, cell.d, cell.x)
        rho = model.rho_vec(arrays.f, cell.d)
        a, b = rho * normal_score(lo), rho * normal_score(hi)
        lo_out[:, c] = mu + np.minimum(a, b)
        hi_out[:, c] = mu + np.maximum(a, b)
    return lo_out, hi_out


def violation_array(model: ModelSpec, points, stats: CellStats, method: Optional[str] = None, events=None,
                    n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> np.ndarray:
    """Max violation per point (restriction violations and the propensity gap)."""
    arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(points)
    method = method or ("full-independence" if model.discrete else "mean-independence")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    cells = sorted(stats.cells, key=repr)
    gap = pi_restricted(stats).gap_array(arrays)
    if method == "full-independence":
        if not model.discrete:
            raise ValueError("full-independence needs a discrete outcome")
        if _fast_kind(model):
            events = _events(model, events)
            cont = containment_arrays(model, arrays, cells, events)
            probs = np.array([[stats.prob(cell, e) for e in events] for cell in cells])
            viol = (cont - probs[None]).reshape(len(arrays), -1).max(axis=1)
        else:
            viol = np.array([artstein_violation(t, stats, model, events, n_draws, seed) for t in arrays.points])
    else:
        if isinstance(model, BinaryRoy) and not model.discrete:
            lo, hi = mean_interval_arrays(model, arrays, cells)
            ybar = np.array([stats.cells[c].mean for c in cells])[None]
            viol = np.maximum(lo - ybar, ybar - hi).max(axis=1)
        else:
            viol = np.array([aumann_check(t, stats, model)[1] for t in arrays.points])
    return np.maximum(viol, gap)


def constraint_mask(model: ModelSpec, points, constraints: Sequence[str] = ()) -> np.ndarray:
    """True for points satisfying the shape restrictions.

    mts: every dependence parameter rho <= 0; mtr: the treatment coefficient
    is nonnegative (delta for binary Roy, mu1 for the ordered model).
    """
    arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(points)
    keep = np.ones(len(arrays), dtype=bool)
    for name in constraints:
        name = name.lower()
        if name not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {name!r}; choose from {CONSTRAINTS}")
        if not _fast_kind(model):
            raise NotImplementedError(f"shape constraints are defined for binary_roy and ordered, not {model.kind}")
        if name == "mts":
            rho = arrays.f[:, :1] if isinstance(model, OrderedChoice) else arrays.f
            keep &= np.all(rho <= 0.0, axis=1)
        else:
            keep &= arrays.mu[:, 0 if isinstance(model, OrderedChoice) else 1] >= 0.0
    return keep


@dataclass
class IdentifiedRegion:
    """Acceptance mask over a parameter grid.

    Points removed by shape constraints carry max_violation = +inf, so
    accepted == (max_violation <= slack) holds everywhere.
    """

    points: list
    accepted: np.ndarray
    max_violation: np.ndarray
    slack: float
    method: str = "full-independence"
    constraints: tuple = ()
    index: Optional[np.ndarray] = None
    axis_names: tuple = ()

    @property
    def empty(self) -> bool:
        return not bool(self.accepted.any())

    @property
    def accepted_points(self) -> list:
        return [p for p, a in zip(self.points, self.accepted) if a]

    def accepted_set(self) -> set:
        return {p for p, a in zip(self.points, self.accepted) if a}

    def issubset(self, other: "IdentifiedRegion") -> bool:
        return self.accepted_set() <= other.accepted_set()

    def diameter(self) -> int:
        """Largest index spread of accepted points along any grid axis (in grid steps)."""
        if self.index is None:
            raise ValueError("region has no grid index")
        if self.empty:
            return 0
        sub = self.index[self.accepted]
        return int((sub.max(axis=0) - sub.min(axis=0)).max())

    def rows(self):
        for p, a, v in zip(self.points, self.accepted, self.max_violation):
            yield {"mu_params": " ".join(f"{m:.10g}" for m in p.mu_params),
                   "f_params": " ".join(f"{r:.10g}" for r in p.f_params),
                   "cutoffs": "" if p.cutoffs is None else " ".join(f"{c:.10g}" for c in p.cutoffs),
                   "pi_params": ";".join(f"{k!r}={v:.10g}" for k, v in p.pi_params),
                   "accepted": int(a), "max_violation": f"{v:.12g}"}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["mu_params", "f_params", "cutoffs", "pi_params", "accepted",
                                                    "max_violation"])
            writer.writeheader()
            writer.writerows(self.rows())

    def to_json(self, path=None) -> str:
        doc = {"schema_version": 1, "method": self.method, "slack": self.slack,
               "constraints": list(self.constraints), "n_points": len(self.points),
               "n_accepted": int(self.accepted.sum()), "refuted": self.empty,
               "accepted": [p.as_dict() for p in self.accepted_points]}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def identified_region(grid, stats: CellStats, model: ModelSpec, method: Optional[str] = None,
                      slack: float = 0.0, constraints: Sequence[str] = (), events=None,
                      n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> IdentifiedRegion:
    """Sweep a grid (GridSpec or list of points) and mark accepted points."""
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    index, names = None, ()
    if isinstance(grid, GridSpec):
        points, index = grid.points()
        names = tuple(grid.axis_names)
    else:
        points = list(grid)
    if not points:
        raise ValueError("empty grid")
    method = method or ("full-independence" if model.discrete else "mean-independence")
    arrays = ParamArrays.from_points(points)
    keep = constraint_mask(model, arrays, constraints) if constraints else np.ones(len(points), dtype=bool)
    viol = np.full(len(points), np.inf)
    if keep.any():
        kept = [p for p, k in zip(points, keep) if k]
        viol[keep] = violation_array(model, kept if not keep.all() else arrays, stats, method, events,
                                     n_draws, seed)
    return IdentifiedRegion(points, viol <= slack, viol, float(slack), method,
                            tuple(c.lower() for c in constraints), index, names)


# ----------------------------------------------------------------------------
# functional bounds


@dataclass
class FunctionalBounds:
    lower: float
    upper: float
    functional_id: str

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def issubset(self, other: "FunctionalBounds", tol: float = 1e-12) -> bool:
        return other.lower - tol <= self.lower and self.upper <= other.upper + tol

    def as_dict(self) -> dict:
        return {"functional": self.functional_id, "lower": self.lower, "upper": self.upper}


def kappa_bounds(region: IdentifiedRegion, functional: fn.Functional, model: ModelSpec) -> FunctionalBounds:
    """[min, max] of the functional over accepted points."""
    if region.empty:
        raise RefutedError("model refuted at given slack")
    values = fn.evaluate(functional, model, region.accepted_points)
    return FunctionalBounds(float(values.min()), float(values.max()), functional.id)


def bounds_table(region: IdentifiedRegion, functionals: Sequence[fn.Functional], model: ModelSpec) -> pd.DataFrame:
    rows = [kappa_bounds(region, f, model).as_dict() for f in functionals]
    return pd.DataFrame(rows, columns=["functional", "lower", "upper"])


# ----------------------------------------------------------------------------
# school assignment with local-preference controls


def school_cells(data: pd.DataFrame, j: int, cutoffs: Sequence[float], bandwidth: float,
                 score_cols: Sequence[str] = None, report_cols: Sequence[str] = None, y: str = "y") -> pd.DataFrame:
    """One-sided local cells near school j's cutoff.

    Each row of the output is a group of students sharing (side, assigned
    option, candidate local-preference set) with their local outcome mean.
    Reports list school indices, 0 marking an empty slot.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    J = len(cutoffs)
    score_cols = list(score_cols or [f"s{k + 1}" for k in range(J)])
    report_cols = list(report_cols or sorted(c for c in data.columns if c.startswith("r") and c[1:].isdigit()))
    cj = cutoffs[j - 1]
    near = data[(data[score_cols[j - 1]] - cj).abs() <= bandwidth]
    if near.empty:
        raise ValueError("no observations within the bandwidth")
    scores = near[score_cols].to_numpy(float)
    reports = near[report_cols].to_numpy(int)
    groups = {}
    for s, r, yv in zip(scores, reports, near[y].to_numpy(float)):
        report = [int(k) for k in r if k != 0]
        above = s[j - 1] >= cj
        a, b = reported_local_pref(s, report, cutoffs, j)
        cand = frozenset(cf_local_pref(s, report, cutoffs, j).elements)
        key = ("above" if above else "below", a if above else b, cand)
        groups.setdefault(key, []).append(yv)
    rows = []
    for (side, assigned, cand), ys in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        ys = np.asarray(ys)
        se = float(ys.std(ddof=1) / np.sqrt(len(ys))) if len(ys) > 1 else np.inf
        rows.append({"side": side, "assigned": assigned, "candidates": tuple(sorted(cand)), "count": len(ys),
                     "mean": float(ys.mean()), "se": se})
    return pd.DataFrame(rows)


def school_bounds(data: pd.DataFrame, j: int, k: int, cutoffs: Sequence[float], bandwidth: float,
                  slack_multiplier: float = SLACK_MULTIPLIER, min_count: int = 2, **cols) -> FunctionalBounds:
    """Bounds on mu1(j) - mu1(k) at school j's cutoff under separability.

    Every cell g imposes, for some candidate q and some candidate q',
    mu1(a_g) + m(q) <= Ybar_g + s_g and mu1(a_g) + m(q') >= Ybar_g - s_g,
    with m(q) = mu2(q, c_j) + lambda(q, c_j) shared across cells and
    s_g = slack_multiplier * SE_g. The disjunctions are encoded with binary
    indicators and both ends are solved as mixed-integer programs.
    """
    cells = school_cells(data, j, cutoffs, bandwidth, **cols)
    cells = cells[cells["count"] >= min_count]
    if cells.empty:
        raise ValueError("no cells with enough observations within the bandwidth")
    options = sorted({0, j, k, *cells["assigned"]})
    prefs = sorted({q for cand in cells["candidates"] for q in cand})
    n_mu, n_m = len(options), len(prefs)
    mu_pos = {o: i for i, o in enumerate(options)}
    m_pos = {q: n_mu + i for i, q in enumerate(prefs)}
    scale = float(np.abs(cells["mean"]).max()) + 1.0
    box = 20.0 * scale
    big = 8.0 * box
    rows, lo_b, hi_b = [], [], []
    n_bin = 0
    spec = []
    for _, g in cells.iterrows():
        s = slack_multiplier * g["se"] if np.isfinite(g["se"]) else 0.0
        spec.append((mu_pos[g["assigned"]], [m_pos[q] for q in g["candidates"]], g["mean"], s))
        if len(g["candidates"]) > 1:
            n_bin += 2 * len(g["candidates"])
    n_var = n_mu + n_m + n_bin
    b = n_mu + n_m
    for a_idx, q_idx, ybar, s in spec:
        if len(q_idx) == 1:
            row = np.zeros(n_var)
            row[a_idx] = 1.0
            row[q_idx[0]] = 1.0
            rows.append(row), lo_b.append(ybar - s), hi_b.append(ybar + s)
            continue
        for side in ("upper", "lower"):
            pick = np.zeros(n_var)
            for q in q_idx:
                row = np.zeros(n_var)
                row[a_idx] = 1.0
                row[q] = 1.0
                if side == "upper":  # mu + m(q) <= ybar + s unless indicator is off
                    row[b] = big
                    rows.append(row), lo_b.append(-np.inf), hi_b.append(ybar + s + big)
                else:
                    row[b] = -big
                    rows.append(row), lo_b.append(ybar - s - big), hi_b.append(np.inf)
                pick[b] = 1.0
                b += 1
            rows.append(pick), lo_b.append(1.0), hi_b.append(np.inf)
    lower_var = np.full(n_var, -box)
    upper_var = np.full(n_var, box)
    lower_var[n_mu + n_m:] = 0.0
    upper_var[n_mu + n_m:] = 1.0
    if (j, k) in m_pos:  # location normalization: only differences of mu1 are identified
        lower_var[m_pos[(j, k)]] = upper_var[m_pos[(j, k)]] = 0.0
    integrality = np.zeros(n_var)
    integrality[n_mu + n_m:] = 1
    cons = LinearConstraint(np.array(rows), np.array(lo_b), np.array(hi_b))
    obj = np.zeros(n_var)
    obj[mu_pos[j]], obj[mu_pos[k]] = 1.0, -1.0
    ends = []
    for sign in (1.0, -1.0):
        res = milp(sign * obj, constraints=cons, integrality=integrality, bounds=Bounds(lower_var, upper_var))
        if res.status == 2:
            raise RefutedError("model refuted at given slack")
        if not res.success:
            raise RuntimeError(f"school bounds program failed: {res.message}")
        value = sign * res.fun
        ends.append(value if abs(value) < 2.0 * box - 1e-6 * box else np.sign(value) * np.inf)
    return FunctionalBounds(float(ends[0]), float(ends[1]), f"school({j}-{k})")
