"""Split-sample likelihood-ratio confidence intervals for scalar functionals.

The null density for a parameter point is the least-favorable member of
{Q : Q(A|cell) >= containment(A|cell)} against a fixed alternative fitted
on the other half: the maximizer of sum_y p_alt(y) log q(y).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from . import functionals as fn
from .cells import Schema, estimate_cells
from .containment import DEFAULT_DRAWS, containment, event_class
from .grid import GridSpec, ParamArrays
from .identify import containment_arrays
from .models import ModelSpec, as_event
from .theta import Cell, InfeasibleThetaError, ThetaPoint

ALPHA = 0.05
K_GRID = 200
LOG_FLOOR = np.log(1e-300)
FEAS_TOL = 1e-12
SMOOTH = 0.5


# ----------------------------------------------------------------------------
# least-favorable density


def box_from_containment(support: Sequence, cont: dict) -> tuple:
    """Per-outcome bounds implied by singleton and co-singleton events.

    Returns (lo, hi, exact) where exact says every event in ``cont`` is of
    that form, so the box describes the feasible set completely.
    """
    support = tuple(support)
    full = frozenset(support)
    lo = np.zeros(len(support))
    hi = np.ones(len(support))
    exact = True
    for event, value in cont.items():
        event = as_event(event)
        if len(event) == 1:
            i = support.index(next(iter(event)))
            lo[i] = max(lo[i], value)
        elif len(event) == len(support) - 1:
            i = support.index(next(iter(full - event)))
            hi[i] = min(hi[i], 1.0 - value)
        elif 0 < len(event) < len(support):
            exact = False
    return lo, hi, exact


def lfp_box(lo, hi, alternative) -> np.ndarray:
    """Water-filling solution of max sum p log q over {lo <= q <= hi, sum q = 1}.

    Works row-wise on (..., K) arrays: q = clip(p t, lo, hi) with the scalar
    t fixed by the simplex constraint.

    Raises
    ------
    InfeasibleThetaError
        If some row has sum(lo) > 1, sum(hi) < 1 or lo > hi.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p = np.broadcast_to(np.asarray(alternative, dtype=float), lo.shape)
    if np.any(lo > hi + FEAS_TOL) or np.any(lo.sum(-1) > 1 + FEAS_TOL) or np.any(hi.sum(-1) < 1 - FEAS_TOL):
        raise InfeasibleThetaError("containment values are not jointly attainable by any distribution")
    hi = np.maximum(hi, lo)
    if lo.shape[-1] == 2:  # the simplex is a segment: clip the alternative onto it
        q1 = np.clip(p[..., 1], np.maximum(lo[..., 1], 1.0 - hi[..., 0]), np.minimum(hi[..., 1], 1.0 - lo[..., 0]))
        return np.stack([1.0 - q1, q1], axis=-1)
    # zero-probability outcomes receive mass only when the lower bounds leave a gap
    p = np.maximum(p, 1e-300)
    log_lo = np.full(lo.shape[:-1], np.log(1e-300))
    log_hi = np.log((hi / p).max(-1)) + 1.0
    for _ in range(100):
        mid = 0.5 * (log_lo + log_hi)
        total = np.clip(p * np.exp(mid)[..., None], lo, hi).sum(-1)
        up = total < 1.0
        log_lo = np.where(up, mid, log_lo)
        log_hi = np.where(up, log_hi, mid)
    q = np.clip(p * np.exp(0.5 * (log_lo + log_hi))[..., None], lo, hi)
    # rescale the coordinates strictly inside the box so the row sums to one exactly
    free = (q > lo) & (q < hi)
    fixed_mass = np.where(free, 0.0, q).sum(-1)
    free_mass = np.where(free, q, 0.0).sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(free_mass > 0, (1.0 - fixed_mass) / free_mass, 1.0)
    q = np.where(free, q * factor[..., None], q)
    return q


def lfp_convex(support: Sequence, cont: dict, alternative) -> np.ndarray:
    """General-event solver (SLSQP) for supports where the box form is not exact."""
    support = tuple(support)
    p = np.asarray(alternative, dtype=float)
    events = [(np.array([y in as_event(e) for y in support], dtype=float), v) for e, v in cont.items()]
    lo, hi, _ = box_from_containment(support, cont)
    start = lfp_box(lo, hi, p)
    cons = [{"type": "eq", "fun": lambda q: q.sum() - 1.0}]
    cons += [{"type": "ineq", "fun": (lambda q, a=a, v=v: a @ q - v)} for a, v in events]
    res = minimize(lambda q: -p @ np.log(np.maximum(q, 1e-300)), start, method="SLSQP", constraints=cons,
                   bounds=[(1e-15, 1.0)] * len(support), options={"ftol": 1e-14, "maxiter": 500})
    q = np.clip(res.x, 0.0, 1.0)
    return q / q.sum()


def lfp_solve(support: Sequence, cont: dict, alternative) -> np.ndarray:
    """Least-favorable density for one cell from its containment values."""
    lo, hi, exact = box_from_containment(support, cont)
    return lfp_box(lo, hi, alternative) if exact else lfp_convex(support, cont, alternative)


def lfp_density(model: ModelSpec, theta: ThetaPoint, cell: Cell, alternative, events=None,
                n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> np.ndarray:
    """q_theta(. | cell) against ``alternative`` over the model's outcome support."""
    support = tuple(model.support)
    events = event_class(support) if events is None else [as_event(e) for e in events]
    cont = {e: containment(model, e, cell, theta, n_draws, seed)[0] for e in events}
    return lfp_solve(support, cont, alternative)


# ----------------------------------------------------------------------------
# sample summaries


@dataclass(frozen=True)
class SplitPlan:
    """Seeded 50/50 partition of row indices."""

    s0: np.ndarray
    s1: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if len(self.s0) < 1 or len(self.s1) < 1:
            raise ValueError("both halves need at least one row")
        if np.intersect1d(self.s0, self.s1).size:
            raise ValueError("halves must be disjoint")

    @classmethod
    def make(cls, n: int, seed: int = 0) -> "SplitPlan":
        if n < 2:
            raise ValueError("need at least two rows to split")
        perm = np.random.default_rng(np.random.Philox(key=seed)).permutation(n)
        half = n // 2
        return cls(np.sort(perm[:half]), np.sort(perm[half:]), seed)

    def swapped(self) -> "SplitPlan":
        return SplitPlan(self.s1, self.s0, self.seed)


@dataclass
class CountSample:
    """Outcome counts per cell and treatment counts per selection key."""

    support: tuple
    counts: dict  # cell -> (K,) counts
    selection: dict = field(default_factory=dict)  # pi key -> (n_treated, n_untreated)

    @classmethod
    def from_frame(cls, data: pd.DataFrame, schema: Schema, support) -> "CountSample":
        stats = estimate_cells(data, schema, support=support)
        counts = {c: np.rint(r.probs * r.count) for c, r in stats.cells.items()}
        sel = {k: (round(p * n), n - round(p * n)) for k, (p, n) in stats.propensity.items()}
        return cls(tuple(support), counts, sel)

    @property
    def cells(self) -> list:
        return sorted(self.counts, key=repr)

    def smoothed(self, cell) -> np.ndarray:
        c = self.counts.get(cell, np.zeros(len(self.support)))
        return (c + SMOOTH) / (c.sum() + SMOOTH * len(self.support))

    def empirical(self, cell) -> np.ndarray:
        c = self.counts[cell]
        return c / c.sum()


class GridLikelihood:
    """Parameter grid with cached containment boxes and functional values."""

    def __init__(self, model: ModelSpec, points, events=None):
        if not model.discrete:
            raise ValueError("likelihood inference needs a discrete outcome")
        if isinstance(points, GridSpec):
            points, _ = points.points()
        self.model = model
        self.arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(points)
        self.support = tuple(model.support)
        self.events = event_class(self.support) if events is None else [as_event(e) for e in events]
        self._cont = {}
        self._box = {}

    def __len__(self):
        return len(self.arrays)

    @property
    def points(self) -> list:
        return self.arrays.points

    def containment(self, cell) -> np.ndarray:
        if cell not in self._cont:
            self._cont[cell] = containment_arrays(self.model, self.arrays, [cell], self.events)[:, 0, :]
        return self._cont[cell]

    def box(self, cell) -> tuple:
        if cell not in self._box:
            cont = self.containment(cell)
            K = len(self.support)
            lo = np.zeros((len(self), K))
            hi = np.ones((len(self), K))
            full = frozenset(self.support)
            for e, event in enumerate(self.events):
                if len(event) == 1:
                    i = self.support.index(next(iter(event)))
                    lo[:, i] = np.maximum(lo[:, i], cont[:, e])
                elif len(event) == K - 1:
                    i = self.support.index(next(iter(full - event)))
                    hi[:, i] = np.minimum(hi[:, i], 1.0 - cont[:, e])
                elif 0 < len(event) < K:
                    raise NotImplementedError("grid inference needs singleton/co-singleton event classes")
            self._box[cell] = (lo, hi)
        return self._box[cell]

    def selection_loglik(self, selection: dict) -> np.ndarray:
        out = np.zeros(len(self))
        if not selection:
            return out
        keys = self.points[0].pi_table
        for key, (n1, n0) in selection.items():
            if key in keys:
                pi = self.arrays.pi(key)
                with np.errstate(divide="ignore"):
                    out += n1 * np.maximum(np.log(pi), LOG_FLOOR) + n0 * np.maximum(np.log1p(-pi), LOG_FLOOR)
        return out

    def criterion(self, sample: CountSample) -> np.ndarray:
        """max_A sum_cells n_cell [C(A|cell) - P_hat(A|cell)]_+^2 plus the propensity misfit."""
        per_event = np.zeros((len(self), len(self.events)))
        for cell in sample.cells:
            n = sample.counts[cell].sum()
            p = sample.empirical(cell)
            probs = np.array([p[[self.support.index(y) for y in e]].sum() for e in self.events])
            per_event += n * np.maximum(self.containment(cell) - probs[None], 0.0) ** 2
        crit = per_event.max(axis=1)
        keys = self.points[0].pi_table
        for key, (n1, n0) in sample.selection.items():
            if key in keys and n1 + n0 > 0:
                crit += (n1 + n0) * (self.arrays.pi(key) - n1 / (n1 + n0)) ** 2
        return crit

    def alternative(self, index: int, fit: CountSample, cells) -> dict:
        """Projection of the smoothed fit-half law onto the set of the fitted point."""
        out = {}
        for cell in cells:
            lo, hi = self.box(cell)
            out[cell] = lfp_box(lo[index], hi[index], fit.smoothed(cell))
        return out

    def loglik(self, sample: CountSample, alternative: dict) -> np.ndarray:
        """sum_i log q_theta(Y_i | cell_i) + selection part, for every point."""
        total = self.selection_loglik(sample.selection)
        for cell in sample.cells:
            lo, hi = self.box(cell)
            q = lfp_box(lo, hi, alternative[cell])
            with np.errstate(divide="ignore"):
                total += np.maximum(np.log(q), LOG_FLOOR) @ sample.counts[cell]
        return total


def unrestricted_estimator(grid: GridLikelihood, fit: CountSample) -> tuple:
    """(index, point, criterion) minimizing the criterion; first grid index on ties."""
    crit = grid.criterion(fit)
    best = int(np.argmin(crit))
    return best, grid.points[best], float(crit[best])


# ----------------------------------------------------------------------------
# statistics


@dataclass
class HalfFit:
    """Evaluation-half log likelihoods given a fit on the other half."""

    theta_hat: ThetaPoint
    index: int
    numerator: float
    loglik: np.ndarray

    @classmethod
    def build(cls, grid: GridLikelihood, fit: CountSample, evaluate: CountSample) -> "HalfFit":
        idx, theta, _ = unrestricted_estimator(grid, fit)
        alt = grid.alternative(idx, fit, evaluate.cells)
        num = _alt_loglik(grid, idx, evaluate, alt)
        return cls(theta, idx, num, grid.loglik(evaluate, alt))


def _alt_loglik(grid: GridLikelihood, idx: int, sample: CountSample, alt: dict) -> float:
    total = float(grid.selection_loglik(sample.selection)[idx])
    for cell in sample.cells:
        with np.errstate(divide="ignore"):
            total += float(np.maximum(np.log(alt[cell]), LOG_FLOOR) @ sample.counts[cell])
    return total


def slice_mask(phi: np.ndarray, phi_star: float, halfwidth: float) -> np.ndarray:
    return np.abs(phi - phi_star) <= halfwidth * (1 + 1e-12) + 1e-15


def log_t_n(half: HalfFit, mask: np.ndarray) -> float:
    """log T_n; +inf when the restricted slice is empty."""
    if not mask.any():
        return np.inf
    return float(half.numerator - half.loglik[mask].max())


def t_n(phi_star: float, half: HalfFit, phi: np.ndarray, halfwidth: float) -> float:
    return float(np.exp(min(log_t_n(half, slice_mask(phi, phi_star, halfwidth)), 709.0)))


def log_s_n(log_t: float, log_t_swap: float) -> float:
    """log of (T + T_swap) / 2."""
    return float(np.logaddexp(log_t, log_t_swap) - np.log(2.0))


def s_n(t: float, t_swap: float) -> float:
    return 0.5 * (t + t_swap)


@dataclass
class CiResult:
    functional_id: str
    phi_grid: np.ndarray
    log_s: np.ndarray
    lower: float
    upper: float
    alpha: float
    K: int
    seed: int = 0
    theta_hat: tuple = ()
    empty_slices: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be at least 2")

    @property
    def refuted(self) -> bool:
        return not np.isfinite(self.lower)

    @property
    def accepted(self) -> np.ndarray:
        return self.log_s <= -np.log(self.alpha)

    @property
    def s_values(self) -> np.ndarray:
        return np.exp(np.minimum(self.log_s, 709.0))

    def covers(self, value: float) -> bool:
        return (not self.refuted) and self.lower <= value <= self.upper

    def as_dict(self) -> dict:
        return {"schema_version": 1, "functional": self.functional_id, "alpha": self.alpha, "K": self.K,
                "threshold": 1.0 / self.alpha, "seed": self.seed, "lower": _num(self.lower),
                "upper": _num(self.upper), "refuted": self.refuted, "empty_slices": self.empty_slices,
                "theta_hat": [t.as_dict() for t in self.theta_hat],
                "phi_grid": self.phi_grid.tolist(), "log_s": [_num(v) for v in self.log_s]}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    def table(self) -> str:
        lo = "refuted" if self.refuted else f"[{self.lower:.4f}, {self.upper:.4f}]"
        return f"{self.functional_id:<24} {lo}  (alpha={self.alpha:g}, K={self.K})"


def _num(v):
    return None if not np.isfinite(v) else float(v)


def phi_grid(phi: np.ndarray, K: int) -> tuple:
    """K equally spaced candidate values over the range of phi on the grid, and the slice half-width."""
    lo, hi = float(np.min(phi)), float(np.max(phi))
    if hi - lo < 1e-12:
        return np.full(K, lo), 0.0
    grid = np.linspace(lo, hi, K)
    return grid, 0.5 * (grid[1] - grid[0])


def confidence_interval(functional: fn.Functional, grid: GridLikelihood, data: pd.DataFrame, schema: Schema,
                        alpha: float = ALPHA, K: int = K_GRID, seed: int = 0,
                        plan: Optional[SplitPlan] = None) -> CiResult:
    """Hull of {phi* : S_n(phi*) <= 1/alpha}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if K < 2:
        raise ValueError("K must be at least 2")
    plan = plan or SplitPlan.make(len(data), seed)
    half0 = CountSample.from_frame(data.iloc[plan.s0], schema, grid.support)
    half1 = CountSample.from_frame(data.iloc[plan.s1], schema, grid.support)
    phi = fn.evaluate(functional, grid.model, grid.arrays)
    return ci_from_halves(functional.id, grid, phi, half0, half1, alpha, K, seed)


def ci_from_halves(functional_id: str, grid: GridLikelihood, phi: np.ndarray, half0: CountSample,
                   half1: CountSample, alpha: float = ALPHA, K: int = K_GRID, seed: int = 0) -> CiResult:
    fit_a = HalfFit.build(grid, half1, half0)  # fit on S1, evaluate on S0
    fit_b = HalfFit.build(grid, half0, half1)  # swapped roles
    stars, halfwidth = phi_grid(phi, K)
    order = np.argsort(phi, kind="stable")
    sorted_phi = phi[order]
    la, lb = fit_a.loglik[order], fit_b.loglik[order]
    log_s = np.empty(K)
    empty = 0
    tol = halfwidth * (1 + 1e-12) + 1e-15
    for i, star in enumerate(stars):
        a = np.searchsorted(sorted_phi, star - tol, side="left")
        b = np.searchsorted(sorted_phi, star + tol, side="right")
        if b <= a:
            log_s[i] = np.inf
            empty += 1
            continue
        log_s[i] = log_s_n(fit_a.numerator - la[a:b].max(), fit_b.numerator - lb[a:b].max())
    keep = log_s <= -np.log(alpha)
    if keep.any():
        lower, upper = float(stars[keep].min()), float(stars[keep].max())
    else:
        lower = upper = np.nan
    return CiResult(functional_id, stars, log_s, lower, upper, alpha, K, seed,
                    (fit_a.theta_hat, fit_b.theta_hat), empty)
