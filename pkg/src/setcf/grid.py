"""Declarative parameter grids and their array form for vectorized sweeps."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .theta import InfeasibleThetaError, ThetaPoint

RHO_POINTS = 41
RHO_EDGE = 0.975
MU_POINTS = 21


@dataclass(frozen=True)
class GridSpec:
    """Cartesian product of candidate values per parameter slot.

    Attributes
    ----------
    mu : per structural coefficient, a tuple of candidate values
    f : per dependence parameter, a tuple of candidate values
    cutoffs : candidate (c_L, c_U) pairs, or (None,) for kinds without cutoffs
    pi : (key, candidate values) pairs; keys as used by ``ThetaPoint.pi``
    """

    mu: tuple
    f: tuple = ((0.0,),)
    cutoffs: tuple = (None,)
    pi: tuple = ()

    def __post_init__(self):
        # rounding keeps linspace values equal to their decimal literals
        norm = lambda axes: tuple(tuple(round(float(v), 12) for v in np.atleast_1d(a)) for a in axes)
        object.__setattr__(self, "mu", norm(self.mu))
        object.__setattr__(self, "f", norm(self.f))
        object.__setattr__(self, "cutoffs", tuple(None if c is None else (round(float(c[0]), 12), round(float(c[1]), 12))
                                                  for c in self.cutoffs))
        pi = self.pi.items() if isinstance(self.pi, dict) else self.pi
        object.__setattr__(self, "pi", tuple((k, tuple(round(float(v), 12) for v in np.atleast_1d(vals)))
                                             for k, vals in pi))
        if any(len(a) == 0 for a in (*self.mu, *self.f, self.cutoffs, *(v for _, v in self.pi))):
            raise ValueError("every grid axis needs at least one value")

    @property
    def axis_names(self) -> list:
        return ([f"mu{i}" for i in range(len(self.mu))] + [f"f{i}" for i in range(len(self.f))]
                + ["cutoffs"] + [f"pi{k!r}" for k, _ in self.pi])

    @property
    def axes(self) -> list:
        return [*self.mu, *self.f, self.cutoffs, *(v for _, v in self.pi)]

    def steps(self) -> np.ndarray:
        """Spacing per numeric axis (nan for the cutoff axis or single-value axes)."""
        out = []
        for name, values in zip(self.axis_names, self.axes):
            if name == "cutoffs" or len(values) < 2:
                out.append(np.nan)
            else:
                out.append(float(np.min(np.diff(np.sort(values)))))
        return np.array(out)

    @property
    def size(self) -> int:
        return int(np.prod([len(a) for a in self.axes]))

    def points(self) -> tuple:
        """(points, index) with index[p, a] the position of point p on axis a.

        Combinations that are not valid parameter points (e.g. unordered
        cutoffs, |rho| >= 1) are skipped.
        """
        n_mu, n_f = len(self.mu), len(self.f)
        keys = [k for k, _ in self.pi]
        pts, idx = [], []
        ranges = [range(len(a)) for a in self.axes]
        for combo in itertools.product(*ranges):
            mu = tuple(self.mu[i][c] for i, c in enumerate(combo[:n_mu]))
            f = tuple(self.f[i][c] for i, c in enumerate(combo[n_mu:n_mu + n_f]))
            cut = self.cutoffs[combo[n_mu + n_f]]
            pi = tuple((k, self.pi[i][1][c]) for i, (k, c) in enumerate(zip(keys, combo[n_mu + n_f + 1:])))
            try:
                pts.append(ThetaPoint(mu, f, pi, cut))
            except InfeasibleThetaError:
                continue
            idx.append(combo)
        if not pts:
            raise ValueError("grid has no valid parameter points")
        return pts, np.asarray(idx, dtype=int)


@dataclass
class ParamArrays:
    """Stacked parameters of a list of points (rows align with the list)."""

    mu: np.ndarray
    f: np.ndarray
    cutoffs: Optional[np.ndarray]
    points: list

    @classmethod
    def from_points(cls, points: Sequence[ThetaPoint]) -> "ParamArrays":
        points = list(points)
        if not points:
            raise ValueError("no parameter points")
        mu = np.array([p.mu_params for p in points], dtype=float)
        f = np.array([p.f_params for p in points], dtype=float)
        cut = None
        if points[0].cutoffs is not None:
            cut = np.array([p.cutoffs for p in points], dtype=float)
        return cls(mu, f, cut, points)

    def __len__(self):
        return len(self.points)

    def pi(self, key) -> np.ndarray:
        cache = self.__dict__.setdefault("_pi_cache", {})
        if key not in cache:
            cache[key] = np.array([p.pi(key) for p in self.points], dtype=float)
        return cache[key]


def rho_axis(n: int = RHO_POINTS, edge: float = RHO_EDGE) -> tuple:
    return tuple(np.linspace(-edge, edge, n))


def default_grid(model, stats, n_mu: int = MU_POINTS, n_rho: int = RHO_POINTS, cutoff_values=None) -> GridSpec:
    """Default grid: rho on 41 points in [-0.975, 0.975], mu coefficients on 21
    points over +-3 outcome SD, propensities plugged in from the data.
    """
    from .models import BinaryRoy, OrderedChoice

    if isinstance(model, BinaryRoy):
        n_mu_params = 2 + model.n_x
    elif isinstance(model, OrderedChoice):
        n_mu_params = 1 + model.n_x
    else:
        raise NotImplementedError(f"no default grid for kind {model.kind}; declare one explicitly")
    spread = 3.0 * _outcome_sd(stats)
    mu_axis = tuple(np.linspace(-spread, spread, n_mu))
    cut = (None,)
    if isinstance(model, OrderedChoice):
        values = np.linspace(-2.0, 2.0, 9) if cutoff_values is None else np.asarray(cutoff_values, dtype=float)
        cut = tuple((a, b) for a, b in itertools.combinations(np.sort(values), 2))
    pi = () if getattr(model, "observed_control", False) else tuple(
        (key, (p,)) for key, (p, _) in sorted(stats.propensity.items(), key=lambda kv: repr(kv[0])))
    return GridSpec(tuple(mu_axis for _ in range(n_mu_params)), (rho_axis(n_rho),), cut, pi)


def _outcome_sd(stats) -> float:
    """Pooled outcome SD from cell summaries (1 if unavailable)."""
    total, m1, m2 = 0, 0.0, 0.0
    for rec in stats.cells.values():
        if stats.support is not None:
            s = np.asarray(stats.support, dtype=float)
            mean, second = float(rec.probs @ s), float(rec.probs @ s ** 2)
        else:
            var = 0.0 if not np.isfinite(rec.var) else rec.var
            mean, second = rec.mean, var + rec.mean ** 2
        total += rec.count
        m1 += rec.count * mean
        m2 += rec.count * second
    if total == 0:
        return 1.0
    var = m2 / total - (m1 / total) ** 2
    return float(np.sqrt(var)) if var > 0 else 1.0
