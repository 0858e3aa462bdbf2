"""Structural functionals of the potential outcome, vectorized over parameter points.

Every in-scope kind normalizes V ~ U[0,1], so a functional is an integral
over v of the conditional law of Y(d) given V = v, averaged over covariates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ParamArrays
from .latent import normal_cdf, normal_score, vquad, vquad_batch
from .models import BinaryRoy, ModelSpec, OrderedChoice
from .theta import ThetaPoint, _tup

NAMES = ("ASF", "DSF", "QSF", "PRSF", "SWITCH")
N_QUAD = 64


@dataclass(frozen=True)
class Functional:
    """A scalar functional kappa(theta).

    Attributes
    ----------
    name : one of ASF, DSF, QSF, PRSF, SWITCH
    d : treatment level (ASF, DSF, QSF)
    x : covariate value; ignored when ``x_weights`` is given
    y : threshold for DSF
    tau : quantile level for QSF
    z : instrument value for PRSF
    x_weights : ((x, weight), ...) to average over a covariate distribution
    """

    name: str
    d: int = 1
    x: tuple = ()
    y: float = 0.0
    tau: float = 0.5
    z: tuple = (0,)
    x_weights: tuple = ()

    def __post_init__(self):
        name = self.name.upper()
        if name not in NAMES:
            raise ValueError(f"unknown functional {self.name!r}; choose from {NAMES}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "x", _tup(self.x))
        object.__setattr__(self, "z", _tup(self.z))
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.x_weights:
            pairs = tuple((_tup(x), float(w)) for x, w in self.x_weights)
            total = sum(w for _, w in pairs)
            object.__setattr__(self, "x_weights", tuple((x, w / total) for x, w in pairs))

    @property
    def id(self) -> str:
        xs = "avg" if self.x_weights else ",".join(f"{v:g}" for v in self.x)
        extra = {"ASF": f"d={self.d}", "DSF": f"y={self.y:g},d={self.d}", "QSF": f"tau={self.tau:g},d={self.d}",
                 "PRSF": "z=" + ",".join(f"{v:g}" for v in self.z), "SWITCH": ""}[self.name]
        parts = [p for p in (extra, f"x={xs}" if xs else "") if p]
        return f"{self.name}({';'.join(parts)})"

    def weights(self) -> tuple:
        return self.x_weights if self.x_weights else ((self.x, 1.0),)


def empirical_x_weights(stats, fixed: dict = None) -> tuple:
    """Covariate distribution from cell counts, optionally holding some coordinates fixed."""
    counts = {}
    for cell, rec in stats.cells.items():
        x = list(cell.x)
        for pos, val in (fixed or {}).items():
            x[pos] = val
        counts[tuple(x)] = counts.get(tuple(x), 0) + rec.count
    total = sum(counts.values())
    return tuple((x, c / total) for x, c in sorted(counts.items()))


# ----------------------------------------------------------------------------
# conditional laws of Y(d) given V = v, arrays of shape (P, n)


def _latent_parts(model, arrays: ParamArrays, d, x):
    mu = model.mu_vec(arrays.mu, (d,), x)[:, None]
    if isinstance(model, OrderedChoice):
        rho = arrays.f[:, 0]
    else:
        rho = model.rho_vec(arrays.f, (d,))
    return mu, rho[:, None], np.sqrt(1.0 - rho ** 2)[:, None]


def conditional_cdf(model, arrays: ParamArrays, d, x, y: float, v: np.ndarray) -> np.ndarray:
    """P(Y(d) <= y | V = v); y may be a (P, 1) array for continuous outcomes."""
    mu, rho, scale = _latent_parts(model, arrays, d, x)
    g = rho * normal_score(v)
    if isinstance(model, OrderedChoice):
        c_lo, c_hi = arrays.cutoffs[:, :1], arrays.cutoffs[:, 1:]
        if y < 0:
            return np.zeros_like(g)
        if y < 3:
            return normal_cdf((c_lo - mu - g) / scale)
        if y < 6:
            return normal_cdf((c_hi - mu - g) / scale)
        return np.ones_like(g)
    if model.outcome == "binary":
        if y < 0:
            return np.zeros_like(g)
        if y < 1:
            return 1.0 - normal_cdf((mu - g) / scale)
        return np.ones_like(g)
    return normal_cdf((y - mu - g) / scale)


def conditional_mean(model, arrays: ParamArrays, d, x, v: np.ndarray) -> np.ndarray:
    """E[Y(d) | V = v]."""
    mu, rho, scale = _latent_parts(model, arrays, d, x)
    g = rho * normal_score(v)
    if isinstance(model, OrderedChoice):
        c_lo, c_hi = arrays.cutoffs[:, :1], arrays.cutoffs[:, 1:]
        f_lo = normal_cdf((c_lo - mu - g) / scale)
        f_hi = normal_cdf((c_hi - mu - g) / scale)
        return 3.0 * (f_hi - f_lo) + 6.0 * (1.0 - f_hi)
    if model.outcome == "binary":
        return normal_cdf((mu - g) / scale)
    return mu + g


def _check(model):
    if not isinstance(model, (BinaryRoy, OrderedChoice)):
        raise NotImplementedError(f"functionals are implemented for binary_roy and ordered, not {model.kind}")


def evaluate(functional: Functional, model: ModelSpec, points, n_quad: int = N_QUAD) -> np.ndarray:
    """kappa(theta) for each point (list of ThetaPoint or ParamArrays)."""
    _check(model)
    arrays = points if isinstance(points, ParamArrays) else ParamArrays.from_points(
        [points] if isinstance(points, ThetaPoint) else points)
    nodes, weights = vquad(0.0, 1.0, n_quad)
    v = nodes[None, :]
    f = functional
    out = np.zeros(len(arrays))
    for x, wx in f.weights():
        if f.name == "ASF":
            val = conditional_mean(model, arrays, f.d, x, v) @ weights
        elif f.name == "DSF":
            val = conditional_cdf(model, arrays, f.d, x, f.y, v) @ weights
        elif f.name == "QSF":
            val = None  # needs the mixed cdf, handled below
        elif f.name == "PRSF":
            pi = arrays.pi((f.z, x))
            n1, w1 = vquad_batch(np.zeros_like(pi), pi, n_quad)
            n0, w0 = vquad_batch(pi, np.ones_like(pi), n_quad)
            val = ((conditional_mean(model, arrays, 1, x, n1) * w1).sum(axis=1)
                   + (conditional_mean(model, arrays, 0, x, n0) * w0).sum(axis=1))
        else:  # SWITCH: P(Y(0) at the bottom category, Y(1) above it)
            if not model.discrete:
                raise ValueError("switching probability needs a discrete outcome")
            base = min(model.support)
            gap = conditional_cdf(model, arrays, 0, x, base, v) - conditional_cdf(model, arrays, 1, x, base, v)
            val = np.maximum(gap, 0.0) @ weights
        if val is not None:
            out += wx * val
    if f.name == "QSF":
        out = _quantile(f, model, arrays, v, weights)
    return out


def _mixed_cdf(f, model, arrays, v, weights, y) -> np.ndarray:
    total = np.zeros(len(arrays))
    for x, wx in f.weights():
        total += wx * (conditional_cdf(model, arrays, f.d, x, y, v) @ weights)
    return total


def _quantile(f, model, arrays, v, weights) -> np.ndarray:
    """inf{y : P(Y(d) <= y) >= tau}."""
    if model.discrete:
        out = np.full(len(arrays), float(max(model.support)))
        for y in sorted(model.support, reverse=True):
            out = np.where(_mixed_cdf(f, model, arrays, v, weights, y) >= f.tau - 1e-12, float(y), out)
        return out
    lo = np.full(len(arrays), -50.0)
    hi = np.full(len(arrays), 50.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        cdf = _mixed_cdf(f, model, arrays, v, weights, mid[:, None])
        below = cdf < f.tau
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi
