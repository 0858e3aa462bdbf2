"""Empirical (or population) conditional laws of Y per conditioning cell."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .theta import Cell


@dataclass(frozen=True)
class Schema:
    """Column names: outcome, treatment(s), covariates, instruments."""

    y: str = "y"
    d: tuple = ("d",)
    x: tuple = ()
    z: tuple = ("z",)

    @property
    def columns(self) -> list:
        return [self.y, *self.d, *self.x, *self.z]


@dataclass
class CellRecord:
    count: int
    probs: Optional[np.ndarray] = None  # over the support, discrete outcomes
    mean: float = np.nan
    var: float = np.nan

    def se_probs(self) -> np.ndarray:
        p = self.probs
        return np.sqrt(p * (1 - p) / self.count)

    @property
    def se_mean(self) -> float:
        return float(np.sqrt(self.var / self.count)) if self.count > 1 else np.inf


@dataclass
class CellStats:
    """Per-cell outcome law plus propensity scores per (z, x).

    ``exact`` marks population values (zero sampling error).
    """

    support: Optional[tuple]
    cells: dict = field(default_factory=dict)
    propensity: dict = field(default_factory=dict)  # (z, x) -> (pi_hat, count)
    exact: bool = False
    blocks: dict = field(default_factory=dict)  # name -> {cell: (P(node = 1), count)}, dynamic model

    def prob(self, cell: Cell, event) -> float:
        rec = self.cells[cell]
        idx = [self.support.index(y) for y in event]
        return float(rec.probs[idx].sum())

    def max_se(self) -> float:
        """Largest standard error over every tested quantity."""
        if self.exact:
            return 0.0
        ses = []
        for rec in self.cells.values():
            if self.support is not None:
                ses.append(float(rec.se_probs().max()))
            else:
                ses.append(rec.se_mean)
        for p, n in self.propensity.values():
            ses.append(float(np.sqrt(p * (1 - p) / n)))
        for table in self.blocks.values():
            for p, n in table.values():
                ses.append(float(np.sqrt(p * (1 - p) / n)))
        return max(ses) if ses else 0.0


def bin_edges(values: np.ndarray, n_bins: int = 4, method: str = "quantile", value_range=None) -> np.ndarray:
    if method == "quantile":
        return np.quantile(values, np.linspace(0, 1, n_bins + 1))
    lo, hi = value_range if value_range is not None else (values.min(), values.max())
    return np.linspace(lo, hi, n_bins + 1)


def bin_column(values, edges) -> np.ndarray:
    """Bin index of each value; interior edges belong to the upper bin."""
    edges = np.asarray(edges, dtype=float)
    return np.searchsorted(edges[1:-1], np.asarray(values, dtype=float), side="right")


def _key(row) -> tuple:
    return tuple(v.item() if hasattr(v, "item") else v for v in row)


def estimate_cells(data: pd.DataFrame, schema: Schema, bins: Optional[dict] = None, support: Optional[Sequence] = None,
                   min_count: int = 1, propensity: bool = True) -> CellStats:
    """Empirical conditional law (discrete support) or mean of Y per cell.

    Parameters
    ----------
    bins : dict, optional
        column -> edges array, or column -> {"n": int, "method": "quantile"|"uniform", "range": (lo, hi)}.
    support : sequence, optional
        Outcome support; None means a continuous outcome (means are stored).
    min_count : int
        Cells with fewer rows are dropped with a warning.
    """
    if data is None or len(data) == 0:
        raise ValueError("no data rows")
    missing = [c for c in schema.columns if c not in data.columns]
    if missing:
        raise KeyError(f"unknown columns {missing}")
    df = data[schema.columns].copy()
    for col, spec in (bins or {}).items():
        if col not in df.columns:
            raise KeyError(f"unknown binned column {col!r}")
        if isinstance(spec, dict):
            edges = bin_edges(df[col].to_numpy(float), spec.get("n", 4), spec.get("method", "quantile"),
                              spec.get("range"))
        else:
            edges = spec
        df[col] = bin_column(df[col].to_numpy(float), edges)
    stats = CellStats(tuple(support) if support is not None else None)
    y = df[schema.y].to_numpy()
    keys = df[[*schema.d, *schema.x, *schema.z]].to_numpy()
    nd, nx = len(schema.d), len(schema.x)
    groups = {}
    for i, row in enumerate(map(_key, keys)):
        groups.setdefault(row, []).append(i)
    dropped = 0
    for row in sorted(groups, key=repr):
        idx = np.asarray(groups[row])
        if len(idx) < min_count:
            dropped += 1
            continue
        cell = Cell(row[:nd], row[nd:nd + nx], row[nd + nx:])
        ys = y[idx]
        if support is not None:
            unknown = set(np.unique(ys).tolist()) - set(support)
            if unknown:
                raise ValueError(f"outcome values {sorted(unknown)} outside support {tuple(support)}")
            probs = np.array([np.mean(ys == s) for s in support])
            stats.cells[cell] = CellRecord(len(idx), probs=probs)
        else:
            ys = ys.astype(float)
            stats.cells[cell] = CellRecord(len(idx), mean=float(ys.mean()),
                                           var=float(ys.var(ddof=1)) if len(idx) > 1 else np.nan)
    if dropped:
        warnings.warn(f"dropped {dropped} cells with fewer than {min_count} rows")
    if propensity and len(schema.d) == 1:
        dz = df[[*schema.z, *schema.x]].to_numpy()
        dvals = df[schema.d[0]].to_numpy(float)
        pg = {}
        for i, row in enumerate(map(_key, dz)):
            pg.setdefault(row, []).append(i)
        nz = len(schema.z)
        for row, idx in pg.items():
            dv = dvals[idx]
            if np.all(np.isin(dv, (0.0, 1.0))):
                stats.propensity[(row[:nz], row[nz:])] = (float(dv.mean()), len(idx))
    return stats


def estimate_dynamic(data: pd.DataFrame, schema: Schema, min_count: int = 1) -> CellStats:
    """Cells for the two-period model plus the selection-node blocks.

    Outcome cells are keyed by d = (y1, d1, d2), z = (z1, z2). Blocks hold
    P(D2 = 1 | y1, d1, z, x) and P(Y1 = 1 | d1, z1, x); propensities are keyed
    ("pi1", z1, x).
    """
    if len(schema.d) != 3 or len(schema.z) != 2:
        raise ValueError("dynamic schema needs d = (y1, d1, d2) and z = (z1, z2)")
    stats = estimate_cells(data, schema, support=(0, 1), min_count=min_count, propensity=False)
    y1c, d1c, d2c = schema.d
    z1c, z2c = schema.z
    xs = list(schema.x)
    d2_block, y1_block = {}, {}
    for key, grp in data.groupby([y1c, d1c, *xs, z1c, z2c], sort=True):
        key = _key(key)
        cell = Cell(key[:2], key[2:2 + len(xs)], key[2 + len(xs):])
        d2_block[cell] = (float(grp[d2c].mean()), len(grp))
    for key, grp in data.groupby([d1c, *xs, z1c], sort=True):
        key = _key(key)
        cell = Cell(key[:1], key[1:1 + len(xs)], key[1 + len(xs):])
        y1_block[cell] = (float(grp[y1c].mean()), len(grp))
    for key, grp in data.groupby([z1c, *xs], sort=True):
        key = _key(key)
        stats.propensity[("pi1", key[0], key[1:])] = (float(grp[d1c].mean()), len(grp))
    stats.blocks = {"d2": d2_block, "y1": y1_block}
    return stats
