"""Structural parameter points and conditioning cells."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Hashable, NamedTuple, Optional

import numpy as np


class InfeasibleThetaError(ValueError):
    """A parameter point that cannot generate the model (e.g. pi outside [0,1])."""


class Cell(NamedTuple):
    """Conditioning cell: treatment tuple, covariate tuple, instrument tuple."""

    d: tuple
    x: tuple = ()
    z: tuple = ()


def _tup(v) -> tuple:
    if v is None:
        return ()
    if isinstance(v, (tuple, list, np.ndarray)):
        return tuple(v)
    return (v,)


def as_cell(d, x=(), z=()) -> Cell:
    return Cell(_tup(d), _tup(x), _tup(z))


@dataclass(frozen=True)
class ThetaPoint:
    """One structural parameter point.

    Attributes
    ----------
    mu_params : tuple of float
        Coefficients of the structural function; layout is fixed by the model kind.
    f_params : tuple of float
        Dependence parameters of the latent law (rho, or loadings), each in (-1, 1).
    pi_params : tuple of (key, value) pairs
        Selection indices keyed per cell. Empty means "plug in the propensity
        from data" where the model allows it.
    cutoffs : (c_L, c_U) or None
    """

    mu_params: tuple = ()
    f_params: tuple = (0.0,)
    pi_params: tuple = ()
    cutoffs: Optional[tuple] = None

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(np.asarray(self.mu_params, dtype=float)))
        f = tuple(float(r) for r in np.atleast_1d(self.f_params))
        if any(not (-1.0 < r < 1.0) for r in f):
            raise InfeasibleThetaError(f"dependence parameters must lie in (-1, 1): {f}")
        pi = self.pi_params
        if isinstance(pi, dict):
            pi = tuple(pi.items())
        pi = tuple(sorted(((k, float(v)) for k, v in pi), key=lambda kv: repr(kv[0])))
        cut = None
        if self.cutoffs is not None:
            cut = tuple(float(c) for c in self.cutoffs)
            if len(cut) != 2 or not cut[0] < cut[1]:
                raise InfeasibleThetaError(f"cutoffs must satisfy c_L < c_U: {cut}")
        object.__setattr__(self, "mu_params", mu)
        object.__setattr__(self, "f_params", f)
        object.__setattr__(self, "pi_params", pi)
        object.__setattr__(self, "cutoffs", cut)

    @cached_property
    def pi_table(self) -> dict:
        return dict(self.pi_params)

    def pi(self, key: Hashable) -> float:
        try:
            return self.pi_table[key]
        except KeyError:
            raise KeyError(f"theta has no selection index for key {key!r}") from None

    @property
    def rho(self) -> float:
        return self.f_params[0]

    def with_pi(self, table: dict) -> "ThetaPoint":
        merged = dict(self.pi_params)
        merged.update(table)
        return replace(self, pi_params=tuple(merged.items()))

    def replace(self, **changes) -> "ThetaPoint":
        return replace(self, **changes)

    @cached_property
    def digest(self) -> int:
        """Stable 64-bit hash (independent of PYTHONHASHSEED)."""
        text = repr((self.mu_params, self.f_params, self.pi_params, self.cutoffs))
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")

    def as_dict(self) -> dict:
        return {
            "mu_params": list(self.mu_params),
            "f_params": list(self.f_params),
            "pi_params": [[repr(k), v] for k, v in self.pi_params],
            "cutoffs": None if self.cutoffs is None else list(self.cutoffs),
        }


def stable_key(*parts) -> int:
    text = repr(parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")
