"""Containment functional and capacity of the model's prediction set."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .models import (BinaryRoy, Multinomial, OrderedChoice, ModelSpec, as_event,
                     multinomial_predict_sets, cf_box)
from .latent import normal_score
from .theta import Cell, ThetaPoint, as_cell, stable_key

DEFAULT_DRAWS = 20000
MAX_SUPPORT = 8


def format_event(event: frozenset) -> str:
    return "{" + ",".join(str(v) for v in sorted(event)) + "}"


def format_cell(cell: Cell) -> str:
    def part(t):
        return ",".join(str(v) for v in t)
    return f"d={part(cell.d)};x={part(cell.x)};z={part(cell.z)}"


def complement(event, support) -> frozenset:
    return frozenset(support) - as_event(event)


def event_class(support: Sequence, prune: bool = False, kind: Optional[str] = None) -> list:
    """All nonempty proper subsets of the support, optionally pruned.

    Pruning removes only events whose containment is the sum of
    containments of sub-events for the given kind; for the ordered kind
    these are {3} and {0, 6}.
    """
    support = tuple(sorted(support))
    if len(support) > MAX_SUPPORT:
        raise ValueError(f"support of size {len(support)} is too large; supply an event class manually")
    events = [frozenset(c) for r in range(1, len(support)) for c in itertools.combinations(support, r)]
    if prune and kind == "ordered" and support == (0, 3, 6):
        events = [e for e in events if e not in (frozenset({3}), frozenset({0, 6}))]
    return events


def mc_generator(seed: int, cell: Cell, theta: ThetaPoint) -> np.random.Generator:
    """Counter-based stream keyed by (seed, cell, theta); shared across events."""
    return np.random.Generator(np.random.Philox(key=stable_key(int(seed), tuple(cell), theta.digest)))


def multinomial_membership(model: Multinomial, cell: Cell, theta: ThetaPoint, n_draws: int, seed: int,
                           cf=None) -> np.ndarray:
    """(n_draws, J) membership of each option in the prediction set for shared draws."""
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    eta = mc_generator(seed, cell, theta).random((n_draws, model.J))
    s = model.cf(cell, theta) if cf is None else cf
    box = cf_box(s)
    if box is None:
        raise NotImplementedError("simulated containment needs a box-shaped control set")
    return multinomial_predict_sets(normal_score(eta), model.utilities(cell.d, theta), model.loadings(theta),
                                    model.scales(theta), box)


def containment_from_membership(member: np.ndarray, event, support) -> tuple:
    event = as_event(event)
    outside = [i for i, y in enumerate(support) if y not in event]
    inside = ~member[:, outside].any(axis=1) if outside else np.ones(len(member), dtype=bool)
    p = float(inside.mean())
    return p, float(np.sqrt(p * (1 - p) / len(member)))


def containment_binary(event, d, x, z, theta: ThetaPoint, model: ModelSpec = BinaryRoy()) -> float:
    """C({1}) = inf H and C({0}) = 1 - sup H for a binary outcome."""
    return model.containment(as_event(event), as_cell(d, x, z), theta)


def containment_ordered(event, d, x, z, theta: ThetaPoint, model: OrderedChoice = OrderedChoice()) -> float:
    return model.containment(as_event(event), as_cell(d, x, z), theta)


def containment_multinomial_mc(event, d, x, z, theta: ThetaPoint, n_draws: int = DEFAULT_DRAWS, seed: int = 0,
                               model: Multinomial = Multinomial(), cf=None) -> tuple:
    """Frequency of {prediction set within event} over seeded uniform eta.

    Returns
    -------
    (estimate, se)
    """
    member = multinomial_membership(model, as_cell(d, x, z), theta, n_draws, seed, cf)
    return containment_from_membership(member, event, model.support)


def containment(model: ModelSpec, event, cell: Cell, theta: ThetaPoint, n_draws: int = DEFAULT_DRAWS,
                seed: int = 0) -> tuple:
    """(containment, se) for any discrete kind; se is 0 for closed forms."""
    if isinstance(model, Multinomial):
        member = multinomial_membership(model, cell, theta, n_draws, seed)
        return containment_from_membership(member, event, model.support)
    return model.containment(as_event(event), cell, theta), 0.0


def capacity(model: ModelSpec, event, cell: Cell, theta: ThetaPoint, **mc) -> float:
    """1 - containment of the complement."""
    return 1.0 - containment(model, complement(event, model.support), cell, theta, **mc)[0]


@dataclass
class ContainmentTable:
    """(event, cell) -> (containment, capacity, se)."""

    support: tuple
    entries: dict = field(default_factory=dict)

    def containment(self, event, cell) -> float:
        return self.entries[(as_event(event), cell)][0]

    def capacity(self, event, cell) -> float:
        return self.entries[(as_event(event), cell)][1]

    def rows(self):
        for (event, cell), (cont, cap, se) in sorted(self.entries.items(),
                                                     key=lambda kv: (repr(kv[0][1]), len(kv[0][0]),
                                                                     sorted(kv[0][0]))):
            yield {"cell": format_cell(cell), "event": format_event(event), "containment": cont,
                   "capacity": cap, "se": se}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["cell", "event", "containment", "capacity", "se"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})


def build_table(model: ModelSpec, theta: ThetaPoint, cells: Iterable[Cell], events=None,
                n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> ContainmentTable:
    """Containment and capacity for every (event, cell); MC draws are shared within a cell."""
    support = tuple(model.support)
    events = event_class(support) if events is None else [as_event(e) for e in events]
    table = ContainmentTable(support)
    for cell in cells:
        if isinstance(model, Multinomial):
            member = multinomial_membership(model, cell, theta, n_draws, seed)
            value = lambda e: containment_from_membership(member, e, support)
        elif hasattr(model, "event_table"):
            closed = model.event_table(cell, theta)
            value = lambda e: (closed[e], 0.0)
        else:
            value = lambda e: (model.containment(e, cell, theta), 0.0)
        for event in events:
            cont, se = value(event)
            cap = 1.0 - value(complement(event, support))[0]
            table.entries[(event, cell)] = (cont, cap, se)
    return table
