"""Set-valued control function constructors, one per model kind.

Selection indices are read from ``theta.pi(key)``; the key layout per kind is
documented on each constructor.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .rset import Box, FiniteSet, HalfPlaneClip, Interval, TaggedUnion, Union
from .theta import InfeasibleThetaError, ThetaPoint, _tup


def _unit_index(value: float, what: str) -> float:
    if not (0.0 <= value <= 1.0):
        raise InfeasibleThetaError(f"{what} = {value} lies outside [0, 1]")
    return float(value)


def _branch(outcome: int, index: float) -> Interval:
    # threshold equation outcome = 1{index >= latent}, latent in [0,1]
    return Interval(0.0, index) if outcome == 1 else Interval(index, 1.0)


def cf_binary_roy(d: int, z, x, theta: ThetaPoint) -> Interval:
    """[0, pi] if treated, [pi, 1] if not; pi keyed by ``(z, x)``."""
    pi = _unit_index(theta.pi((_tup(z), _tup(x))), "pi(z,x)")
    return _branch(int(d), pi)


def cf_observed(v: float) -> Interval:
    """Singleton control: the classical case with V observed."""
    return Interval(v, v)


def cf_random_coef(d: int, z: int, x, theta: ThetaPoint) -> HalfPlaneClip:
    """Region of (v0, v1) consistent with D = 1{pi(Z,x) >= V_Z}.

    pi keyed by ``((z,), x)`` for z in {0, 1}.
    """
    z = int(z)
    if z not in (0, 1):
        raise ValueError("random-coefficient selection needs a binary instrument")
    x = _tup(x)
    p0 = _unit_index(theta.pi(((0,), x)), "pi(0,x)")
    p1 = _unit_index(theta.pi(((1,), x)), "pi(1,x)")
    pi_z = p0 + z * (p1 - p0)
    sense = ">=" if int(d) == 1 else "<="
    return HalfPlaneClip((pi_z, -(1.0 - z), -float(z)), sense)


def cf_dynamic(y1: int, d1: int, d2: int, z, x, theta: ThetaPoint) -> Box:
    """Box over (U1, V1, V2) for the two-period model.

    Keys: ``("mu1", d1, x)``, ``("pi1", z1, x)``, ``("pi2", y1, d1, z2, x)``
    with ``z = (z1, z2)``.
    """
    z1, z2 = _tup(z)
    x = _tup(x)
    mu1 = _unit_index(theta.pi(("mu1", int(d1), x)), "mu1")
    pi1 = _unit_index(theta.pi(("pi1", z1, x)), "pi1")
    pi2 = _unit_index(theta.pi(("pi2", int(y1), int(d1), z2, x)), "pi2")
    return Box((_branch(int(y1), mu1), _branch(int(d1), pi1), _branch(int(d2), pi2)))


ENTRY_LABELS = ((0, 0), (0, 1), (1, 0), (1, 1), "multi")


def entry_indices(z, x, theta: ThetaPoint):
    """A_j = pi_j(1, z_j, x) and B_j = pi_j(0, z_j, x); key ``("entry", j, d_other, z_j, x)``."""
    z = _tup(z)
    x = _tup(x)
    a = np.empty(2)
    b = np.empty(2)
    for j in (1, 2):
        a[j - 1] = _unit_index(theta.pi(("entry", j, 1, z[j - 1], x)), f"pi_{j}(1)")
        b[j - 1] = _unit_index(theta.pi(("entry", j, 0, z[j - 1], x)), f"pi_{j}(0)")
    if np.any(a > b):
        raise ValueError("entry game requires strategic substitutes: pi_j(1,.) <= pi_j(0,.)")
    return a, b


def entry_regions(z, x, theta: ThetaPoint) -> dict:
    """The five closed regions of (v1, v2) by equilibrium outcome."""
    (a1, a2), (b1, b2) = entry_indices(z, x, theta)

    def box(l1, h1, l2, h2):
        return Box((Interval(l1, h1), Interval(l2, h2)))

    return {
        (0, 0): box(b1, 1, b2, 1),
        (1, 1): box(0, a1, 0, a2),
        "multi": box(a1, b1, a2, b2),
        (0, 1): Union((box(b1, 1, 0, b2), box(a1, b1, 0, a2))),
        (1, 0): Union((box(0, a1, a2, 1), box(a1, b1, b2, 1))),
    }


def cf_entry_game(d, z, x, theta: ThetaPoint) -> TaggedUnion:
    """Tagged union over (v1, v2, v_s); in the multiplicity region v_s = 1 selects (1,0)."""
    d = tuple(int(v) for v in d)
    regions = entry_regions(z, x, theta)
    own = regions[d]
    parts = [(own, 0), (own, 1)]
    if d == (0, 1):
        parts.append((regions["multi"], 0))
    elif d == (1, 0):
        parts.append((regions["multi"], 1))
    elif d not in ((0, 0), (1, 1)):
        raise ValueError(f"invalid entry outcome {d}")
    return TaggedUnion(tuple(parts), labels=(0, 1))


def cf_censored(d: float, z, x, theta: ThetaPoint) -> Interval:
    """D = max(pi* + V, 0): singleton when d > 0, half-line when d = 0. Key ``(z, x)``."""
    if d < 0:
        raise ValueError(f"censored treatment must be nonnegative, got {d}")
    pi_star = theta.pi((_tup(z), _tup(x)))
    if d > 0:
        return Interval(d - pi_star, d - pi_star)
    return Interval(-np.inf, -pi_star)


def cf_interval_treatment(d_l: float, d_u: float, z, x, theta: ThetaPoint):
    """Sets for V and for the latent treatment D* when only [d_l, d_u] is seen."""
    if d_l > d_u:
        raise ValueError(f"interval treatment needs d_l <= d_u, got [{d_l}, {d_u}]")
    pi_star = theta.pi((_tup(z), _tup(x)))
    return Interval(d_l - pi_star, d_u - pi_star), Interval(d_l, d_u)


def feasible_schools(scores: Sequence[float], cutoffs: Sequence[float]) -> set:
    """B(S): outside option 0 plus every school whose cutoff is met."""
    scores = np.asarray(scores, dtype=float)
    cutoffs = np.asarray(cutoffs, dtype=float)
    if np.any(scores == cutoffs):
        raise ValueError("placement scores and cutoffs must not tie")
    return {0} | {k + 1 for k in np.flatnonzero(scores > cutoffs)}


def _best(order: Sequence[int], options: set) -> int:
    for k in order:
        if k in options:
            return k
    return 0


def reported_local_pref(scores, report: Sequence[int], cutoffs, j: int) -> tuple:
    """(a, b): report-best option in B(S) + {j} and in B(S) - {j}."""
    feasible = feasible_schools(scores, cutoffs)
    return _best(report, feasible | {j}), _best(report, feasible - {j})


def cf_local_pref(scores, report: Sequence[int], cutoffs, j: int) -> FiniteSet:
    """Candidate true local preferences at school j.

    Parameters
    ----------
    scores, cutoffs : sequences indexed by school - 1
    report : list of school indices, most preferred first (unlisted options
        rank below the outside option 0)
    j : school index in 1..J
    """
    scores = np.asarray(scores, dtype=float)
    if len(set(report)) != len(report) or 0 in report:
        raise ValueError("report must list distinct schools (outside option implicit)")
    feasible = feasible_schools(scores, cutoffs)
    listed = set(report) | {0}
    a, b = reported_local_pref(scores, report, cutoffs, j)
    n_minus = (feasible - {j}) - listed
    n_plus = (feasible | {j}) - listed
    out = [(a, b)]
    if scores[j - 1] > cutoffs[j - 1]:
        if a != b:
            out += [(a, k) for k in sorted(n_minus)]
    else:
        out += [(k, b) for k in sorted(n_plus - n_minus)]
    return FiniteSet(tuple(dict.fromkeys(out)))
