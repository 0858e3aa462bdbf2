"""Realized values of set-valued control functions.

Every set is closed: bounds are inclusive. A set is a small immutable value
object and the three generic operations (``contains``, ``extremize``,
``sample_grid``) dispatch on its type.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union as TypingUnion

import numpy as np
from scipy.optimize import minimize_scalar

MEMBERSHIP_TOL = 1e-12
DEFAULT_GRID = 64


class InfeasibleSetError(ValueError):
    """Raised when a construction would produce an empty set."""


class NonFiniteValueError(ValueError):
    """Raised when the function being extremized returns inf or nan."""

    def __init__(self, point, value):
        self.point = np.asarray(point, dtype=float)
        self.value = value
        super().__init__(f"non-finite value {value!r} at point {self.point.tolist()}")


class TruncationWarning(UserWarning):
    """An extremum over a half-line was taken at the truncation bound."""


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]``; one endpoint may be infinite (half-line)."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if np.isnan(lo) or np.isnan(hi):
            raise InfeasibleSetError("interval endpoint is nan")
        if lo > hi:
            raise InfeasibleSetError(f"empty interval [{lo}, {hi}]")
        if np.isinf(lo) and np.isinf(hi):
            raise InfeasibleSetError("at most one endpoint may be infinite")
        if lo == np.inf or hi == -np.inf:
            raise InfeasibleSetError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return 1

    @property
    def is_half_line(self) -> bool:
        return bool(np.isinf(self.lo) or np.isinf(self.hi))

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def as_box(self) -> "Box":
        return Box((self,))


@dataclass(frozen=True)
class Box:
    """Cartesian product of closed intervals."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(d if isinstance(d, Interval) else Interval(*d) for d in self.dims)
        if not dims:
            raise InfeasibleSetError("box needs at least one dimension")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def lo(self) -> np.ndarray:
        return np.array([d.lo for d in self.dims])

    @property
    def hi(self) -> np.ndarray:
        return np.array([d.hi for d in self.dims])

    def as_box(self) -> "Box":
        return self


def unit_box(dim: int) -> Box:
    return Box(tuple(Interval(0.0, 1.0) for _ in range(dim)))


@dataclass(frozen=True)
class HalfPlaneClip:
    """``{v in base : a0 + a1*v1 + a2*v2 (sense) 0}`` for a 2-d base box."""

    coeffs: tuple
    sense: str = ">="
    base: Box = field(default_factory=lambda: unit_box(2))

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != 3:
            raise ValueError("coeffs must be (a0, a1, a2)")
        if self.sense not in (">=", "<="):
            raise ValueError(f"sense must be '>=' or '<=', got {self.sense!r}")
        if self.base.dim != 2 or any(d.is_half_line for d in self.base.dims):
            raise ValueError("base must be a bounded 2-d box")
        object.__setattr__(self, "coeffs", coeffs)
        # a linear function attains its max over a box at a vertex
        if not np.any(self._signed(_box_vertices(self.base)) >= -MEMBERSHIP_TOL):
            raise InfeasibleSetError(f"half-plane clip {coeffs} {self.sense} 0 is empty")

    @property
    def dim(self) -> int:
        return 2

    def _signed(self, pts: np.ndarray) -> np.ndarray:
        a0, a1, a2 = self.coeffs
        val = a0 + a1 * pts[..., 0] + a2 * pts[..., 1]
        return val if self.sense == ">=" else -val

    def as_box(self) -> Optional[Box]:
        """Equivalent box when the clip line is axis-parallel, else None."""
        a0, a1, a2 = self.coeffs
        s = 1.0 if self.sense == ">=" else -1.0
        lo, hi = self.base.lo.copy(), self.base.hi.copy()
        if a1 == 0.0 and a2 == 0.0:
            return self.base
        for k, a in ((0, a1), (1, a2)):
            other = a2 if k == 0 else a1
            if other != 0.0 or a == 0.0:
                continue
            cut = -a0 / a
            if s * a > 0:
                lo[k] = max(lo[k], min(cut, hi[k]))
            else:
                hi[k] = min(hi[k], max(cut, lo[k]))
            return Box(tuple(Interval(l, h) for l, h in zip(lo, hi)))
        return None

    def vertices(self) -> np.ndarray:
        """Vertices of the clipped polygon (one clipping pass)."""
        corners = _box_vertices(self.base)[[0, 1, 3, 2]]
        vals = self._signed(corners)
        out = []
        for i in range(4):
            p, q = corners[i], corners[(i + 1) % 4]
            vp, vq = vals[i], vals[(i + 1) % 4]
            if vp >= 0:
                out.append(p)
            if (vp >= 0) != (vq >= 0):
                t = vp / (vp - vq)
                out.append(p + t * (q - p))
        return np.unique(np.array(out), axis=0)

    def coordinate_range(self, k: int, point: np.ndarray) -> tuple:
        """Feasible range of coordinate k with the other coordinate held fixed."""
        a0, a1, a2 = self.coeffs
        s = 1.0 if self.sense == ">=" else -1.0
        lo, hi = self.base.dims[k].lo, self.base.dims[k].hi
        a = (a1, a2)[k]
        rest = a0 + (a2 * point[1] if k == 0 else a1 * point[0])
        if a == 0.0:
            return (lo, hi) if s * rest >= -MEMBERSHIP_TOL else (np.nan, np.nan)
        cut = -rest / a
        if s * a > 0:
            lo = max(lo, cut)
        else:
            hi = min(hi, cut)
        return (lo, hi) if lo <= hi else (np.nan, np.nan)


@dataclass(frozen=True)
class Union:
    """Untagged union of regions with a common dimension."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise InfeasibleSetError("union needs at least one part")
        if len({p.dim for p in parts}) != 1:
            raise ValueError("union parts must share a dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim


@dataclass(frozen=True)
class TaggedUnion:
    """Union of ``region x {tag}`` pieces; points carry the tag as last coordinate."""

    parts: tuple
    labels: tuple = (0, 1)

    def __post_init__(self):
        parts = tuple((region, int(tag)) for region, tag in self.parts)
        if not parts:
            raise InfeasibleSetError("tagged union needs at least one part")
        labels = tuple(int(t) for t in self.labels)
        for region, tag in parts:
            if tag not in labels:
                raise ValueError(f"tag {tag} not among declared labels {labels}")
        if len({region.dim for region, _ in parts}) != 1:
            raise ValueError("tagged parts must share a dimension")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.parts[0][0].dim + 1


@dataclass(frozen=True)
class FiniteSet:
    """Finite set of labels; each element is stored as a tuple."""

    elements: tuple

    def __post_init__(self):
        elems = tuple(tuple(e) if isinstance(e, (tuple, list)) else (e,) for e in self.elements)
        if not elems:
            raise InfeasibleSetError("finite set needs at least one element")
        if len(set(elems)) != len(elems):
            raise ValueError("finite set has duplicate elements")
        if len({len(e) for e in elems}) != 1:
            raise ValueError("finite set elements must share a length")
        object.__setattr__(self, "elements", elems)

    @property
    def dim(self) -> int:
        return len(self.elements[0])


@dataclass(frozen=True)
class Product:
    """Cartesian product of sets; a point is the concatenation of factor points."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise InfeasibleSetError("product needs at least one factor")
        object.__setattr__(self, "factors", factors)

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)


SetExpr = TypingUnion[Interval, Box, HalfPlaneClip, Union, TaggedUnion, FiniteSet, Product]


def _box_vertices(box: Box) -> np.ndarray:
    return np.array(list(itertools.product(*[(d.lo, d.hi) for d in box.dims])), dtype=float)


def _as_point(point, dim: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if p.ndim != 1 or p.shape[0] != dim:
        raise ValueError(f"point of dimension {p.shape[-1] if p.ndim else 0} does not match set dimension {dim}")
    return p


def contains(s: SetExpr, point, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test for the closed set ``s``.

    Raises ``ValueError`` when the point dimension does not match.
    """
    if isinstance(s, FiniteSet):
        p = tuple(np.atleast_1d(np.asarray(point)).tolist())
        if len(p) != s.dim:
            raise ValueError(f"point of dimension {len(p)} does not match set dimension {s.dim}")
        return any(all(abs(a - b) <= tol for a, b in zip(p, e)) for e in s.elements)
    p = _as_point(point, s.dim)
    if isinstance(s, Interval):
        return bool(s.lo - tol <= p[0] <= s.hi + tol)
    if isinstance(s, Box):
        return bool(np.all(p >= s.lo - tol) and np.all(p <= s.hi + tol))
    if isinstance(s, HalfPlaneClip):
        return contains(s.base, p, tol) and bool(s._signed(p) >= -tol)
    if isinstance(s, Union):
        return any(contains(part, p, tol) for part in s.parts)
    if isinstance(s, TaggedUnion):
        region_pt, tag = p[:-1], p[-1]
        return any(tag == t and contains(region, region_pt, tol) for region, t in s.parts)
    if isinstance(s, Product):
        start = 0
        for f in s.factors:
            if not contains(f, p[start:start + f.dim], tol):
                return False
            start += f.dim
        return True
    raise TypeError(f"unsupported set type {type(s).__name__}")


def _eval(f: Callable, point: np.ndarray) -> float:
    val = f(point)
    val = float(val)
    if not np.isfinite(val):
        raise NonFiniteValueError(point, val)
    return val


def _normalize_hints(hints, dim: int):
    if hints is None:
        return [None] * dim
    hints = list(hints)
    if len(hints) != dim:
        raise ValueError(f"expected {dim} monotonicity hints, got {len(hints)}")
    for h in hints:
        if h not in (None, -1, 0, 1):
            raise ValueError("hints must be +1 (increasing), -1 (decreasing), 0 (constant) or None")
    return hints


def _pick_endpoint(interval: Interval, hint: int, mode: str, truncate: Optional[float]) -> float:
    want_hi = (hint >= 0) == (mode == "sup")
    end = interval.hi if want_hi else interval.lo
    if np.isfinite(end):
        return end
    if truncate is None:
        raise ValueError("extremum lies at an infinite endpoint; supply a finite truncation bound")
    bound = abs(float(truncate)) if end > 0 else -abs(float(truncate))
    warnings.warn(f"extremum over a half-line taken at truncation bound {bound}", TruncationWarning, stacklevel=3)
    return bound


def _finite_interval(interval: Interval, truncate: Optional[float]) -> Interval:
    if not interval.is_half_line:
        return interval
    if truncate is None:
        raise ValueError("half-line without monotone hint needs a finite truncation bound")
    t = abs(float(truncate))
    lo = interval.lo if np.isfinite(interval.lo) else min(-t, interval.hi)
    hi = interval.hi if np.isfinite(interval.hi) else max(t, interval.lo)
    return Interval(lo, hi)


def _refine_coordinate(g: Callable[[float], float], lo: float, hi: float, start: float, tol: float):
    """Bounded 1-d maximization of g near ``start``; returns (x, g(x))."""
    if hi - lo <= tol:
        return start, g(start)
    res = minimize_scalar(lambda t: -g(t), bounds=(lo, hi), method="bounded", options={"xatol": tol})
    x = float(res.x)
    gx = g(x)
    g0 = g(start)
    return (x, gx) if gx > g0 else (start, g0)


def _maximize_box(f: Callable, box: Box, hints, tol: float, resolution: int, truncate) -> float:
    dim = box.dim
    fixed = {}
    free_intervals = []
    for k, (iv, h) in enumerate(zip(box.dims, hints)):
        if h is not None:
            fixed[k] = _pick_endpoint(iv, h, "sup", truncate)
        elif iv.is_degenerate:
            fixed[k] = iv.lo
        else:
            free_intervals.append((k, _finite_interval(iv, truncate)))

    def full(point_free):
        p = np.empty(dim)
        for k, v in fixed.items():
            p[k] = v
        for (k, _), v in zip(free_intervals, point_free):
            p[k] = v
        return p

    if not free_intervals:
        return _eval(f, full([]))

    axes = [np.linspace(iv.lo, iv.hi, resolution) for _, iv in free_intervals]
    grid = np.array(list(itertools.product(*axes)))
    vals = np.array([_eval(f, full(pt)) for pt in grid])
    best = float(vals.max())
    n_starts = min(4, len(grid))
    for idx in np.argsort(-vals, kind="stable")[:n_starts]:
        pt = grid[idx].copy()
        cur = vals[idx]
        for _ in range(20):
            prev = cur
            for j, (_, iv) in enumerate(free_intervals):
                step = (iv.hi - iv.lo) / (resolution - 1)
                lo, hi = max(iv.lo, pt[j] - step), min(iv.hi, pt[j] + step)

                def g(t, j=j):
                    q = pt.copy()
                    q[j] = t
                    return _eval(f, full(q))

                pt[j], cur = _refine_coordinate(g, lo, hi, pt[j], tol)
            if cur - prev <= tol:
                break
        best = max(best, cur)
    return best


def _maximize_clip(f: Callable, s: HalfPlaneClip, tol: float, resolution: int) -> float:
    pts = sample_grid(s, resolution)
    vals = np.array([_eval(f, p) for p in pts])
    best = float(vals.max())
    for idx in np.argsort(-vals, kind="stable")[: min(4, len(pts))]:
        pt = pts[idx].copy()
        cur = vals[idx]
        for _ in range(20):
            prev = cur
            for k in range(2):
                lo, hi = s.coordinate_range(k, pt)
                if np.isnan(lo):
                    continue
                span = s.base.dims[k].hi - s.base.dims[k].lo
                step = span / (resolution - 1)
                lo, hi = max(lo, pt[k] - step), min(hi, pt[k] + step)
                if lo > hi:
                    continue

                def g(t, k=k):
                    q = pt.copy()
                    q[k] = t
                    return _eval(f, q)

                pt[k], cur = _refine_coordinate(g, lo, hi, float(np.clip(pt[k], lo, hi)), tol)
            if cur - prev <= tol:
                break
        best = max(best, cur)
    return best


def _maximize(s: SetExpr, f: Callable, hints, tol: float, resolution: int, truncate) -> float:
    if isinstance(s, Interval):
        s = s.as_box()
    if isinstance(s, Box):
        return _maximize_box(f, s, _normalize_hints(hints, s.dim), tol, resolution, truncate)
    if isinstance(s, HalfPlaneClip):
        box = s.as_box()
        if box is not None:
            return _maximize_box(f, box, _normalize_hints(hints, 2), tol, resolution, truncate)
        return _maximize_clip(f, s, tol, resolution)
    if isinstance(s, Union):
        return max(_maximize(p, f, hints, tol, resolution, truncate) for p in s.parts)
    if isinstance(s, TaggedUnion):
        region_hints = None if hints is None else list(hints)[:-1]
        out = []
        for region, tag in s.parts:
            def g(p, tag=tag):
                return f(np.append(p, tag))
            out.append(_maximize(region, g, region_hints, tol, resolution, truncate))
        return max(out)
    if isinstance(s, FiniteSet):
        return max(_eval(f, np.asarray(e, dtype=float)) for e in s.elements)
    if isinstance(s, Product):
        return _maximize_product(s, f, hints, tol, resolution, truncate)
    raise TypeError(f"unsupported set type {type(s).__name__}")


def _maximize_product(s: Product, f, hints, tol, resolution, truncate) -> float:
    # enumerate finite factors, merge the continuous ones into one box
    hints = _normalize_hints(hints, s.dim)
    finite, cont = [], []
    start = 0
    for fac in s.factors:
        idx = list(range(start, start + fac.dim))
        if isinstance(fac, FiniteSet):
            finite.append((idx, fac))
        elif isinstance(fac, (Interval, Box)):
            cont.append((idx, fac.as_box()))
        else:
            raise TypeError("product factors must be Interval, Box or FiniteSet")
        start += fac.dim
    cont_idx = [i for idx, _ in cont for i in idx]
    cont_box = Box(tuple(iv for _, b in cont for iv in b.dims)) if cont else None
    best = -np.inf
    for combo in itertools.product(*[fac.elements for _, fac in finite]):
        base = np.empty(s.dim)
        for (idx, _), elem in zip(finite, combo):
            base[idx] = elem
        if cont_box is None:
            best = max(best, _eval(f, base))
            continue

        def g(p, base=base):
            q = base.copy()
            q[cont_idx] = p
            return f(q)

        best = max(best, _maximize_box(g, cont_box, [hints[i] for i in cont_idx], tol, resolution, truncate))
    return best


def extremize(
    s: SetExpr,
    f: Callable[[np.ndarray], float],
    mode: str = "sup",
    hints: Optional[Sequence[Optional[int]]] = None,
    tol: float = 1e-8,
    truncate: Optional[float] = None,
    resolution: int = DEFAULT_GRID,
) -> float:
    """Supremum or infimum of ``f`` over the closed set ``s``.

    Parameters
    ----------
    s : SetExpr
        Set to search.
    f : callable
        Scalar function of a point (1-d float array in the set's coordinates).
    mode : {"sup", "inf"}
    hints : sequence, optional
        Per-coordinate monotonicity: +1 increasing, -1 decreasing, 0 constant,
        None unknown. Coordinates with a hint are fixed at the optimal
        endpoint, so full hints give exact vertex evaluation on boxes.
    tol : float
        Refinement tolerance for coordinates without hints.
    truncate : float, optional
        Finite bound replacing an infinite endpoint of a half-line.
    resolution : int
        Starting grid points per free dimension.

    Returns
    -------
    float
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mode == "sup":
        return _maximize(s, f, hints, tol, resolution, truncate)
    if mode == "inf":
        flipped = None if hints is None else [None if h is None else -h for h in hints]
        return -_maximize(s, lambda p: -f(p), flipped, tol, resolution, truncate)
    raise ValueError(f"mode must be 'sup' or 'inf', got {mode!r}")


def sample_grid(s: SetExpr, resolution: int, truncate: Optional[float] = None) -> np.ndarray:
    """Deterministic lattice of member points, vertices included.

    Returns an array of shape (n_points, dim).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if isinstance(s, Interval):
        iv = _finite_interval(s, truncate)
        return np.unique(np.linspace(iv.lo, iv.hi, resolution))[:, None]
    if isinstance(s, Box):
        axes = [np.unique(np.linspace(*(lambda iv: (iv.lo, iv.hi))(_finite_interval(d, truncate)), resolution))
                for d in s.dims]
        return np.array(list(itertools.product(*axes)), dtype=float)
    if isinstance(s, HalfPlaneClip):
        box = s.as_box()
        if box is not None:
            return sample_grid(box, resolution)
        grid = sample_grid(s.base, resolution)
        keep = s._signed(grid) >= -MEMBERSHIP_TOL
        # points on the clip line at every grid abscissa, so thin regions are sampled
        edge = []
        for k in range(2):
            for t in np.linspace(s.base.dims[1 - k].lo, s.base.dims[1 - k].hi, resolution):
                probe = np.array([t, t])
                lo, hi = s.coordinate_range(k, probe)
                if not np.isnan(lo):
                    for val in (lo, hi):
                        p = probe.copy()
                        p[k] = val
                        p[1 - k] = t
                        edge.append(p)
        pts = np.vstack([grid[keep], s.vertices()] + ([np.array(edge)] if edge else []))
        pts = np.unique(np.round(pts, 15), axis=0)
        return pts[s._signed(pts) >= -MEMBERSHIP_TOL]
    if isinstance(s, Union):
        return np.unique(np.vstack([sample_grid(p, resolution, truncate) for p in s.parts]), axis=0)
    if isinstance(s, TaggedUnion):
        chunks = []
        for region, tag in s.parts:
            g = sample_grid(region, resolution, truncate)
            chunks.append(np.hstack([g, np.full((len(g), 1), float(tag))]))
        return np.unique(np.vstack(chunks), axis=0)
    if isinstance(s, FiniteSet):
        return np.array(s.elements, dtype=float)
    if isinstance(s, Product):
        grids = [sample_grid(f, resolution, truncate) for f in s.factors]
        return np.array([np.concatenate(c) for c in itertools.product(*grids)], dtype=float)
    raise TypeError(f"unsupported set type {type(s).__name__}")
