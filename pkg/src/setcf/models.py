"""Model kinds: structural function, control-function builder and predictions.

Every kind is a frozen dataclass. Discrete-outcome kinds expose
``containment(event, cell, theta)``; additive-mean kinds expose
``mean_interval(cell, theta)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, ClassVar, Optional

import numpy as np

from . import cf as cfmod
from .latent import (GaussianChain, location_shift, normal_cdf, normal_score,
                     residual_scale)
from .rset import Box, HalfPlaneClip, Interval, extremize, sample_grid
from .theta import Cell, InfeasibleThetaError, ThetaPoint, _tup


def as_event(values) -> frozenset:
    if isinstance(values, frozenset):
        return values
    if isinstance(values, (set, list, tuple, np.ndarray)):
        return frozenset(np.asarray(list(values)).tolist())
    return frozenset([values])


def _sign(r: float) -> int:
    return int(np.sign(r))


def predict_binary(h: Callable, cf, hints=None, tol: float = 1e-10) -> tuple:
    """Thresholds (t_lo, t_hi) = (inf, sup) of H over the control set.

    The prediction is {1} for eta <= t_lo, {0, 1} in between, {0} above.
    """
    return (extremize(cf, h, "inf", hints, tol), extremize(cf, h, "sup", hints, tol))


def predict_additive_mean(mu: float, lam: Callable, cf, hints=None, truncate=None, tol: float = 1e-10) -> Interval:
    """[mu + inf lambda, mu + sup lambda] over the control set."""
    lo = extremize(cf, lam, "inf", hints, tol, truncate=truncate)
    hi = extremize(cf, lam, "sup", hints, tol, truncate=truncate)
    return Interval(mu + lo, mu + hi)


def cf_box(cf) -> Optional[Box]:
    if isinstance(cf, Interval):
        return cf.as_box()
    if isinstance(cf, Box):
        return cf
    if isinstance(cf, HalfPlaneClip):
        return cf.as_box()
    return None


# ----------------------------------------------------------------------------
# base classes


@dataclass(frozen=True)
class ModelSpec:
    """Shared metadata: kind label, outcome support, covariate count."""

    kind: ClassVar[str] = "base"
    n_x: int = 0

    @property
    def support(self) -> Optional[tuple]:
        return None

    @property
    def discrete(self) -> bool:
        return self.support is not None


@dataclass(frozen=True)
class ThresholdSelection(ModelSpec):
    """Binary treatment D = 1{pi(Z,X) >= V} with scalar V ~ U[0,1]."""

    observed_control: bool = False

    def cf(self, cell: Cell, theta: ThetaPoint):
        if self.observed_control:
            return cfmod.cf_observed(float(cell.z[0]))
        return cfmod.cf_binary_roy(cell.d[0], cell.z, cell.x, theta)

    def cf_range(self, cell: Cell, theta: ThetaPoint) -> tuple:
        s = self.cf(cell, theta)
        return s.lo, s.hi

    def pi_key(self, z, x):
        return (_tup(z), _tup(x))


# ----------------------------------------------------------------------------
# binary Roy


@dataclass(frozen=True)
class BinaryRoy(ThresholdSelection):
    """Generalized Roy model.

    outcome="binary": Y = 1{mu(D,X) >= U}, U | V=v ~ N(rho_D n(v), 1 - rho_D^2).
    outcome="continuous": Y = mu(D,X) + U_D with E[U_D | V=v] = rho_D n(v).

    mu_params = (alpha, delta, beta_1, ..., beta_{n_x}); f_params = (rho,) or
    (rho_0, rho_1).
    """

    kind: ClassVar[str] = "binary_roy"
    outcome: str = "binary"

    def __post_init__(self):
        if self.outcome not in ("binary", "continuous"):
            raise ValueError("outcome must be 'binary' or 'continuous'")

    @property
    def support(self):
        return (0, 1) if self.outcome == "binary" else None

    def mu(self, d, x, theta: ThetaPoint) -> float:
        p = theta.mu_params
        x = np.asarray(_tup(x), dtype=float)
        if len(p) != 2 + self.n_x:
            raise InfeasibleThetaError(f"binary Roy needs {2 + self.n_x} mu params, got {len(p)}")
        return p[0] + p[1] * float(_tup(d)[0]) + float(np.dot(p[2:], x))

    def rho(self, d, theta: ThetaPoint) -> float:
        f = theta.f_params
        return f[int(_tup(d)[0])] if len(f) == 2 else f[0]

    def h(self, d, x, theta: ThetaPoint) -> Callable:
        mu, rho = self.mu(d, x, theta), self.rho(d, theta)
        scale = residual_scale(rho)
        return lambda v: float(normal_cdf((mu - rho * normal_score(v[0])) / scale))

    def lam(self, d, x, theta: ThetaPoint) -> Callable:
        rho = self.rho(d, theta)
        return lambda v: float(rho * normal_score(v[0]))

    def hints(self, d, theta):
        return [-_sign(self.rho(d, theta))]

    def thresholds(self, cell: Cell, theta: ThetaPoint) -> tuple:
        return predict_binary(self.h(cell.d, cell.x, theta), self.cf(cell, theta), self.hints(cell.d, theta))

    def containment(self, event, cell: Cell, theta: ThetaPoint) -> float:
        t_lo, t_hi = self.thresholds(cell, theta)
        return containment_from_thresholds(as_event(event), t_lo, t_hi)

    def event_table(self, cell: Cell, theta: ThetaPoint) -> dict:
        return binary_event_table(*self.thresholds(cell, theta))

    def mean_interval(self, cell: Cell, theta: ThetaPoint) -> Interval:
        rho = self.rho(cell.d, theta)
        return predict_additive_mean(self.mu(cell.d, cell.x, theta), self.lam(cell.d, cell.x, theta),
                                     self.cf(cell, theta), [_sign(rho)])

    # vectorized closed forms over parameter arrays (used by grid sweeps)
    def mu_vec(self, mu_params: np.ndarray, d, x) -> np.ndarray:
        """mu(d, x) for every row of a (P, k) parameter array."""
        x = np.asarray(_tup(x), dtype=float)
        return mu_params[:, 0] + mu_params[:, 1] * float(_tup(d)[0]) + mu_params[:, 2:] @ x

    def rho_vec(self, f_params: np.ndarray, d) -> np.ndarray:
        return f_params[:, int(_tup(d)[0])] if f_params.shape[1] == 2 else f_params[:, 0]

    def h_range(self, mu, rho, lo, hi):
        """(inf H, sup H) over [lo, hi] for arrays of mu and rho; H is monotone in v."""
        scale = np.sqrt(1.0 - rho ** 2)
        h_lo_end = normal_cdf((mu - rho * normal_score(lo)) / scale)
        h_hi_end = normal_cdf((mu - rho * normal_score(hi)) / scale)
        return np.minimum(h_lo_end, h_hi_end), np.maximum(h_lo_end, h_hi_end)


def binary_event_table(t_lo: float, t_hi: float) -> dict:
    """Containment of every event of {0, 1} from the two thresholds."""
    return {frozenset(): 0.0, frozenset({1}): float(t_lo), frozenset({0}): float(1.0 - t_hi),
            frozenset({0, 1}): 1.0}


def containment_from_thresholds(event: frozenset, t_lo: float, t_hi: float) -> float:
    """Containment for Y in {0,1} with prediction {1} below t_lo, {0} above t_hi."""
    if event >= {0, 1}:
        return 1.0
    if event == {1}:
        return float(t_lo)
    if event == {0}:
        return float(1.0 - t_hi)
    if not event:
        return 0.0
    raise ValueError(f"event {set(event)} outside support {{0, 1}}")


# ----------------------------------------------------------------------------
# ordered outcome


ORDERED_SUPPORT = (0, 3, 6)


@dataclass(frozen=True)
class OrderedChoice(ThresholdSelection):
    """Ordered outcome in {0, 3, 6} with Roy selection.

    Y = 0 if mu + U <= c_L, 3 if c_L < mu + U <= c_U, 6 otherwise, where
    mu(d, x) = mu1 d + mu_int d x_hiv + x_rest' beta and U = g(V) + Q(eta),
    g(v) = rho n(v), Q(eta) = sqrt(1 - rho^2) n(eta).

    x = (x_hiv, x_rest...), n_x counts all covariates;
    mu_params = (mu1, mu_int, beta...).
    """

    kind: ClassVar[str] = "ordered"
    n_x: int = 1

    @property
    def support(self):
        return ORDERED_SUPPORT

    def mu(self, d, x, theta: ThetaPoint) -> float:
        p = theta.mu_params
        x = np.asarray(_tup(x), dtype=float)
        if len(p) != 1 + self.n_x or len(x) != self.n_x:
            raise InfeasibleThetaError(f"ordered model needs {1 + self.n_x} mu params and {self.n_x} covariates")
        d = float(_tup(d)[0])
        hiv = x[0] if self.n_x else 0.0
        return p[0] * d + (p[1] * d * hiv if self.n_x else 0.0) + float(np.dot(p[2:], x[1:]))

    def mu_vec(self, mu_params: np.ndarray, d, x) -> np.ndarray:
        x = np.asarray(_tup(x), dtype=float)
        d = float(_tup(d)[0])
        out = mu_params[:, 0] * d
        if self.n_x:
            out = out + mu_params[:, 1] * d * x[0] + mu_params[:, 2:] @ x[1:]
        return out

    def g(self, theta: ThetaPoint) -> Callable:
        rho = theta.rho
        return lambda v: float(rho * normal_score(v[0]))

    def g_range(self, cell: Cell, theta: ThetaPoint) -> tuple:
        s = self.cf(cell, theta)
        hint = [_sign(theta.rho)]
        return extremize(s, self.g(theta), "inf", hint), extremize(s, self.g(theta), "sup", hint)

    def predict_ordered(self, cell: Cell, theta: ThetaPoint) -> dict:
        """Containment and capacity of {0} and {6}."""
        table = ordered_table(self.mu(cell.d, cell.x, theta), theta.rho, theta.cutoffs, *self.g_range(cell, theta))
        return {"cont0": table[frozenset({0})], "cap0": 1.0 - table[frozenset({3, 6})],
                "cont6": table[frozenset({6})], "cap6": 1.0 - table[frozenset({0, 3})]}

    def containment(self, event, cell: Cell, theta: ThetaPoint) -> float:
        event = as_event(event)
        if event >= set(ORDERED_SUPPORT):
            return 1.0
        if not event:
            return 0.0
        table = ordered_table(self.mu(cell.d, cell.x, theta), theta.rho, theta.cutoffs, *self.g_range(cell, theta))
        return float(table[event])

    def event_table(self, cell: Cell, theta: ThetaPoint) -> dict:
        table = ordered_table(self.mu(cell.d, cell.x, theta), theta.rho, theta.cutoffs, *self.g_range(cell, theta))
        table = {e: float(v) for e, v in table.items()}
        table[frozenset()] = 0.0
        table[frozenset(ORDERED_SUPPORT)] = 1.0
        return table


def ordered_table(mu, rho, cutoffs, g_inf, g_sup) -> dict:
    """Closed-form containment values for all proper events of {0,3,6}.

    Works elementwise on numpy arrays.
    """
    if cutoffs is None:
        raise InfeasibleThetaError("ordered model needs cutoffs")
    c_lo, c_hi = cutoffs
    scale = np.sqrt(1.0 - np.asarray(rho, dtype=float) ** 2)

    def F(t):
        return normal_cdf(t / scale)

    c0 = F(c_lo - mu - g_sup)
    c6 = 1.0 - F(c_hi - mu - g_inf)
    c03 = F(c_hi - mu - g_sup)
    c36 = 1.0 - F(c_lo - mu - g_inf)
    c3 = np.maximum(c03 - F(c_lo - mu - g_inf), 0.0)
    return {
        frozenset({0}): c0,
        frozenset({3}): c3,
        frozenset({6}): c6,
        frozenset({0, 3}): c03,
        frozenset({3, 6}): c36,
        frozenset({0, 6}): c0 + c6,
    }


# ----------------------------------------------------------------------------
# random-coefficient selection


@dataclass(frozen=True)
class RandomCoefSel(ModelSpec):
    """D(z) = 1{pi(z,X) >= V_z} with (V_0, V_1) iid U[0,1] and binary Z.

    f_params = (r0, r1): loadings of U on (n(V_0), n(V_1)).
    mu_params = (alpha, delta, beta...).
    """

    kind: ClassVar[str] = "random_coef"
    outcome: str = "binary"

    @property
    def support(self):
        return (0, 1) if self.outcome == "binary" else None

    def cf(self, cell: Cell, theta: ThetaPoint):
        return cfmod.cf_random_coef(cell.d[0], cell.z[0], cell.x, theta)

    def mu(self, d, x, theta: ThetaPoint) -> float:
        p = theta.mu_params
        return p[0] + p[1] * float(_tup(d)[0]) + float(np.dot(p[2:], np.asarray(_tup(x), dtype=float)))

    def loadings(self, theta):
        r = theta.f_params[:2]
        residual_scale(r)
        return r

    def h(self, d, x, theta):
        mu, r = self.mu(d, x, theta), self.loadings(theta)
        scale = residual_scale(r)
        return lambda v: float(normal_cdf((mu - location_shift(v, r)) / scale))

    def thresholds(self, cell, theta):
        r = self.loadings(theta)
        return predict_binary(self.h(cell.d, cell.x, theta), self.cf(cell, theta), [-_sign(r[0]), -_sign(r[1])])

    def containment(self, event, cell, theta):
        return containment_from_thresholds(as_event(event), *self.thresholds(cell, theta))

    def event_table(self, cell, theta) -> dict:
        return binary_event_table(*self.thresholds(cell, theta))

    def mean_interval(self, cell, theta):
        r = self.loadings(theta)
        return predict_additive_mean(self.mu(cell.d, cell.x, theta), lambda v: float(location_shift(v, r)),
                                     self.cf(cell, theta), [_sign(r[0]), _sign(r[1])])


# ----------------------------------------------------------------------------
# multinomial outcome


def multinomial_predict_sets(eps, mu, loadings, scales, box: Box, tol: float = 1e-12) -> np.ndarray:
    """Prediction-set membership for a batch of draws.

    Parameters
    ----------
    eps : (n, J) array of standard-normal noise Phi^{-1}(eta_j)
    mu : (J,) utilities
    loadings : (J, m) loadings on the normal scores of V (m <= 2)
    scales : (J,) residual scales
    box : control set as a box in v-coordinates

    Returns
    -------
    (n, J) boolean array; entry j is True iff option j maximizes utility at
    some v in the box.
    """
    eps = np.atleast_2d(eps)
    n, J = eps.shape
    load = np.zeros((J, 2))
    load[:, : loadings.shape[1]] = loadings
    lo = np.zeros(2)
    hi = np.zeros(2)
    lo[: box.dim] = normal_score(box.lo)
    hi[: box.dim] = normal_score(box.hi)
    a = mu[None, :] + scales[None, :] * eps  # (n, J)
    corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    out = np.zeros((n, J), dtype=bool)
    for j in range(J):
        others = [k for k in range(J) if k != j]
        ca = a[:, [j]] - a[:, others]  # (n, K)
        cb = load[j][None, :] - load[others]  # (K, 2)
        cands = [np.broadcast_to(corners[None], (n, 4, 2))]
        # constraint line ca + cb.w = 0 against each box edge
        for k in range(len(others)):
            for axis in (0, 1):
                other = 1 - axis
                coef = cb[k, other]
                if coef == 0.0:
                    continue
                for edge in (lo[axis], hi[axis]):
                    w = np.empty((n, 2))
                    w[:, axis] = edge
                    w[:, other] = -(ca[:, k] + cb[k, axis] * edge) / coef
                    cands.append(w[:, None, :])
        # pairwise constraint-line intersections
        for k1 in range(len(others)):
            for k2 in range(k1 + 1, len(others)):
                m = np.array([cb[k1], cb[k2]])
                det = np.linalg.det(m)
                if abs(det) < 1e-14:
                    continue
                rhs = -np.stack([ca[:, k1], ca[:, k2]], axis=1)
                cands.append(np.linalg.solve(m, rhs.T).T[:, None, :])
        pts = np.concatenate(cands, axis=1)  # (n, P, 2)
        w0, w1 = pts[:, :, 0], pts[:, :, 1]
        ok = (w0 >= lo[0] - 1e-12) & (w0 <= hi[0] + 1e-12) & (w1 >= lo[1] - 1e-12) & (w1 <= hi[1] + 1e-12)
        scale = tol * (1.0 + np.abs(ca).max(axis=1)[:, None] + np.maximum(np.abs(w0), np.abs(w1)))
        for k in range(len(others)):
            ok &= ca[:, k:k + 1] + w0 * cb[k, 0] + w1 * cb[k, 1] >= -scale
        out[:, j] = ok.any(axis=1)
    return out


@dataclass(frozen=True)
class Multinomial(ModelSpec):
    """Unordered choice among options 1..J with random-coefficient selection.

    mu_params = (alpha_1..alpha_J, delta_1..delta_J) so mu_j(d) = alpha_j + delta_j d.
    f_params = (r_10, r_11, ..., r_J0, r_J1): loadings of option j's noise on
    (n(V_0), n(V_1)).
    """

    kind: ClassVar[str] = "multinomial"
    J: int = 3
    selection: str = "random_coef"

    def __post_init__(self):
        if self.J < 2:
            raise ValueError("multinomial model needs J >= 2")

    @property
    def support(self):
        return tuple(range(1, self.J + 1))

    def cf(self, cell: Cell, theta: ThetaPoint):
        if self.selection == "random_coef":
            return cfmod.cf_random_coef(cell.d[0], cell.z[0], cell.x, theta)
        return cfmod.cf_binary_roy(cell.d[0], cell.z, cell.x, theta)

    def utilities(self, d, theta: ThetaPoint) -> np.ndarray:
        p = np.asarray(theta.mu_params)
        if p.size != 2 * self.J:
            raise InfeasibleThetaError(f"multinomial needs {2 * self.J} mu params")
        return p[: self.J] + p[self.J:] * float(_tup(d)[0])

    def loadings(self, theta: ThetaPoint) -> np.ndarray:
        dim = 2 if self.selection == "random_coef" else 1
        r = np.asarray(theta.f_params, dtype=float)
        if r.size != dim * self.J:
            raise InfeasibleThetaError(f"multinomial needs {dim * self.J} loadings")
        return r.reshape(self.J, dim)

    def scales(self, theta):
        return np.array([residual_scale(r) for r in self.loadings(theta)])

    def utility_fn(self, eta, d, theta) -> Callable:
        mu, load, sc = self.utilities(d, theta), self.loadings(theta), self.scales(theta)
        eps = normal_score(eta)
        return lambda v: mu + sc * eps + load @ normal_score(np.atleast_1d(v))

    def predict_multinomial(self, eta, d, x, cf, theta: ThetaPoint) -> frozenset:
        """Options that are utility maximizers at some v in the control set."""
        box = cf_box(cf)
        if box is not None:
            member = multinomial_predict_sets(normal_score(np.atleast_2d(eta)), self.utilities(d, theta),
                                              self.loadings(theta), self.scales(theta), box)[0]
        else:
            u = self.utility_fn(eta, d, theta)
            member = np.zeros(self.J, dtype=bool)
            for v in sample_grid(cf, 100):
                vals = u(v)
                member |= vals >= vals.max() - 1e-12 * (1 + abs(vals.max()))
        out = frozenset(int(j) + 1 for j in np.flatnonzero(member))
        if not out:
            raise RuntimeError("empty multinomial prediction set")
        return out

    def membership(self, eta, cell: Cell, theta: ThetaPoint) -> np.ndarray:
        box = cf_box(self.cf(cell, theta))
        if box is None:
            raise NotImplementedError("batch prediction needs a box-shaped control set")
        return multinomial_predict_sets(normal_score(eta), self.utilities(cell.d, theta),
                                        self.loadings(theta), self.scales(theta), box)


# ----------------------------------------------------------------------------
# dynamic two-period model


@lru_cache(maxsize=4096)
def _dynamic_chain(f_params: tuple) -> GaussianChain:
    a, bv, bu, cv1, cu, cv2 = f_params
    return GaussianChain([[], [a], [bv, bu], [cv1, cu, cv2]])


@dataclass(frozen=True)
class DynamicTwoPeriod(ModelSpec):
    """Two-period binary treatment and outcome.

    D1 = 1{pi1(Z1,X) >= V1}, Y1 = 1{mu1(D1,X) >= U1},
    D2 = 1{pi2(Y1,D1,Z2,X) >= V2}, Y2 = 1{mu2(Y1,D1,D2,X) >= U2}.

    Latents follow a Gaussian chain in the order (V1, U1, V2, U2). mu1, pi1,
    pi2 live in pi_params (see ``cf.cf_dynamic``); mu_params holds the eight
    mu2 values indexed by 4 y1 + 2 d1 + d2; f_params =
    (a, b_v1, b_u1, c_v1, c_u1, c_v2).
    Control-set coordinates are (U1, V1, V2).
    """

    kind: ClassVar[str] = "dynamic"

    @property
    def support(self):
        return (0, 1)

    def chain(self, theta: ThetaPoint) -> GaussianChain:
        return _dynamic_chain(tuple(theta.f_params))

    def mu2(self, y1, d1, d2, theta):
        m = theta.mu_params[4 * int(y1) + 2 * int(d1) + int(d2)]
        if not 0.0 <= m <= 1.0:
            raise InfeasibleThetaError("mu2 must lie in [0, 1]")
        return m

    def cf(self, cell: Cell, theta: ThetaPoint) -> Box:
        y1, d1, d2 = cell.d
        return cfmod.cf_dynamic(y1, d1, d2, cell.z, cell.x, theta)

    def h_y2(self, cell: Cell, theta: ThetaPoint) -> Callable:
        y1, d1, d2 = cell.d
        ch = self.chain(theta)
        t = normal_score(self.mu2(y1, d1, d2, theta))
        cv1, cu, cv2 = ch.loadings[3]
        s = ch.scales[3]
        return lambda p: float(normal_cdf((t - cu * normal_score(p[0]) - cv1 * normal_score(p[1])
                                           - cv2 * normal_score(p[2])) / s))

    def h_d2(self, y1, d1, z, x, theta) -> Callable:
        z1, z2 = _tup(z)
        ch = self.chain(theta)
        t = normal_score(theta.pi(("pi2", int(y1), int(d1), z2, _tup(x))))
        bv, bu = ch.loadings[2]
        s = ch.scales[2]
        return lambda p: float(normal_cdf((t - bu * normal_score(p[0]) - bv * normal_score(p[1])) / s))

    def h_y1(self, d1, x, theta) -> Callable:
        ch = self.chain(theta)
        t = normal_score(theta.pi(("mu1", int(d1), _tup(x))))
        (a,) = ch.loadings[1]
        s = ch.scales[1]
        return lambda p: float(normal_cdf((t - a * normal_score(p[0])) / s))

    def blocks(self, cell: Cell, theta: ThetaPoint) -> dict:
        """(inf, sup) of H for the three sequential restrictions at one cell.

        cell.d = (y1, d1, d2); cell.z = (z1, z2).
        """
        y1, d1, d2 = cell.d
        box = self.cf(cell, theta)
        ch = self.chain(theta)
        cv1, cu, cv2 = ch.loadings[3]
        bv, bu = ch.loadings[2]
        (a,) = ch.loadings[1]
        hy2 = predict_binary(self.h_y2(cell, theta), box, [-_sign(cu), -_sign(cv1), -_sign(cv2)])
        sub = Box(box.dims[:2])
        hd2 = predict_binary(self.h_d2(y1, d1, cell.z, cell.x, theta), sub, [-_sign(bu), -_sign(bv)])
        hy1 = predict_binary(self.h_y1(d1, cell.x, theta), box.dims[1], [-_sign(a)])
        return {"y2": hy2, "d2": hd2, "y1": hy1}

    def y2_thresholds(self, cell: Cell, theta: ThetaPoint) -> tuple:
        cv1, cu, cv2 = self.chain(theta).loadings[3]
        return predict_binary(self.h_y2(cell, theta), self.cf(cell, theta), [-_sign(cu), -_sign(cv1), -_sign(cv2)])

    def containment(self, event, cell: Cell, theta: ThetaPoint) -> float:
        event = as_event(event)
        if event >= {0, 1} or not event:
            return containment_from_thresholds(event, 0.0, 1.0)
        return containment_from_thresholds(event, *self.y2_thresholds(cell, theta))

    def event_table(self, cell: Cell, theta: ThetaPoint) -> dict:
        return binary_event_table(*self.y2_thresholds(cell, theta))


# ----------------------------------------------------------------------------
# entry game


@dataclass(frozen=True)
class EntryGame(ModelSpec):
    """Two-player entry with strategic substitutes and a continuous outcome.

    Y = mu(D) + U with E[U | V1, V2, V_s] = r1 n(V1) + r2 n(V2) + r_s (V_s - 1/2).
    mu_params = (alpha, delta_1, delta_2); f_params = (r1, r2, r_s).
    """

    kind: ClassVar[str] = "entry"

    def cf(self, cell: Cell, theta: ThetaPoint):
        return cfmod.cf_entry_game(cell.d, cell.z, cell.x, theta)

    def mu(self, d, x, theta):
        a, d1, d2 = theta.mu_params[:3]
        return a + d1 * d[0] + d2 * d[1]

    def lam(self, theta) -> Callable:
        r1, r2, rs = theta.f_params
        return lambda p: float(r1 * normal_score(p[0]) + r2 * normal_score(p[1]) + rs * (p[2] - 0.5))

    def mean_interval(self, cell: Cell, theta: ThetaPoint) -> Interval:
        r1, r2, rs = theta.f_params
        return predict_additive_mean(self.mu(cell.d, cell.x, theta), self.lam(theta), self.cf(cell, theta),
                                     [_sign(r1), _sign(r2), _sign(rs)])


# ----------------------------------------------------------------------------
# censored and interval-observed continuous treatments


TRUNCATE = 10.0


@dataclass(frozen=True)
class CensoredSel(ModelSpec):
    """D = max(pi*(Z,X) + V, 0), V ~ N(0,1); Y = mu(D) + U, E[U|V] = rho V.

    mu_params = (alpha, delta).
    """

    kind: ClassVar[str] = "censored"

    def cf(self, cell: Cell, theta: ThetaPoint):
        return cfmod.cf_censored(float(cell.d[0]), cell.z, cell.x, theta)

    def mu(self, d, x, theta):
        return theta.mu_params[0] + theta.mu_params[1] * float(_tup(d)[0])

    def mean_interval(self, cell: Cell, theta: ThetaPoint) -> Interval:
        rho = theta.rho
        return predict_additive_mean(self.mu(cell.d, cell.x, theta), lambda v: rho * float(v[0]),
                                     self.cf(cell, theta), [_sign(rho)], truncate=TRUNCATE)


@dataclass(frozen=True)
class IntervalTreatment(ModelSpec):
    """D* = pi*(Z,X) + V observed only as [D_l, D_u]; Y = mu(D*) + U, E[U|V] = rho V.

    mu_params = (alpha, delta) with delta >= 0 (weakly increasing mu).
    """

    kind: ClassVar[str] = "interval"

    def cf(self, cell: Cell, theta: ThetaPoint):
        d_l, d_u = cell.d
        return cfmod.cf_interval_treatment(d_l, d_u, cell.z, cell.x, theta)

    def mu(self, d, x, theta):
        return theta.mu_params[0] + theta.mu_params[1] * float(d)

    def mean_interval(self, cell: Cell, theta: ThetaPoint) -> Interval:
        if theta.mu_params[1] < 0:
            raise InfeasibleThetaError("interval-treatment bounds need weakly increasing mu")
        rho = theta.rho
        v_set, _ = self.cf(cell, theta)
        lam = lambda v: rho * float(v[0])
        lo = extremize(v_set, lam, "inf", [_sign(rho)])
        hi = extremize(v_set, lam, "sup", [_sign(rho)])
        d_l, d_u = cell.d
        return Interval(self.mu(d_l, cell.x, theta) + lo, self.mu(d_u, cell.x, theta) + hi)


KINDS = {cls.kind: cls for cls in (BinaryRoy, OrderedChoice, RandomCoefSel, Multinomial, DynamicTwoPeriod,
                                   EntryGame, CensoredSel, IntervalTreatment)}


def make_model(kind: str, **options) -> ModelSpec:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}") from None
    return cls(**options)
