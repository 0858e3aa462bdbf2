"""Normal-score helpers and the location family for latent outcome noise."""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

# Phi^{-1} at 0 and 1 is clamped here; Phi(-8.2) ~ 1.2e-16.
CLAMP = 8.2


def normal_score(v):
    """Clamped standard-normal quantile."""
    return np.clip(ndtri(np.asarray(v, dtype=float)), -CLAMP, CLAMP)


def normal_cdf(t):
    return ndtr(np.asarray(t, dtype=float))


def residual_scale(loadings) -> float:
    """sqrt(1 - sum r_k^2) for loadings on independent standard-normal scores."""
    r = np.atleast_1d(np.asarray(loadings, dtype=float))
    rem = 1.0 - float(np.sum(r * r))
    if rem <= 0:
        raise ValueError(f"loadings {r.tolist()} leave no residual variance")
    return float(np.sqrt(rem))


def location_shift(v, loadings):
    """g(v) = sum_k r_k Phi^{-1}(v_k); v has trailing axis of length len(loadings)."""
    r = np.atleast_1d(np.asarray(loadings, dtype=float))
    v = np.asarray(v, dtype=float)
    if r.size == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        return r[0] * normal_score(v)
    return normal_score(v) @ r


def adjustment_Q(eta, v, loadings):
    """Latent U = g(v) + sqrt(1 - |r|^2) Phi^{-1}(eta) under the location family."""
    return location_shift(v, loadings) + residual_scale(loadings) * normal_score(eta)


def vquad(a: float = 0.0, b: float = 1.0, n: int = 64):
    """Nodes and weights for integrating over v in [a, b] with v ~ U[0,1].

    Gauss-Legendre in the normal-score coordinate w = Phi^{-1}(v); the
    weights include the Jacobian phi(w), so they sum to b - a up to the
    clamped tails.
    """
    wa = max(-CLAMP, float(normal_score(a)))
    wb = min(CLAMP, float(normal_score(b)))
    if wb <= wa:
        return np.array([float(a)]), np.array([0.0])
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (wb - wa)
    nodes = wa + half * (x + 1.0)
    weights = half * w * np.exp(-0.5 * nodes ** 2) / np.sqrt(2 * np.pi)
    return normal_cdf(nodes), weights


class GaussianChain:
    """Sequential Gaussian copula over latent scores n_0, n_1, ... .

    Each score is ``n_k = sum_{j<k} b_kj n_j + s_k e_k`` with independent
    standard-normal ``e_k`` and ``s_k`` chosen so that every ``n_k`` is
    standard normal. The latent uniforms are ``Phi(n_k)``.

    Parameters
    ----------
    loadings : list of sequences
        ``loadings[k]`` holds the k coefficients on the previous scores.
    """

    def __init__(self, loadings):
        self.loadings = [np.asarray(b, dtype=float) for b in loadings]
        m = len(self.loadings)
        cov = np.zeros((m, m))
        scales = []
        for k, b in enumerate(self.loadings):
            if b.shape != (k,):
                raise ValueError(f"score {k} needs {k} loadings, got {b.shape}")
            if k == 0:
                explained = 0.0
            else:
                explained = float(b @ cov[:k, :k] @ b)
                cov[k, :k] = b @ cov[:k, :k]
                cov[:k, k] = cov[k, :k]
            rem = 1.0 - explained
            if rem <= 1e-12:
                raise ValueError(f"chain loadings leave no residual variance at step {k}")
            scales.append(np.sqrt(rem))
            cov[k, k] = 1.0
        self.cov = cov
        self.scales = np.array(scales)

    def conditional_cdf(self, k: int, t, prev_uniforms):
        """P(U_k <= t | previous uniforms) on the uniform scale."""
        mean = normal_score(prev_uniforms) @ self.loadings[k] if k else 0.0
        return normal_cdf((normal_score(t) - mean) / self.scales[k])

    def conditional_quantile(self, k: int, p, prev_uniforms):
        mean = normal_score(prev_uniforms) @ self.loadings[k] if k else 0.0
        return normal_cdf(mean + self.scales[k] * normal_score(p))

    def sample(self, eta):
        """Map independent uniforms eta (n, m) to chained uniforms (n, m)."""
        eta = np.asarray(eta, dtype=float)
        out = np.empty_like(eta)
        for k in range(eta.shape[1]):
            out[:, k] = self.conditional_quantile(k, eta[:, k], out[:, :k])
        return out


def vquad_batch(a, b, n: int = 64):
    """Row-wise ``vquad`` for arrays of sub-ranges [a_p, b_p].

    Returns (P, n) nodes and weights; empty ranges get zero weights.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    wa = np.maximum(-CLAMP, normal_score(a))
    wb = np.minimum(CLAMP, normal_score(b))
    half = np.maximum(0.5 * (wb - wa), 0.0)[:, None]
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = wa[:, None] + half * (x[None, :] + 1.0)
    weights = half * w[None, :] * np.exp(-0.5 * nodes ** 2) / np.sqrt(2 * np.pi)
    return normal_cdf(nodes), weights
