"""Predictive log-likelihood-ratios under the Laplace posterior.

The production path averages each class-conditional density over the
marginal posterior of (mu1, mu2, log sigma2) and takes the log of the
ratio of the two averages. The decomposition into an averaged plug-in
log-LR plus a difference of two KL divergences is a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import expit, logit, logsumexp

from .em import _as_array
from .laplace import (CAL_NAMES, GaussianPosterior, LaplaceError,
                      complex_step_hessian, log_joint, log_likelihood_gradient,
                      marginalize_pi1, theta_to_params)
from .model import LOG_2PI, plugin_llr


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "gauss-hermite"
    nodes: int = 9
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("gauss-hermite", "monte-carlo"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.method == "gauss-hermite" and self.nodes < 3:
            raise ValueError("tensor Gauss-Hermite needs at least 3 nodes")
        if self.method == "monte-carlo" and self.samples < 1000:
            raise ValueError("Monte-Carlo needs at least 1000 samples")


@dataclass(frozen=True)
class PredictiveResult:
    s_prime: float
    log_r_predictive: float
    log_r_plugin_at_mode: float
    expected_log_r: float
    d1: float
    d2: float

    @property
    def residual(self) -> float:
        """Mismatch of the KL decomposition against the direct predictive."""
        return abs(self.log_r_predictive - (self.expected_log_r + self.d1 - self.d2))


def _matrix_sqrt(cov):
    # eigen-based square root tolerates singular (even zero) covariance
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.clip(w, 0.0, None))


def nodes_and_log_weights(post: GaussianPosterior, q: QuadratureSpec):
    """Evaluation points (N, dim) and log-weights (N,) for expectations
    under ``post``."""
    n = post.dim
    L = _matrix_sqrt(post.cov)
    if q.method == "gauss-hermite":
        z1, w1 = hermegauss(q.nodes)
        w1 = w1 / math.sqrt(2 * math.pi)
        grids = np.meshgrid(*([z1] * n), indexing="ij")
        z = np.stack([g.reshape(-1) for g in grids], axis=1)
        lw = sum(np.log(w1)[idx.reshape(-1)] for idx in
                 np.meshgrid(*([np.arange(q.nodes)] * n), indexing="ij"))
    else:
        rng = np.random.Generator(np.random.PCG64(q.seed))
        z = rng.standard_normal((q.samples, n))
        lw = np.full(q.samples, -math.log(q.samples))
    return post.mean + z @ L.T, lw


def _check_cal(post: GaussianPosterior):
    if tuple(post.names) != CAL_NAMES:
        raise ValueError(
            f"expected a posterior over {CAL_NAMES}, got {post.names}")


def _log_expected_density(s_prime, mu, log_v, lw, block_cells=2_000_000):
    # log < N(s'|mu, v) >, one entry per s', in blocks to bound memory
    s = np.asarray(s_prime, dtype=float).reshape(-1)
    inv_v = np.exp(-log_v)
    const = lw - 0.5 * (LOG_2PI + log_v)
    out = np.empty(s.size)
    step = max(1, block_cells // max(1, mu.size))
    for i in range(0, s.size, step):
        blk = s[i:i + step, None]
        out[i:i + step] = logsumexp(const - 0.5 * (blk - mu) ** 2 * inv_v, axis=1)
    return out


def predictive_log_lr(s_prime, post: GaussianPosterior,
                      q: QuadratureSpec = QuadratureSpec()):
    """log <N(s'|mu1,sigma2)> - log <N(s'|mu2,sigma2)> over ``post``.

    ``post`` is the 3-D marginal over (mu1, mu2, log sigma2). Scalar in,
    scalar out; arrays are evaluated elementwise.
    """
    _check_cal(post)
    pts, lw = nodes_and_log_weights(post, q)
    num = _log_expected_density(s_prime, pts[:, 0], pts[:, 2], lw)
    den = _log_expected_density(s_prime, pts[:, 1], pts[:, 2], lw)
    out = num - den
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite predictive expectation")
    return float(out[0]) if np.ndim(s_prime) == 0 else out.reshape(np.shape(s_prime))


def expected_affine(post: GaussianPosterior, q: QuadratureSpec = QuadratureSpec()):
    """Posterior expectations of the plug-in scale and offset."""
    _check_cal(post)
    pts, lw = nodes_and_log_weights(post, q)
    w = np.exp(lw)
    w = w / w.sum()
    mu1, mu2, v = pts[:, 0], pts[:, 1], np.exp(pts[:, 2])
    scale = float(w @ ((mu1 - mu2) / v))
    offset = float(w @ ((mu2 ** 2 - mu1 ** 2) / (2 * v)))
    return scale, offset


def expected_log_plugin_lr(s_prime, post: GaussianPosterior,
                           q: QuadratureSpec = QuadratureSpec()):
    """<log R(s'|C)>, which stays affine in s'."""
    scale, offset = expected_affine(post, q)
    return scale * np.asarray(s_prime, dtype=float) + offset


def gaussian_kl(m0, S0, m1, S1) -> float:
    """KL( N(m0, S0) || N(m1, S1) )."""
    m0, m1 = np.asarray(m0, float), np.asarray(m1, float)
    k = m0.size
    c1 = np.linalg.cholesky(S1)
    c0 = np.linalg.cholesky(S0)
    S1inv_S0 = np.linalg.solve(S1, S0)
    dm = np.linalg.solve(c1, m1 - m0)
    logdet = 2.0 * (np.sum(np.log(np.diag(c1))) - np.sum(np.log(np.diag(c0))))
    return 0.5 * (np.trace(S1inv_S0) + dm @ dm - k + logdet)


def _augmented_laplace(x, theta0, s_prime, target: bool, max_iter=20):
    """Laplace fit of the posterior after one extra labeled score."""
    k = 0 if target else 1

    def f(t):
        base = log_joint(t, x)
        if not math.isfinite(base):
            return base
        v = math.exp(t[2])
        return base - 0.5 * (LOG_2PI + t[2] + (s_prime - t[k]) ** 2 / v)

    def grad(t):
        g = log_likelihood_gradient(t, x)
        v = np.exp(t[2])
        e = s_prime - t[k]
        extra = np.zeros(4, dtype=g.dtype)
        extra[k] = e / v
        extra[2] = 0.5 * e * e / v - 0.5
        return g + extra

    theta = np.asarray(theta0, dtype=float)
    fval = f(theta)
    for _ in range(max_iter):
        g = grad(theta)
        H = complex_step_hessian(grad, theta)
        step = -np.linalg.solve(H, g)
        if g @ step < 1e-12:
            break
        t = 1.0
        while t > 1e-8:
            cand = theta + t * step
            fc = f(cand)
            if fc >= fval:
                break
            t *= 0.5
        else:
            break
        theta, fval = cand, fc
    H = complex_step_hessian(grad, theta)
    H = 0.5 * (H + H.T)
    if not np.all(np.linalg.eigvalsh(H) < 0):
        raise LaplaceError("augmented posterior has no proper maximum")
    return GaussianPosterior(theta, -np.linalg.inv(H))


def kl_decomposition(s_prime: float, s, post4: GaussianPosterior,
                     q: QuadratureSpec = QuadratureSpec()) -> PredictiveResult:
    """Break the predictive log-LR at ``s_prime`` into its averaged plug-in
    part and the two posterior KL terms, alongside the direct value."""
    x = _as_array(s)
    s_prime = float(s_prime)
    post3 = marginalize_pi1(post4)
    d = []
    for target in (True, False):
        aug = marginalize_pi1(_augmented_laplace(x, post4.mean, s_prime, target))
        d.append(gaussian_kl(post3.mean, post3.cov, aug.mean, aug.cov))
    mode = theta_to_params(post4.mean)
    return PredictiveResult(
        s_prime=s_prime,
        log_r_predictive=predictive_log_lr(s_prime, post3, q),
        log_r_plugin_at_mode=float(plugin_llr(s_prime, mode.cal)),
        expected_log_r=float(expected_log_plugin_lr(s_prime, post3, q)),
        d1=float(d[0]), d2=float(d[1]))


def posterior_odds(pi1_prime: float, log_r):
    """Posterior probability of the target class given prior ``pi1_prime``
    and log-likelihood-ratio ``log_r``."""
    if not 0.0 < pi1_prime < 1.0:
        raise ValueError("pi1_prime must lie strictly between 0 and 1")
    return expit(logit(pi1_prime) + np.asarray(log_r, dtype=float))
