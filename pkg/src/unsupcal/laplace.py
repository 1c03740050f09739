"""Laplace approximation of the mixture parameter posterior.

The posterior is approximated in the coordinates
``theta = [mu1, mu2, log(sigma2), log(pi1)]``. The prior is flat on the
half-space ``mu1 > mu2`` (which removes the label-swapped twin of every
mode) and zero elsewhere, so inside its support the log-joint is the
mixture log-likelihood up to a constant.

Hessians are computed by complex-step differentiation of the analytic
gradient, one Hessian-vector product per coordinate. Central finite
differences of the log-joint are provided as an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np

from .em import EmTrace, _as_array, gmm_log_likelihood
from .model import FitError, GmmParams

PARAM_NAMES = ("mu1", "mu2", "log_sigma2", "log_pi1")
CAL_NAMES = PARAM_NAMES[:3]


class LaplaceError(FitError):
    """The log-joint has no proper interior maximum to expand around."""


# ---------------------------------------------------------------------------
# coordinates

def params_to_theta(m: GmmParams) -> np.ndarray:
    if not 0.0 < m.pi1 < 1.0:
        raise ValueError(f"pi1 = {m.pi1} has no finite log-odds coordinate")
    return np.array([m.mu1, m.mu2, math.log(m.sigma2), math.log(m.pi1)])


def theta_to_params(theta) -> GmmParams:
    t = np.asarray(theta, dtype=float)
    return GmmParams.make(t[0], t[1], math.exp(t[2]), math.exp(t[3]))


def admissible(theta) -> bool:
    t = np.asarray(theta, dtype=float)
    return bool(t[0] > t[1] and t[3] < 0 and np.all(np.isfinite(t)))


def log_joint(theta, s) -> float:
    """Log of likelihood times prior, up to an additive constant.

    Returns ``-inf`` outside the prior support.
    """
    if not admissible(theta):
        return -math.inf
    return gmm_log_likelihood(s, theta_to_params(theta))


# ---------------------------------------------------------------------------
# derivatives

def _sigmoid(a):
    # branch on the real part so complex perturbations pass through intact
    pos = np.real(a) >= 0
    e = np.exp(np.where(pos, -a, a))
    q = 1.0 / (1.0 + e)
    return np.where(pos, q, e * q)


def log_likelihood_gradient(theta, s) -> np.ndarray:
    """Analytic gradient of the mixture log-likelihood in theta coordinates.

    Written with operations that are analytic in theta, so it can be
    evaluated at complex arguments for complex-step differentiation.
    """
    x = _as_array(s)
    mu1, mu2, lv, lp = (theta[k] for k in range(4))
    T = x.size
    v = np.exp(lv)
    pi1 = np.exp(lp)
    lp2 = np.log(1.0 - pi1)
    a = (lp - lp2) + (mu1 - mu2) / v * (x - 0.5 * (mu1 + mu2))
    r = _sigmoid(a)
    e1 = x - mu1
    e2 = x - mu2
    R = np.sum(r)
    g = [
        np.sum(r * e1) / v,
        np.sum((1.0 - r) * e2) / v,
        np.sum(r * e1 * e1 + (1.0 - r) * e2 * e2) / (2.0 * v) - 0.5 * T,
        R - (T - R) * pi1 / (1.0 - pi1),
    ]
    return np.array(g)


def complex_step_hvp(grad: Callable, x, direction, h: float = 1e-20) -> np.ndarray:
    """Hessian-vector product ``H @ direction`` as Im(grad(x + i h d)) / h."""
    z = np.asarray(x, dtype=complex) + 1j * h * np.asarray(direction, dtype=float)
    return np.imag(grad(z)) / h


def complex_step_hessian(grad: Callable, x, h: float = 1e-20) -> np.ndarray:
    """Hessian of a scalar function from its complex-analytic gradient."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.empty((n, n))
    for k in range(n):
        H[:, k] = complex_step_hvp(grad, x, np.eye(n)[k], h)
    return H


def fd_steps(x, rel: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return rel * np.maximum(1.0, np.abs(x))


def central_difference_hessian(f: Callable, x, steps=None) -> np.ndarray:
    """Second derivatives of ``f`` by central differences of function values.

    Default steps are ``1e-4 * max(1, |x_k|)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = fd_steps(x) if steps is None else np.broadcast_to(steps, (n,)).astype(float)
    E = np.diag(h)
    f0 = f(x)
    H = np.empty((n, n))
    for i in range(n):
        H[i, i] = (f(x + E[i]) - 2.0 * f0 + f(x - E[i])) / h[i] ** 2
        for j in range(i):
            v = (f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                 - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def hessian(theta_hat, s, method: str = "complex-step", check: bool = True) -> np.ndarray:
    """Hessian of the log-joint at ``theta_hat``.

    Parameters
    ----------
    method : {"complex-step", "fd"}
        ``"fd"`` is plain central differences of :func:`log_joint`.
    check : bool
        Raise :class:`LaplaceError` unless the result is negative definite.
    """
    x = _as_array(s)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if method == "complex-step":
        H = complex_step_hessian(lambda t: log_likelihood_gradient(t, x), theta_hat)
    elif method == "fd":
        H = central_difference_hessian(lambda t: log_joint(t, x), theta_hat)
    else:
        raise ValueError(f"unknown Hessian method {method!r}")
    if check:
        eig = np.linalg.eigvalsh(0.5 * (H + H.T))
        if not np.all(eig < 0):
            raise LaplaceError(
                f"Hessian is not negative definite (eigenvalues {eig})")
    return H


def scaled_deviation(A, B) -> np.ndarray:
    """Elementwise |A - B| relative to sqrt(|B_ii B_jj|).

    Off-diagonal entries of a Hessian can sit near zero, so they are judged
    against the curvature scale of their row and column.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = np.sqrt(np.abs(np.diag(B)))
    scale = np.maximum(np.abs(B), np.outer(d, d))
    return np.abs(A - B) / scale


# ---------------------------------------------------------------------------
# posterior

@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """A multivariate normal over named parameter coordinates."""

    mean: np.ndarray
    cov: np.ndarray
    names: Tuple[str, ...] = PARAM_NAMES

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float).reshape(mean.size, mean.size)
        if len(self.names) != mean.size:
            raise ValueError("one name per coordinate is required")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=0.0):
            raise ValueError("covariance is not symmetric")
        eig = np.linalg.eigvalsh(cov) if mean.size else np.zeros(0)
        if eig.size and eig.min() < -1e-12 * max(1.0, abs(eig.max())):
            raise ValueError("covariance is not positive semi-definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "parametrization": ",".join(self.names),
            "mean": self.mean.tolist(),
            "covariance": self.cov.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianPosterior":
        names = tuple(d["parametrization"].split(","))
        n = len(names)
        return cls(np.array(d["mean"]), np.array(d["covariance"]).reshape(n, n), names)


@dataclass(frozen=True, eq=False)
class ErrorBars:
    """Posterior standard deviations, one per named coordinate."""

    values: np.ndarray
    names: Tuple[str, ...] = PARAM_NAMES

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def to_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def find_mode(s, theta0, max_iter: int = 50) -> np.ndarray:
    """Newton ascent on the log-joint from ``theta0`` (normally the EM mode).

    EM's stopping rule leaves the iterate a small fraction of an error-bar
    from the peak; a few Newton steps land on it to machine precision.
    """
    x = _as_array(s)
    theta = np.asarray(theta0, dtype=float)
    f = log_joint(theta, x)
    if not math.isfinite(f):
        raise LaplaceError("starting point is outside the prior support")
    for _ in range(max_iter):
        g = log_likelihood_gradient(theta, x)
        H = hessian(theta, x)
        step = -np.linalg.solve(H, g)
        decrement = float(g @ step)
        if decrement < 1e-12:
            break
        t = 1.0
        while t > 1e-8:
            cand = theta + t * step
            fc = log_joint(cand, x)
            if fc >= f:
                break
            t *= 0.5
        else:
            break
        theta, f = cand, fc
    return theta


def laplace_fit(s, em: EmTrace, refine: bool = True) -> GaussianPosterior:
    """Gaussian approximation N(theta_hat, -H^-1) to the 4-D posterior.

    Raises
    ------
    LaplaceError
        If EM did not converge, if pi1 sits at its clipping bound, or if the
        Hessian is not negative definite.
    """
    x = _as_array(s)
    if not em.converged:
        raise LaplaceError("EM did not converge; no mode to expand around")
    T = x.size
    # pi1 clipped at 1/(10T): boundary optimum
    if em.params.pi1 <= 1.0 / (10 * T) * (1 + 1e-9) or em.params.pi1 >= 1 - 1.0 / (10 * T) * (1 + 1e-9):
        raise LaplaceError(f"pi1 = {em.params.pi1} is at its boundary")
    theta = params_to_theta(em.params)
    if refine:
        theta = find_mode(x, theta)
    H = hessian(theta, x)
    cov = -np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior(theta, cov, PARAM_NAMES)


def marginalize_pi1(p: GaussianPosterior) -> GaussianPosterior:
    """Marginal over the calibration parameters: drop the log(pi1) row and
    column."""
    keep = [i for i, n in enumerate(p.names) if n != "log_pi1"]
    return GaussianPosterior(p.mean[keep], p.cov[np.ix_(keep, keep)],
                             tuple(p.names[i] for i in keep))


def error_bars(p: GaussianPosterior) -> ErrorBars:
    return ErrorBars(np.sqrt(np.diag(p.cov)), p.names)


def dominance_report(trace: EmTrace, posterior: GaussianPosterior,
                     n_bars: float = 5.0) -> dict:
    """Compare the chosen mode against the other restarts' end points.

    A restart counts as a distinct mode when its terminal theta lies more
    than ``n_bars`` error-bars from the chosen mode in some coordinate.
    ``gap`` is the log-likelihood lead of the chosen mode over the best
    distinct rival (None when every restart reached the same peak).
    """
    bars = np.sqrt(np.diag(posterior.cov))
    chosen = trace.restarts[trace.restart].log_likelihood if trace.restarts else trace.log_likelihood
    rivals = []
    for i, res in enumerate(trace.restarts):
        if i == trace.restart or res.params is None or res.degenerate:
            continue
        try:
            th = params_to_theta(res.params)
        except ValueError:
            continue
        if np.any(np.abs(th - posterior.mean) > n_bars * bars):
            rivals.append(res.log_likelihood)
    gap = chosen - max(rivals) if rivals else None
    return {"distinct_modes": 1 + len(rivals), "gap": gap,
            "dominant": gap is None or gap > 0}
