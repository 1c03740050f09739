"""EM fitting of the two-component shared-variance Gaussian mixture.

Two fitters live here: :func:`fit_unsupervised`, the ordinary maximum
likelihood fit with multiple restarts, and :func:`fit_constrained`, which
holds d' and the target proportion fixed and maximizes over location and
scale only (the profile likelihood used by :mod:`unsupcal.surface`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import LOG_2PI, FitError, GmmParams
from .scores import ScoreSet


class DegenerateFitError(FitError):
    """A mixture component lost (almost) all of its responsibility mass."""


# effective component counts below this fraction of T are flagged
DEGENERATE_FRACTION = 1e-6

DEFAULT_INIT_PI1 = (1e-4, 1e-2, 0.1, 0.5)


@dataclass(frozen=True)
class EmConfig:
    """EM stopping rule and safeguards.

    ``tol`` is the absolute log-likelihood improvement per score below which
    a run counts as converged. ``var_floor`` is relative to the data
    variance.
    """

    max_iter: int = 500
    tol: float = 1e-9
    var_floor: float = 1e-6
    restarts: int = 4

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be positive")
        if not (self.tol > 0 and self.var_floor > 0):
            raise ValueError("tol and var_floor must be positive")

    def init_pi1(self):
        n = self.restarts
        if n <= len(DEFAULT_INIT_PI1):
            return DEFAULT_INIT_PI1[:n]
        return tuple(np.geomspace(DEFAULT_INIT_PI1[0], 0.5, n))


def _as_array(s) -> np.ndarray:
    if isinstance(s, ScoreSet):
        return s.scores
    return np.asarray(s, dtype=float).reshape(-1)


def _log_odds_terms(x, m: GmmParams):
    """Return (a, base) with the per-score mixture log-likelihood equal to
    base + softplus(a); a is the posterior log-odds of the target class."""
    v = m.sigma2
    lp1, lp2 = math.log(m.pi1), math.log1p(-m.pi1)
    mid = 0.5 * (m.mu1 + m.mu2)
    a = (lp1 - lp2) + ((m.mu1 - m.mu2) / v) * (x - mid)
    base = lp2 - 0.5 * (LOG_2PI + math.log(v) + (x - m.mu2) ** 2 / v)
    return a, base


def _sigmoid_softplus(a):
    e = np.exp(-np.abs(a))
    q = 1.0 / (1.0 + e)
    r = np.where(a >= 0, q, e * q)
    sp = np.maximum(a, 0.0) + np.log1p(e)
    return r, sp


def _estep(x, m: GmmParams):
    a, base = _log_odds_terms(x, m)
    r, sp = _sigmoid_softplus(a)
    return r, float(np.sum(base + sp))


def gmm_log_likelihood(s, m: GmmParams) -> float:
    """Total mixture log-likelihood, log-sum-exp stabilized."""
    x = _as_array(s)
    v = m.sigma2
    norm = -0.5 * (LOG_2PI + math.log(v))
    with np.errstate(divide="ignore"):
        l1 = math.log(m.pi1) if m.pi1 > 0 else -np.inf
        l2 = math.log1p(-m.pi1) if m.pi1 < 1 else -np.inf
    t1 = l1 + norm - (x - m.mu1) ** 2 / (2 * v)
    t2 = l2 + norm - (x - m.mu2) ** 2 / (2 * v)
    return float(np.sum(np.logaddexp(t1, t2)))


def e_step(s, m: GmmParams) -> np.ndarray:
    """Posterior target probability of every score under ``m``."""
    x = _as_array(s)
    if m.pi1 in (0.0, 1.0):
        return np.full(x.shape, m.pi1)
    return _estep(x, m)[0]


def m_step(s, r, var_floor: float = 0.0, pi1_clip: Optional[float] = None) -> GmmParams:
    """Closed-form M-step.

    Parameters
    ----------
    s : ScoreSet or array
    r : array
        Target responsibilities.
    var_floor : float
        Absolute lower bound on the fitted variance.
    pi1_clip : float, optional
        Keep pi1 within ``[pi1_clip, 1 - pi1_clip]``. Defaults to 1/(10T).

    Raises
    ------
    DegenerateFitError
        If either component's effective count is below ``1e-6 * T``.
    """
    x = _as_array(s)
    r = np.asarray(r, dtype=float)
    T = x.size
    n1 = float(np.sum(r))
    n2 = T - n1
    if min(n1, n2) < DEGENERATE_FRACTION * T:
        raise DegenerateFitError(
            f"effective component counts {n1:.3g} / {n2:.3g} out of {T}")
    w2 = 1.0 - r
    mu1 = float(r @ x) / n1
    mu2 = float(w2 @ x) / n2
    ss = r @ (x - mu1) ** 2 + w2 @ (x - mu2) ** 2
    sigma2 = max(float(ss) / T, var_floor)
    if pi1_clip is None:
        pi1_clip = 1.0 / (10 * T)
    pi1 = min(max(n1 / T, pi1_clip), 1.0 - pi1_clip)
    return GmmParams.make(mu1, mu2, sigma2, pi1)


def initial_params(s, pi1: float) -> GmmParams:
    """Quantile-based starting point for one EM restart."""
    x = _as_array(s)
    mu2 = float(np.median(x))
    std = float(np.std(x))
    mu1 = max(float(np.quantile(x, 1.0 - pi1)), mu2 + 0.5 * std)
    return GmmParams.make(mu1, mu2, std ** 2 / 2.0, pi1)


@dataclass
class RestartResult:
    init: GmmParams
    params: Optional[GmmParams]
    log_likelihood: float
    iterations: int
    converged: bool
    degenerate: bool
    log_likelihoods: List[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "init": self.init.to_dict(),
            "params": None if self.params is None else self.params.to_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "degenerate": self.degenerate,
        }


@dataclass
class EmTrace:
    """Outcome of :func:`fit_unsupervised`.

    ``log_likelihoods`` is the per-iteration total log-likelihood of the
    chosen restart, starting with the value at its initialization.
    """

    log_likelihoods: List[float]
    params: GmmParams
    converged: bool
    restart: int
    restarts: List[RestartResult] = field(default_factory=list)

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihoods[-1]

    def to_dict(self) -> dict:
        return {
            "iterations": list(self.log_likelihoods),
            "params": self.params.to_dict(),
            "converged": self.converged,
            "restart": self.restart,
            "restarts": [r.to_dict() for r in self.restarts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmTrace":
        restarts = []
        for r in d.get("restarts", []):
            restarts.append(RestartResult(
                init=GmmParams.from_dict(r["init"]),
                params=None if r["params"] is None else GmmParams.from_dict(r["params"]),
                log_likelihood=r["log_likelihood"], iterations=r["iterations"],
                converged=r["converged"], degenerate=r["degenerate"]))
        return cls([float(v) for v in d["iterations"]],
                   GmmParams.from_dict(d["params"]), bool(d["converged"]),
                   int(d["restart"]), restarts)


def run_em(s, init: GmmParams, cfg: EmConfig = EmConfig()) -> RestartResult:
    """A single EM run from ``init``; components are put in mu1 > mu2 order
    only after termination."""
    x = _as_array(s)
    T = x.size
    floor = cfg.var_floor * float(np.var(x))
    m = init
    r, ll = _estep(x, m)
    lls = [ll]
    converged = False
    try:
        for _ in range(cfg.max_iter):
            m = m_step(x, r, floor)
            r, ll = _estep(x, m)
            lls.append(ll)
            if ll - lls[-2] < cfg.tol * T:
                converged = True
                break
    except DegenerateFitError:
        return RestartResult(init, m, lls[-1], len(lls) - 1, False, True, lls)
    if m.mu1 < m.mu2:
        m = m.swapped()
    degenerate = m.mu1 == m.mu2
    return RestartResult(init, m, lls[-1], len(lls) - 1, converged, degenerate, lls)


def fit_unsupervised(s, cfg: EmConfig = EmConfig()) -> EmTrace:
    """Unsupervised maximum-likelihood fit from several initializations.

    Returns the trace of the non-degenerate restart with the highest final
    log-likelihood. Raises :class:`DegenerateFitError` when every restart
    degenerates.
    """
    x = _as_array(s)
    if x.size < 10:
        raise FitError(f"need at least 10 scores, got {x.size}")
    results = [run_em(x, initial_params(x, p), cfg) for p in cfg.init_pi1()]
    ok = [i for i, res in enumerate(results) if not res.degenerate]
    if not ok:
        raise DegenerateFitError("all EM restarts degenerated")
    best = max(ok, key=lambda i: results[i].log_likelihood)
    res = results[best]
    return EmTrace(res.log_likelihoods, res.params, res.converged, best, results)


# ---------------------------------------------------------------------------
# profile (constrained) EM

@dataclass(frozen=True)
class ProfileFit:
    """Constrained optimum at fixed (d', logit pi1)."""

    d_prime: float
    logit_pi1: float
    mu2: float
    sigma: float
    log_likelihood: float
    iterations: int
    converged: bool

    @property
    def mu1(self) -> float:
        return self.mu2 + self.d_prime * self.sigma

    def params(self) -> GmmParams:
        pi1 = 1.0 / (1.0 + math.exp(-self.logit_pi1))
        return GmmParams.make(self.mu1, self.mu2, self.sigma ** 2, pi1)


class _Centered:
    """Scores with their mean removed, plus the sums EM keeps reusing."""

    def __init__(self, x):
        self.x = x
        self.T = x.size
        self.mean = float(np.mean(x))
        self.y = x - self.mean
        self.sum_y = float(np.sum(self.y))
        self.Y = float(self.y @ self.y)


def constrained_m_step(y, r, d_prime: float, Y: Optional[float] = None,
                       var_floor: float = 0.0):
    """Maximize the expected complete-data log-likelihood over (mu2, sigma)
    with mu1 tied to mu2 + d_prime * sigma.

    ``y`` must be centered scores (mean zero); the returned mu2 is in the
    same centered coordinates. For fixed sigma the optimal location is
    ``-d_prime * sigma * mean(r)``, and substituting it leaves a concave
    quadratic in 1/sigma whose positive root is the scale update.
    """
    y = np.asarray(y, dtype=float)
    T = y.size
    if Y is None:
        Y = float(y @ y)
    if not Y > 0:
        raise FitError("scores have zero variance")
    rho = float(np.sum(r)) / T
    A = float(np.asarray(r) @ y)
    u = (d_prime * A + math.sqrt((d_prime * A) ** 2 + 4.0 * Y * T)) / (2.0 * Y)
    if var_floor > 0:
        u = min(u, 1.0 / math.sqrt(var_floor))
    sigma = 1.0 / u
    return -d_prime * sigma * rho, sigma


def _constrained_loglik(c: _Centered, mu2, sigma, d, lp1, lp2):
    # mu2 is centered; the mixture log-likelihood split as in _log_odds_terms
    v = sigma * sigma
    mid = mu2 + 0.5 * d * sigma
    a = (lp1 - lp2) + (d / sigma) * (c.y - mid)
    r, sp = _sigmoid_softplus(a)
    dev = c.Y - 2.0 * mu2 * c.sum_y + c.T * mu2 * mu2
    ll = c.T * (lp2 - 0.5 * (LOG_2PI + math.log(v))) - dev / (2 * v) + float(np.sum(sp))
    return r, ll


def moment_init(c: _Centered, d_prime: float, pi1: float):
    """(mu2, sigma) in centered coordinates matching the data's mean and
    variance under the constrained mixture."""
    sigma = math.sqrt(c.Y / c.T / (1.0 + d_prime ** 2 * pi1 * (1.0 - pi1)))
    return -d_prime * sigma * pi1, sigma


def _fit_constrained_centered(c: _Centered, d_prime, logit_pi1, cfg, init=None):
    d = float(d_prime)
    if d < 0:
        raise ValueError("d_prime must be non-negative")
    lp1 = -math.log1p(math.exp(-logit_pi1)) if logit_pi1 > -700 else logit_pi1
    lp2 = lp1 - logit_pi1
    pi1 = math.exp(lp1)
    floor = cfg.var_floor * c.Y / c.T
    if init is None:
        mu2, sigma = moment_init(c, d, pi1)
    else:
        mu2, sigma = init[0] - c.mean, init[1]
    r, ll = _constrained_loglik(c, mu2, sigma, d, lp1, lp2)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        mu2, sigma = constrained_m_step(c.y, r, d, c.Y, floor)
        r, new = _constrained_loglik(c, mu2, sigma, d, lp1, lp2)
        gain, ll = new - ll, new
        if gain < cfg.tol * c.T:
            converged = True
            break
    return ProfileFit(d, float(logit_pi1), mu2 + c.mean, sigma, ll, it, converged)


def fit_constrained(s, d_prime: float, logit_pi1: float,
                    cfg: EmConfig = EmConfig(), init=None) -> ProfileFit:
    """Profile maximum-likelihood fit with d' and logit(pi1) held fixed.

    Parameters
    ----------
    s : ScoreSet or array
    d_prime : float
        Fixed class separation (mu1 - mu2) / sigma, >= 0.
    logit_pi1 : float
        Fixed log-odds of the target proportion.
    init : (mu2, sigma), optional
        Warm start. Defaults to moment matching.
    """
    x = _as_array(s)
    if x.size < 10:
        raise FitError(f"need at least 10 scores, got {x.size}")
    return _fit_constrained_centered(_Centered(x), d_prime, logit_pi1, cfg, init)
