"""Shared-variance two-class Gaussian score model and its affine calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .scores import LabeledScoreSet

LOG_2PI = math.log(2.0 * math.pi)


class FitError(ValueError):
    """A fit could not produce valid parameters from the given data."""


@dataclass(frozen=True)
class CalParams:
    """Class means and the common within-class variance.

    ``mu1`` is the target mean and ``mu2`` the non-target mean. Fitted
    parameters always satisfy ``mu1 > mu2`` (see :attr:`ordered`); the
    constructor itself only insists on a positive, finite variance so that
    intermediate EM states and collapsed models remain representable.
    """

    mu1: float
    mu2: float
    sigma2: float

    def __post_init__(self):
        for name in ("mu1", "mu2", "sigma2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def ordered(self) -> bool:
        return self.mu1 > self.mu2

    def swapped(self) -> "CalParams":
        return CalParams(self.mu2, self.mu1, self.sigma2)


@dataclass(frozen=True)
class GmmParams:
    """Calibration parameters plus the target proportion ``pi1``."""

    cal: CalParams
    pi1: float

    def __post_init__(self):
        p = float(self.pi1)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"pi1 must lie in [0, 1], got {p}")
        object.__setattr__(self, "pi1", p)

    @classmethod
    def make(cls, mu1, mu2, sigma2, pi1) -> "GmmParams":
        return cls(CalParams(mu1, mu2, sigma2), pi1)

    mu1 = property(lambda self: self.cal.mu1)
    mu2 = property(lambda self: self.cal.mu2)
    sigma2 = property(lambda self: self.cal.sigma2)
    sigma = property(lambda self: self.cal.sigma)

    def swapped(self) -> "GmmParams":
        return GmmParams(self.cal.swapped(), 1.0 - self.pi1)

    def to_dict(self) -> dict:
        return {"mu1": self.mu1, "mu2": self.mu2,
                "sigma2": self.sigma2, "pi1": self.pi1}

    @classmethod
    def from_dict(cls, d: dict) -> "GmmParams":
        return cls.make(d["mu1"], d["mu2"], d["sigma2"], d["pi1"])


@dataclass(frozen=True)
class AffineCal:
    """The calibration map ``s -> scale * s + offset``."""

    scale: float
    offset: float

    def __call__(self, s):
        return self.scale * np.asarray(s, dtype=float) + self.offset

    def to_dict(self) -> dict:
        return {"scale": float(self.scale), "offset": float(self.offset)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineCal":
        return cls(float(d["scale"]), float(d["offset"]))


def _mean(c: CalParams, target) -> float:
    return c.mu1 if target else c.mu2


def class_log_likelihood(s, target: bool, c: CalParams):
    """log N(s | mu_i, sigma2), with ``target`` selecting mu1 (True) or mu2."""
    s = np.asarray(s, dtype=float)
    return -0.5 * (LOG_2PI + math.log(c.sigma2)
                   + (s - _mean(c, target)) ** 2 / c.sigma2)


def class_likelihood(s, target: bool, c: CalParams):
    return np.exp(class_log_likelihood(s, target, c))


def to_affine(c: CalParams) -> AffineCal:
    scale = (c.mu1 - c.mu2) / c.sigma2
    offset = (c.mu2 ** 2 - c.mu1 ** 2) / (2.0 * c.sigma2)
    return AffineCal(scale, offset)


def plugin_llr(s, c: CalParams):
    """Plug-in log-likelihood-ratio of target vs non-target at ``c``."""
    a = to_affine(c)
    # (mu1 - mu2)(s - midpoint) / sigma2 is the same affine map, evaluated
    # without the cancellation between scale*s and offset at large |mu|
    mid = 0.5 * (c.mu1 + c.mu2)
    return a.scale * (np.asarray(s, dtype=float) - mid)


def d_prime(c: CalParams) -> float:
    return (c.mu1 - c.mu2) / c.sigma


def theoretical_eer(c_or_dprime) -> float:
    """EER implied by the model, Phi(-d'/2).

    Accepts either a :class:`CalParams` or a d' value directly.
    """
    d = d_prime(c_or_dprime) if isinstance(c_or_dprime, CalParams) else float(c_or_dprime)
    return float(ndtr(-0.5 * d))


def fit_supervised(data: LabeledScoreSet) -> GmmParams:
    """Maximum-likelihood fit of the two-class model from labeled scores.

    The variance is the pooled within-class ML estimate (divide by T).
    """
    tar, non = data.targets, data.nontargets
    if tar.size < 2 or non.size < 2:
        raise FitError(
            f"need at least 2 scores per class, got {tar.size} targets "
            f"and {non.size} non-targets")
    mu1 = float(np.mean(tar))
    mu2 = float(np.mean(non))
    ss = np.sum((tar - mu1) ** 2) + np.sum((non - mu2) ** 2)
    sigma2 = float(ss / data.T)
    if not sigma2 > 0:
        raise FitError("zero pooled within-class variance")
    if not mu1 > mu2:
        raise FitError(
            f"target mean {mu1} does not exceed non-target mean {mu2}")
    return GmmParams.make(mu1, mu2, sigma2, tar.size / data.T)
