"""Profile log-likelihood over (d', logit pi1).

For each grid cell the location and scale are re-optimized with the
constrained EM of :func:`unsupcal.em.fit_constrained`. Rows (fixed d') are
independent units of work and may run in parallel; within a row each cell
tries the moment-matching start and a warm start from the previous cell,
keeping whichever ends higher.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .em import EmConfig, FitError, _as_array, _Centered, _fit_constrained_centered

DEFAULT_D_AXIS = np.linspace(0.0, 8.0, 33)
DEFAULT_LOGIT_AXIS = np.linspace(-14.0, 2.0, 33)

# sharpness proxy: cells whose normalized likelihood exceeds this
PEAK_LEVEL = 0.01


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    d_axis: np.ndarray
    logit_axis: np.ndarray
    log_lik: np.ndarray      # (len(d_axis), len(logit_axis)); NaN marks a failed cell
    mu2: np.ndarray
    sigma: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        return ~np.isfinite(self.log_lik)

    @property
    def complete(self) -> bool:
        return not self.missing.any()

    @property
    def argmax(self):
        ll = np.where(self.missing, -np.inf, self.log_lik)
        return np.unravel_index(int(np.argmax(ll)), ll.shape)

    @property
    def norm_lik(self) -> np.ndarray:
        """exp(log_lik - max); exactly 1 at the argmax cell."""
        peak = self.log_lik[self.argmax]
        with np.errstate(invalid="ignore"):
            return np.exp(self.log_lik - peak)

    def rows(self):
        nl = self.norm_lik
        for i, d in enumerate(self.d_axis):
            for j, lp in enumerate(self.logit_axis):
                yield float(d), float(lp), float(self.log_lik[i, j]), float(nl[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("d_prime", "logit_pi1", "log_lik", "norm_lik"))
            for row in self.rows():
                w.writerow([repr(v) for v in row])

    @classmethod
    def read_csv(cls, path) -> "SurfaceGrid":
        with open(path, newline="", encoding="utf-8") as f:
            rows = [tuple(float(r[k]) for k in ("d_prime", "logit_pi1", "log_lik"))
                    for r in csv.DictReader(f)]
        d_axis = np.unique([r[0] for r in rows])
        l_axis = np.unique([r[1] for r in rows])
        ll = np.array([r[2] for r in rows]).reshape(d_axis.size, l_axis.size)
        nan = np.full(ll.shape, np.nan)
        return cls(d_axis, l_axis, ll, nan, nan)


def _check_axis(a, name):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0 or np.any(np.diff(a) <= 0):
        raise ValueError(f"{name} must be non-empty and strictly increasing")
    return a


def _row(c: _Centered, d, logit_axis, cfg, warm_start):
    ll = np.full(logit_axis.size, np.nan)
    mu2 = np.full(logit_axis.size, np.nan)
    sig = np.full(logit_axis.size, np.nan)
    prev = None
    for j, lp in enumerate(logit_axis):
        starts = [None]
        if warm_start and prev is not None:
            starts.append(prev)
        best = None
        for init in starts:
            try:
                fit = _fit_constrained_centered(c, d, lp, cfg, init)
            except (FitError, FloatingPointError, ValueError):
                continue
            if math.isfinite(fit.log_likelihood) and (
                    best is None or fit.log_likelihood > best.log_likelihood):
                best = fit
        if best is None:
            # one retry from a perturbed moment-matching start
            m0, s0 = c.mean, math.sqrt(c.Y / c.T)
            try:
                best = _fit_constrained_centered(c, d, lp, cfg, (m0 - 0.1 * s0, 0.9 * s0))
            except (FitError, FloatingPointError, ValueError):
                best = None
        if best is None or not math.isfinite(best.log_likelihood):
            prev = None
            continue
        ll[j], mu2[j], sig[j] = best.log_likelihood, best.mu2, best.sigma
        prev = (best.mu2, best.sigma)
    return ll, mu2, sig


def explore(s, d_axis=DEFAULT_D_AXIS, logit_axis=DEFAULT_LOGIT_AXIS,
            cfg: EmConfig = EmConfig(), n_jobs: int = 1,
            warm_start: bool = True) -> SurfaceGrid:
    """Evaluate the profile log-likelihood on a (d', logit pi1) grid.

    Cells whose fit fails even after a retry are left as NaN (see
    :attr:`SurfaceGrid.missing`); they are never interpolated.
    """
    d_axis = _check_axis(d_axis, "d_axis")
    logit_axis = _check_axis(logit_axis, "logit_axis")
    if d_axis[0] < 0:
        raise ValueError("d' must be non-negative")
    c = _Centered(_as_array(s))
    work = lambda d: _row(c, d, logit_axis, cfg, warm_start)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            rows = list(ex.map(work, d_axis))
    else:
        rows = [work(d) for d in d_axis]
    ll, mu2, sig = (np.array([r[k] for r in rows]) for k in range(3))
    return SurfaceGrid(d_axis, logit_axis, ll, mu2, sig)


def peak_regions(g: SurfaceGrid, level: float = PEAK_LEVEL):
    """Label 4-connected regions of cells with normalized likelihood above
    ``level``; returns (labels, count)."""
    return ndimage.label(np.nan_to_num(g.norm_lik, nan=0.0) > level)


def peak_report(g: SurfaceGrid, level: float = PEAK_LEVEL) -> dict:
    i, j = g.argmax
    nl = np.nan_to_num(g.norm_lik, nan=0.0)
    _, n_regions = peak_regions(g, level)
    return {
        "d_prime": float(g.d_axis[i]),
        "logit_pi1": float(g.logit_axis[j]),
        "log_lik": float(g.log_lik[i, j]),
        "mass_fraction_above": float(np.count_nonzero(nl > level) / nl.size),
        "regions_above": int(n_regions),
        "missing_cells": int(g.missing.sum()),
    }
