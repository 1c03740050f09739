"""Detection cost evaluation of calibrated log-likelihood-ratios.

Decisions accept (declare a target) iff llr > threshold; a tie with the
threshold is a rejection.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence

import numpy as np

DEFAULT_OPERATING_POINTS = (0.001, 0.01, 0.1, 0.5)


def _check_prior(p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"operating point must lie in (0, 1), got {p}")


def _split(llrs, labels):
    llrs = np.asarray(llrs, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if labels.dtype != np.bool_:
        labels = labels.astype(bool)
    if llrs.size != labels.size:
        raise ValueError("llrs and labels differ in length")
    tar, non = llrs[labels], llrs[~labels]
    if tar.size == 0 or non.size == 0:
        raise ValueError("need at least one target and one non-target")
    return tar, non


def bayes_threshold(pi1_prime: float) -> float:
    """-logit(pi1'), the Bayes decision threshold for calibrated llrs."""
    _check_prior(pi1_prime)
    # log(1-p) - log(p) is exactly antisymmetric under p -> 1-p when 1-p is exact
    return float(np.log(1.0 - pi1_prime) - np.log(pi1_prime))


def _normalized_cost(pi1_prime, p_miss, p_fa):
    return (pi1_prime * p_miss + (1.0 - pi1_prime) * p_fa) / min(pi1_prime, 1.0 - pi1_prime)


class ActualDcf(NamedTuple):
    p_miss: float
    p_fa: float
    norm_dcf: float


def norm_dcf(llrs, labels, pi1_prime: float) -> ActualDcf:
    """Normalized DCF with decisions at the Bayes threshold."""
    tar, non = _split(llrs, labels)
    thr = bayes_threshold(pi1_prime)
    p_miss = np.count_nonzero(tar <= thr) / tar.size
    p_fa = np.count_nonzero(non > thr) / non.size
    return ActualDcf(p_miss, p_fa, _normalized_cost(pi1_prime, p_miss, p_fa))


class Sweep(NamedTuple):
    thresholds: np.ndarray
    p_miss: np.ndarray
    p_fa: np.ndarray


def sweep(llrs, labels) -> Sweep:
    """Error rates at every distinct threshold, starting from -inf.

    Row k gives the rates of the rule ``llr > thresholds[k]``; the last row
    rejects everything.
    """
    tar, non = _split(llrs, labels)
    tar = np.sort(tar)
    non = np.sort(non)
    thr = np.concatenate(([-np.inf], np.unique(np.concatenate((tar, non)))))
    n_miss = np.searchsorted(tar, thr, side="right")
    n_kept_fa = non.size - np.searchsorted(non, thr, side="right")
    return Sweep(thr, n_miss / tar.size, n_kept_fa / non.size)


def min_dcf(llrs, labels, pi1_prime: float, sw: Sweep = None) -> float:
    """Normalized DCF at the empirically best threshold (exact sweep)."""
    _check_prior(pi1_prime)
    if sw is None:
        sw = sweep(llrs, labels)
    costs = _normalized_cost(pi1_prime, sw.p_miss, sw.p_fa)
    return float(np.min(costs))


def empirical_eer(llrs, labels, sw: Sweep = None) -> float:
    """Equal-error-rate, interpolating linearly between sweep points."""
    if sw is None:
        sw = sweep(llrs, labels)
    delta = sw.p_fa - sw.p_miss
    k = int(np.argmax(delta <= 0))
    if k == 0 or delta[k] == 0:
        return float(sw.p_miss[k])
    t = delta[k - 1] / (delta[k - 1] - delta[k])
    return float(sw.p_miss[k - 1] + t * (sw.p_miss[k] - sw.p_miss[k - 1]))


@dataclass(frozen=True)
class DcfRow:
    pi1_prime: float
    p_miss: float
    p_fa: float
    norm_dcf: float
    min_dcf: float


CSV_HEADER = ("pi1_prime", "p_miss", "p_fa", "norm_dcf", "min_dcf")


@dataclass
class DcfReport:
    rows: List[DcfRow]
    n_targets: int
    n_nontargets: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([repr(float(getattr(r, k))) for k in CSV_HEADER])

    @staticmethod
    def read_csv(path) -> List[DcfRow]:
        with open(path, newline="", encoding="utf-8") as f:
            return [DcfRow(*(float(row[k]) for k in CSV_HEADER))
                    for row in csv.DictReader(f)]


def dcf_report(llrs, labels, operating_points: Sequence[float] = DEFAULT_OPERATING_POINTS) -> DcfReport:
    tar, non = _split(llrs, labels)
    sw = sweep(llrs, labels)
    rows = []
    for p in operating_points:
        act = norm_dcf(llrs, labels, p)
        rows.append(DcfRow(float(p), act.p_miss, act.p_fa, act.norm_dcf,
                           min_dcf(llrs, labels, p, sw)))
    return DcfReport(rows, int(tar.size), int(non.size))
