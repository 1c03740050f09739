"""Synthetic labeled scores drawn from a known mixture.

Random numbers come from numpy's ``Generator(PCG64(seed))``. Labels are
drawn first, as ``uniform() < pi1`` for all T trials in one call; normal
variates follow in a second call to ``standard_normal(T)`` (numpy's
ziggurat method) and are scaled by sigma and shifted by the class mean.
Keeping this order fixed is what makes files regenerated from the same
seed identical across versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GmmParams, plugin_llr
from .scores import LabeledScoreSet, ScoreSet


@dataclass(frozen=True)
class SynthSpec:
    truth: GmmParams
    T: int
    seed: int = 0

    def __post_init__(self):
        if int(self.T) < 1:
            raise ValueError(f"T must be positive, got {self.T}")


def generate(spec: SynthSpec) -> LabeledScoreSet:
    m = spec.truth
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    labels = rng.random(spec.T) < m.pi1
    z = rng.standard_normal(spec.T)
    scores = np.where(labels, m.mu1, m.mu2) + m.sigma * z
    return LabeledScoreSet(scores, labels)


def drop_labels(d: LabeledScoreSet) -> ScoreSet:
    return ScoreSet(d.scores)


def truth_llrs(d: LabeledScoreSet, truth: GmmParams) -> np.ndarray:
    """Log-likelihood-ratios of ``d`` under the generating parameters."""
    return plugin_llr(d.scores, truth.cal)
