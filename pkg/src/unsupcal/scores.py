"""Score collections and their two on-disk formats.

Plain files hold one decimal score per line. CSV files carry a ``score``
header and an optional ``label`` column whose values are ``tgt`` (target,
H1) or ``non`` (non-target, H2).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

TARGET_TAG = "tgt"
NONTARGET_TAG = "non"


class ScoreFormatError(ValueError):
    """Raised when a score file cannot be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrialRecord:
    score: float
    label: Optional[bool] = None
    trial_id: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score!r}")


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """An ordered, immutable collection of finite scores."""

    scores: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.scores, np.float64)
        if arr.size == 0:
            raise ValueError("a score set needs at least one score")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"non-finite score at index {bad}")
        object.__setattr__(self, "scores", arr)

    @property
    def T(self) -> int:
        return int(self.scores.size)

    def __len__(self) -> int:
        return self.T

    def records(self) -> Iterator[TrialRecord]:
        for x in self.scores:
            yield TrialRecord(float(x))


@dataclass(frozen=True, eq=False)
class LabeledScoreSet(ScoreSet):
    """Scores with per-trial class labels; ``labels[t]`` is True for a target."""

    labels: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        if self.labels is None:
            raise ValueError("labels are required")
        lab = np.asarray(self.labels)
        if lab.dtype != np.bool_:
            if not np.all(np.isin(lab, (0, 1))):
                raise ValueError("labels must be boolean (True = target)")
            lab = lab.astype(bool)
        lab = _frozen_array(lab, np.bool_)
        if lab.size != self.scores.size:
            raise ValueError(
                f"{lab.size} labels for {self.scores.size} scores")
        object.__setattr__(self, "labels", lab)

    @property
    def targets(self) -> np.ndarray:
        return self.scores[self.labels]

    @property
    def nontargets(self) -> np.ndarray:
        return self.scores[~self.labels]

    def records(self) -> Iterator[TrialRecord]:
        for x, l in zip(self.scores, self.labels):
            yield TrialRecord(float(x), bool(l))


def summary_stats(s: ScoreSet) -> dict:
    """Min, max, mean and population variance of a score set."""
    x = s.scores
    mean = float(np.mean(x))
    return {
        "min": float(np.min(x)),
        "max": float(np.max(x)),
        "mean": mean,
        "variance": float(np.mean((x - mean) ** 2)),
    }


def _parse_score(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScoreFormatError(f"cannot parse score {text!r}", line) from None
    if not math.isfinite(value):
        raise ScoreFormatError(f"non-finite score {text!r}", line)
    return value


def _parse_label(text: str, line: int) -> Optional[bool]:
    text = text.strip()
    if text == "":
        return None
    if text == TARGET_TAG:
        return True
    if text == NONTARGET_TAG:
        return False
    raise ScoreFormatError(
        f"label must be {TARGET_TAG!r} or {NONTARGET_TAG!r}, got {text!r}", line)


def _read_plain(lines) -> ScoreSet:
    values = []
    for n, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            # a trailing blank line is allowed, nothing else
            continue
        values.append(_parse_score(text, n))
    if not values:
        raise ScoreFormatError("empty score file")
    return ScoreSet(np.array(values))


def _read_csv(handle) -> ScoreSet:
    reader = csv.reader(handle)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ScoreFormatError("empty score file", 1) from None
    if "score" not in header:
        raise ScoreFormatError("csv header must contain a 'score' column", 1)
    i_score = header.index("score")
    i_label = header.index("label") if "label" in header else None

    values, labels = [], []
    for row in reader:
        n = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ScoreFormatError(
                f"expected {len(header)} fields, got {len(row)}", n)
        values.append(_parse_score(row[i_score].strip(), n))
        if i_label is not None:
            labels.append((n, _parse_label(row[i_label], n)))
    if not values:
        raise ScoreFormatError("score file has a header but no scores")

    if i_label is None or all(l is None for _, l in labels):
        return ScoreSet(np.array(values))
    missing = [n for n, l in labels if l is None]
    if missing:
        raise ScoreFormatError(
            "partially labeled file (mixed labeled and unlabeled rows)",
            missing[0])
    return LabeledScoreSet(np.array(values), np.array([l for _, l in labels]))


def load_scores(path: Union[str, os.PathLike], format: Optional[str] = None):
    """Read a score file.

    Parameters
    ----------
    path : path-like
    format : {"plain", "csv"}, optional
        Inferred from the file extension when omitted (``.csv`` means csv).

    Returns
    -------
    ScoreSet or LabeledScoreSet
        A :class:`LabeledScoreSet` iff the file has a fully populated
        ``label`` column.
    """
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "plain"
    with open(path, "r", encoding="utf-8", newline="") as f:
        if format == "plain":
            return _read_plain(f)
        if format == "csv":
            return _read_csv(f)
    raise ValueError(f"unknown score format {format!r}")


def loads_scores(text: str, format: str = "plain"):
    """Like :func:`load_scores` but from an in-memory string."""
    if format == "plain":
        return _read_plain(io.StringIO(text))
    if format == "csv":
        return _read_csv(io.StringIO(text, newline=""))
    raise ValueError(f"unknown score format {format!r}")


def format_float(x: float) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(x))


def write_scores(path, s: ScoreSet, format: str = "csv") -> None:
    """Write a score set at full double precision."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        if format == "plain":
            f.writelines(format_float(x) + "\n" for x in s.scores)
            return
        if format != "csv":
            raise ValueError(f"unknown score format {format!r}")
        if isinstance(s, LabeledScoreSet):
            f.write("score,label\n")
            tags = np.where(s.labels, TARGET_TAG, NONTARGET_TAG)
            f.writelines(f"{format_float(x)},{t}\n"
                         for x, t in zip(s.scores, tags))
        else:
            f.write("score\n")
            f.writelines(format_float(x) + "\n" for x in s.scores)
