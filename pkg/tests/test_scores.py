import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unsupcal.scores import (LabeledScoreSet, ScoreFormatError, ScoreSet, TrialRecord,
                             load_scores, loads_scores, summary_stats, write_scores)


def test_plain_parse():
    s = loads_scores("1.5\n-0.2\n", "plain")
    assert type(s) is ScoreSet
    assert s.T == 2
    assert s.scores.tolist() == [1.5, -0.2]


def test_plain_without_trailing_newline():
    assert loads_scores("1\n2", "plain").scores.tolist() == [1.0, 2.0]


def test_csv_labeled():
    s = loads_scores("score,label\n3.0,tgt\n-3.0,non\n", "csv")
    assert isinstance(s, LabeledScoreSet)
    assert s.scores.tolist() == [3.0, -3.0]
    assert s.labels.tolist() == [True, False]


def test_csv_score_only():
    s = loads_scores("score\n1\n2\n", "csv")
    assert type(s) is ScoreSet


@pytest.mark.parametrize("text,line", [
    ("score,label\n1.0,tgt\nNaN,non\n", 3),
    ("score\n1.0\ninf\n", 3),
    ("score\n1.0\nabc\n", 3),
    ("score,label\n1.0,tgt\n2.0,maybe\n", 3),
])
def test_csv_bad_rows_report_line(text, line):
    with pytest.raises(ScoreFormatError) as exc:
        loads_scores(text, "csv")
    assert exc.value.line == line


def test_plain_nan_line():
    with pytest.raises(ScoreFormatError) as exc:
        loads_scores("1\n2\nnan\n", "plain")
    assert exc.value.line == 3


@pytest.mark.parametrize("text,fmt", [("", "plain"), ("\n", "plain"),
                                      ("", "csv"), ("score\n", "csv")])
def test_empty_rejected(text, fmt):
    with pytest.raises(ScoreFormatError):
        loads_scores(text, fmt)


def test_partially_labeled_rejected():
    with pytest.raises(ScoreFormatError, match="partially labeled"):
        loads_scores("score,label\n1,tgt\n2,\n3,non\n", "csv")


def test_label_column_all_empty_is_unlabeled():
    s = loads_scores("score,label\n1,\n2,\n", "csv")
    assert type(s) is ScoreSet


def test_invariants():
    with pytest.raises(ValueError):
        ScoreSet([])
    with pytest.raises(ValueError):
        ScoreSet([1.0, math.nan])
    with pytest.raises(ValueError):
        LabeledScoreSet([1.0, 2.0], [True])
    with pytest.raises(ValueError):
        TrialRecord(math.inf)


def test_immutable():
    s = ScoreSet([1.0, 2.0])
    with pytest.raises(ValueError):
        s.scores[0] = 5.0


def test_summary_stats_hand_values():
    st_ = summary_stats(ScoreSet([1.0, 3.0]))
    assert st_["mean"] == 2.0 and st_["variance"] == 1.0
    assert st_["min"] == 1.0 and st_["max"] == 3.0
    st_ = summary_stats(ScoreSet([5.0]))
    assert st_["mean"] == 5.0 and st_["variance"] == 0.0


def test_summary_stats_standard_normal():
    x = np.random.default_rng(7).standard_normal(10 ** 5)
    st_ = summary_stats(ScoreSet(x))
    assert abs(st_["mean"]) < 0.02
    assert abs(st_["variance"] - 1.0) < 0.02


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=50),
       st.data())
def test_csv_round_trip_bit_exact(tmp_path_factory, values, data):
    labels = data.draw(st.lists(st.booleans(), min_size=len(values), max_size=len(values)))
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    original = LabeledScoreSet(np.array(values), np.array(labels))
    write_scores(path, original, "csv")
    back = load_scores(path)
    assert isinstance(back, LabeledScoreSet)
    assert back.scores.tobytes() == original.scores.tobytes()
    assert back.labels.tolist() == labels


def test_plain_round_trip_preserves_order(tmp_path):
    x = np.random.default_rng(0).normal(size=1000) * 100
    write_scores(tmp_path / "s.txt", ScoreSet(x), "plain")
    back = load_scores(tmp_path / "s.txt", "plain")
    assert np.array_equal(back.scores, x)


def test_records():
    s = LabeledScoreSet([1.0, -1.0], [True, False])
    recs = list(s.records())
    assert recs[0].score == 1.0 and recs[0].label is True
    assert recs[1].label is False
