import numpy as np
import pytest

from fnrseg.conformal import ScoreSet, conformal_quantile
from fnrseg.errors import ValidationError
from fnrseg.fnr import CriticalScore
from fnrseg.scp import (
    ClassifierOutput,
    classification_predict,
    classification_quantile,
    classification_scores,
    read_outputs_csv,
    synthetic_outputs,
)


def test_scores():
    rows = [
        ClassifierOutput((0.6, 0.3, 0.1), 0),
        ClassifierOutput((0.0, 1.0, 0.0), 1),
        ClassifierOutput((0.25,) * 4, 2),
    ]
    assert classification_scores(rows) == pytest.approx([0.4, 0.0, 0.75])


def test_scores_need_labels():
    with pytest.raises(ValidationError):
        classification_scores([ClassifierOutput((0.5, 0.5))])


def test_predict():
    row = ClassifierOutput((0.6, 0.3, 0.1))
    assert classification_predict(row, 0.5).included_labels == {0}
    assert classification_predict(row, 1.0).included_labels == {0, 1, 2}
    assert classification_predict(row, 0.0).included_labels == set()
    assert classification_predict(ClassifierOutput((1.0, 0.0)), 0.0).included_labels == {0}


def test_validation():
    with pytest.raises(ValidationError):
        ClassifierOutput((0.5, 0.6))
    with pytest.raises(ValidationError):
        ClassifierOutput((0.5, 0.5), 2)


def test_quantile_reuse():
    rng = np.random.default_rng(0)
    rows = synthetic_outputs(57, 5, rng)
    scores = classification_scores(rows)
    ss = ScoreSet(0.0, tuple(CriticalScore(str(i), s, 0.0, "exact") for i, s in enumerate(scores)))
    for alpha in (0.05, 0.1, 0.3):
        assert classification_quantile(rows, alpha)[0] == conformal_quantile(ss, alpha).t_hat


def test_monotone_sets():
    rng = np.random.default_rng(1)
    for row in synthetic_outputs(50, 6, rng):
        qs = np.linspace(0, 1, 21)
        sets = [classification_predict(row, q).included_labels for q in qs]
        assert all(a <= b for a, b in zip(sets, sets[1:]))


def test_synthetic_rows_are_valid():
    rows = synthetic_outputs(200, 5, np.random.default_rng(2), temperature=0.5)
    assert all(abs(sum(r.probs) - 1) < 1e-9 for r in rows)
    acc = np.mean([np.argmax(r.probs) == r.true_label for r in rows])
    assert 0.3 < acc < 1.0


def test_read_csv(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("p0,p1,p2,label\n0.6,0.3,0.1,0\n0.2,0.2,0.6,2\n")
    rows = read_outputs_csv(p, require_label=True)
    assert [r.true_label for r in rows] == [0, 2]
    bad = tmp_path / "bad.csv"
    bad.write_text("p0,p1,label\n0.6,x,0\n")
    with pytest.raises(ValidationError):
        read_outputs_csv(bad, require_label=True)
