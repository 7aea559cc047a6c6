"""ROC-AUC against the brute-force pairwise definition."""

import numpy as np
import pytest

from bhlr.errors import LengthMismatch, SingleClass
from bhlr.metrics import mean_squared_error, roc_auc


def auc_brute_force(scores, labels):
    """Direct average over all positive-negative pairs, ties as 1/2."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for sp in pos:
        for sn in neg:
            total += 1.0 if sp > sn else (0.5 if sp == sn else 0.0)
    return total / (len(pos) * len(neg))


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.3, 0.3, 0.3, 0.3], [1, 0, 1, 0]) == 0.5

    def test_four_score_example(self):
        scores = [0.9, 0.2, 0.5, 0.4]
        labels = [1, 0, 1, 0]
        assert roc_auc(scores, labels) == auc_brute_force(scores, labels) == 1.0
        flipped = [1, 0, 0, 1]
        assert roc_auc(scores, flipped) == auc_brute_force(scores, flipped)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(SingleClass):
            roc_auc([0.1, 0.2], [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            roc_auc([0.1], [1, 0])

    def test_brute_force_equivalence_random_corpus(self, rng):
        for _ in range(300):
            m = int(rng.integers(2, 13))
            scores = np.round(rng.standard_normal(m), 1)   # force some ties
            labels = rng.integers(0, 2, size=m)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert roc_auc(scores, labels) == pytest.approx(
                auc_brute_force(scores, labels), abs=1e-12)


class TestMse:
    def test_zero_at_equality(self, rng):
        x = rng.standard_normal(10)
        assert mean_squared_error(x, x) == 0.0

    def test_simple_value(self):
        assert mean_squared_error([1.0, 2.0], [0.0, 4.0]) == (1 + 4) / 2

    def test_empty_rejected(self):
        with pytest.raises(LengthMismatch):
            mean_squared_error([], [])
