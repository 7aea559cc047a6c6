"""Evaluation metrics: ROC-AUC by rank statistic, and mean squared error."""

import numpy as np
from scipy.stats import rankdata

from .errors import LengthMismatch, SingleClass


def roc_auc(scores, labels):
    """Probability that a random positive outscores a random negative,
    counting ties as 1/2.

    Computed from midranks in O(m log m):
        AUC = (sum of positive ranks - n+ (n+ + 1) / 2) / (n+ n-).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.shape} scores but {labels.shape} labels")
    pos = labels != 0
    n_pos = int(pos.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def mean_squared_error(predicted, observed):
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape:
        raise LengthMismatch(f"{predicted.shape} vs {observed.shape}")
    if predicted.size == 0:
        raise LengthMismatch("empty input")
    return float(np.mean((predicted - observed) ** 2))
