"""Balact - Evaluation

Accuracy on a class-balanced test set, overall, per class and per frequency
group, together with the marginal likelihood p(y) of the model's predictions.

Copyright (c) 2026 The Balact Authors
"""
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from balact.data import Dataset
from balact.errors import ShapeError
from balact.losses import (
    ClassCounts,
    LossSpec,
    posterior_train_to_balanced,
    predict,
)
from balact.model import ModelParams, forward_logits
from balact.numerics import Matrix, Vector, log_sum_exp_rows, softplus

FREQUENT = 'frequent'
COMMON = 'common'
RARE = 'rare'
GROUPS = (FREQUENT, COMMON, RARE)

DEFAULT_RARE_MAX = 10
DEFAULT_COMMON_MAX = 100

MARGINAL_MEAN = 'mean'
MARGINAL_HISTOGRAM = 'histogram'
MARGINAL_MODES = (MARGINAL_MEAN, MARGINAL_HISTOGRAM)


@dataclass(eq=False)
class EvalReport:
    overall_accuracy: float
    balanced_accuracy: float
    per_class_accuracy: Vector
    # None for a group without classes
    group_accuracy: Dict[str, Optional[float]]
    marginal_likelihood: Vector
    uniform_kl: float
    train_counts: Optional[ClassCounts] = None

    @property
    def k(self) -> int:
        return self.per_class_accuracy.size

    def to_dict(self) -> Dict[str, Any]:
        """Plain python values, ready for yaml.safe_dump"""
        report = {
            'overall_accuracy': float(self.overall_accuracy),
            'balanced_accuracy': float(self.balanced_accuracy),
            'per_class_accuracy': [float(a) for a in self.per_class_accuracy],
            'group_accuracy': {
                group: None if value is None else float(value)
                for group, value in self.group_accuracy.items()},
            'marginal_likelihood': [float(p)
                                    for p in self.marginal_likelihood],
            'uniform_kl': float(self.uniform_kl),
        }  # type: Dict[str, Any]
        if self.train_counts is not None:
            report['train_counts'] = list(self.train_counts.counts)
        return report


def group_classes(counts: ClassCounts, rare_max: int = DEFAULT_RARE_MAX,
                  common_max: int = DEFAULT_COMMON_MAX) -> List[str]:
    if rare_max > common_max:
        raise ValueError('rare_max ({}) exceeds common_max ({})'.format(
            rare_max, common_max))
    groups = []
    for n_j in counts.counts:
        if n_j <= rare_max:
            groups.append(RARE)
        elif n_j <= common_max:
            groups.append(COMMON)
        else:
            groups.append(FREQUENT)
    return groups


def predictive_distribution(params: ModelParams, loss: LossSpec,
                            features: Matrix) -> Matrix:
    """Softmax of the logits for the softmax family; for the sigmoid family
    the k binary probabilities normalised per sample. Training counts are
    never applied here."""
    logits = forward_logits(params, features)
    if loss.is_softmax_family:
        return np.exp(logits - log_sum_exp_rows(logits)[:, None])
    # log sigma(eta), normalised per row in log space
    log_probs = -softplus(-logits)
    return np.exp(log_probs - log_sum_exp_rows(log_probs)[:, None])


def confusion_matrix(predictions: Sequence[int], labels: Sequence[int],
                     k: int) -> np.ndarray:
    """Row: true class, column: predicted class"""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ShapeError('{} predictions for {} labels'.format(
            predictions.size, labels.size))
    matrix = np.zeros((k, k), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix


def per_class_accuracy(predictions: Sequence[int], labels: Sequence[int],
                       k: int) -> Vector:
    matrix = confusion_matrix(predictions, labels, k)
    support = matrix.sum(axis=1)
    for j in range(k):
        if support[j] == 0:
            raise ShapeError('no test samples for class {}'.format(j))
    return np.diag(matrix) / support


def balanced_accuracy(predictions: Sequence[int], labels: Sequence[int],
                      k: int) -> float:
    return float(np.mean(per_class_accuracy(predictions, labels, k)))


def uniform_kl(marginal: Vector) -> float:
    """KL(uniform || marginal); infinite when a class is never predicted"""
    k = marginal.size
    with np.errstate(divide='ignore'):
        return float(np.sum((1.0 / k) * np.log((1.0 / k) / marginal)))


def evaluate(params: ModelParams, loss: LossSpec, test: Dataset,
             groups: Sequence[str], posthoc: bool = False,
             train_counts: Optional[ClassCounts] = None,
             marginal_mode: str = MARGINAL_MEAN) -> EvalReport:
    """Score a model on a test set.

    Predictions are the argmax of the logits. With posthoc set, the predictive
    distribution is first converted from the training prior to the balanced
    one using train_counts, and predictions are taken from the converted
    distribution; this is meant for models trained with a plain softmax.

    marginal_mode 'mean' averages the predictive distribution over the test
    samples, 'histogram' uses the frequency of each predicted class.
    """
    if params.k != test.k:
        raise ShapeError('model has {} classes, test set has {}'.format(
            params.k, test.k))
    if len(groups) != test.k:
        raise ShapeError('{} groups for {} classes'.format(
            len(groups), test.k))
    if marginal_mode not in MARGINAL_MODES:
        raise ValueError('unknown marginal likelihood mode {!r}'.format(
            marginal_mode))

    probs = predictive_distribution(params, loss, test.features)
    if posthoc:
        if train_counts is None:
            raise ValueError('post-hoc conversion needs the training counts')
        probs = posterior_train_to_balanced(probs, train_counts)
        predictions = predict(probs)
    else:
        predictions = predict(forward_logits(params, test.features))

    accuracies = per_class_accuracy(predictions, test.labels, test.k)
    group_accuracy = {}  # type: Dict[str, Optional[float]]
    for group in GROUPS:
        members = [j for j in range(test.k) if groups[j] == group]
        group_accuracy[group] = float(np.mean(accuracies[members])) \
            if members else None

    if marginal_mode == MARGINAL_MEAN:
        marginal = probs.mean(axis=0)
    else:
        marginal = np.bincount(predictions, minlength=test.k) / \
            predictions.size

    return EvalReport(
        overall_accuracy=float(np.mean(predictions == test.labels)),
        balanced_accuracy=float(np.mean(accuracies)),
        per_class_accuracy=accuracies,
        group_accuracy=group_accuracy,
        marginal_likelihood=marginal,
        uniform_kl=uniform_kl(marginal),
        train_counts=train_counts)
