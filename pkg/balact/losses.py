"""Balact - Activations and Losses

Standard and balanced softmax, multiple binary logistic regression and its
balanced variant, class-balanced weighting, and the conversions between the
posterior of the balanced test distribution and the posterior of the
long-tailed training distribution. Every loss comes with its exact gradient
with respect to the logits; there is no automatic differentiation anywhere in
balact.

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

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from balact.errors import (
    CountsError,
    LabelError,
    NonFiniteError,
    ShapeError,
)
from balact.numerics import (
    Matrix,
    Vector,
    as_matrix,
    as_vector,
    log_sum_exp,
    log_sum_exp_rows,
    sigmoid,
    softplus,
)

SOFTMAX_CE = 'softmax_ce'
BALANCED_SOFTMAX = 'balanced_softmax'
MULTI_BINARY_SIGMOID = 'multi_binary_sigmoid'
BALANCED_SIGMOID = 'balanced_sigmoid'
CBW_SOFTMAX_CE = 'cbw_softmax_ce'

LOSS_KINDS = (SOFTMAX_CE, BALANCED_SOFTMAX, MULTI_BINARY_SIGMOID,
              BALANCED_SIGMOID, CBW_SOFTMAX_CE)
SOFTMAX_FAMILY = (SOFTMAX_CE, BALANCED_SOFTMAX, CBW_SOFTMAX_CE)
SIGMOID_FAMILY = (MULTI_BINARY_SIGMOID, BALANCED_SIGMOID)

CBW_SCHEMES = ('inverse_frequency',)

# Tolerance on the sum of a softmax-family posterior
POSTERIOR_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ClassCounts:
    """Per-class training sample counts n_j"""

    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise CountsError('at least 2 classes are needed, got {}'.format(
                len(counts)))
        for j, c in enumerate(counts):
            if c < 1:
                raise CountsError(
                    'class {} has {} samples, every class needs at least '
                    'one'.format(j, c))
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def of(cls, values: Iterable[int],
           min_count_floor: bool = False) -> 'ClassCounts':
        """Build counts, optionally clamping empty classes to one sample
        instead of rejecting them"""
        values = [int(v) for v in values]
        if min_count_floor:
            values = [max(v, 1) for v in values]
        return cls(tuple(values))

    @classmethod
    def from_labels(cls, labels: Sequence[int], k: int,
                    min_count_floor: bool = False) -> 'ClassCounts':
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise LabelError('labels must lie in [0, {})'.format(k))
        return cls.of(np.bincount(labels, minlength=k), min_count_floor)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def as_array(self) -> Vector:
        return np.array(self.counts, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, j: int) -> int:
        return self.counts[j]


@dataclass(frozen=True)
class LossSpec:
    kind: str = SOFTMAX_CE
    tau: float = 1.0
    class_weights: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError('unknown loss kind {!r}, expected one of {}'
                             .format(self.kind, ', '.join(LOSS_KINDS)))
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError('tau must be a positive finite number')
        if self.class_weights is not None:
            weights = tuple(float(w) for w in self.class_weights)
            if not all(w > 0 and math.isfinite(w) for w in weights):
                raise ValueError('class weights must be positive')
            object.__setattr__(self, 'class_weights', weights)
        elif self.kind == CBW_SOFTMAX_CE:
            raise ValueError('{} needs class_weights'.format(CBW_SOFTMAX_CE))

    @property
    def is_softmax_family(self) -> bool:
        return self.kind in SOFTMAX_FAMILY

    def check_counts(self, counts: ClassCounts) -> None:
        if self.class_weights is not None and \
                len(self.class_weights) != counts.k:
            raise ShapeError('{} class weights for {} classes'.format(
                len(self.class_weights), counts.k))


def _logits(logits: Sequence[float], k: Optional[int] = None) -> Vector:
    vector = as_vector(logits, 'logits')
    if vector.size < 2:
        raise ShapeError('at least 2 logits are needed')
    if not np.all(np.isfinite(vector)):
        raise NonFiniteError('non-finite logit')
    if k is not None and vector.size != k:
        raise ShapeError('{} logits for {} classes'.format(vector.size, k))
    return vector


def _label(label: int, k: int) -> int:
    if not 0 <= int(label) < k:
        raise LabelError('label {} out of range [0, {})'.format(label, k))
    return int(label)


def _one_hot(label: int, k: int) -> Vector:
    target = np.zeros(k)
    target[label] = 1.0
    return target


def count_shift(counts: ClassCounts, tau: float = 1.0) -> Vector:
    """tau * log n_j up to a constant. Taken relative to the largest class, so
    equal counts shift every logit by exactly zero."""
    array = counts.as_array()
    return tau * np.log(array / array.max())


def softmax_probs(logits: Sequence[float]) -> Vector:
    vector = _logits(logits)
    return np.exp(vector - log_sum_exp(vector))


def balanced_softmax_probs(logits: Sequence[float], counts: ClassCounts,
                           tau: float = 1.0) -> Vector:
    """n_j^tau e^eta_j / sum_i n_i^tau e^eta_i"""
    if not tau > 0:
        raise ValueError('tau must be positive')
    vector = _logits(logits, counts.k)
    return softmax_probs(vector + count_shift(counts, tau))


def softmax_ce_loss(logits: Sequence[float], label: int) -> float:
    vector = _logits(logits)
    label = _label(label, vector.size)
    return log_sum_exp(vector) - float(vector[label])


def softmax_ce_grad(logits: Sequence[float], label: int) -> Vector:
    vector = _logits(logits)
    label = _label(label, vector.size)
    return softmax_probs(vector) - _one_hot(label, vector.size)


def balanced_softmax_loss(logits: Sequence[float], label: int,
                          counts: ClassCounts, tau: float = 1.0) -> float:
    vector = _logits(logits, counts.k)
    return softmax_ce_loss(vector + count_shift(counts, tau), label)


def balanced_softmax_grad(logits: Sequence[float], label: int,
                          counts: ClassCounts, tau: float = 1.0) -> Vector:
    vector = _logits(logits, counts.k)
    return softmax_ce_grad(vector + count_shift(counts, tau), label)


def cbw_weights(counts: ClassCounts,
                scheme: str = 'inverse_frequency') -> Vector:
    """Class-balanced weights w_j = n / (k n_j); all ones for equal counts"""
    if scheme not in CBW_SCHEMES:
        raise ValueError('unknown weighting scheme {!r}'.format(scheme))
    return counts.n / (counts.k * counts.as_array())


def cbw_softmax_loss(logits: Sequence[float], label: int,
                     weights: Sequence[float]) -> float:
    weights = as_vector(weights, 'class weights')
    vector = _logits(logits, weights.size)
    return float(weights[_label(label, vector.size)]) * \
        softmax_ce_loss(vector, label)


def cbw_softmax_grad(logits: Sequence[float], label: int,
                     weights: Sequence[float]) -> Vector:
    weights = as_vector(weights, 'class weights')
    vector = _logits(logits, weights.size)
    return weights[_label(label, vector.size)] * softmax_ce_grad(vector, label)


def sigmoid_probs(logits: Sequence[float]) -> Vector:
    """Per-class probabilities of k independent binary problems"""
    return sigmoid(_logits(logits))


def multi_binary_logistic_loss(logits: Sequence[float], label: int,
                               counts: Optional[ClassCounts] = None) -> float:
    """Sum of the k binary cross-entropies; counts are accepted for a uniform
    signature and ignored"""
    vector = _logits(logits)
    label = _label(label, vector.size)
    signed = vector.copy()
    # -log sigma(z) = softplus(-z), -log(1 - sigma(z)) = softplus(z)
    signed[label] = -signed[label]
    return float(np.sum(softplus(signed)))


def multi_binary_logistic_grad(logits: Sequence[float], label: int,
                               counts: Optional[ClassCounts] = None) -> Vector:
    vector = _logits(logits)
    label = _label(label, vector.size)
    return sigmoid(vector) - _one_hot(label, vector.size)


def balanced_sigmoid_offsets(counts: ClassCounts) -> Vector:
    """log((n/k) / n_j * (n - n_j) / (n - n/k)), subtracted from each logit
    before the logistic function"""
    n = float(counts.n)
    array = counts.as_array()
    if np.any(array >= n):
        raise CountsError('degenerate counts')
    balanced = n / counts.k
    # The two brackets cancel exactly for equal counts, and for k = 2 the
    # second one is exactly antisymmetric.
    return (math.log(balanced) - math.log(n - balanced)) + \
        (np.log(n - array) - np.log(array))


def balanced_sigmoid_probs(logits: Sequence[float],
                           counts: ClassCounts) -> Vector:
    vector = _logits(logits, counts.k)
    return sigmoid(vector - balanced_sigmoid_offsets(counts))


def balanced_sigmoid_loss(logits: Sequence[float], label: int,
                          counts: ClassCounts) -> float:
    vector = _logits(logits, counts.k)
    return multi_binary_logistic_loss(
        vector - balanced_sigmoid_offsets(counts), label)


def balanced_sigmoid_grad(logits: Sequence[float], label: int,
                          counts: ClassCounts) -> Vector:
    vector = _logits(logits, counts.k)
    return multi_binary_logistic_grad(
        vector - balanced_sigmoid_offsets(counts), label)


def _posterior(probs: Sequence[float], k: int) -> np.ndarray:
    array = np.asarray(probs, dtype=np.float64)
    if array.ndim not in (1, 2) or array.shape[-1] != k:
        raise ShapeError('posterior of shape {} for {} classes'.format(
            array.shape, k))
    if np.any(array < 0) or np.any(array > 1):
        raise ValueError('posterior entries must lie in [0, 1]')
    if np.any(np.abs(array.sum(axis=-1) - 1) > POSTERIOR_SUM_TOLERANCE):
        raise ValueError('posterior must sum to 1')
    return array


def _renormalize(weighted: np.ndarray) -> np.ndarray:
    total = weighted.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ArithmeticError('posterior conversion has a zero denominator')
    return weighted / total


def posterior_balanced_to_train(phi: Sequence[float],
                                counts: ClassCounts) -> np.ndarray:
    """phi_hat_j = n_j phi_j / sum_i n_i phi_i. Accepts one posterior or a
    matrix with one posterior per row."""
    return _renormalize(_posterior(phi, counts.k) * counts.as_array())


def posterior_train_to_balanced(phi_hat: Sequence[float],
                                counts: ClassCounts) -> np.ndarray:
    """Inverse of posterior_balanced_to_train"""
    return _renormalize(_posterior(phi_hat, counts.k) / counts.as_array())


def canonical_logits(phi: Sequence[float]) -> Vector:
    """eta_j = log(phi_j / phi_k): logits whose softmax is phi"""
    vector = as_vector(phi, 'posterior')
    if np.any(vector <= 0):
        raise ValueError('canonical logits need a strictly positive posterior')
    return np.log(vector / vector[-1])


def predict(logits: np.ndarray) -> np.ndarray:
    """argmax over the last axis, ties going to the lowest class index. The
    rule does not depend on the loss the logits were trained with."""
    return np.argmax(np.asarray(logits, dtype=np.float64), axis=-1)


def batch_loss_and_grad(spec: LossSpec, counts: ClassCounts, logits: Matrix,
                        labels: Sequence[int]) -> Tuple[float, Matrix]:
    """Mean loss of a batch and its gradient with respect to every logit"""
    logits = as_matrix(logits, 'logits')
    labels = np.asarray(labels, dtype=np.int64)
    batch, k = logits.shape
    if k != counts.k or labels.shape != (batch,):
        raise ShapeError('logits {} do not match {} labels and {} classes'
                         .format(logits.shape, labels.size, counts.k))
    if batch == 0:
        raise ShapeError('empty batch')
    if labels.min() < 0 or labels.max() >= k:
        raise LabelError('labels must lie in [0, {})'.format(k))
    spec.check_counts(counts)
    rows = np.arange(batch)

    if spec.is_softmax_family:
        z = logits
        if spec.kind == BALANCED_SOFTMAX:
            z = logits + count_shift(counts, spec.tau)
        lse = log_sum_exp_rows(z)
        per_sample = lse - z[rows, labels]
        grad = np.exp(z - lse[:, None])
        grad[rows, labels] -= 1.0
        if spec.kind == CBW_SOFTMAX_CE:
            weights = np.asarray(spec.class_weights)[labels]
            per_sample = per_sample * weights
            grad *= weights[:, None]
    else:
        z = logits
        if spec.kind == BALANCED_SIGMOID:
            z = logits - balanced_sigmoid_offsets(counts)
        signed = z.copy()
        signed[rows, labels] = -signed[rows, labels]
        per_sample = softplus(signed).sum(axis=1)
        grad = sigmoid(z)
        grad[rows, labels] -= 1.0

    return float(np.mean(per_sample)), grad / batch
