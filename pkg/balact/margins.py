"""Balact - Margins and Generalization Bound

Per-class margins gamma_j = t - max loss of class j, the margin bound on the
balanced error, and the margin allocation gamma*_j ~ n_j^(-1/4) that
minimizes it under a fixed budget sum(gamma) = beta.

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
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from balact.errors import ShapeError
from balact.losses import ClassCounts
from balact.numerics import Matrix, Vector, as_matrix, as_vector
from balact.numerics import log_sum_exp_rows

# Exhaustive simplex search is exponential in k
MAX_GRID_CLASSES = 3


@dataclass(frozen=True)
class MarginConfig:
    beta: float = 1.0
    complexity_c: float = 1.0
    # None means ln k, the loss of a uniform prediction
    threshold_t: Optional[float] = None
    confidence_delta: float = 0.05
    bound_b: float = 10.0

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError('beta must be positive')
        if not self.complexity_c > 0:
            raise ValueError('complexity_c must be positive')
        if self.threshold_t is not None and not self.threshold_t >= 0:
            raise ValueError('threshold_t must be non-negative')
        if not 0 < self.confidence_delta < 1:
            raise ValueError('confidence_delta must lie in (0, 1)')
        if not self.bound_b > 0:
            raise ValueError('bound_b must be positive')

    def threshold(self, k: int) -> float:
        if self.threshold_t is None:
            return math.log(k)
        return self.threshold_t


@dataclass
class MarginReport:
    gammas: Vector
    bound_value: float
    per_class_terms: Vector
    # t - max loss per class, negative when the class is not separated at t
    empirical_margins: Vector
    margin_errors: Vector


def _losses(per_sample_losses: Sequence[float]) -> Vector:
    losses = as_vector(per_sample_losses, 'losses')
    if losses.size == 0:
        raise ShapeError('no samples for class')
    return losses


def empirical_margin(per_sample_losses: Sequence[float],
                     threshold_t: float) -> float:
    """t - max(losses); reported as is when negative"""
    return threshold_t - float(_losses(per_sample_losses).max())


def threshold_error(per_sample_losses: Sequence[float],
                    threshold_t: float) -> float:
    """Fraction of the losses strictly above t"""
    losses = _losses(per_sample_losses)
    return int(np.count_nonzero(losses > threshold_t)) / losses.size


def margin_error(per_sample_losses: Sequence[float], gamma: float,
                 threshold_t: float) -> float:
    """Fraction of the samples whose loss plus gamma exceeds t"""
    losses = _losses(per_sample_losses)
    return int(np.count_nonzero(losses + gamma > threshold_t)) / losses.size


def optimal_margins(counts: ClassCounts, beta: float) -> Vector:
    """gamma*_j = beta n_j^(-1/4) / sum_i n_i^(-1/4)"""
    if not beta > 0:
        raise ValueError('beta must be positive')
    weights = counts.as_array() ** -0.25
    return beta * (weights / weights.sum())


def margin_logit_offsets(counts: ClassCounts, beta: float = 1.0) -> Vector:
    """-log gamma*_j. Shifting the logits by these offsets before a softmax
    gives the n_j^(1/4) balanced softmax."""
    return -np.log(optimal_margins(counts, beta))


def bound_objective(gammas: Sequence[float], counts: ClassCounts,
                    complexity_c: float = 1.0) -> float:
    """sum_j (4 / gamma_j) sqrt(C / n_j)"""
    gammas = as_vector(gammas, 'gammas')
    if gammas.size != counts.k:
        raise ShapeError('{} margins for {} classes'.format(
            gammas.size, counts.k))
    if np.any(gammas <= 0):
        raise ValueError('margins must be positive')
    return float(np.sum(4.0 / gammas *
                        np.sqrt(complexity_c / counts.as_array())))


def grid_search_margins(counts: ClassCounts, beta: float,
                        complexity_c: float = 1.0,
                        resolution: float = 1e-3) -> Tuple[Vector, float]:
    """Brute force minimum of bound_objective over the simplex
    sum(gamma) = beta sampled every resolution * beta. Only for k <= 3."""
    if counts.k > MAX_GRID_CLASSES:
        raise ValueError('grid search is limited to {} classes'.format(
            MAX_GRID_CLASSES))
    steps = int(round(1 / resolution))
    coefficients = 4.0 * np.sqrt(complexity_c / counts.as_array())
    ticks = np.arange(1, steps)
    if counts.k == 2:
        grid = np.stack([ticks, steps - ticks], axis=1)
    else:
        i, j = np.meshgrid(ticks, ticks, indexing='ij')
        keep = i + j < steps
        grid = np.stack([i[keep], j[keep], steps - i[keep] - j[keep]], axis=1)
    gammas = beta * grid / steps
    objectives = np.sum(coefficients / gammas, axis=1)
    best = int(np.argmin(objectives))
    return gammas[best], float(objectives[best])


def low_order_term(gamma: float, n_j: int, bound_b: float,
                   confidence_delta: float) -> float:
    """sqrt(log(log2(4B / gamma)) / n_j) + sqrt(log(1 / delta) / (2 n_j))"""
    if not gamma > 0:
        raise ValueError('margins must be positive')
    log_ratio = math.log2(4.0 * bound_b / gamma)
    if log_ratio <= 1:
        raise ValueError('B too small for margin')
    return math.sqrt(math.log(log_ratio) / n_j) + \
        math.sqrt(math.log(1.0 / confidence_delta) / (2.0 * n_j))


def class_bound_term(per_sample_losses: Sequence[float], n_j: int,
                     gamma: float, config: MarginConfig,
                     threshold_t: float) -> float:
    """Bound contribution of one class: empirical margin error plus the
    complexity term plus the low-order term"""
    return margin_error(per_sample_losses, gamma, threshold_t) + \
        4.0 / gamma * math.sqrt(config.complexity_c / n_j) + \
        low_order_term(gamma, n_j, config.bound_b, config.confidence_delta)


def bound_estimate(per_class_loss_lists: Sequence[Sequence[float]],
                   counts: ClassCounts, config: MarginConfig,
                   gammas: Optional[Sequence[float]] = None) -> MarginReport:
    """Evaluate the margin bound on the balanced error. Margins default to
    the optimal allocation for the configured budget."""
    if len(per_class_loss_lists) != counts.k:
        raise ShapeError('{} loss lists for {} classes'.format(
            len(per_class_loss_lists), counts.k))
    if gammas is None:
        gammas = optimal_margins(counts, config.beta)
    gammas = as_vector(gammas, 'gammas')
    if gammas.size != counts.k:
        raise ShapeError('{} margins for {} classes'.format(
            gammas.size, counts.k))
    t = config.threshold(counts.k)
    terms = np.array([
        class_bound_term(losses, counts[j], float(gammas[j]), config, t)
        for j, losses in enumerate(per_class_loss_lists)])
    return MarginReport(
        gammas=gammas,
        bound_value=float(np.mean(terms)),
        per_class_terms=terms,
        empirical_margins=np.array([
            empirical_margin(losses, t) for losses in per_class_loss_lists]),
        margin_errors=np.array([
            margin_error(losses, float(gammas[j]), t)
            for j, losses in enumerate(per_class_loss_lists)]))


def per_class_losses(logits: Matrix, labels: Sequence[int],
                     k: int) -> List[Vector]:
    """Standard softmax negative log-likelihood of every sample, grouped by
    class"""
    logits = as_matrix(logits, 'logits')
    labels = np.asarray(labels, dtype=np.int64)
    losses = log_sum_exp_rows(logits) - logits[np.arange(labels.size), labels]
    return [losses[labels == j] for j in range(k)]
