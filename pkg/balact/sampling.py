"""Balact - Samplers

Epoch plans for instance-balanced, class-balanced and repeat factor sampling.

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
from fractions import Fraction
from typing import List, Optional

import numpy as np

from balact.data import Dataset
from balact.errors import ShapeError
from balact.losses import ClassCounts
from balact.numerics import Rng, Vector

INSTANCE_BALANCED = 'instance_balanced'
CLASS_BALANCED = 'class_balanced'
REPEAT_FACTOR = 'repeat_factor'

SAMPLER_KINDS = (INSTANCE_BALANCED, CLASS_BALANCED, REPEAT_FACTOR)

DEFAULT_RF_THRESHOLD = 0.001


@dataclass(frozen=True, eq=False)
class SamplerPlan:
    kind: str = INSTANCE_BALANCED
    # Repeat factor of every training sample, repeat_factor plans only
    per_sample_repeat: Optional[np.ndarray] = None
    rf_threshold: float = DEFAULT_RF_THRESHOLD

    def __post_init__(self) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ValueError('unknown sampler {!r}, expected one of {}'.format(
                self.kind, ', '.join(SAMPLER_KINDS)))
        if self.kind == REPEAT_FACTOR:
            if self.per_sample_repeat is None:
                raise ValueError('repeat factor sampling needs per-sample '
                                 'repeat factors')
            if np.any(np.asarray(self.per_sample_repeat) < 1):
                raise ValueError('repeat factors must be at least 1')


def repeat_factors(counts: ClassCounts,
                   threshold_t: float = DEFAULT_RF_THRESHOLD) -> Vector:
    """r_j = max(1, sqrt(t / f_j)) with f_j = n_j / n. Classes at or above
    the frequency threshold are left alone."""
    if not 0 < threshold_t < 1:
        raise ValueError('the repeat factor threshold must lie in (0, 1)')
    frequencies = counts.as_array() / counts.n
    return np.maximum(1.0, np.sqrt(threshold_t / frequencies))


def make_plan(kind: str, dataset: Dataset,
              rf_threshold: float = DEFAULT_RF_THRESHOLD) -> SamplerPlan:
    if kind == REPEAT_FACTOR:
        per_class = repeat_factors(dataset.counts, rf_threshold)
        return SamplerPlan(kind, per_class[dataset.labels], rf_threshold)
    return SamplerPlan(kind, rf_threshold=rf_threshold)


def epoch_indices(plan: SamplerPlan, dataset: Dataset, rng: Rng,
                  size: Optional[int] = None) -> np.ndarray:
    """Sample indices for one epoch.

    instance_balanced: a permutation of all samples.
    class_balanced: `size` draws (default: the dataset size), each picking a
    uniform class, then a uniform sample of that class.
    repeat_factor: every sample floor(r) times, plus once more with
    probability frac(r), shuffled.
    """
    n = dataset.n_samples
    if plan.kind == INSTANCE_BALANCED:
        if size not in (None, n):
            raise ValueError('instance balanced epochs visit every sample '
                             'exactly once')
        return rng.permutation(n)

    if plan.kind == CLASS_BALANCED:
        size = n if size is None else size
        by_class = np.argsort(dataset.labels, kind='stable')
        offsets = np.concatenate(([0], np.cumsum(dataset.counts.counts)))
        classes = rng.integers(dataset.k, size=size)
        within = rng.integers(np.asarray(dataset.counts.counts)[classes])
        return by_class[offsets[classes] + within]

    repeat = np.asarray(plan.per_sample_repeat, dtype=np.float64)
    if repeat.shape != (n,):
        raise ShapeError('plan has {} repeat factors for {} samples'.format(
            repeat.size, n))
    if size is not None:
        raise ValueError('repeat factor epochs have a random length')
    whole = np.floor(repeat)
    extra = rng.random(n) < repeat - whole
    indices = np.repeat(np.arange(n), (whole + extra).astype(np.int64))
    return indices[rng.permutation(indices.size)]


def expected_class_frequencies(plan: SamplerPlan,
                               dataset: Dataset) -> List[Fraction]:
    """Exact probability that a draw of the plan belongs to each class"""
    counts = dataset.counts
    if plan.kind == INSTANCE_BALANCED:
        return [Fraction(c, counts.n) for c in counts.counts]
    if plan.kind == CLASS_BALANCED:
        # P(sample i) = 1 / (k n_j) for every sample i of class j
        return [sum((Fraction(1, counts.k * c) for _ in range(c)),
                    Fraction(0)) for c in counts.counts]
    repeat = [Fraction(float(r)) for r in plan.per_sample_repeat]
    total = sum(repeat, Fraction(0))
    mass = [Fraction(0)] * counts.k
    for label, r in zip(dataset.labels, repeat):
        mass[label] += r
    return [m / total for m in mass]
