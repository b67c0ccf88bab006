"""Balact - Datasets

Long-tailed class count profiles, Gaussian mixture datasets with a known
Bayes posterior, and a small CSV format for bringing in external data.

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

import csv
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from balact.errors import CountsError, DataFormatError, ShapeError
from balact.losses import ClassCounts
from balact.numerics import Matrix, Rng, Vector, as_matrix, as_vector
from balact.numerics import log_sum_exp_rows

logger = logging.getLogger(__name__)

Column = Union[int, str]


@dataclass(frozen=True)
class LongTailProfile:
    k: int
    n_max: int
    imbalance_factor: float

    def __post_init__(self) -> None:
        if self.k < 2:
            raise CountsError('a profile needs at least 2 classes')
        if self.n_max < 1:
            raise CountsError('n_max must be positive')
        if not self.imbalance_factor >= 1:
            raise CountsError('the imbalance factor must be at least 1')


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def longtail_counts(profile: LongTailProfile) -> ClassCounts:
    """n_j = round(n_max * IF^(-j / (k - 1))): exponential decay from the
    head class n_max down to the tail class n_max / IF"""
    k = profile.k
    smallest = _round(profile.n_max / profile.imbalance_factor)
    if smallest < 1:
        raise CountsError('smallest class rounds to 0 samples, raise n_max '
                          'or lower the imbalance factor')
    counts = [profile.n_max]
    for j in range(1, k - 1):
        decayed = profile.n_max * profile.imbalance_factor ** (-j / (k - 1))
        counts.append(max(1, _round(decayed)))
    counts.append(smallest)
    return ClassCounts(tuple(counts))


def balanced_counts(k: int, n_per_class: int) -> ClassCounts:
    return ClassCounts((n_per_class,) * k)


@dataclass(frozen=True, eq=False)
class GaussianMixtureSpec:
    """One diagonal Gaussian p(x|y=j) per class"""

    means: Matrix
    variances: Matrix

    def __post_init__(self) -> None:
        means = as_matrix(self.means, 'means')
        variances = np.broadcast_to(
            np.asarray(self.variances, dtype=np.float64), means.shape).copy()
        if np.any(variances <= 0):
            raise ValueError('covariance entries must be positive')
        object.__setattr__(self, 'means', means)
        object.__setattr__(self, 'variances', variances)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def log_likelihood(self, features: Matrix) -> Matrix:
        """log p(x|y=j) for every row x and class j"""
        features = as_matrix(features, 'features')
        if features.shape[1] != self.d:
            raise ShapeError('{}-dimensional features for a {}-dimensional '
                             'mixture'.format(features.shape[1], self.d))
        diff = features[:, None, :] - self.means[None, :, :]
        return -0.5 * np.sum(diff ** 2 / self.variances[None, :, :] +
                             np.log(2 * np.pi * self.variances)[None, :, :],
                             axis=2)


def circle_mixture(k: int, d: int = 2, radius: float = 2.0,
                   std: float = 1.0) -> GaussianMixtureSpec:
    """Class means evenly spaced on a circle in the first two coordinates,
    all classes sharing the isotropic variance std^2"""
    if d < 2:
        raise ValueError('circle mixtures need at least 2 dimensions')
    angles = 2 * np.pi * np.arange(k) / k
    means = np.zeros((k, d))
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    return GaussianMixtureSpec(means, np.full((k, d), std ** 2))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: Matrix
    labels: np.ndarray
    counts: ClassCounts
    # Original label symbols, in class index order, when read from CSV
    class_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        features = as_matrix(self.features, 'features').copy()
        labels = np.array(self.labels, dtype=np.int64)
        if labels.shape != (features.shape[0],):
            raise ShapeError('{} labels for {} samples'.format(
                labels.size, features.shape[0]))
        if ClassCounts.from_labels(labels, self.counts.k) != self.counts:
            raise CountsError('counts do not match the labels')
        if self.class_names is not None and \
                len(self.class_names) != self.counts.k:
            raise ShapeError('{} class names for {} classes'.format(
                len(self.class_names), self.counts.k))
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    @classmethod
    def from_arrays(cls, features: Matrix, labels: Sequence[int], k: int,
                    class_names: Optional[Tuple[str, ...]] = None
                    ) -> 'Dataset':
        return cls(features, np.asarray(labels, dtype=np.int64),
                   ClassCounts.from_labels(labels, k), class_names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def k(self) -> int:
        return self.counts.k

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)

    def take(self, indices: Sequence[int]) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset.from_arrays(self.features[indices],
                                   self.labels[indices], self.k,
                                   self.class_names)


def synthesize_gaussian(spec: GaussianMixtureSpec, counts: ClassCounts,
                        rng: Rng, shuffle: bool = False) -> Dataset:
    """Exactly counts[j] samples from N(mean_j, diag(variances_j)) per class,
    grouped by class unless shuffle is set"""
    if spec.k != counts.k:
        raise ShapeError('mixture has {} classes, counts have {}'.format(
            spec.k, counts.k))
    blocks = []
    for j in range(spec.k):
        blocks.append(rng.normal(spec.means[j], np.sqrt(spec.variances[j]),
                                 size=(counts[j], spec.d)))
    features = np.concatenate(blocks, axis=0)
    labels = np.repeat(np.arange(spec.k), counts.counts)
    if shuffle:
        order = rng.permutation(labels.size)
        features, labels = features[order], labels[order]
    return Dataset(features, labels, counts)


def _prior(prior: Sequence[float], k: int) -> Vector:
    prior = as_vector(prior, 'prior')
    if prior.size != k:
        raise ShapeError('prior of length {} for {} classes'.format(
            prior.size, k))
    if np.any(prior < 0) or abs(prior.sum() - 1) > 1e-9:
        raise ValueError('prior must be a probability vector')
    return prior


def bayes_posterior(spec: GaussianMixtureSpec, prior: Sequence[float],
                    x: Union[Vector, Matrix]) -> np.ndarray:
    """p(y=j|x) = p(x|y=j) p(y=j) / p(x) for a single point or for every row
    of a matrix. Classes with zero prior get exactly zero."""
    prior = _prior(prior, spec.k)
    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    log_joint = spec.log_likelihood(np.atleast_2d(points))
    support = prior > 0
    posterior = np.zeros_like(log_joint)
    joint = log_joint[:, support] + np.log(prior[support])
    posterior[:, support] = np.exp(joint - log_sum_exp_rows(joint)[:, None])
    return posterior[0] if single else posterior


def bayes_predict(spec: GaussianMixtureSpec, prior: Sequence[float],
                  features: Matrix) -> np.ndarray:
    prior = _prior(prior, spec.k)
    with np.errstate(divide='ignore'):
        log_prior = np.log(prior)
    return np.argmax(spec.log_likelihood(features) + log_prior, axis=1)


def bayes_balanced_accuracy(spec: GaussianMixtureSpec,
                            test: Dataset) -> float:
    """Balanced accuracy of the uniform-prior Bayes rule on a test set, the
    best any classifier can do in expectation on balanced data"""
    predictions = bayes_predict(spec, np.full(spec.k, 1.0 / spec.k),
                                test.features)
    hits = predictions == test.labels
    return float(np.mean([hits[test.labels == j].mean()
                          for j in range(test.k)]))


def subsample(dataset: Dataset, counts: ClassCounts, rng: Rng) -> Dataset:
    """Keep counts[j] samples of every class j, drawn without replacement"""
    if counts.k != dataset.k:
        raise ShapeError('{} counts for {} classes'.format(
            counts.k, dataset.k))
    keep = []
    for j in range(dataset.k):
        available = dataset.class_indices(j)
        if counts[j] > available.size:
            raise CountsError('class {} has {} samples, {} requested'.format(
                j, available.size, counts[j]))
        chosen = rng.choice(available.size, counts[j], replace=False)
        keep.append(np.sort(available[chosen]))
    return dataset.take(np.concatenate(keep))


@dataclass(frozen=True)
class CsvSchema:
    # None means every column except the label column
    feature_columns: Optional[Tuple[Column, ...]] = None
    label_column: Column = -1
    header: bool = True
    # Known label symbols; when given, any other symbol is an error
    classes: Optional[Tuple[str, ...]] = None


def _column_index(column: Column, names: Optional[List[str]],
                  width: int) -> int:
    if isinstance(column, str):
        if names is None:
            raise DataFormatError('column {!r} given by name but the file '
                                  'has no header'.format(column))
        if column not in names:
            raise DataFormatError('no column named {!r}'.format(column))
        return names.index(column)
    if not -width <= column < width:
        raise DataFormatError('column {} out of range'.format(column))
    return column % width


def load_csv(path: str, schema: CsvSchema = CsvSchema()) -> Dataset:
    """Read comma separated UTF-8 rows of features and a label. Integer labels
    are class indices; other symbols become classes in order of first
    appearance."""
    with open(path, newline='', encoding='utf-8') as csv_file:
        rows = [(number, row)
                for number, row in enumerate(csv.reader(csv_file), 1)
                if row and any(cell.strip() for cell in row)]
    names = None  # type: Optional[List[str]]
    if schema.header and rows:
        names = [cell.strip() for cell in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataFormatError('no data rows in {}'.format(path))

    width = len(names) if names is not None else len(rows[0][1])
    label_index = _column_index(schema.label_column, names, width)
    if schema.feature_columns is None:
        feature_indices = [i for i in range(width) if i != label_index]
    else:
        feature_indices = [_column_index(c, names, width)
                           for c in schema.feature_columns]

    features = []
    symbols = []
    for number, row in rows:
        if len(row) != width:
            raise DataFormatError('expected {} fields, got {}'.format(
                width, len(row)), number)
        try:
            features.append([float(row[i]) for i in feature_indices])
        except ValueError as e:
            raise DataFormatError(str(e), number)
        if not all(math.isfinite(v) for v in features[-1]):
            raise DataFormatError('non-finite feature', number)
        symbols.append((number, row[label_index].strip()))

    labels, class_names = _map_labels(symbols, schema.classes)
    k = len(class_names) if class_names is not None else max(labels) + 1
    dataset = Dataset.from_arrays(np.array(features, dtype=np.float64),
                                  labels, k, class_names)
    logger.debug('loaded %d samples of %d classes from %s',
                 dataset.n_samples, dataset.k, path)
    return dataset


def _map_labels(symbols: List[Tuple[int, str]],
                classes: Optional[Tuple[str, ...]]
                ) -> Tuple[List[int], Optional[Tuple[str, ...]]]:
    if classes is not None:
        index = {name: j for j, name in enumerate(classes)}
        labels = []
        for number, symbol in symbols:
            if symbol not in index:
                raise DataFormatError(
                    'unknown label symbol {!r}'.format(symbol), number)
            labels.append(index[symbol])
        return labels, tuple(classes)

    if all(symbol.isdigit() for _, symbol in symbols):
        return [int(symbol) for _, symbol in symbols], None

    seen = {}  # type: Dict[str, int]
    for _, symbol in symbols:
        seen.setdefault(symbol, len(seen))
    return [seen[symbol] for _, symbol in symbols], tuple(seen)


def write_csv(dataset: Dataset, path: str, header: bool = True) -> None:
    """Write in the format load_csv reads back; floats keep every digit"""
    with open(path, 'w', newline='', encoding='utf-8') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        if header:
            writer.writerow(['x{}'.format(i) for i in range(dataset.d)] +
                            ['label'])
        for row, label in zip(dataset.features, dataset.labels):
            symbol = dataset.class_names[label] if dataset.class_names \
                else str(label)
            writer.writerow([repr(float(v)) for v in row] + [symbol])
