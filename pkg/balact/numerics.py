"""Balact - Numerics

Dense float64 helpers shared by every other module. Matrices are plain 2-d
numpy arrays; the products below accumulate in a fixed left-to-right order
per output cell instead of handing the work to BLAS, so that results are
reproducible bit for bit.

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

import zlib
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from balact.errors import NonFiniteError, ShapeError

# Row-major 2-d float64 array: rows x cols
Matrix = np.ndarray
Vector = np.ndarray
Size = Union[None, int, Tuple[int, ...]]

MAX_SEED = 2 ** 64


def as_vector(values: Sequence[float], name: str = 'vector') -> Vector:
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise ShapeError('{} must be 1-dimensional, got shape {}'.format(
            name, vector.shape))
    return vector


def as_matrix(values: Union[Sequence[Sequence[float]], np.ndarray],
              name: str = 'matrix') -> Matrix:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError('{} must be 2-dimensional, got shape {}'.format(
            name, matrix.shape))
    return matrix


def check_finite(array: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError('non-finite value in {}'.format(what))
    return array


def log_sum_exp(values: Sequence[float]) -> float:
    """log(sum(exp(values))) without overflowing intermediate terms"""
    vector = as_vector(values, 'values')
    if vector.size == 0:
        raise ShapeError('empty reduction')
    check_finite(vector, 'log_sum_exp input')
    top = vector.max()
    return float(top + np.log(np.sum(np.exp(vector - top))))


def log_sum_exp_rows(matrix: Matrix) -> Vector:
    """Row-wise log_sum_exp of a 2-d array"""
    matrix = as_matrix(matrix)
    if matrix.shape[1] == 0:
        raise ShapeError('empty reduction')
    top = matrix.max(axis=1)
    return top + np.log(np.sum(np.exp(matrix - top[:, None]), axis=1))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product where every output cell is accumulated from the first
    inner index to the last"""
    a = as_matrix(a, 'left operand')
    b = as_matrix(b, 'right operand')
    if a.shape[1] != b.shape[0]:
        raise ShapeError('cannot multiply {}x{} by {}x{}'.format(
            a.shape[0], a.shape[1], b.shape[0], b.shape[1]))
    out = np.zeros((a.shape[0], b.shape[1]))
    for p in range(a.shape[1]):
        out += np.multiply.outer(a[:, p], b[p, :])
    return check_finite(out, 'matrix product')


def column_sums(matrix: Matrix) -> Vector:
    """Sum over rows, first row to last"""
    matrix = as_matrix(matrix)
    out = np.zeros(matrix.shape[1])
    for row in matrix:
        out += row
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), stable for large |x|"""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    # exp(-|x|) never overflows
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


class Rng:
    """Seeded PCG64 stream. Sub-streams are derived from the seed and a
    purpose name ('data', 'shuffle', 'init', ...), so adding draws for one
    purpose never changes the numbers seen by another.

    An Rng belongs to a single owner; share it only with external locking.
    """

    def __init__(self, seed: int, purpose: str = '') -> None:
        if not 0 <= int(seed) < MAX_SEED:
            raise ValueError('seed must be a 64-bit unsigned integer')
        self.seed = int(seed)
        self.purpose = purpose
        spawn_key = tuple(zlib.crc32(part.encode())
                          for part in purpose.split('/') if part)
        sequence = np.random.SeedSequence(self.seed, spawn_key=spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def __repr__(self) -> str:
        return 'Rng(seed={}, purpose={!r})'.format(self.seed, self.purpose)

    def child(self, purpose: str) -> 'Rng':
        if self.purpose:
            purpose = self.purpose + '/' + purpose
        return Rng(self.seed, purpose)

    def random(self, size: Size = None) -> np.ndarray:
        return self._generator.random(size)

    def uniform(self, low: float, high: float, size: Size = None
                ) -> np.ndarray:
        return self._generator.uniform(low, high, size)

    def normal(self, loc: Union[float, np.ndarray] = 0.0,
               scale: Union[float, np.ndarray] = 1.0,
               size: Size = None) -> np.ndarray:
        return self._generator.normal(loc, scale, size)

    def integers(self, high: Union[int, np.ndarray],
                 size: Size = None) -> np.ndarray:
        """Uniform integers in [0, high)"""
        return self._generator.integers(0, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False,
               p: Optional[np.ndarray] = None) -> np.ndarray:
        return self._generator.choice(n, size=size, replace=replace, p=p)
