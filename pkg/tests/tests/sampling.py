"""Balact - Tests - Sampling

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

import unittest
from fractions import Fraction

import numpy as np

from balact.data import Dataset
from balact.errors import ShapeError
from balact.losses import ClassCounts
from balact.numerics import Rng
from balact.sampling import (
    CLASS_BALANCED,
    INSTANCE_BALANCED,
    REPEAT_FACTOR,
    SamplerPlan,
    epoch_indices,
    expected_class_frequencies,
    make_plan,
    repeat_factors,
)


def labelled(counts):
    labels = np.repeat(np.arange(len(counts)), counts)
    return Dataset.from_arrays(np.zeros((labels.size, 1)), labels,
                               len(counts))


class TestRepeatFactors(unittest.TestCase):
    def test_values(self):
        factors = repeat_factors(ClassCounts.of([900, 100]), 0.5)
        np.testing.assert_allclose(factors, [1.0, np.sqrt(5.0)], rtol=1e-12)

    def test_tiny_threshold(self):
        factors = repeat_factors(ClassCounts.of([1000, 10, 1]), 1e-12)
        np.testing.assert_array_equal(factors, [1.0, 1.0, 1.0])

    def test_monotone(self):
        counts = ClassCounts.of([5000, 800, 120, 20, 3])
        factors = repeat_factors(counts, 0.1)
        self.assertTrue(np.all(factors >= 1.0))
        self.assertTrue(np.all(np.diff(factors) >= 0))

    def test_threshold_range(self):
        for threshold in (0.0, 1.0, -0.5):
            with self.assertRaises(ValueError):
                repeat_factors(ClassCounts.of([2, 1]), threshold)


class TestPlans(unittest.TestCase):
    def test_invalid(self):
        with self.assertRaises(ValueError):
            SamplerPlan('square_root')
        with self.assertRaises(ValueError):
            SamplerPlan(REPEAT_FACTOR)
        with self.assertRaises(ValueError):
            SamplerPlan(REPEAT_FACTOR, np.array([1.0, 0.5]))

    def test_make_plan(self):
        dataset = labelled([9, 1])
        plan = make_plan(REPEAT_FACTOR, dataset, 0.5)
        self.assertEqual(plan.per_sample_repeat.shape, (10,))
        self.assertEqual(plan.per_sample_repeat[0], 1.0)
        self.assertAlmostEqual(plan.per_sample_repeat[9], np.sqrt(5.0))
        self.assertIsNone(make_plan(CLASS_BALANCED, dataset).per_sample_repeat)


class TestEpochIndices(unittest.TestCase):
    def test_instance_balanced_is_a_permutation(self):
        dataset = labelled([3, 2])
        indices = epoch_indices(SamplerPlan(INSTANCE_BALANCED), dataset,
                                Rng(0))
        np.testing.assert_array_equal(np.sort(indices), np.arange(5))

    def test_class_balanced_frequencies(self):
        dataset = labelled([1000, 10])
        indices = epoch_indices(SamplerPlan(CLASS_BALANCED), dataset, Rng(0),
                                size=10000)
        self.assertEqual(indices.size, 10000)
        tail = np.mean(dataset.labels[indices] == 1)
        self.assertAlmostEqual(tail, 0.5, delta=0.02)
        # Uniform within the class as well
        hits = np.bincount(indices[indices >= 1000] - 1000, minlength=10)
        self.assertTrue(np.all(hits > 0))

    def test_class_balanced_default_size(self):
        dataset = labelled([7, 3])
        indices = epoch_indices(SamplerPlan(CLASS_BALANCED), dataset, Rng(2))
        self.assertEqual(indices.size, 10)

    def test_repeat_factor_whole_repeats(self):
        dataset = labelled([1, 1])
        plan = SamplerPlan(REPEAT_FACTOR, np.array([1.0, 2.0]))
        indices = epoch_indices(plan, dataset, Rng(0))
        np.testing.assert_array_equal(np.sort(indices), [0, 1, 1])

    def test_repeat_factor_expectation(self):
        dataset = labelled([1, 1])
        plan = SamplerPlan(REPEAT_FACTOR, np.array([1.0, 1.5]))
        rng = Rng(5)
        extra = [np.count_nonzero(epoch_indices(plan, dataset, rng) == 1)
                 for _ in range(2000)]
        self.assertAlmostEqual(np.mean(extra), 1.5, delta=0.05)

    def test_repeat_factor_plan_mismatch(self):
        plan = SamplerPlan(REPEAT_FACTOR, np.array([1.0, 2.0]))
        with self.assertRaises(ShapeError):
            epoch_indices(plan, labelled([2, 1]), Rng(0))

    def test_reproducible(self):
        dataset = labelled([40, 5])
        for kind in (INSTANCE_BALANCED, CLASS_BALANCED, REPEAT_FACTOR):
            plan = make_plan(kind, dataset, 0.5)
            np.testing.assert_array_equal(
                epoch_indices(plan, dataset, Rng(9, 'shuffle')),
                epoch_indices(plan, dataset, Rng(9, 'shuffle')))

    def test_instance_balanced_size(self):
        with self.assertRaises(ValueError):
            epoch_indices(SamplerPlan(), labelled([2, 2]), Rng(0), size=3)


class TestExpectedFrequencies(unittest.TestCase):
    def test_instance_balanced(self):
        dataset = labelled([30, 10])
        self.assertEqual(
            expected_class_frequencies(SamplerPlan(), dataset),
            [Fraction(3, 4), Fraction(1, 4)])

    def test_class_balanced_is_uniform(self):
        dataset = labelled([500, 37, 4])
        self.assertEqual(
            expected_class_frequencies(SamplerPlan(CLASS_BALANCED), dataset),
            [Fraction(1, 3)] * 3)

    def test_repeat_factor(self):
        dataset = labelled([2, 1])
        plan = SamplerPlan(REPEAT_FACTOR, np.array([1.0, 1.0, 2.0]))
        self.assertEqual(expected_class_frequencies(plan, dataset),
                         [Fraction(1, 2), Fraction(1, 2)])
