"""Balact - Tests - Losses

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
import unittest

import numpy as np

from balact.errors import CountsError, LabelError, ShapeError
from balact.losses import (
    BALANCED_SIGMOID,
    BALANCED_SOFTMAX,
    CBW_SOFTMAX_CE,
    LOSS_KINDS,
    MULTI_BINARY_SIGMOID,
    SOFTMAX_CE,
    ClassCounts,
    LossSpec,
    balanced_sigmoid_grad,
    balanced_sigmoid_loss,
    balanced_sigmoid_offsets,
    balanced_softmax_grad,
    balanced_softmax_loss,
    balanced_softmax_probs,
    batch_loss_and_grad,
    canonical_logits,
    cbw_softmax_grad,
    cbw_softmax_loss,
    cbw_weights,
    multi_binary_logistic_grad,
    multi_binary_logistic_loss,
    posterior_balanced_to_train,
    posterior_train_to_balanced,
    predict,
    softmax_ce_grad,
    softmax_ce_loss,
    softmax_probs,
)

STEP = 1e-6


def numeric_grad(function, logits):
    grad = np.zeros_like(logits)
    for j in range(logits.size):
        up = logits.copy()
        down = logits.copy()
        up[j] += STEP
        down[j] -= STEP
        grad[j] = (function(up) - function(down)) / (2 * STEP)
    return grad


def random_counts(rng, k):
    return ClassCounts.of(rng.integers(1, 1001, size=k))


class TestClassCounts(unittest.TestCase):
    def test_properties(self):
        counts = ClassCounts.of([5, 3, 2])
        self.assertEqual(counts.k, 3)
        self.assertEqual(counts.n, 10)
        self.assertEqual(counts[1], 3)
        self.assertEqual(counts.counts, (5, 3, 2))

    def test_invalid(self):
        with self.assertRaisesRegex(CountsError, 'at least 2 classes'):
            ClassCounts.of([5])
        with self.assertRaisesRegex(CountsError, 'class 1 has 0 samples'):
            ClassCounts.of([5, 0])

    def test_min_count_floor(self):
        self.assertEqual(ClassCounts.of([5, 0], min_count_floor=True).counts,
                         (5, 1))

    def test_from_labels(self):
        self.assertEqual(ClassCounts.from_labels([0, 2, 2, 1, 2], 3).counts,
                         (1, 1, 3))
        with self.assertRaises(LabelError):
            ClassCounts.from_labels([0, 3], 3)


class TestLossSpec(unittest.TestCase):
    def test_invalid(self):
        with self.assertRaisesRegex(ValueError, 'unknown loss kind'):
            LossSpec('hinge')
        with self.assertRaisesRegex(ValueError, 'tau'):
            LossSpec(BALANCED_SOFTMAX, tau=0.0)
        with self.assertRaisesRegex(ValueError, 'class_weights'):
            LossSpec(CBW_SOFTMAX_CE)

    def test_family(self):
        self.assertTrue(LossSpec(BALANCED_SOFTMAX).is_softmax_family)
        self.assertFalse(LossSpec(BALANCED_SIGMOID).is_softmax_family)


class TestBalancedSoftmax(unittest.TestCase):
    def test_equal_counts_is_softmax(self):
        rng = np.random.default_rng(0)
        for k in (2, 5, 50):
            counts = ClassCounts.of([17] * k)
            for _ in range(1000):
                logits = rng.normal(scale=5.0, size=k)
                np.testing.assert_allclose(
                    balanced_softmax_probs(logits, counts),
                    softmax_probs(logits), rtol=0, atol=1e-12)

    def test_equal_counts_loss_is_softmax_loss(self):
        counts = ClassCounts.of([4, 4, 4])
        logits = np.array([0.3, -1.2, 2.5])
        self.assertEqual(balanced_softmax_loss(logits, 1, counts),
                         softmax_ce_loss(logits, 1))

    def test_shifted_softmax(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            k = int(rng.integers(2, 20))
            counts = random_counts(rng, k)
            tau = float(rng.uniform(0.1, 2.0))
            logits = rng.normal(scale=3.0, size=k)
            shifted = logits + tau * np.log(counts.as_array())
            np.testing.assert_allclose(
                balanced_softmax_probs(logits, counts, tau),
                softmax_probs(shifted), rtol=0, atol=1e-12)

    def test_uniform_logits_follow_counts(self):
        counts = ClassCounts.of([9, 1])
        np.testing.assert_allclose(balanced_softmax_probs([0.0, 0.0], counts),
                                   [0.9, 0.1], rtol=1e-12)
        self.assertAlmostEqual(balanced_softmax_loss([0.0, 0.0], 0, counts),
                               -math.log(0.9), places=12)

    def test_quarter_power(self):
        counts = ClassCounts.of([1, 16])
        np.testing.assert_allclose(
            balanced_softmax_probs([0.0, 0.0], counts, 0.25), [1 / 3, 2 / 3],
            rtol=1e-12)

    def test_large_logits(self):
        with np.errstate(over='raise', invalid='raise'):
            probs = softmax_probs([710.0, 0.0])
        self.assertEqual(probs[0], 1.0)
        self.assertTrue(0.0 <= probs[1] < 1e-300)
        np.testing.assert_allclose(softmax_probs([math.log(2), 0.0]),
                                   [2 / 3, 1 / 3], rtol=1e-12)

    def test_logit_count_mismatch(self):
        with self.assertRaises(ShapeError):
            balanced_softmax_probs([0.0, 1.0, 2.0], ClassCounts.of([1, 2]))

    def test_posterior_round_trip(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            k = int(rng.integers(2, 10))
            counts = random_counts(rng, k)
            phi = rng.dirichlet(np.ones(k))
            np.testing.assert_allclose(
                balanced_softmax_probs(canonical_logits(phi), counts),
                posterior_balanced_to_train(phi, counts),
                rtol=0, atol=1e-11)


class TestPosteriorConversion(unittest.TestCase):
    def test_inverse(self):
        counts = ClassCounts.of([900, 90, 10])
        phi = np.array([0.2, 0.3, 0.5])
        phi_hat = posterior_balanced_to_train(phi, counts)
        self.assertAlmostEqual(phi_hat.sum(), 1.0, places=12)
        np.testing.assert_allclose(
            posterior_train_to_balanced(phi_hat, counts), phi, rtol=1e-12)

    def test_rows(self):
        counts = ClassCounts.of([3, 1])
        converted = posterior_balanced_to_train([[0.5, 0.5], [0.25, 0.75]],
                                                counts)
        np.testing.assert_allclose(converted, [[0.75, 0.25], [0.5, 0.5]],
                                   rtol=1e-12)

    def test_invalid_posterior(self):
        counts = ClassCounts.of([3, 1])
        with self.assertRaisesRegex(ValueError, 'sum to 1'):
            posterior_balanced_to_train([0.5, 0.6], counts)
        with self.assertRaises(ShapeError):
            posterior_balanced_to_train([0.2, 0.3, 0.5], counts)


class TestBalancedSigmoid(unittest.TestCase):
    def test_equal_counts_vanish(self):
        for k in (2, 3, 10):
            offsets = balanced_sigmoid_offsets(ClassCounts.of([25] * k))
            np.testing.assert_array_equal(offsets, np.zeros(k))

    def test_two_classes_antisymmetric(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            offsets = balanced_sigmoid_offsets(random_counts(rng, 2))
            self.assertAlmostEqual(offsets[0], -offsets[1], places=12)

    def test_offsets(self):
        counts = ClassCounts.of([90, 10])
        np.testing.assert_allclose(balanced_sigmoid_offsets(counts),
                                   [-math.log(9), math.log(9)], rtol=1e-12)

    def test_offset_logits_cancel(self):
        counts = ClassCounts.of([90, 10])
        logits = balanced_sigmoid_offsets(counts)
        self.assertAlmostEqual(balanced_sigmoid_loss(logits, 0, counts),
                               2 * math.log(2), places=12)
        self.assertAlmostEqual(multi_binary_logistic_loss([0.0, 0.0], 0),
                               2 * math.log(2), places=12)

    def test_equal_counts_is_multi_binary(self):
        counts = ClassCounts.of([6, 6, 6])
        logits = np.array([0.1, -2.0, 1.5])
        self.assertEqual(balanced_sigmoid_loss(logits, 2, counts),
                         multi_binary_logistic_loss(logits, 2))


class TestCbw(unittest.TestCase):
    def test_weights(self):
        np.testing.assert_allclose(cbw_weights(ClassCounts.of([30, 10])),
                                   [40 / 60, 40 / 20], rtol=1e-15)
        np.testing.assert_array_equal(cbw_weights(ClassCounts.of([7, 7])),
                                      [1.0, 1.0])

    def test_unknown_scheme(self):
        with self.assertRaises(ValueError):
            cbw_weights(ClassCounts.of([1, 2]), 'effective_number')


class TestGradients(unittest.TestCase):
    def check(self, loss, grad, points=100, seed=0):
        rng = np.random.default_rng(seed)
        for _ in range(points):
            k = int(rng.integers(2, 8))
            counts = random_counts(rng, k)
            weights = rng.uniform(0.5, 2.0, size=k)
            label = int(rng.integers(k))
            logits = rng.normal(scale=3.0, size=k)

            def function(x):
                return loss(x, label, counts, weights)
            np.testing.assert_allclose(
                grad(logits, label, counts, weights),
                numeric_grad(function, logits), rtol=1e-5, atol=1e-7)

    def test_softmax_ce(self):
        self.check(lambda x, y, n, w: softmax_ce_loss(x, y),
                   lambda x, y, n, w: softmax_ce_grad(x, y))

    def test_balanced_softmax(self):
        self.check(lambda x, y, n, w: balanced_softmax_loss(x, y, n, 0.7),
                   lambda x, y, n, w: balanced_softmax_grad(x, y, n, 0.7))

    def test_multi_binary_sigmoid(self):
        self.check(lambda x, y, n, w: multi_binary_logistic_loss(x, y),
                   lambda x, y, n, w: multi_binary_logistic_grad(x, y))

    def test_balanced_sigmoid(self):
        self.check(lambda x, y, n, w: balanced_sigmoid_loss(x, y, n),
                   lambda x, y, n, w: balanced_sigmoid_grad(x, y, n))

    def test_cbw_softmax(self):
        self.check(lambda x, y, n, w: cbw_softmax_loss(x, y, w),
                   lambda x, y, n, w: cbw_softmax_grad(x, y, w))

    def test_softmax_family_sums_to_zero(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            k = int(rng.integers(2, 51))
            counts = random_counts(rng, k)
            label = int(rng.integers(k))
            logits = rng.normal(scale=5.0, size=k)
            for grad in (softmax_ce_grad(logits, label),
                         balanced_softmax_grad(logits, label, counts, 0.5),
                         cbw_softmax_grad(logits, label,
                                          rng.uniform(0.5, 2.0, size=k))):
                self.assertAlmostEqual(float(np.sum(grad)), 0.0,
                                       delta=1e-12)


class TestBatch(unittest.TestCase):
    SINGLE = {
        SOFTMAX_CE: (lambda x, y, n: softmax_ce_loss(x, y),
                     lambda x, y, n: softmax_ce_grad(x, y)),
        BALANCED_SOFTMAX: (balanced_softmax_loss, balanced_softmax_grad),
        MULTI_BINARY_SIGMOID: (
            lambda x, y, n: multi_binary_logistic_loss(x, y),
            lambda x, y, n: multi_binary_logistic_grad(x, y)),
        BALANCED_SIGMOID: (balanced_sigmoid_loss, balanced_sigmoid_grad),
    }

    def test_matches_single_samples(self):
        rng = np.random.default_rng(5)
        counts = ClassCounts.of([50, 20, 5, 1])
        logits = rng.normal(size=(6, 4))
        labels = np.array([0, 1, 2, 3, 0, 2])
        for kind in LOSS_KINDS:
            if kind == CBW_SOFTMAX_CE:
                weights = cbw_weights(counts)
                spec = LossSpec(kind, class_weights=tuple(weights))

                def single(x, y, n):
                    return cbw_softmax_loss(x, y, weights)

                def single_grad(x, y, n):
                    return cbw_softmax_grad(x, y, weights)
            else:
                spec = LossSpec(kind)
                single, single_grad = self.SINGLE[kind]
            value, grad = batch_loss_and_grad(spec, counts, logits, labels)
            expected = np.mean([single(x, y, counts)
                                for x, y in zip(logits, labels)])
            self.assertAlmostEqual(value, expected, places=12, msg=kind)
            np.testing.assert_allclose(
                grad, np.array([single_grad(x, y, counts)
                                for x, y in zip(logits, labels)]) / 6,
                rtol=1e-12, atol=1e-15, err_msg=kind)

    def test_invalid_batches(self):
        spec = LossSpec()
        counts = ClassCounts.of([2, 2])
        with self.assertRaisesRegex(ShapeError, 'empty batch'):
            batch_loss_and_grad(spec, counts, np.zeros((0, 2)), [])
        with self.assertRaises(ShapeError):
            batch_loss_and_grad(spec, counts, np.zeros((2, 3)), [0, 1])
        with self.assertRaises(LabelError):
            batch_loss_and_grad(spec, counts, np.zeros((2, 2)), [0, 2])


class TestPredict(unittest.TestCase):
    def test_ties_go_to_lowest_index(self):
        np.testing.assert_array_equal(
            predict([[1.0, 1.0, 0.0], [0.0, 2.0, 2.0], [3.0, 3.0, 3.0]]),
            [0, 1, 0])

    def test_single_sample(self):
        self.assertEqual(int(predict([0.1, 0.7, 0.2])), 1)

    def test_label_range(self):
        with self.assertRaises(LabelError):
            softmax_ce_loss([0.0, 1.0], 2)
