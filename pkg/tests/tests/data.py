"""Balact - Tests - Datasets

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

import os
import tempfile
import unittest

import numpy as np

from balact.data import (
    CsvSchema,
    Dataset,
    GaussianMixtureSpec,
    LongTailProfile,
    balanced_counts,
    bayes_balanced_accuracy,
    bayes_posterior,
    bayes_predict,
    circle_mixture,
    load_csv,
    longtail_counts,
    subsample,
    synthesize_gaussian,
    write_csv,
)
from balact.errors import CountsError, DataFormatError, ShapeError
from balact.losses import ClassCounts, posterior_balanced_to_train
from balact.numerics import Rng


class TestLongTailCounts(unittest.TestCase):
    def test_profile(self):
        counts = longtail_counts(LongTailProfile(5, 2000, 100))
        self.assertEqual(counts.counts, (2000, 632, 200, 63, 20))

    def test_balanced(self):
        counts = longtail_counts(LongTailProfile(4, 300, 1))
        self.assertEqual(counts.counts, (300, 300, 300, 300))

    def test_two_classes(self):
        self.assertEqual(longtail_counts(LongTailProfile(2, 500, 10)).counts,
                         (500, 50))

    def test_monotone(self):
        counts = longtail_counts(LongTailProfile(20, 5000, 200)).counts
        self.assertEqual(list(counts), sorted(counts, reverse=True))
        self.assertEqual(counts[0], 5000)
        self.assertEqual(counts[-1], 25)

    def test_smallest_rounds_to_zero(self):
        with self.assertRaisesRegex(CountsError, 'rounds to 0'):
            longtail_counts(LongTailProfile(3, 10, 100))

    def test_invalid_profile(self):
        with self.assertRaises(CountsError):
            LongTailProfile(1, 100, 10)
        with self.assertRaises(CountsError):
            LongTailProfile(3, 100, 0.5)


class TestSynthesis(unittest.TestCase):
    def setUp(self):
        self.mixture = circle_mixture(3, radius=4.0, std=0.5)
        self.counts = ClassCounts.of([50, 20, 5])

    def test_exact_counts(self):
        dataset = synthesize_gaussian(self.mixture, self.counts, Rng(0))
        self.assertEqual(dataset.counts, self.counts)
        self.assertEqual(dataset.features.shape, (75, 2))
        np.testing.assert_array_equal(np.bincount(dataset.labels), [50, 20, 5])

    def test_reproducible(self):
        first = synthesize_gaussian(self.mixture, self.counts,
                                    Rng(3, 'data'), shuffle=True)
        second = synthesize_gaussian(self.mixture, self.counts,
                                     Rng(3, 'data'), shuffle=True)
        np.testing.assert_array_equal(first.features, second.features)
        np.testing.assert_array_equal(first.labels, second.labels)
        other = synthesize_gaussian(self.mixture, self.counts,
                                    Rng(3, 'other'), shuffle=True)
        self.assertFalse(np.array_equal(first.features, other.features))

    def test_class_means(self):
        counts = ClassCounts.of([4000, 4000, 4000])
        dataset = synthesize_gaussian(self.mixture, counts, Rng(1))
        for j in range(3):
            mean = dataset.features[dataset.labels == j].mean(axis=0)
            np.testing.assert_allclose(mean, self.mixture.means[j],
                                       atol=0.05)

    def test_mismatched_counts(self):
        with self.assertRaises(ShapeError):
            synthesize_gaussian(self.mixture, ClassCounts.of([1, 1]), Rng(0))

    def test_invalid_variances(self):
        with self.assertRaises(ValueError):
            GaussianMixtureSpec(np.zeros((2, 2)), np.zeros((2, 2)))


class TestBayes(unittest.TestCase):
    def test_prior_conversion(self):
        rng = np.random.default_rng(0)
        mixture = circle_mixture(5, d=3, radius=2.0, std=1.0)
        counts = ClassCounts.of([2000, 632, 200, 63, 20])
        points = rng.normal(scale=2.0, size=(1000, 3))
        uniform = bayes_posterior(mixture, np.full(5, 0.2), points)
        train_prior = counts.as_array() / counts.n
        np.testing.assert_allclose(
            bayes_posterior(mixture, train_prior, points),
            posterior_balanced_to_train(uniform, counts),
            rtol=0, atol=1e-10)

    def test_single_point(self):
        mixture = circle_mixture(2, radius=1.0)
        posterior = bayes_posterior(mixture, [0.5, 0.5], [0.0, 0.0])
        np.testing.assert_allclose(posterior, [0.5, 0.5], rtol=1e-12)

    def test_zero_prior(self):
        mixture = circle_mixture(3)
        posterior = bayes_posterior(mixture, [0.5, 0.5, 0.0],
                                    np.array([[2.0, 0.0], [-1.0, 1.0]]))
        np.testing.assert_array_equal(posterior[:, 2], [0.0, 0.0])
        np.testing.assert_allclose(posterior.sum(axis=1), [1.0, 1.0])
        predictions = bayes_predict(mixture, [0.5, 0.5, 0.0],
                                    np.array([[-1.5, -1.0]]))
        np.testing.assert_array_equal(predictions, [1])

    def test_invalid_prior(self):
        with self.assertRaises(ValueError):
            bayes_posterior(circle_mixture(2), [0.5, 0.6], [0.0, 0.0])

    def test_separated_mixture(self):
        mixture = circle_mixture(4, radius=100.0, std=1.0)
        test = synthesize_gaussian(mixture, balanced_counts(4, 50), Rng(0))
        self.assertEqual(bayes_balanced_accuracy(mixture, test), 1.0)


class TestDataset(unittest.TestCase):
    def test_read_only_copy(self):
        features = np.zeros((3, 2))
        dataset = Dataset.from_arrays(features, [0, 1, 1], 2)
        self.assertFalse(dataset.features.flags.writeable)
        self.assertTrue(features.flags.writeable)
        features[0, 0] = 5.0
        self.assertEqual(dataset.features[0, 0], 0.0)

    def test_counts_must_match(self):
        with self.assertRaises(CountsError):
            Dataset(np.zeros((3, 2)), np.array([0, 1, 1]),
                    ClassCounts.of([2, 1]))
        with self.assertRaises(ShapeError):
            Dataset(np.zeros((3, 2)), np.array([0, 1]),
                    ClassCounts.of([1, 1]))

    def test_subsample(self):
        mixture = circle_mixture(3)
        full = synthesize_gaussian(mixture, balanced_counts(3, 40), Rng(0))
        target = ClassCounts.of([40, 12, 3])
        reduced = subsample(full, target, Rng(1))
        self.assertEqual(reduced.counts, target)
        rows = {tuple(row) for row in reduced.features}
        self.assertEqual(len(rows), 55)
        with self.assertRaises(CountsError):
            subsample(full, ClassCounts.of([41, 1, 1]), Rng(1))


class TestCsv(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmpdir.cleanup)

    def path(self, name):
        return os.path.join(self.tmpdir.name, name)

    def write(self, name, text):
        with open(self.path(name), 'w', encoding='utf-8') as csv_file:
            csv_file.write(text)
        return self.path(name)

    def test_written_file_reads_back(self):
        mixture = circle_mixture(3)
        dataset = synthesize_gaussian(mixture, ClassCounts.of([5, 3, 2]),
                                      Rng(0), shuffle=True)
        write_csv(dataset, self.path('data.csv'))
        loaded = load_csv(self.path('data.csv'))
        np.testing.assert_array_equal(loaded.features, dataset.features)
        np.testing.assert_array_equal(loaded.labels, dataset.labels)
        self.assertEqual(loaded.counts, dataset.counts)

    def test_symbols_in_order_of_appearance(self):
        path = self.write('symbols.csv',
                          'x,y,animal\n1,2,dog\n3,4,cat\n5,6,dog\n')
        dataset = load_csv(path)
        self.assertEqual(dataset.class_names, ('dog', 'cat'))
        np.testing.assert_array_equal(dataset.labels, [0, 1, 0])
        np.testing.assert_array_equal(dataset.features,
                                      [[1, 2], [3, 4], [5, 6]])

    def test_label_column_by_name_and_known_classes(self):
        path = self.write('named.csv', 'label,x\nb,1.5\na,2.5\n')
        dataset = load_csv(path, CsvSchema(label_column='label',
                                           classes=('a', 'b')))
        np.testing.assert_array_equal(dataset.labels, [1, 0])
        np.testing.assert_array_equal(dataset.features, [[1.5], [2.5]])

    def test_unknown_symbol(self):
        path = self.write('unknown.csv', 'x,label\n1,a\n2,c\n')
        with self.assertRaisesRegex(DataFormatError, 'row 3'):
            load_csv(path, CsvSchema(classes=('a', 'b')))

    def test_bad_rows(self):
        path = self.write('short.csv', 'x,y,label\n1,2,0\n3,1\n')
        with self.assertRaisesRegex(DataFormatError, 'row 3'):
            load_csv(path)
        path = self.write('text.csv', 'x,label\n1,0\nabc,1\n')
        with self.assertRaisesRegex(DataFormatError, 'row 3'):
            load_csv(path)
        path = self.write('nan.csv', 'x,label\nnan,0\n2,1\n')
        with self.assertRaisesRegex(DataFormatError, 'row 2'):
            load_csv(path)

    def test_no_header(self):
        path = self.write('plain.csv', '0.5,1\n1.5,0\n')
        dataset = load_csv(path, CsvSchema(header=False))
        np.testing.assert_array_equal(dataset.labels, [1, 0])
        with self.assertRaises(DataFormatError):
            load_csv(path, CsvSchema(label_column='label', header=False))

    def test_empty(self):
        path = self.write('empty.csv', 'x,label\n')
        with self.assertRaisesRegex(DataFormatError, 'no data rows'):
            load_csv(path)
