"""Balact - Experiments

Runs one configured experiment or a sweep over configuration values and
writes metrics, traces, plot data and checkpoints.

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
import dataclasses
import itertools
import logging
import os
import re
from multiprocessing import Pool
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import yaml

from balact import config as balact_config
from balact.config import CSV, ExperimentConfig
from balact.console import console_output, format_table
from balact.data import (
    CsvSchema,
    Dataset,
    GaussianMixtureSpec,
    LongTailProfile,
    balanced_counts,
    bayes_balanced_accuracy,
    circle_mixture,
    load_csv,
    longtail_counts,
    synthesize_gaussian,
)
from balact.errors import (
    BalactError,
    ConfigError,
    DataFormatError,
    DivergenceError,
)
from balact.evaluation import (
    GROUPS,
    EvalReport,
    evaluate,
    group_classes,
    predictive_distribution,
)
from balact.losses import (
    CBW_SOFTMAX_CE,
    ClassCounts,
    LossSpec,
    cbw_weights,
    posterior_train_to_balanced,
)
from balact.margins import bound_estimate, per_class_losses
from balact.model import (
    ModelParams,
    forward_logits,
    load_checkpoint,
    save_checkpoint,
)
from balact.numerics import Matrix, Rng
from balact.sampling import make_plan
from balact.training import TrainTrace, retrain, train

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = 'BALACT_OUTPUT_ROOT'
DEFAULT_OUTPUT_ROOT = 'runs'

METRICS_FILE = 'metrics.yaml'
TRACE_FILE = 'trace.csv'
PY_CURVE_FILE = 'py_curve.csv'
PREDICTIONS_FILE = 'predictions.csv'
CHECKPOINT_FILE = 'model.npz'
CONFIG_FILE = 'config.yaml'
SWEEP_FILE = 'sweep.csv'

# Aggregated by run_sweep, mean and standard deviation over seeds
SWEEP_METRICS = ('balanced_accuracy', 'overall_accuracy', 'uniform_kl') + \
    tuple('{}_accuracy'.format(group) for group in GROUPS)


class Data(NamedTuple):
    train: Dataset
    test: Dataset
    validation: Optional[Dataset]
    # Known for synthetic data only
    mixture: Optional[GaussianMixtureSpec]


def output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT


def run_name(config: ExperimentConfig) -> str:
    name = '{}_{}'.format(config.loss.kind, config.sampler.kind)
    if config.decouple.method:
        name += '_' + config.decouple.method
    if config.dataset.source != CSV:
        name += '_if{:g}'.format(config.dataset.imbalance_factor)
    return '{}_seed{}'.format(name, config.train.seed)


def output_directory(config: ExperimentConfig) -> str:
    if config.output_dir:
        return config.output_dir
    return os.path.join(output_root(), run_name(config))


def _mixture(config: ExperimentConfig) -> GaussianMixtureSpec:
    dataset = config.dataset
    if dataset.means is None:
        return circle_mixture(dataset.k, dataset.dim, dataset.radius,
                              dataset.std)
    variances = dataset.variances
    if variances is None:
        variances = np.full((dataset.k, dataset.dim), dataset.std ** 2)
    return GaussianMixtureSpec(np.array(dataset.means),
                               np.array(variances))


def prepare_data(config: ExperimentConfig) -> Data:
    dataset = config.dataset
    if dataset.source == CSV:
        schema = CsvSchema(label_column=dataset.label_column,
                           header=dataset.header, classes=dataset.classes)
        train_set = load_csv(dataset.train_csv, schema)
        if train_set.class_names is not None:
            # Symbols of the test file must map to the training classes
            schema = dataclasses.replace(schema,
                                         classes=train_set.class_names)
        test_set = load_csv(dataset.test_csv, schema)
        if test_set.k != train_set.k:
            raise ConfigError('training data has {} classes, test data has '
                              '{}'.format(train_set.k, test_set.k))
        return Data(train_set, test_set, None, None)

    mixture = _mixture(config)
    rng = Rng(config.train.seed, 'data')
    counts = longtail_counts(LongTailProfile(
        dataset.k, dataset.n_max, dataset.imbalance_factor))
    train_set = synthesize_gaussian(mixture, counts, rng.child('train'))
    test_set = synthesize_gaussian(
        mixture, balanced_counts(dataset.k, dataset.test_per_class),
        rng.child('test'))
    validation = None
    if dataset.validation_per_class:
        validation = synthesize_gaussian(
            mixture, balanced_counts(dataset.k, dataset.validation_per_class),
            rng.child('validation'))
    logger.debug('synthetic training counts %s', list(counts.counts))
    return Data(train_set, test_set, validation, mixture)


def loss_spec(kind: str, tau: float, counts: ClassCounts,
              cbw_scheme: str = 'inverse_frequency') -> LossSpec:
    weights = None
    if kind == CBW_SOFTMAX_CE:
        weights = tuple(cbw_weights(counts, cbw_scheme))
    return LossSpec(kind, tau, weights)


def _floats(values: Sequence[float]) -> List[float]:
    return [float(v) for v in values]


def margin_metrics(params: ModelParams, data: Data,
                   config: ExperimentConfig) -> Dict[str, Any]:
    """Empirical margins of the trained model on its training data and the
    margin bound with the optimal allocation"""
    train_set = data.train
    losses = per_class_losses(forward_logits(params, train_set.features),
                              train_set.labels, train_set.k)
    try:
        report = bound_estimate(losses, train_set.counts, config.margins)
    except ValueError as e:
        logger.warning('no margin bound: %s', e)
        return {'bound': None}
    return {
        'threshold': float(config.margins.threshold(train_set.k)),
        'gammas': _floats(report.gammas),
        'empirical_margins': _floats(report.empirical_margins),
        'margin_errors': _floats(report.margin_errors),
        'per_class_terms': _floats(report.per_class_terms),
        'bound': float(report.bound_value),
    }


def write_metrics(metrics: Dict[str, Any], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as metrics_file:
        yaml.safe_dump(metrics, metrics_file, default_flow_style=False,
                       sort_keys=True)


def write_trace(stages: Sequence[Tuple[int, TrainTrace]], path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as trace_file:
        writer = csv.writer(trace_file, lineterminator='\n')
        writer.writerow(['stage', 'epoch', 'loss',
                         'validation_balanced_accuracy'])
        for stage, trace in stages:
            for epoch, loss, accuracy in trace.rows():
                writer.writerow([stage, epoch, repr(loss),
                                 '' if accuracy is None else repr(accuracy)])


def emit_py_curve(report: EvalReport, path: str) -> None:
    """Marginal likelihood per class, classes by decreasing training count"""
    if report.train_counts is None:
        raise ValueError('the report carries no training counts')
    counts = report.train_counts.counts
    order = sorted(range(report.k), key=lambda j: (-counts[j], j))
    with open(path, 'w', newline='', encoding='utf-8') as curve_file:
        writer = csv.writer(curve_file, lineterminator='\n')
        writer.writerow(['class_index', 'train_count',
                         'marginal_likelihood'])
        for j in order:
            writer.writerow([j, counts[j],
                             repr(float(report.marginal_likelihood[j]))])


def write_predictions(probs: Matrix, labels: Optional[Sequence[int]],
                      path: str) -> None:
    """One row per sample: the true label, when known, then p0..p(k-1)"""
    k = probs.shape[1]
    with open(path, 'w', newline='', encoding='utf-8') as predictions_file:
        writer = csv.writer(predictions_file, lineterminator='\n')
        header = ['p{}'.format(j) for j in range(k)]
        if labels is not None:
            header = ['label'] + header
        writer.writerow(header)
        for i, row in enumerate(probs):
            cells = [repr(float(p)) for p in row]
            if labels is not None:
                cells = [str(int(labels[i]))] + cells
            writer.writerow(cells)


def read_predictions(path: str) -> Tuple[Matrix, Optional[List[int]]]:
    with open(path, newline='', encoding='utf-8') as predictions_file:
        rows = [row for row in csv.reader(predictions_file) if row]
    if not rows:
        raise DataFormatError('{}: empty predictions file'.format(path))
    header = rows[0]
    has_labels = header[0] == 'label'
    columns = header[1:] if has_labels else header
    if not columns or columns != ['p{}'.format(j)
                                  for j in range(len(columns))]:
        raise DataFormatError('{}: expected columns p0..pK-1'.format(path))
    probs = []
    labels = []
    for number, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise DataFormatError('expected {} fields, got {}'.format(
                len(header), len(row)), number)
        try:
            if has_labels:
                labels.append(int(row[0]))
                row = row[1:]
            probs.append([float(cell) for cell in row])
        except ValueError as e:
            raise DataFormatError(str(e), number)
    return np.array(probs, dtype=np.float64).reshape(-1, len(columns)), \
        labels if has_labels else None


def convert_predictions(path: str, counts: ClassCounts,
                        output: str) -> int:
    """Rewrite a predictions file of a model trained on the given counts as
    balanced posteriors. Returns the number of rows converted."""
    probs, labels = read_predictions(path)
    try:
        converted = posterior_train_to_balanced(probs, counts)
    except ValueError as e:
        raise DataFormatError('{}: {}'.format(path, e))
    write_predictions(converted, labels, output)
    return converted.shape[0]


def _report_metrics(report: EvalReport,
                    config: ExperimentConfig) -> Dict[str, Any]:
    metrics = report.to_dict()
    metrics.update({
        'loss': config.loss.kind,
        'tau': float(config.loss.tau),
        'sampler': config.sampler.kind,
        'seed': config.train.seed,
        'posthoc': config.eval.posthoc,
        'marginal_mode': config.eval.marginal_mode,
    })
    if config.dataset.source != CSV:
        metrics['imbalance_factor'] = float(config.dataset.imbalance_factor)
    return metrics


def run_experiment(config: ExperimentConfig,
                   output_dir: Optional[str] = None) -> EvalReport:
    """Train, optionally decouple, evaluate, and write every artifact to the
    output directory. A diverging run leaves its partial trace behind and
    raises DivergenceError."""
    config = balact_config.validate(config)
    output_dir = output_dir or output_directory(config)
    os.makedirs(output_dir, exist_ok=True)
    balact_config.save_config(config, os.path.join(output_dir, CONFIG_FILE))

    data = prepare_data(config)
    train_set = data.train
    loss = loss_spec(config.loss.kind, config.loss.tau, train_set.counts,
                     config.loss.cbw_scheme)
    plan = make_plan(config.sampler.kind, train_set,
                     config.sampler.rf_threshold)
    groups = group_classes(train_set.counts, config.eval.rare_max,
                           config.eval.common_max)
    trace_path = os.path.join(output_dir, TRACE_FILE)

    try:
        params, trace = train(train_set, loss, plan, config.train,
                              validation=data.validation)
    except DivergenceError as e:
        write_trace([(1, e.trace)], trace_path)
        raise
    stages = [(1, trace)]

    stage1_metrics = None
    eval_loss = loss
    if config.decouple.method:
        decouple = config.decouple
        stage1_report = evaluate(params, loss, data.test, groups,
                                 train_counts=train_set.counts,
                                 marginal_mode=config.eval.marginal_mode)
        stage1_metrics = stage1_report.to_dict()
        eval_loss = loss_spec(decouple.loss, decouple.tau, train_set.counts,
                              config.loss.cbw_scheme)
        stage2_config = config.train
        if decouple.learning_rate is not None:
            stage2_config = dataclasses.replace(
                stage2_config, learning_rate=decouple.learning_rate)
        try:
            params, trace2 = retrain(
                decouple.method, params, train_set, eval_loss, stage2_config,
                epochs=balact_config.stage2_epochs(config),
                allow_linear=decouple.allow_linear,
                sampler_kind=decouple.sampler, validation=data.validation)
        except DivergenceError as e:
            write_trace(stages + [(2, e.trace)], trace_path)
            raise
        stages.append((2, trace2))
    write_trace(stages, trace_path)

    report = evaluate(params, eval_loss, data.test, groups,
                      posthoc=config.eval.posthoc,
                      train_counts=train_set.counts,
                      marginal_mode=config.eval.marginal_mode)
    metrics = _report_metrics(report, config)
    metrics['final_train_loss'] = float(stages[-1][1].epoch_losses[-1]) \
        if stages[-1][1].epoch_losses else None
    metrics['margins'] = margin_metrics(params, data, config)
    if stage1_metrics is not None:
        metrics['decouple'] = config.decouple.method
        metrics['stage1'] = stage1_metrics
    if params.lws_scales is not None:
        metrics['lws_scales'] = _floats(params.lws_scales)
    if data.mixture is not None:
        metrics['bayes_balanced_accuracy'] = bayes_balanced_accuracy(
            data.mixture, data.test)

    write_metrics(metrics, os.path.join(output_dir, METRICS_FILE))
    emit_py_curve(report, os.path.join(output_dir, PY_CURVE_FILE))
    write_predictions(
        predictive_distribution(params, eval_loss, data.test.features),
        data.test.labels, os.path.join(output_dir, PREDICTIONS_FILE))
    save_checkpoint(params, os.path.join(output_dir, CHECKPOINT_FILE))

    console_output('{}: balanced accuracy {:.4f}, accuracy {:.4f}, uniform '
                   'KL {:.4f} -> {}\n'.format(
                       run_name(config), report.balanced_accuracy,
                       report.overall_accuracy, report.uniform_kl,
                       output_dir))
    return report


def evaluate_checkpoint(config: ExperimentConfig, checkpoint: str,
                        output_dir: str) -> EvalReport:
    """Score a saved model on the test set the config describes"""
    config = balact_config.validate(config)
    params = load_checkpoint(checkpoint)
    data = prepare_data(config)
    kind, tau = config.loss.kind, config.loss.tau
    if config.decouple.method:
        kind, tau = config.decouple.loss, config.decouple.tau
    loss = loss_spec(kind, tau, data.train.counts, config.loss.cbw_scheme)
    groups = group_classes(data.train.counts, config.eval.rare_max,
                           config.eval.common_max)
    report = evaluate(params, loss, data.test, groups,
                      posthoc=config.eval.posthoc,
                      train_counts=data.train.counts,
                      marginal_mode=config.eval.marginal_mode)
    os.makedirs(output_dir, exist_ok=True)
    write_metrics(_report_metrics(report, config),
                  os.path.join(output_dir, METRICS_FILE))
    emit_py_curve(report, os.path.join(output_dir, PY_CURVE_FILE))
    console_output('{}: balanced accuracy {:.4f}, accuracy {:.4f}\n'.format(
        checkpoint, report.balanced_accuracy, report.overall_accuracy))
    return report


class SweepCell(NamedTuple):
    # (dotted key, value) per axis
    values: Tuple[Tuple[str, str], ...]
    seed: int
    config: ExperimentConfig
    output_dir: str


def _cell_name(values: Sequence[Tuple[str, str]]) -> str:
    name = '_'.join('{}-{}'.format(key.split('.')[-1], value)
                    for key, value in values)
    return re.sub(r'[^A-Za-z0-9_.=-]', '_', name) or 'base'


def plan_sweep(base: ExperimentConfig,
               axes: Sequence[Tuple[str, Sequence[str]]],
               seeds: Sequence[int], output_dir: str) -> List[SweepCell]:
    """Every combination of axis values, once per seed. Invalid axis values
    are reported here, before anything runs."""
    if not seeds:
        raise ConfigError('a sweep needs at least one seed')
    keys = [key for key, _ in axes]
    cells = []
    for combination in itertools.product(*(values for _, values in axes)):
        values = tuple(zip(keys, combination))
        config = base
        for key, value in values:
            config = balact_config.override(config, key, value)
        for seed in seeds:
            seeded = balact_config.override(config, 'train.seed', str(seed))
            cell_dir = os.path.join(output_dir, _cell_name(values),
                                    'seed{}'.format(seed))
            cells.append(SweepCell(values, seed, dataclasses.replace(
                seeded, output_dir=cell_dir), cell_dir))
    return cells


def _run_cell(cell: SweepCell) -> Dict[str, Any]:
    try:
        report = run_experiment(cell.config, cell.output_dir)
    except Exception as e:
        if not isinstance(e, BalactError):
            logger.exception('sweep cell %s failed', cell.output_dir)
        logger.error('%s: %s', cell.output_dir, e)
        return {'error': str(e) or type(e).__name__}
    metrics = {
        'balanced_accuracy': report.balanced_accuracy,
        'overall_accuracy': report.overall_accuracy,
        'uniform_kl': report.uniform_kl,
    }  # type: Dict[str, Any]
    for group, value in report.group_accuracy.items():
        metrics['{}_accuracy'.format(group)] = value
    return metrics


def _mean_std(values: Sequence[Optional[float]]) -> Tuple[str, str]:
    present = [v for v in values if v is not None]
    if not present:
        return '', ''
    return repr(float(np.mean(present))), repr(float(np.std(present)))


def _sort_rows(rows: List[Dict[str, Any]],
               keys: Sequence[str]) -> List[Dict[str, Any]]:
    """Imbalance factor decreasing, like the usual results tables; otherwise
    the order of the axes"""
    for key in keys:
        if key.endswith('imbalance_factor'):
            return sorted(rows, key=lambda row: -float(row[key]))
    return rows


def run_sweep(base: ExperimentConfig,
              axes: Sequence[Tuple[str, Sequence[str]]],
              seeds: Sequence[int], output_dir: str,
              jobs: int = 1) -> List[Dict[str, Any]]:
    """Run every cell of the sweep, aggregate each combination over the seeds
    and write the comparison table. Failing cells are recorded, not fatal."""
    cells = plan_sweep(base, axes, seeds, output_dir)
    os.makedirs(output_dir, exist_ok=True)
    logger.info('sweep of %d runs in %s', len(cells), output_dir)
    if jobs > 1:
        with Pool(jobs) as pool:
            results = pool.map(_run_cell, cells)
    else:
        results = [_run_cell(cell) for cell in cells]

    keys = [key for key, _ in axes]
    grouped = {}  # type: Dict[Tuple[Tuple[str, str], ...], List[Dict]]
    for cell, result in zip(cells, results):
        grouped.setdefault(cell.values, []).append(result)

    rows = []
    for values, cell_results in grouped.items():
        row = dict(values)  # type: Dict[str, Any]
        errors = [r['error'] for r in cell_results if 'error' in r]
        row['status'] = 'failed' if errors else 'ok'
        row['seeds'] = len(cell_results) - len(errors)
        for metric in SWEEP_METRICS:
            mean, std = _mean_std([r.get(metric) for r in cell_results
                                   if 'error' not in r])
            row[metric + '_mean'] = mean
            row[metric + '_std'] = std
        row['error'] = errors[0] if errors else ''
        rows.append(row)
    rows = _sort_rows(rows, keys)

    columns = keys + ['status', 'seeds'] + \
        [m + suffix for m in SWEEP_METRICS for suffix in ('_mean', '_std')] + \
        ['error']
    with open(os.path.join(output_dir, SWEEP_FILE), 'w', newline='',
              encoding='utf-8') as sweep_file:
        writer = csv.writer(sweep_file, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])

    table = [keys + ['status', 'balanced_accuracy']]
    for row in rows:
        accuracy = row['balanced_accuracy_mean']
        if accuracy:
            accuracy = '{:.4f} +- {:.4f}'.format(
                float(accuracy), float(row['balanced_accuracy_std']))
        table.append([row[k] for k in keys] + [row['status'], accuracy])
    console_output(''.join(format_table(table)))
    return rows
