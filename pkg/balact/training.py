"""Balact - Training

Minibatch SGD with momentum and weight decay for any loss and sampler, and the
decoupled second stages: classifier retraining (cRT) and learnable weight
scaling (LWS).

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

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from balact.data import Dataset
from balact.errors import (
    ConfigError,
    DivergenceError,
    NonFiniteError,
    ShapeError,
)
from balact.evaluation import balanced_accuracy
from balact.losses import ClassCounts, LossSpec, batch_loss_and_grad, predict
from balact.model import (
    Gradients,
    ModelParams,
    backward,
    check_params_finite,
    forward_logits,
    forward_pass,
    init_params,
)
from balact.numerics import Rng
from balact.sampling import (
    CLASS_BALANCED,
    SamplerPlan,
    epoch_indices,
    make_plan,
)

logger = logging.getLogger(__name__)

CONSTANT = 'constant'
STEP = 'step'
LR_SCHEDULES = (CONSTANT, STEP)

CRT = 'crt'
LWS = 'lws'
DECOUPLE_METHODS = (CRT, LWS)

# What an optimisation run may change
_ALL = 'all'
_FINAL_LAYER = 'final_layer'
_SCALES = 'scales'


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0
    # None trains a linear model
    hidden_dim: Optional[int] = None
    lr_schedule: str = CONSTANT
    # Epochs (0-based) from which the rate is multiplied once more by
    # lr_factor, step schedule only
    lr_milestones: Tuple[int, ...] = ()
    lr_factor: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, 'lr_milestones',
                           tuple(int(m) for m in self.lr_milestones))
        if self.epochs < 1:
            raise ValueError('epochs must be at least 1')
        if self.batch_size < 1:
            raise ValueError('batch_size must be at least 1')
        if not (math.isfinite(self.learning_rate) and
                self.learning_rate > 0):
            raise ValueError('learning_rate must be positive')
        if not 0 <= self.momentum < 1:
            raise ValueError('momentum must lie in [0, 1)')
        if not self.weight_decay >= 0:
            raise ValueError('weight_decay must be non-negative')
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValueError('hidden_dim must be positive')
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError('unknown lr_schedule {!r}, expected one of {}'
                             .format(self.lr_schedule,
                                     ', '.join(LR_SCHEDULES)))
        if not self.lr_factor > 0:
            raise ValueError('lr_factor must be positive')


@dataclass
class TrainTrace:
    epoch_losses: List[float] = field(default_factory=list)
    # Balanced accuracy on the validation set after every epoch, if any
    validation_accuracy: List[float] = field(default_factory=list)

    def rows(self) -> List[Tuple[int, float, Optional[float]]]:
        rows = []
        for epoch, loss in enumerate(self.epoch_losses):
            accuracy = self.validation_accuracy[epoch] \
                if epoch < len(self.validation_accuracy) else None
            rows.append((epoch + 1, loss, accuracy))
        return rows


def learning_rate(config: TrainConfig, epoch: int) -> float:
    if config.lr_schedule == CONSTANT:
        return config.learning_rate
    decays = sum(1 for milestone in config.lr_milestones
                 if epoch >= milestone)
    return config.learning_rate * config.lr_factor ** decays


class MomentumSgd:
    """v = momentum * v + g + weight_decay * w; w -= lr * v, in place"""

    def __init__(self, arrays: List[np.ndarray], decayed: List[bool],
                 momentum: float, weight_decay: float) -> None:
        self.arrays = arrays
        self.decayed = decayed
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities = [np.zeros_like(a) for a in arrays]

    def step(self, grads: List[np.ndarray], lr: float) -> None:
        for array, grad, velocity, decayed in zip(
                self.arrays, grads, self.velocities, self.decayed):
            if decayed and self.weight_decay:
                grad = grad + self.weight_decay * array
            velocity *= self.momentum
            velocity += grad
            array -= lr * velocity


def _select(grads: Gradients, mode: str) -> List[np.ndarray]:
    if mode == _SCALES:
        return [grads.log_scales]
    if mode == _FINAL_LAYER:
        return list(grads.layers[-1])
    return [g for layer in grads.layers for g in layer]


def _optimize(params: ModelParams, dataset: Dataset, loss: LossSpec,
              plan: SamplerPlan, config: TrainConfig, counts: ClassCounts,
              mode: str, rng: Rng, epochs: int,
              validation: Optional[Dataset] = None) -> TrainTrace:
    log_scales = None
    if mode == _SCALES:
        log_scales = np.log(params.lws_scales)
        arrays, decayed = [log_scales], [False]
    elif mode == _FINAL_LAYER:
        arrays, decayed = list(params.layers[-1]), [True, False]
    else:
        arrays = [a for layer in params.layers for a in layer]
        decayed = [True, False] * len(params.layers)
    optimizer = MomentumSgd(arrays, decayed, config.momentum,
                            config.weight_decay)

    trace = TrainTrace()
    for epoch in range(epochs):
        lr = learning_rate(config, epoch)
        order = epoch_indices(plan, dataset, rng)
        total = 0.0
        for batch, start in enumerate(range(0, order.size,
                                            config.batch_size)):
            indices = order[start:start + config.batch_size]
            features = dataset.features[indices]
            try:
                logits, cache = forward_pass(params, features)
                value, dlogits = batch_loss_and_grad(
                    loss, counts, logits, dataset.labels[indices])
                if not math.isfinite(value):
                    raise NonFiniteError('non-finite loss')
                grads = backward(params, features, dlogits, cache)
                optimizer.step(_select(grads, mode), lr)
                if log_scales is not None:
                    params.lws_scales = np.exp(log_scales)
                check_params_finite(params)
            except NonFiniteError:
                raise DivergenceError(epoch + 1, batch + 1, trace) from None
            total += value * indices.size
        trace.epoch_losses.append(total / order.size)
        if validation is not None:
            trace.validation_accuracy.append(balanced_accuracy(
                predict(forward_logits(params, validation.features)),
                validation.labels, validation.k))
        logger.debug('epoch %d/%d: lr %g, loss %.6f', epoch + 1, epochs, lr,
                     trace.epoch_losses[-1])
    return trace


def train(dataset: Dataset, loss: LossSpec, sampler: SamplerPlan,
          config: TrainConfig, validation: Optional[Dataset] = None,
          counts: Optional[ClassCounts] = None
          ) -> Tuple[ModelParams, TrainTrace]:
    """Train a fresh model. The loss sees dataset.counts unless counts is
    given. Raises DivergenceError, carrying the partial trace, as soon as a
    loss or a parameter stops being finite."""
    counts = dataset.counts if counts is None else counts
    if counts.k != dataset.k:
        raise ShapeError('{} counts for {} classes'.format(
            counts.k, dataset.k))
    loss.check_counts(counts)
    rng = Rng(config.seed, 'train')
    params = init_params(dataset.d, dataset.k, config.hidden_dim,
                         rng.child('init'))
    logger.info('training %s model with %s loss and %s sampling for %d '
                'epochs', 'linear' if params.is_linear else 'mlp',
                loss.kind, sampler.kind, config.epochs)
    trace = _optimize(params, dataset, loss, sampler, config, counts, _ALL,
                      rng.child('shuffle'), config.epochs, validation)
    return params, trace


def retrain(method: str, stage1: ModelParams, dataset: Dataset,
            loss: LossSpec, config: TrainConfig,
            epochs: Optional[int] = None, allow_linear: bool = False,
            sampler_kind: str = CLASS_BALANCED,
            validation: Optional[Dataset] = None
            ) -> Tuple[ModelParams, TrainTrace]:
    """Second stage of decoupled training. stage1 is never modified.

    crt: every layer but the last is frozen and the last one keeps training,
    starting from its stage-1 values.
    lws: every layer is frozen; one positive scale per class logit, starting
    at 1, is learnt through its logarithm.

    epochs overrides config.epochs and may be 0.
    """
    if method not in DECOUPLE_METHODS:
        raise ConfigError('unknown decoupling method {!r}'.format(method))
    if stage1.is_linear:
        if not allow_linear:
            raise ConfigError('{} needs a backbone to freeze, the stage-1 '
                              'model is linear'.format(method))
        if method == LWS:
            logger.warning('lws on a linear model only learns per-class '
                           'scales of its logits')
        else:
            logger.warning('crt on a linear model retrains the whole '
                           'classifier')
    if stage1.k != dataset.k:
        raise ShapeError('model has {} classes, dataset has {}'.format(
            stage1.k, dataset.k))
    loss.check_counts(dataset.counts)
    epochs = config.epochs if epochs is None else epochs
    if epochs < 0:
        raise ConfigError('stage-2 epochs must be non-negative')

    params = stage1.copy()
    if method == LWS:
        params.lws_scales = np.ones(params.k)
        mode = _SCALES
    else:
        mode = _FINAL_LAYER
    plan = make_plan(sampler_kind, dataset)
    logger.info('%s stage 2 with %s loss and %s sampling for %d epochs',
                method, loss.kind, plan.kind, epochs)
    rng = Rng(config.seed, 'stage2/' + method)
    trace = _optimize(params, dataset, loss, plan, config, dataset.counts,
                      mode, rng, epochs, validation)
    return params, trace


def crt_retrain(stage1: ModelParams, dataset: Dataset, loss: LossSpec,
                config: TrainConfig, **kwargs) -> ModelParams:
    return retrain(CRT, stage1, dataset, loss, config, **kwargs)[0]


def lws_retrain(stage1: ModelParams, dataset: Dataset, loss: LossSpec,
                config: TrainConfig, **kwargs) -> ModelParams:
    return retrain(LWS, stage1, dataset, loss, config, **kwargs)[0]
