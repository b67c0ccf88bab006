"""Balact - Models

Linear and multilayer perceptron classifiers with an optional learnable
per-class logit scale, their exact backward pass, and checkpoint files.

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

from balact.errors import DataFormatError, ShapeError
from balact.numerics import (
    Matrix,
    Rng,
    Vector,
    as_matrix,
    as_vector,
    check_finite,
    column_sums,
    matmul,
)

logger = logging.getLogger(__name__)

# (weight of shape inputs x outputs, bias of shape outputs)
Layer = Tuple[Matrix, Vector]

CHECKPOINT_FORMAT = 1


@dataclass(eq=False)
class ModelParams:
    """Every layer but the last is followed by a ReLU. When lws_scales is set,
    logit j is multiplied by lws_scales[j]."""

    layers: List[Layer]
    lws_scales: Optional[Vector] = None

    def __post_init__(self) -> None:
        if not self.layers:
            raise ShapeError('a model needs at least one layer')
        layers = []  # type: List[Layer]
        for i, (weight, bias) in enumerate(self.layers):
            weight = as_matrix(weight, 'weight')
            bias = as_vector(bias, 'bias')
            if bias.size != weight.shape[1]:
                raise ShapeError('layer {} has {} outputs but {} biases'
                                 .format(i, weight.shape[1], bias.size))
            if layers and layers[-1][0].shape[1] != weight.shape[0]:
                raise ShapeError('layer {} expects {} inputs, got {}'.format(
                    i, weight.shape[0], layers[-1][0].shape[1]))
            layers.append((weight, bias))
        self.layers = layers
        if self.lws_scales is not None:
            scales = as_vector(self.lws_scales, 'lws_scales')
            if scales.size != self.k:
                raise ShapeError('{} scales for {} classes'.format(
                    scales.size, self.k))
            if not np.all(scales > 0):
                raise ValueError('logit scales must be positive')
            self.lws_scales = scales

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def k(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def is_linear(self) -> bool:
        return len(self.layers) == 1

    def copy(self) -> 'ModelParams':
        scales = None if self.lws_scales is None else self.lws_scales.copy()
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers],
                           scales)


@dataclass
class Gradients:
    layers: List[Layer]
    # Gradient with respect to log(lws_scales)
    log_scales: Optional[Vector] = None


@dataclass
class ForwardCache:
    inputs: List[Matrix] = field(default_factory=list)
    pre_activations: List[Matrix] = field(default_factory=list)
    raw_logits: Optional[Matrix] = None


def init_params(input_dim: int, k: int, hidden_dim: Optional[int],
                rng: Rng) -> ModelParams:
    """Weights uniform in +-1/sqrt(fan_in), biases zero. hidden_dim None gives
    a linear model."""
    sizes = [input_dim] + ([hidden_dim] if hidden_dim else []) + [k]
    layers = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                       np.zeros(fan_out)))
    return ModelParams(layers)


def forward_pass(params: ModelParams,
                 features: Matrix) -> Tuple[Matrix, ForwardCache]:
    activations = as_matrix(features, 'features')
    if activations.shape[1] != params.input_dim:
        raise ShapeError('{} features for a model with {} inputs'.format(
            activations.shape[1], params.input_dim))
    cache = ForwardCache()
    last = len(params.layers) - 1
    for i, (weight, bias) in enumerate(params.layers):
        cache.inputs.append(activations)
        pre = matmul(activations, weight) + bias
        if i == last:
            activations = pre
        else:
            cache.pre_activations.append(pre)
            activations = np.maximum(pre, 0.0)
    cache.raw_logits = activations
    if params.lws_scales is not None:
        activations = activations * params.lws_scales
    return activations, cache


def forward_logits(params: ModelParams, features: Matrix) -> Matrix:
    return forward_pass(params, features)[0]


def backward(params: ModelParams, features: Matrix, dlogits: Matrix,
             cache: Optional[ForwardCache] = None) -> Gradients:
    """Gradients of every parameter given d(loss)/d(logits)"""
    if cache is None:
        cache = forward_pass(params, features)[1]
    delta = as_matrix(dlogits, 'logit gradient')
    if delta.shape != cache.raw_logits.shape:
        raise ShapeError('logit gradient of shape {} for logits of shape {}'
                         .format(delta.shape, cache.raw_logits.shape))

    log_scales = None
    if params.lws_scales is not None:
        log_scales = column_sums(delta * cache.raw_logits) * params.lws_scales
        delta = delta * params.lws_scales

    grads = []  # type: List[Layer]
    for i in range(len(params.layers) - 1, -1, -1):
        weight = params.layers[i][0]
        grads.append((matmul(cache.inputs[i].T, delta), column_sums(delta)))
        if i > 0:
            active = cache.pre_activations[i - 1] > 0
            delta = matmul(delta, weight.T) * active
    grads.reverse()
    return Gradients(grads, log_scales)


def save_checkpoint(params: ModelParams, path: str) -> None:
    arrays = {
        'format_version': np.array(CHECKPOINT_FORMAT),
        'layer_count': np.array(len(params.layers)),
    }
    for i, (weight, bias) in enumerate(params.layers):
        arrays['weight_{}'.format(i)] = weight
        arrays['bias_{}'.format(i)] = bias
    if params.lws_scales is not None:
        arrays['lws_scales'] = params.lws_scales
    # A file object keeps numpy from appending .npz to the name
    with open(path, 'wb') as checkpoint:
        np.savez(checkpoint, **arrays)
    logger.debug('saved %d layer checkpoint to %s', len(params.layers), path)


def load_checkpoint(path: str) -> ModelParams:
    try:
        with np.load(path, allow_pickle=False) as archive:
            version = int(archive['format_version'])
            if version != CHECKPOINT_FORMAT:
                raise DataFormatError('{}: unsupported checkpoint format {}'
                                      .format(path, version))
            layers = [(archive['weight_{}'.format(i)].copy(),
                       archive['bias_{}'.format(i)].copy())
                      for i in range(int(archive['layer_count']))]
            scales = archive['lws_scales'].copy() \
                if 'lws_scales' in archive.files else None
    except DataFormatError:
        raise
    except (OSError, KeyError, ValueError) as e:
        raise DataFormatError('{}: not a balact checkpoint ({})'.format(
            path, e))
    return ModelParams(layers, scales)


def check_params_finite(params: ModelParams) -> None:
    for weight, bias in params.layers:
        check_finite(weight, 'weights')
        check_finite(bias, 'biases')
    if params.lws_scales is not None:
        check_finite(params.lws_scales, 'logit scales')
