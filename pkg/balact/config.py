"""Balact - Experiment Configuration

A tree of frozen dataclasses read from and written to YAML. Command line flags
and sweep axes change it through dotted paths such as "loss.tau".

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

import dataclasses
import typing
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from balact.errors import ConfigError
from balact.evaluation import (
    DEFAULT_COMMON_MAX,
    DEFAULT_RARE_MAX,
    MARGINAL_MEAN,
    MARGINAL_MODES,
)
from balact.losses import CBW_SCHEMES, LOSS_KINDS, SOFTMAX_CE
from balact.margins import MarginConfig
from balact.sampling import (
    CLASS_BALANCED,
    DEFAULT_RF_THRESHOLD,
    INSTANCE_BALANCED,
    SAMPLER_KINDS,
)
from balact.training import DECOUPLE_METHODS, TrainConfig

SYNTHETIC = 'synthetic'
CSV = 'csv'
DATASET_SOURCES = (SYNTHETIC, CSV)


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class DatasetConfig:
    source: str = SYNTHETIC
    # Synthetic long-tailed training set and balanced test set
    k: int = 5
    n_max: int = 2000
    imbalance_factor: float = 100.0
    test_per_class: int = 500
    # Balanced validation set scored after every epoch, 0 for none
    validation_per_class: int = 0
    dim: int = 2
    # Class means on a circle unless means are given explicitly
    radius: float = 2.0
    std: float = 1.0
    means: Optional[Tuple[Tuple[float, ...], ...]] = None
    variances: Optional[Tuple[Tuple[float, ...], ...]] = None
    # CSV sources
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None
    label_column: Union[int, str] = -1
    header: bool = True
    classes: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        _check(self.source in DATASET_SOURCES,
               'unknown source {!r}'.format(self.source))
        if self.source == CSV:
            _check(bool(self.train_csv and self.test_csv),
                   'csv datasets need train_csv and test_csv')
            return
        _check(self.k >= 2, 'k must be at least 2')
        _check(self.n_max >= 1, 'n_max must be positive')
        _check(self.imbalance_factor >= 1,
               'imbalance_factor must be at least 1')
        _check(self.test_per_class >= 1, 'test_per_class must be positive')
        _check(self.validation_per_class >= 0,
               'validation_per_class must be non-negative')
        _check(self.std > 0, 'std must be positive')
        if self.means is not None:
            _check(len(self.means) == self.k,
                   '{} means for {} classes'.format(len(self.means), self.k))
            _check(all(len(m) == self.dim for m in self.means),
                   'every mean needs {} coordinates'.format(self.dim))
        elif self.variances is not None:
            raise ValueError('variances need explicit means')
        else:
            _check(self.dim >= 2, 'circle mixtures need dim >= 2')


@dataclass(frozen=True)
class LossConfig:
    kind: str = SOFTMAX_CE
    tau: float = 1.0
    # Class weights of cbw_softmax_ce, derived from the training counts
    cbw_scheme: str = CBW_SCHEMES[0]

    def __post_init__(self) -> None:
        _check(self.kind in LOSS_KINDS, 'unknown loss kind {!r}'.format(
            self.kind))
        _check(self.tau > 0, 'tau must be positive')
        _check(self.cbw_scheme in CBW_SCHEMES,
               'unknown cbw_scheme {!r}'.format(self.cbw_scheme))


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = INSTANCE_BALANCED
    rf_threshold: float = DEFAULT_RF_THRESHOLD

    def __post_init__(self) -> None:
        _check(self.kind in SAMPLER_KINDS, 'unknown sampler {!r}'.format(
            self.kind))
        _check(0 < self.rf_threshold < 1, 'rf_threshold must lie in (0, 1)')


@dataclass(frozen=True)
class DecoupleConfig:
    # None disables the second stage
    method: Optional[str] = None
    # None means half the stage-1 epochs
    epochs: Optional[int] = None
    learning_rate: Optional[float] = None
    loss: str = SOFTMAX_CE
    tau: float = 1.0
    sampler: str = CLASS_BALANCED
    allow_linear: bool = False

    def __post_init__(self) -> None:
        _check(self.method is None or self.method in DECOUPLE_METHODS,
               'unknown decoupling method {!r}'.format(self.method))
        _check(self.epochs is None or self.epochs >= 0,
               'epochs must be non-negative')
        _check(self.learning_rate is None or self.learning_rate > 0,
               'learning_rate must be positive')
        _check(self.loss in LOSS_KINDS, 'unknown loss kind {!r}'.format(
            self.loss))
        _check(self.sampler in SAMPLER_KINDS, 'unknown sampler {!r}'.format(
            self.sampler))


@dataclass(frozen=True)
class EvalConfig:
    rare_max: int = DEFAULT_RARE_MAX
    common_max: int = DEFAULT_COMMON_MAX
    marginal_mode: str = MARGINAL_MEAN
    # Convert plain softmax outputs to the balanced posterior before scoring
    posthoc: bool = False

    def __post_init__(self) -> None:
        _check(self.rare_max <= self.common_max,
               'rare_max must not exceed common_max')
        _check(self.marginal_mode in MARGINAL_MODES,
               'unknown marginal_mode {!r}'.format(self.marginal_mode))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    decouple: DecoupleConfig = field(default_factory=DecoupleConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    margins: MarginConfig = field(default_factory=MarginConfig)
    output_dir: Optional[str] = None


def _coerce(value: Any, hint: Any, path: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        errors = []
        for option in args:
            if option is type(None):
                continue
            try:
                return _coerce(value, option, path)
            except ConfigError as e:
                errors.append(str(e))
        raise ConfigError(errors[0] if len(errors) == 1 else
                          '{}: {!r} matches none of the allowed types'.format(
                              path, value))
    if origin is tuple:
        if isinstance(value, str):
            value = [yaml.safe_load(part) for part in value.split(',')]
        elif isinstance(value, (int, float)) and \
                not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError('{}: expected a list, got {!r}'.format(
                path, value))
        item = args[0]
        return tuple(_coerce(v, item, '{}[{}]'.format(path, i))
                     for i, v in enumerate(value))
    if dataclasses.is_dataclass(hint):
        return from_dict(hint, value, path)
    if hint is bool:
        if isinstance(value, bool):
            return value
    elif hint is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif hint is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        # YAML 1.1 reads 1e-3 as a string
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
    elif hint is str:
        if isinstance(value, (str, int, float)) and \
                not isinstance(value, bool):
            return str(value)
    raise ConfigError('{}: expected {}, got {!r}'.format(
        path, getattr(hint, '__name__', hint), value))


def from_dict(cls: Any, data: Any, path: str = '') -> Any:
    """Build the dataclass cls from a mapping, recursively"""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError('{}: expected a mapping, got {!r}'.format(
            path or 'config', data))
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError('{}: unknown key{} {}'.format(
            path or 'config', 's' if len(unknown) > 1 else '',
            ', '.join(map(str, unknown))))
    kwargs = {}
    for name in names:
        if name in data:
            key = '{}.{}'.format(path, name) if path else name
            kwargs[name] = _coerce(data[name], hints[name], key)
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError('{}: {}'.format(path or 'config', e))


def to_dict(config: Any) -> Dict[str, Any]:
    """Plain dicts, lists and scalars, ready for yaml.safe_dump"""
    def plain(value: Any) -> Any:
        if dataclasses.is_dataclass(value):
            return {f.name: plain(getattr(value, f.name))
                    for f in dataclasses.fields(value)}
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value
    return plain(config)


def dumps(config: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(config), default_flow_style=False,
                          sort_keys=False)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError('invalid YAML: {}'.format(e))
    return validate(from_dict(ExperimentConfig, data))


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding='utf-8') as config_file:
            text = config_file.read()
    except OSError as e:
        raise ConfigError('cannot read config: {}'.format(e))
    return loads(text)


def save_config(config: ExperimentConfig, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as config_file:
        config_file.write(dumps(config))


def override(config: Any, dotted: str, text: str) -> Any:
    """Copy of config with the field at the dotted path set from a string.
    The string is read as YAML, then coerced to the type of the field."""
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        value = text
    return _replace(config, dotted.split('.'), value, dotted)


def _replace(config: Any, keys: Any, value: Any, dotted: str) -> Any:
    name = keys[0]
    names = [f.name for f in dataclasses.fields(config)]
    if name not in names:
        raise ConfigError('{}: unknown key {!r}'.format(dotted, name))
    hint = typing.get_type_hints(type(config))[name]
    if len(keys) == 1:
        new = _coerce(value, hint, dotted)
    else:
        current = getattr(config, name)
        if not dataclasses.is_dataclass(current):
            raise ConfigError('{}: {!r} has no sub-keys'.format(dotted, name))
        new = _replace(current, keys[1:], value, dotted)
    try:
        return dataclasses.replace(config, **{name: new})
    except ValueError as e:
        raise ConfigError('{}: {}'.format(dotted, e))


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """Checks spanning several sections"""
    decouple = config.decouple
    if decouple.method is not None and config.train.hidden_dim is None \
            and not decouple.allow_linear:
        raise ConfigError('decouple.method {} needs train.hidden_dim (a '
                          'backbone to freeze) or decouple.allow_linear'
                          .format(decouple.method))
    if config.eval.posthoc:
        final_loss = config.loss.kind
        if decouple.method is not None:
            final_loss = decouple.loss
        if final_loss != SOFTMAX_CE:
            raise ConfigError('eval.posthoc is meant for softmax_ce models, '
                              'not {}'.format(final_loss))
    return config


def stage2_epochs(config: ExperimentConfig) -> int:
    if config.decouple.epochs is not None:
        return config.decouple.epochs
    return config.train.epochs // 2
