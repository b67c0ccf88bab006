"""Balact - Command Line Verbs

Every verb of the command line is a do_<verb> function taking the parsed
arguments.

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

import argparse
import dataclasses
import os
import sys
from typing import Callable, List

from balact import config as balact_config
from balact.config import ExperimentConfig
from balact.console import console_output
from balact.errors import ConfigError
from balact.experiment import (
    convert_predictions,
    evaluate_checkpoint,
    output_root,
    run_experiment,
    run_sweep,
)
from balact.losses import ClassCounts
from balact.value_syntax import expand_seeds, expand_values, parse_axis

# Shortcut flags and the config fields they set
FLAG_KEYS = (
    ('seed', 'train.seed'),
    ('loss', 'loss.kind'),
    ('tau', 'loss.tau'),
    ('sampler', 'sampler.kind'),
    ('imbalance_factor', 'dataset.imbalance_factor'),
)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """The --config file, or the defaults, with the flags applied on top"""
    if args.config:
        config = balact_config.load_config(args.config)
    else:
        config = ExperimentConfig()
    for attribute, key in FLAG_KEYS:
        value = getattr(args, attribute, None)
        if value is not None:
            config = balact_config.override(config, key, value)
    for assignment in args.set or []:
        key, sep, value = assignment.partition('=')
        if not sep:
            raise ConfigError('expected KEY=VALUE, got {!r}'.format(
                assignment))
        config = balact_config.override(config, key.strip(), value)
    return balact_config.validate(config)


def _require(args: argparse.Namespace, attribute: str, flag: str) -> str:
    value = getattr(args, attribute)
    if not value:
        raise ConfigError('{} needs {}'.format(args.command, flag))
    return value


def do_run(args: argparse.Namespace) -> None:
    config = build_config(args)
    if args.out:
        config = dataclasses.replace(config, output_dir=args.out)
    run_experiment(config)


def do_sweep(args: argparse.Namespace) -> None:
    config = build_config(args)
    axes = [parse_axis(axis) for axis in args.axis or []]
    if not axes:
        raise ConfigError('sweep needs at least one --axis KEY=VALUES')
    seeds = expand_seeds(args.seeds) if args.seeds else [config.train.seed]
    output_dir = args.out or config.output_dir or \
        os.path.join(output_root(), 'sweep')
    run_sweep(config, axes, seeds, output_dir, jobs=args.jobs)


def do_eval(args: argparse.Namespace) -> None:
    checkpoint = _require(args, 'checkpoint', '--checkpoint')
    config = build_config(args)
    output_dir = args.out or os.path.join(
        os.path.dirname(os.path.abspath(checkpoint)), 'eval')
    evaluate_checkpoint(config, checkpoint, output_dir)


def do_convert(args: argparse.Namespace) -> None:
    predictions = _require(args, 'predictions', '--predictions')
    counts_text = _require(args, 'counts', '--counts')
    try:
        counts = ClassCounts.of(int(c) for c in expand_values(counts_text))
    except ValueError as e:
        raise ConfigError('--counts: {}'.format(e))
    output = args.out or '{}_balanced.csv'.format(
        os.path.splitext(predictions)[0])
    rows = convert_predictions(predictions, counts, output)
    console_output('converted {} rows to {}\n'.format(rows, output))


def list_commands() -> List[str]:
    return [c[3:] for c in dir(sys.modules[__name__]) if c.startswith('do_')]


def get_command(name: str) -> Callable[[argparse.Namespace], None]:
    return getattr(sys.modules[__name__], 'do_' + name)
