"""Balact - Main Utilities

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
import logging
import os
import sys
from typing import Callable, List, Optional

from balact import VERSION
from balact import commands
from balact.console import setup_logging
from balact.errors import EXIT_CONFIG, EXIT_RUNTIME, BalactError
from balact.experiment import OUTPUT_ROOT_ENV

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors are configuration errors"""

    def error(self, message: str) -> None:  # type: ignore
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, '{}: error: {}\n'.format(self.prog, message))


def parse_cmdline(argv: Optional[List[str]] = None) -> argparse.Namespace:
    usage = '%(prog)s [OPTIONS] {' + ','.join(commands.list_commands()) + \
        '}}\nThe default output root is ${} [runs].'.format(OUTPUT_ROOT_ENV)
    parser = ArgumentParser(prog='balact', usage=usage)
    parser.add_argument(
        'command', choices=commands.list_commands(), metavar='COMMAND',
        help='run, sweep, eval or convert')
    parser.add_argument(
        '--config', type=str, dest='config', default=None, metavar='FILE',
        help='YAML experiment configuration [defaults]')
    parser.add_argument(
        '--seed', type=str, dest='seed', default=None,
        help='random seed of data, initialisation and sampling')
    parser.add_argument(
        '--out', type=str, dest='out', default=None, metavar='PATH',
        help='output directory (output file for convert)')
    parser.add_argument(
        '--loss', type=str, dest='loss', default=None, metavar='KIND',
        help='softmax_ce, balanced_softmax, multi_binary_sigmoid, '
             'balanced_sigmoid or cbw_softmax_ce')
    parser.add_argument(
        '--tau', type=str, dest='tau', default=None,
        help='exponent of the class counts in balanced softmax')
    parser.add_argument(
        '--sampler', type=str, dest='sampler', default=None, metavar='KIND',
        help='instance_balanced, class_balanced or repeat_factor')
    parser.add_argument(
        '--if', type=str, dest='imbalance_factor', default=None,
        metavar='IF', help='imbalance factor of the synthetic training set')
    parser.add_argument(
        '--set', type=str, action='append', dest='set', default=[],
        metavar='KEY=VALUE', help='set any config field, e.g. train.epochs=5')
    parser.add_argument(
        '--axis', type=str, action='append', dest='axis', default=[],
        metavar='KEY=VALUES',
        help='sweep axis, e.g. dataset.imbalance_factor=10,100,200')
    parser.add_argument(
        '--seeds', type=str, dest='seeds', default=None, metavar='SEEDS',
        help='seeds of every sweep cell, e.g. <0-4>')
    parser.add_argument(
        '--jobs', type=int, dest='jobs', default=1,
        help='sweep runs executed in parallel [1]')
    parser.add_argument(
        '--checkpoint', type=str, dest='checkpoint', default=None,
        metavar='FILE', help='model to evaluate')
    parser.add_argument(
        '--predictions', type=str, dest='predictions', default=None,
        metavar='FILE', help='predictions file to convert')
    parser.add_argument(
        '--counts', type=str, dest='counts', default=None, metavar='COUNTS',
        help='training class counts for convert, e.g. 900,100')
    parser.add_argument(
        '--debug', action='store_true', dest='debug',
        help='print debugging information')
    parser.add_argument(
        '--log-file', type=str, dest='log_file', default=None,
        metavar='FILE', help='also log everything to this file [none]')
    parser.add_argument(
        '--profile', action='store_true', dest='profile', default=False)
    parser.add_argument(
        '--version', action='version',
        version='%(prog)s ' + '.'.join(map(str, VERSION)))
    args = parser.parse_args(argv)

    if args.jobs < 1:
        parser.error('--jobs must be at least 1')
    return args


def _profile(continuation: Callable) -> None:
    prof_file = 'balact.prof'
    import cProfile
    import pstats
    print('Profiling using cProfile', file=sys.stderr)
    cProfile.runctx('continuation()', globals(), locals(), prof_file)
    stats = pstats.Stats(prof_file, stream=sys.stderr)
    stats.strip_dirs()
    stats.sort_stats('time', 'calls')
    stats.print_stats(50)
    os.remove(prof_file)


def run(argv: Optional[List[str]] = None) -> None:
    """Launch balact"""
    args = parse_cmdline(argv)
    try:
        setup_logging(args.debug, args.log_file)
    except OSError as e:
        print(e, file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    command = commands.get_command(args.command)
    try:
        if args.profile:
            _profile(lambda: command(args))
        else:
            command(args)
    except BalactError as e:
        logger.debug('%s failed', args.command, exc_info=True)
        print('balact: error: {}'.format(e), file=sys.stderr)
        sys.exit(e.exit_code)
    except (ArithmeticError, OSError, ValueError) as e:
        logger.debug('%s failed', args.command, exc_info=True)
        print('balact: error: {}'.format(e), file=sys.stderr)
        sys.exit(EXIT_RUNTIME)


def main():
    """Wrapper around run() to setup sentry"""

    sentry_dsn = os.environ.get('BALACT_SENTRY_DSN')

    if sentry_dsn:
        from raven import Client
        client = Client(
            dsn=sentry_dsn,
            release='.'.join(map(str, VERSION)),
            ignore_exceptions=[
                KeyboardInterrupt,
                BalactError,
            ]
        )

        try:
            run()
        except Exception:
            client.captureException()
            raise

    else:
        run()
