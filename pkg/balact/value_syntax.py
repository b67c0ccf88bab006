"""Balact - Value List Syntax

Expands the value lists given to --axis and --seeds.

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

import re
from typing import Iterator, List, Tuple

from balact.errors import ConfigError

# softmax_ce,balanced_softmax => softmax_ce, balanced_softmax
# <1-5> => 1, 2, 3, 4, 5
# <5-1> => 5, 4, 3, 2, 1
# <01-10> => 01, 02, 03, 04, 05, 06, 07, 08, 09, 10
# <1,3-5> => 1, 3, 4, 5
# if<10,100> => if10, if100
# 10,<100-102> => 10, 100, 101, 102

RANGE_GROUP = re.compile(r'<([0-9,-]+)>')
RANGE = re.compile(r'^(?P<first>[0-9]+)(?:-(?P<last>[0-9]+))?$')


def _range_values(first: str, last: str) -> List[str]:
    """first..last inclusive, counting down if last < first. A leading zero
    on either bound pads every value to the wider bound."""
    low, high = int(first), int(last)
    step = 1 if high >= low else -1
    padded = any(len(bound) > 1 and bound[0] == '0'
                 for bound in (first, last))
    width = max(len(first), len(last)) if padded else 0
    return [str(value).zfill(width)
            for value in range(low, high + step, step)]


def _group_values(group: str, context: str) -> List[str]:
    values = []
    for part in group.split(','):
        bounds = RANGE.match(part)
        if bounds is None:
            raise ConfigError('invalid range {!r} in {!r}'.format(
                part, context))
        first = bounds.group('first')
        values.extend(_range_values(first, bounds.group('last') or first))
    return values


def expand_syntax(string: str) -> Iterator[str]:
    """Iterator over all the strings in the expansion of one item. Groups
    expand left to right, the leftmost one varying slowest."""
    group = RANGE_GROUP.search(string)
    if group is None:
        yield string
        return
    head, tail = string[:group.start()], string[group.end():]
    for value in _group_values(group.group(1), string):
        yield from expand_syntax(head + value + tail)


def _split_top_level(string: str) -> List[str]:
    """Split at the commas outside <...>"""
    items = []
    depth = 0
    current = ''
    for char in string:
        if char == '<':
            depth += 1
        elif char == '>':
            depth -= 1
        if char == ',' and depth == 0:
            items.append(current)
            current = ''
        else:
            current += char
    items.append(current)
    return items


def expand_values(string: str) -> List[str]:
    values = []
    for item in _split_top_level(string):
        item = item.strip()
        if not item:
            raise ConfigError('empty value in {!r}'.format(string))
        values.extend(expand_syntax(item))
    return values


def expand_seeds(string: str) -> List[int]:
    try:
        return [int(seed) for seed in expand_values(string)]
    except ValueError:
        raise ConfigError('seeds must be integers, got {!r}'.format(string))


def parse_axis(string: str) -> Tuple[str, List[str]]:
    """'loss.kind=softmax_ce,balanced_softmax' => key and values"""
    key, sep, values = string.partition('=')
    if not sep or not key.strip():
        raise ConfigError('expected KEY=VALUES, got {!r}'.format(string))
    return key.strip(), expand_values(values)
