"""Balact - Console Output

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
import sys
from typing import List, Optional, Sequence

# Messages shown to the user are also logged under this name, so they end up
# in the --log-file next to the diagnostics
console_logger = logging.getLogger('balact.console')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class _NotConsole(logging.Filter):
    """Keeps console_output messages from being printed a second time"""

    def filter(self, record: logging.LogRecord) -> bool:
        return record.name != console_logger.name


def setup_logging(debug: bool = False,
                  log_file: Optional[str] = None) -> None:
    root = logging.getLogger('balact')
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    stream = logging.StreamHandler(sys.stderr)
    stream.setLevel(logging.DEBUG if debug else logging.INFO)
    stream.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    stream.addFilter(_NotConsole())
    root.addHandler(stream)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)


def console_output(msg: str, logging_msg: Optional[str] = None) -> None:
    """Use instead of print"""
    console_logger.info('%s', (logging_msg or msg).rstrip('\n'))
    sys.stdout.write(msg)
    sys.stdout.flush()


def format_table(rows: Sequence[Sequence[str]]) -> List[str]:
    """Turn a 2-dimension list of strings into a 1-dimension list of strings
    with correct spacing"""
    max_lengths = []
    nr_columns = len(rows[0]) if rows else 0
    for i in range(nr_columns):
        max_lengths.append(max(len(row[i]) for row in rows))

    lines = []
    for row in rows:
        cells = list(row)
        # The last column is not padded
        for i in range(len(cells) - 1):
            cells[i] = cells[i].ljust(max_lengths[i])
        lines.append(' '.join(cells).rstrip() + '\n')
    return lines
