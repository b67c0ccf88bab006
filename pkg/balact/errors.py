"""Balact - Errors

Every error raised on purpose by balact derives from BalactError, which knows
the exit code the command line should terminate with.

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

from typing import Any, Optional

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class BalactError(Exception):
    exit_code = EXIT_RUNTIME


class ConfigError(BalactError, ValueError):
    exit_code = EXIT_CONFIG


class ShapeError(BalactError, ValueError):
    """Dimensions of matrices, vectors or counts do not agree"""


class CountsError(BalactError, ValueError):
    """Class counts violate k >= 2 or n_j >= 1"""


class LabelError(BalactError, IndexError):
    pass


class NonFiniteError(BalactError, ArithmeticError):
    """A reduction or product left the range of 64-bit floats"""


class DataFormatError(BalactError, ValueError):
    def __init__(self, message: str, row: Optional[int] = None) -> None:
        if row is not None:
            message = 'row {}: {}'.format(row, message)
        super().__init__(message)
        self.row = row


class DivergenceError(BalactError, ArithmeticError):
    def __init__(self, epoch: int, batch: int, trace: Any = None) -> None:
        super().__init__('diverged at epoch {}, batch {}'.format(epoch, batch))
        self.epoch = epoch
        self.batch = batch
        # The TrainTrace recorded up to the failing epoch
        self.trace = trace
