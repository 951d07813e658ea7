from __future__ import annotations

from typing import Optional

import numpy as np


class PyaevError(Exception):
    """Base class for every error raised by pyaev"""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigurationError(PyaevError):
    """Invalid parameters, malformed config files or bad overrides"""

    exit_code = 2


class GridMismatchError(PyaevError):
    """Series or profiles defined on incompatible time grids"""

    exit_code = 2


class ProfileParseError(PyaevError):
    """Malformed profile or price CSV"""

    exit_code = 5

    def __init__(self, message: str, row: Optional[int] = None,
                 column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InfeasibleError(PyaevError):
    """An optimization or simulation has no feasible point"""

    exit_code = 3

    def __init__(self, message: str, step: Optional[int] = None,
                 certificate: Optional[np.ndarray] = None):
        if step is not None:
            message = f"{message} (first violating step {step})"
        super().__init__(message)
        self.step = step
        self.certificate = certificate


class SolverLimitError(PyaevError):
    """A solver stopped on an iteration, node or time limit"""

    exit_code = 4


class ModelFormatError(PyaevError):
    """Malformed MPS/LP text or an unsupported model construct"""

    exit_code = 5


class ReportError(PyaevError):
    """Inconsistent inputs to report or figure emission"""

    exit_code = 5
