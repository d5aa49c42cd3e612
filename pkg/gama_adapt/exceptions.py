# This code is part of gama-adapt.
#
# (C) Copyright The gama-adapt Authors 2026.
#
# This code is licensed under the Apache License, Version 2.0. You may
# obtain a copy of this license in the LICENSE.txt file in the root directory
# of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
#
# Any modifications or derivative works of this code must retain this
# copyright notice, and modified files need to carry a notice indicating
# that they have been altered from the originals.

"""Exceptions for the gama_adapt package."""

from qiskit.exceptions import QiskitError


class GamaError(QiskitError):
    """Base class for errors raised by the gama_adapt package."""
    pass


class GamaParameterError(GamaError, ValueError):
    """Invalid argument, shape or dimension mismatch, or out-of-range label."""
    pass


class GamaDataError(GamaError, ValueError):
    """Input data that is not finite or otherwise unusable."""
    pass


class GamaParseError(GamaDataError):
    """A CSV row that could not be parsed into finite features."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class GamaGeometryError(GamaError):
    """Local geometry could not be estimated (too few neighbors)."""
    pass


class DegenerateNeighborhoodError(GamaGeometryError):
    """Neighborhood variance is zero or of lower rank than requested."""
    pass


class GamaNumericError(GamaError, ArithmeticError):
    """A loss, gradient or parameter became non-finite."""

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class GamaTrainingError(GamaNumericError):
    """Training diverged.

    ``last_good`` holds the last parameters that were finite, so callers can
    still checkpoint them.
    """

    def __init__(self, message, term=None, last_good=None, step=None):
        super().__init__(message, term=term)
        self.last_good = last_good
        self.step = step


class GamaConfigError(GamaError):
    """Configuration file could not be read, parsed or validated."""

    def __init__(self, message, path=None, key=None):
        super().__init__(message)
        self.path = path
        self.key = key


class GamaSchemaError(GamaConfigError):
    """A CSV header or JSON report does not match its schema."""
    pass
