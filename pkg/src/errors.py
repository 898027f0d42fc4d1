"""
Error codes and exceptions for cokernel-lab.

Every failure the library can report has a numbered code, so the CLI and
the logs describe problems the same way.
"""

from typing import Optional

# Error code definitions
ERROR_CODES = {
    'E001': 'Non-unit Inversion',
    'E002': 'Factors Not Coprime',
    'E003': 'Dimension Mismatch',
    'E004': 'Polynomial Not Square-free',
    'E005': 'Catalog Too Large',
    'E006': 'Too Large For Brute Force',
    'E007': 'Working Precision Too Small',
    'E008': 'Divergent Product',
    'E009': 'Enumeration Too Large',
    'E010': 'Invalid Measure',
    'E011': 'Invalid Ring Specification',
    'E012': 'Configuration Error',
    'E013': 'Invalid Module',
    'E014': 'Internal Error',
}


class CokernelLabError(Exception):
    """Base class for every error raised by the library."""

    code = 'E014'

    def __init__(self, detail: str = "", code: Optional[str] = None):
        if code is not None:
            self.code = code
        self.detail = detail
        super().__init__(f"{self.code}: {self.title} - {detail}" if detail else f"{self.code}: {self.title}")

    @property
    def title(self) -> str:
        return ERROR_CODES.get(self.code, 'Unknown Error')


class NonUnit(CokernelLabError):
    code = 'E001'


class NotCoprime(CokernelLabError):
    code = 'E002'


class DimensionMismatch(CokernelLabError):
    code = 'E003'


class NotSquarefree(CokernelLabError):
    code = 'E004'


class CatalogTooLarge(CokernelLabError):
    code = 'E005'


class TooLargeForBruteForce(CokernelLabError):
    code = 'E006'


class KViolation(CokernelLabError):
    code = 'E007'


class DivergentRatio(CokernelLabError):
    code = 'E008'


class TooLarge(CokernelLabError):
    code = 'E009'


class InvalidMeasure(CokernelLabError):
    code = 'E010'


class InvalidRingSpec(CokernelLabError):
    code = 'E011'


class ConfigError(CokernelLabError):
    code = 'E012'


class InvalidModule(CokernelLabError):
    code = 'E013'


class InternalError(CokernelLabError):
    code = 'E014'


def describe_error(error: CokernelLabError) -> str:
    """One-line description used by the CLI."""
    if error.detail:
        return f"ERROR {error.code}: {error.title} - {error.detail}"
    return f"ERROR {error.code}: {error.title}"
