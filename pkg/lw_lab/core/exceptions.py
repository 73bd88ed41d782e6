import json
import sys

from lw_lab.core.config import settings
from lw_lab.core.logging import logger


class LabError(Exception):
    pass


class ModelError(LabError):
    pass


class InputError(LabError):
    pass


class SizeLimitError(LabError):
    def __init__(self, what: str, size: int, limit: int, setting: str | None = None):
        self.what = what
        self.size = size
        self.limit = limit
        hint = f" (raise {setting} to allow it)" if setting else ""
        super().__init__(f"{what} has size {size}, limit is {limit}{hint}")


class UnsupportedValuationError(LabError):
    pass


class DegenerateEquilibriumError(LabError):
    pass


class PreconditionError(LabError):
    pass


class DeviationInfeasibleError(LabError):
    pass


class SolverError(LabError):
    pass


class ConfigError(LabError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(f"{where}{message}")


EXIT_OK = 0
EXIT_NOT_EQUILIBRIUM = 1
EXIT_ERROR = 2


def handle_cli_exception(exc: BaseException) -> int:
    if isinstance(exc, LabError):
        logger.warning(f"{type(exc).__name__}: {exc}")
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return EXIT_ERROR

    logger.error(f"Unhandled error: {type(exc).__name__}: {exc}", exc_info=settings.is_development)
    print(json.dumps({"error": "internal error", "type": type(exc).__name__}), file=sys.stderr)
    return EXIT_ERROR
