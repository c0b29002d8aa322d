"""Exception hierarchy shared across the package."""


class MrcNerError(Exception):
    """Base class for all package errors."""


class ValidationError(MrcNerError, ValueError):
    """Bad input data, configuration or catalog. CLI exit code 1."""


class SpanError(ValidationError):
    pass


class CatalogError(ValidationError):
    pass


class DataFormatError(ValidationError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(ValidationError):
    pass


class ContractError(MrcNerError, RuntimeError):
    """A caller broke a documented precondition (e.g. missing candidate pair)."""


class EncoderOverflowError(ContractError):
    pass


class TrainingError(MrcNerError, RuntimeError):
    """Runtime failure during training (non-finite loss). CLI exit code 2."""
