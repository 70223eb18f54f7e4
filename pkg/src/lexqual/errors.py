"""Exception hierarchy.

Each family maps onto one CLI exit code: configuration problems (2),
data problems (3) and external adapter failures (4).
"""


class LexqualError(Exception):
    exit_code = 1


class ConfigError(LexqualError):
    exit_code = 2


class CalibrationError(ConfigError):
    pass


class DataError(LexqualError):
    exit_code = 3


class IngestError(DataError):
    def __init__(self, message, *, path=None, line=None, offset=None, doc_id=None):
        self.path = path
        self.line = line
        self.offset = offset
        self.doc_id = doc_id
        where = []
        if doc_id is not None:
            where.append(f"doc {doc_id}")
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class SchemaError(DataError):
    """An intermediate artifact does not match its file format."""


class PartitionOverlapError(DataError):
    pass


class InconsistentInputError(DataError):
    pass


class IncompatibleProfilesError(DataError):
    pass


class AdapterError(LexqualError):
    exit_code = 4


class AdapterCrashError(AdapterError):
    pass


class AdapterTimeoutError(AdapterError):
    pass


class MalformedReplyError(AdapterError):
    pass


class CountMismatchError(AdapterError):
    pass
