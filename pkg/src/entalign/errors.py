"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateGeometryError(ValueError):
    """Geometry is undefined for the given configuration (e.g. cone apex at the origin)."""


class FileFormatError(ValueError):
    """An embedding or model file is structurally malformed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class RecordDataError(ValueError):
    """A record parsed correctly but holds unusable values (e.g. NaN embedding).

    Carries the zero-based record index.
    """

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"{message} (record {index})"
        super().__init__(message)
        self.index = index


class UndefinedMetricError(ValueError):
    """A correlation metric is undefined for the given inputs."""
