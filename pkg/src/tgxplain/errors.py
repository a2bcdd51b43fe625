"""Exception types shared across the package."""


class ParseError(ValueError):
    """A text input (CSV cell, config line, protocol message) could not be parsed."""


class DimensionError(ValueError):
    """Array dimensions are inconsistent with each other or with the file layout."""


class ShapeError(ValueError):
    """Operands passed to a numeric operation have incompatible shapes."""


class RangeError(ValueError):
    """A snapshot index or time window falls outside the available data."""


class MissingVariableError(KeyError):
    """A network references a variable that the dataset does not carry."""


class EmptyDataError(ValueError):
    """An operation that needs at least one sample received none."""


class ProtocolError(RuntimeError):
    """A wire message violated the adapter protocol grammar or ordering."""


class MismatchError(ProtocolError):
    """Adapter handshake metadata disagrees with the loaded inputs."""
