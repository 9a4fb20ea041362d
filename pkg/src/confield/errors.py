"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class ContractError(RuntimeError):
    """A caller or callee violated an API contract (e.g. non-scalar loss)."""


class FormatError(ValueError):
    """An input file does not match the expected format."""


class EmptyDatasetError(ValueError):
    """No usable frames remain after parsing/filtering."""


class ParameterError(ValueError):
    """A user-supplied parameter is out of its valid range."""


class DegenerateRangeError(ValueError):
    """A normalization range collapsed (alpha * au_max <= au_min)."""


class GeometryError(ValueError):
    """Landmark geometry is degenerate (e.g. zero-area region polygon)."""


class IntegrityError(ValueError):
    """A manifest references assets that are missing or invalid."""


class ConfigurationError(ValueError):
    """Model/topology configuration is internally inconsistent."""


class LabelError(ValueError):
    """A supervision label is outside its valid range."""


class GradientNanError(RuntimeError):
    """A gradient turned NaN; message names the offending parameter block."""
