"""Exception types shared across the package."""


class FormatError(ValueError):
    """An input file violates its declared format."""


class CoverageError(ValueError):
    """No token of a text is covered by the embedding vocabulary."""


class ValidationError(ValueError):
    """Inputs are individually well-formed but mutually inconsistent."""
