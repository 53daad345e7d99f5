"""Exception types shared across modules."""


class AssetGenError(Exception):
    """Base class for all package-specific errors."""


class BehindCamera(AssetGenError):
    """A point required by a projection lies at or behind the camera plane."""


class InvalidScale(AssetGenError):
    """A rescale factor was zero or negative."""


class DegenerateBox(AssetGenError):
    """A 2D box has no positive area."""


class ShapeMismatch(AssetGenError):
    """An array or image does not match the configured shape."""


class SpecInvalid(AssetGenError):
    """A scene specification violates its invariants."""


class ClipTooShort(AssetGenError):
    """A clip does not contain enough frames for pair sampling."""


class SchemaViolation(AssetGenError):
    """An on-disk document violates the dataset schema.

    Carries the offending file and a dotted field path for diagnostics.
    """

    def __init__(self, message: str, *, path: str = "", field: str = ""):
        self.path = path
        self.field = field
        detail = message
        if path or field:
            detail = f"{message} (file={path!r}, field={field!r})"
        super().__init__(detail)


class TooManyAssets(AssetGenError):
    """More asset spans than the configured maximum."""


class NonFiniteLoss(AssetGenError):
    """Training loss became NaN or infinite."""


class CheckpointConfigMismatch(AssetGenError):
    """A checkpoint's config hash does not match the expected one."""
