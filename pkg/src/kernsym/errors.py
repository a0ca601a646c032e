"""Exception types shared across kernsym modules."""


class KernsymError(Exception):
    """Base class for all kernsym errors."""


class NonFiniteValues(KernsymError):
    """A tensor or matrix contains NaN or Inf entries."""


class NonSquareKernel(KernsymError):
    """A kernel's spatial dims are not square where square is required."""


class ZeroNorm(KernsymError):
    """An all-zero kernel cannot be normalized; the symmetry score is undefined."""


class WindowTooLarge(KernsymError):
    """A convolution or pooling window does not fit in the (padded) input."""


class ShapeUnderflow(KernsymError):
    """A layer chain shrank an intermediate spatial extent below 1."""


class ShapeMismatch(KernsymError):
    """Array shapes are inconsistent with the requested operation."""


class MissingWeight(KernsymError):
    """A manifest weight binding is absent from the tensor store."""


class SafetensorsError(KernsymError):
    """Base class for weight-container parse errors."""


class TruncatedFile(SafetensorsError):
    """The byte stream ends before the declared header or data does."""


class MalformedHeader(SafetensorsError):
    """The container header is not valid JSON or has wrong field types."""


class BadOffsets(SafetensorsError):
    """Tensor data offsets overlap, leave bounds, or mismatch the shape."""


class UnsupportedDtype(SafetensorsError):
    """The container declares a dtype tag this reader does not handle."""


class SchemaError(KernsymError):
    """A model manifest violates the manifest schema."""


class BindingError(KernsymError):
    """A manifest tensor binding is missing from the store or has the wrong form."""


class NoForwardCache(KernsymError):
    """backward() was called before forward() cached intermediates."""


class DivergedLoss(KernsymError):
    """Training loss became non-finite."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"loss diverged to {loss!r} at step {step}")
        self.step = step
        self.loss = loss


class EmptyImageSet(KernsymError):
    """A consistency evaluation was requested over zero images."""


class ShiftTooLarge(KernsymError):
    """A requested shift leaves no overlap with the prediction grid."""


class IndexOutOfRange(KernsymError):
    """A segmentation map contains class indices outside [0, n_classes)."""


class EmptyProfile(KernsymError):
    """A chart was requested for a profile with no layers."""
