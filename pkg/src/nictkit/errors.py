"""Exception types shared across the toolkit."""


class NictkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidGeometry(NictkitError):
    """Projection geometry violates an invariant (counts, range, spacing)."""


class ShapeMismatch(NictkitError):
    """Array shapes are incompatible for the requested operation."""


class InvalidStride(NictkitError):
    """Sparse-view stride outside [1, num_views]."""


class InvalidRange(NictkitError):
    """Limited-angle keep range outside (0, source range]."""


class InvalidConfig(NictkitError):
    """A configuration value violates its documented invariant."""


class NonScalarLoss(NictkitError):
    """backward() called on a tensor that is not a scalar."""


class NonFiniteGradient(NictkitError):
    """A gradient contains NaN/Inf; message names the parameter path."""


class NoTargetsMatched(NictkitError):
    """LoRA target patterns matched no parameters."""


class CorpusExhausted(NictkitError):
    """Queue refill found no more volumes this epoch (epoch boundary)."""


class CorruptVolume(NictkitError):
    """A volume/image file failed its header or payload checks."""


class ImageTooSmall(NictkitError):
    """Image smaller than the SSIM window."""


class IncompleteTable(NictkitError):
    """Reader-study table is missing a (group, reader, method) row."""


class UnpairedFile(NictkitError):
    """Evaluation found prediction/reference files without a partner."""
