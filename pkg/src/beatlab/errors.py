"""Exception hierarchy shared across the toolkit."""


class BeatlabError(Exception):
    """Base class for all toolkit errors."""


# -- dataset construction ----------------------------------------------------

class InvalidValue(BeatlabError):
    """A scalar input is outside its documented domain (NaN, inf, ...)."""


class InsufficientData(BeatlabError):
    """Too few samples to perform the requested operation."""


class EmptySession(BeatlabError):
    """Session contains no robot cues, so it cannot be segmented."""


class LengthError(BeatlabError):
    """Sequence length is incompatible with the requested padding target."""


# -- audio / strike detection ------------------------------------------------

class DegenerateTemplate(BeatlabError):
    """Template has zero energy and cannot be correlated."""


class EmptyAudio(BeatlabError):
    """Audio track has no samples."""


class ReviewMismatch(BeatlabError):
    """A review edit references a detection id that does not exist."""


# -- neural network core -----------------------------------------------------

class ShapeError(BeatlabError):
    """Tensor shapes are incompatible for the requested operation."""


class MaskError(BeatlabError):
    """Attention or padding mask shape does not match its target."""


class ConfigError(BeatlabError):
    """A layer or model configuration is invalid."""


class NumericalError(BeatlabError):
    """Non-finite values encountered where finite values are required."""


class OptimizerError(BeatlabError):
    """Optimizer stepped without populated gradients."""


class GraphError(BeatlabError):
    """The recorded computation graph is malformed (contains a cycle)."""


class DomainError(BeatlabError):
    """Numeric argument outside the valid domain (e.g. schedule step 0)."""


class SerializationError(BeatlabError):
    """Model file is corrupt or does not match its descriptor."""


# -- training / evaluation ---------------------------------------------------

class StratificationError(BeatlabError):
    """Class counts too small to build the requested stratified folds."""


class ModalityError(BeatlabError):
    """Segment modality is unusable by the model (e.g. no strikes)."""


class EmptyEvaluation(BeatlabError):
    """Metrics requested over zero samples."""


class DegenerateLabels(BeatlabError):
    """AUC requested with only one class present."""


class EmptyCategory(BeatlabError):
    """No segments available for the requested exercise type."""


class DivergenceError(BeatlabError):
    """Training loss became non-finite.

    Carries the last finite-loss parameter snapshot so the caller can
    recover.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class ModelStateError(BeatlabError):
    """Model used before it was fitted."""
