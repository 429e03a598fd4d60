"""Exception hierarchy shared by all hwdkit modules."""


class HwdkitError(Exception):
    """Base class for everything raised on purpose by this package."""


class ContractViolation(HwdkitError, ValueError):
    """An argument broke a documented precondition (shape, range, emptiness)."""


class DecodeError(HwdkitError):
    """Image file could not be parsed."""


class GenerationError(HwdkitError):
    """Synthetic corpus generation failed (bad style asset, unwritable dir)."""


class NumericalError(HwdkitError):
    """A numeric routine could not produce a trustworthy result."""


class TrainingDiverged(HwdkitError):
    """Loss became non-finite during training; message carries epoch/step."""


class WeightFileError(HwdkitError):
    """Base for weight-file load/save problems."""


class BadMagic(WeightFileError):
    pass


class BadChecksum(WeightFileError):
    pass


class TruncatedFile(WeightFileError):
    pass


class MissingEntry(WeightFileError):
    pass


class ExtraEntry(WeightFileError):
    pass


class ShapeMismatch(WeightFileError):
    pass
