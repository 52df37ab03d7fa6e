"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the command line
prints as ``error_code=<code>``.
"""


class EEGAffectError(Exception):
    code = "error"


class ConfigError(EEGAffectError, ValueError):
    code = "config"


# data ingest
class DatasetError(EEGAffectError):
    code = "dataset"


class MissingRating(DatasetError):
    code = "missing_rating"


class ChannelCountMismatch(DatasetError):
    code = "channel_count_mismatch"


class NonFiniteSample(DatasetError):
    code = "non_finite_sample"


class MalformedCsv(DatasetError):
    code = "malformed_csv"


class OutOfRangeRating(DatasetError, ValueError):
    code = "out_of_range_rating"


class NonNumericRating(DatasetError, ValueError):
    code = "non_numeric_rating"


# features / labels
class BandAboveNyquist(EEGAffectError, ValueError):
    code = "band_above_nyquist"


class EmptyTrainingSet(EEGAffectError, ValueError):
    code = "empty_training_set"


class TooFewSubjects(EEGAffectError, ValueError):
    code = "too_few_subjects"


# autodiff / models / training
class ShapeMismatch(EEGAffectError, ValueError):
    code = "shape_mismatch"


class NonScalarLoss(EEGAffectError, ValueError):
    code = "non_scalar_loss"


class DivergedLoss(EEGAffectError, ArithmeticError):
    code = "diverged_loss"

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")


class HeadMismatch(EEGAffectError, ValueError):
    code = "head_mismatch"


# evaluation
class LabelOutOfRange(EEGAffectError, ValueError):
    code = "label_out_of_range"


class EmptyMatrix(EEGAffectError, ValueError):
    code = "empty_matrix"
