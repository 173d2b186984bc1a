"""
Error hierarchy for the BrainZ-BP pipeline.

Every error carries the pipeline stage it belongs to and a distinct process exit
code, so the CLI can report failures with stage attribution. Feature-level
conditions reuse the class names below as reason codes on flagged cycles and
feature vectors.
"""

from typing import Any, Dict, Optional


class BrainzError(Exception):
    """Base class for all pipeline errors."""

    stage = "cli"
    exit_code = 1

    def __init__(self, message: str = "", stage: Optional[str] = None, **details: Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        if stage is not None:
            self.stage = stage
        self.details: Dict[str, Any] = details

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_payload(self) -> Dict[str, Any]:
        """Serializable error payload for the CLI."""
        return {
            "status": "error",
            "stage": self.stage,
            "error": self.code,
            "message": self.message,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


# ----- dataset-io -----
class DatasetError(BrainzError):
    stage = "dataset-io"
    exit_code = 10


class MissingHeaderField(DatasetError):
    exit_code = 11


class LengthMismatch(DatasetError):
    exit_code = 12


class NonFiniteSample(DatasetError):
    exit_code = 13

    def __init__(self, message: str = "", row: int = -1, column: str = "", **details: Any):
        super().__init__(message, row=row, column=column, **details)
        self.row = row
        self.column = column


class IoFailure(DatasetError):
    exit_code = 14


class EmptyTable(DatasetError):
    exit_code = 15


class InvalidRecording(DatasetError):
    exit_code = 16


# ----- synthgen -----
class SynthError(BrainzError):
    stage = "synthgen"
    exit_code = 20


class InvalidConfig(SynthError):
    exit_code = 21


# ----- demod -----
class DemodError(BrainzError):
    stage = "demod"
    exit_code = 30


class DegenerateBlock(DemodError):
    exit_code = 31


class AliasedExcitation(DemodError):
    exit_code = 32


class BlockTooShort(DemodError):
    exit_code = 33


# ----- preprocess -----
class PreprocessError(BrainzError):
    stage = "preprocess"
    exit_code = 40


class InvalidBand(PreprocessError):
    exit_code = 41


class SeriesTooShort(PreprocessError):
    exit_code = 42


class InvalidSpec(PreprocessError):
    exit_code = 43


class SeriesShorterThanWindow(PreprocessError):
    exit_code = 44


class InvalidLabels(PreprocessError):
    exit_code = 45


# ----- fiducial -----
class FiducialError(BrainzError):
    stage = "fiducial"
    exit_code = 50


class NoPeaksFound(FiducialError):
    exit_code = 51


class EmptyCycleWindow(FiducialError):
    exit_code = 52


# ----- features -----
class FeatureError(BrainzError):
    stage = "features"
    exit_code = 60


class NoValidCycles(FeatureError):
    exit_code = 61


class LevelNotCrossed(FeatureError):
    exit_code = 62


class ZeroMinHeight(FeatureError):
    exit_code = 63


class ZeroDuration(FeatureError):
    exit_code = 64


class DegenerateDifference(FeatureError):
    exit_code = 65


class ConstantSegment(FeatureError):
    exit_code = 66


class UndefinedEntropy(FeatureError):
    exit_code = 67


class TooFewPeaks(FeatureError):
    exit_code = 68


# ----- featsel -----
class SelectionError(BrainzError):
    stage = "featsel"
    exit_code = 70


class TooFewRows(SelectionError):
    exit_code = 71


class DegenerateTarget(SelectionError):
    exit_code = 72


class MismatchedTargets(SelectionError):
    exit_code = 73


class KOutOfRange(SelectionError):
    exit_code = 74


# ----- regress -----
class ModelError(BrainzError):
    stage = "regress"
    exit_code = 80


class SingularDesign(ModelError):
    exit_code = 81


class EmptyTraining(ModelError):
    exit_code = 82


class NoConvergence(ModelError):
    exit_code = 83


class FeatureMismatch(ModelError):
    exit_code = 84


# ----- eval -----
class EvalError(BrainzError):
    stage = "eval"
    exit_code = 90


class ZeroVariance(EvalError):
    exit_code = 91


class NonMonotoneCp(EvalError):
    exit_code = 92


# ----- cli / config -----
class InvalidConfigFile(BrainzError):
    stage = "cli"
    exit_code = 2
