"""CNN-Transformer reference classifier for EEG seizure prediction.

Scores 5-second EEG segments as preictal vs interictal. Talks to the
evaluation engine exclusively through files: split manifests and
recording containers in, prediction-series CSVs out.
"""


class ShapeError(ValueError):
    """Tensor geometry does not match what the model was built for."""


class DataError(ValueError):
    """Malformed manifest, recording container, or segment address."""


class EmptySplitError(ValueError):
    """A split role needed for training has no segments."""


from .model import CnnTransformer, ModelConfig, build_model  # noqa: E402
from .data import (SegmentBatch, SplitData, WindowBlock, load_splits,  # noqa: E402
                   load_windows, read_manifest)
from .train import Checkpoint, train_loocv, train_split  # noqa: E402
from .export import export_predictions, predict_segments  # noqa: E402

__all__ = [
    "CnnTransformer",
    "ModelConfig",
    "build_model",
    "SegmentBatch",
    "SplitData",
    "WindowBlock",
    "load_splits",
    "load_windows",
    "read_manifest",
    "Checkpoint",
    "train_loocv",
    "train_split",
    "export_predictions",
    "predict_segments",
    "ShapeError",
    "DataError",
    "EmptySplitError",
]
