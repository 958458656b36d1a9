"""Feature construction and hybrid filter/wrapper selection for fault
detection from wind-turbine SCADA data."""

from .config import Settings
from .errors import (
    ConfigError,
    DataError,
    DegenerateLabelsError,
    InsufficientClassSupport,
    ParseError,
    ScadaFSError,
    StageError,
)
from .features import ConstructionConfig, construct_all
from .filters import FeatureRanking, rank_features, select_candidates
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, confusion
from .mlp import MlpArchitecture, TrainedModel, TrainingConfig, predict, train
from .pipeline import run_comparison, run_pipeline
from .sbfs import SubsetEvaluation, SubsetEvaluator, floating_backward_search, sbfs_search
from .scada import (
    FeatureMatrix,
    LabeledDataset,
    StatusEvent,
    TimeSeriesTable,
    align_status_labels,
    chronological_split,
    ingest_csv,
)
from .synthgen import SynthConfig, generate

__version__ = "0.1.0"
