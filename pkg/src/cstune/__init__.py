"""Semi-supervised content/style fine-tuning on frozen embedding datasets.

A self-contained numpy engine: embeddings go in (EMBX files), a content
classifier plus style/reconstruction components train on a mix of a few
labeled rows and the full unlabeled pool, and error-vs-label-budget
sweeps come out.
"""

__version__ = "0.1.0"

from .data import (
    EmbeddingDataset,
    LabelBudget,
    SyntheticSpec,
    generate_synthetic,
    label_ladder,
    read_embx,
    select_labeled,
    write_embx,
)
from .losses import LossBreakdown, LossWeights, PriorSampler, PriorSet
from .networks import ComponentBundle, build_bundle
from .optim import AdamW, AdamWConfig, lr_at
from .rng import RngState
from .training import (
    CheckpointState,
    FitConfig,
    Phase,
    TrainingSchedule,
    TrainReport,
    fit,
    load_checkpoint,
    plan,
    save_checkpoint,
)
from .evaluation import error_rate, export_features, pca_project, run_sweep

__all__ = [
    "AdamW",
    "AdamWConfig",
    "CheckpointState",
    "ComponentBundle",
    "EmbeddingDataset",
    "FitConfig",
    "LabelBudget",
    "LossBreakdown",
    "LossWeights",
    "Phase",
    "PriorSampler",
    "PriorSet",
    "RngState",
    "SyntheticSpec",
    "TrainReport",
    "TrainingSchedule",
    "build_bundle",
    "error_rate",
    "export_features",
    "fit",
    "generate_synthetic",
    "label_ladder",
    "load_checkpoint",
    "lr_at",
    "pca_project",
    "plan",
    "read_embx",
    "run_sweep",
    "save_checkpoint",
    "select_labeled",
    "write_embx",
]
