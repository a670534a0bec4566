"""GMM-HMM acoustic modeling: graphs, Viterbi alignment, staged training."""

from .schedule import TrainSchedule
from .model import (
    AcousticModel,
    ContextKey,
    GmmState,
    HmmPhoneModel,
    SpeakerTransform,
    load_model,
    save_model,
)
from .graph import AlignGraph, compile_training_graph
from .viterbi import AlignedPhone, Alignment, viterbi_align
from .train import (
    IterationRecord,
    TrainerConfig,
    TrainingData,
    align_corpus,
    em_iteration,
    estimate_speaker_transform,
    flat_start,
    prepare_training_data,
    split_gaussians,
    train_lda_stage,
    train_monophone,
    train_pipeline,
    train_sat,
    train_triphone,
)

__all__ = [
    "AcousticModel",
    "AlignGraph",
    "AlignedPhone",
    "Alignment",
    "ContextKey",
    "GmmState",
    "HmmPhoneModel",
    "IterationRecord",
    "SpeakerTransform",
    "TrainSchedule",
    "TrainerConfig",
    "TrainingData",
    "align_corpus",
    "compile_training_graph",
    "em_iteration",
    "estimate_speaker_transform",
    "flat_start",
    "load_model",
    "prepare_training_data",
    "save_model",
    "split_gaussians",
    "train_lda_stage",
    "train_monophone",
    "train_pipeline",
    "train_sat",
    "train_triphone",
    "viterbi_align",
]
