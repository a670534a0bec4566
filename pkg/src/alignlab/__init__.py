"""alignlab: a self-contained forced-alignment laboratory.

Ingest annotated audio, augment it, train four-stage GMM-HMM acoustic
models from scratch, align corpora, and score boundary placement
against human annotation.
"""

__version__ = "0.1.0"

from .audio import AudioClip, read_wav, write_wav
from .corpus import Corpus, Utterance, build_corpus, write_corpus
from .textgrid import Interval, Tier, load_textgrid, parse_textgrid, save_textgrid, serialize_textgrid
from .transcript import NormalizationRules, filter_short_intervals, normalize_transcript
from .lexicon import (
    GraphemeMap,
    Lexicon,
    NaturalClassMap,
    PhoneClassMap,
    apply_g2p,
    compile_lexicon,
    default_identity_classes,
    load_phone_class_map,
)
from .features import FeatureConfig, FeatureMatrix, LdaTransform, cmvn, estimate_lda, mfcc, splice
from .augment import AugmentationSpec, build_augmented_dataset, standard_preset
from .evaluate import EvalReport, aggregate, compare_models, emit_heatmap, match_boundaries, signed_diff
from .hmm import TrainSchedule, train_pipeline, prepare_training_data, align_corpus
from .sweep import (
    GridAssets,
    RunConfig,
    RunResult,
    enumerate_experiment1,
    enumerate_experiment2,
    run_grid,
    report_grid,
    scale_schedule_for_augmentation,
)
from .synth import SynthSpec, generate_corpus
