"""Interpretable difficulty estimation for two-hand symbolic piano scores."""

from .analysis import (
    ContributionProfile,
    CorrelationTable,
    Dendrogram,
    DivergenceResult,
    GradeStatistics,
    agglomerative_cluster,
    compute_grade_statistics,
    conditional_tau_matrix,
    correlation_to_distance,
    feature_difficulty_table,
    grade_contributions,
    grade_divergence,
    kendall_tau_c,
)
from .descriptors import (
    FEATURE_COLUMNS,
    FEATURE_LABELS,
    FeatureVector,
    average_ioi,
    average_pitch,
    displacement_rate,
    extract_features,
    extract_features_many,
    pitch_entropy,
    pitch_range,
    pitch_set_lz,
)
from .errors import (
    AnalysisError,
    CheckpointError,
    ContributionError,
    CorpusLoadError,
    DegeneratePartWarning,
    EmptyPartError,
    FitError,
    InvalidTempoError,
    NumericError,
    RubricnetError,
    ScoreParseError,
    UnsupportedLayoutError,
)
from .ingest import (
    Corpus,
    assign_folds,
    load_corpus,
    load_piece_file,
    parse_canonical_json,
    parse_musicxml,
    serialize_canonical_json,
)
from .metrics import EvalResult, confusion_matrix, evaluate_levels, macro_accuracy, macro_mse
from .model import (
    ForwardTrace,
    ModelParams,
    Scaler,
    boundary_flags,
    decision_boundaries,
    decode,
    decode_batch,
    fit_scaler,
    forward,
    forward_batch,
    load_checkpoint,
    normalize_scores,
    predict_level,
    predict_levels,
    rescale_aggregate,
    save_checkpoint,
)
from .report import RubricReport, build_report, render, report_from_json
from .score import (
    DEFAULT_TEMPO_BPM,
    DifficultyLabel,
    Hand,
    HandPart,
    NoteEvent,
    Piece,
    Pitch,
    PitchSetEvent,
    build_pitch_set_sequence,
    pitch_event_sequence,
    resolve_tempo,
)
from .synth import SynthSpec, gen_feature_dataset, gen_score_corpus
from .training import (
    AdamState,
    CrossValResult,
    FoldOutcome,
    SearchSpace,
    TrainConfig,
    TrainReport,
    adam_step,
    batch_loss,
    cross_validate,
    dropout_mask,
    encode_ordinal,
    encode_ordinal_batch,
    fit,
    gradients,
    ordinal_mse_loss,
    random_search,
)

__version__ = "0.1.0"
