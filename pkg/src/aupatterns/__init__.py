"""Occurrence-pattern analytics and pattern-pretrained detection for
frame-level action-unit annotations."""

from .annotations import (
    AnnotatedFrame,
    AnnotationError,
    AuPattern,
    AuRegistry,
    DatasetTable,
    infer_registry,
    parse_annotations,
    registry_for_bp4d,
    registry_for_disfa,
    serialize_annotations,
)
from .mining import (
    BaseRates,
    PatternCensus,
    PatternCodebook,
    base_rates,
    census,
    histogram,
    restrict,
    select_patterns_by_min_count,
    top_bottom,
    top_pattern_per_task,
)
from .metrics import (
    Confusion,
    FoldScores,
    MetricReport,
    Score,
    auc,
    confusion,
    f1_binary,
    f1_macro,
    f1_micro,
    pooled_report,
)
from .analytics import (
    CorrelationReport,
    MethodScoreTable,
    cross_method_std,
    imbalance_correlations,
    ones_baseline,
    pearson,
    std,
    variance,
)
from .synth import (
    SynthSpec,
    bp4d_like_spec,
    decode_by_matched_filter,
    demo_training_spec,
    generate,
    generate_table,
)
from .nn import (
    ModelSpec,
    ModelState,
    TrainConfig,
    forward,
    freeze_and_split,
    init_state,
    preset_compact_cnn,
    preset_wide_cnn,
    train,
)
from .experiments import (
    FoldPlan,
    decode_to_au,
    eval_unseen,
    make_folds,
    run_all_patterns,
    run_multi_au,
    run_pattern_pretrain,
    run_single_au,
)

__version__ = "0.1.0"
