"""Human-in-the-loop active-learning workbench for token tagging.

A linear-chain CRF with exact inference over hand-crafted sparse
features, pool-based query strategies, a simulated or live annotation
loop with transfer pretraining, and an HTTP annotation service.
"""

from .corpus import (
    DEFAULT_ENTITY_TYPES,
    DEFAULT_LABEL_MAPPING,
    DEFAULT_SPLITTER,
    EXCLUDED,
    OUTSIDE,
    CorpusError,
    CorpusSplit,
    LabelScheme,
    SubwordSplitter,
    TokenSequence,
    apply_subtoken_rule,
    map_labels,
    read_corpus,
    write_corpus,
)
from .crf import (
    CrfModel,
    InferenceError,
    Prediction,
    TrainConfig,
    allowed_transitions,
    effective_transitions,
    lattice_forward_backward,
    lattice_path_score,
    lattice_viterbi,
    load_model,
    model_from_dict,
    model_to_dict,
    nll_objective,
    objective_gradient,
    save_model,
    sequence_log_prob,
    stochastic_predict,
    token_marginals,
    train,
    viterbi_decode,
    word_marginals,
)
from .explain import explain_gradient, explain_occlusion, target_log_prob_gradient
from .features import ALL_TEMPLATES, UNK_WORD, FeatureEncoder
from .loop import (
    ActiveLoop,
    LoopConfig,
    few_shot_finetune,
    pretrain_source,
    run_live_round,
    run_simulation,
    zero_shot_eval,
)
from .metrics import (
    ConsistencyReport,
    Metrics,
    cohen_kappa,
    compute_consistency,
    count_corrections,
    entity_micro_prf,
    evaluate_model,
    extract_entities,
    model_token_correct,
    token_accuracy,
)
from .records import (
    AnnotationRecord,
    RoundRecord,
    annotation_from_dict,
    annotation_to_dict,
    canonical_json,
    learning_curve_rows,
    read_round_log,
    round_from_dict,
    round_to_dict,
    write_round_log,
)
from .server import create_app
from .service import (
    AnnotationService,
    AuthError,
    ConflictError,
    IntegrityError,
    RejectError,
    ServiceError,
    create_project,
)
from .strategies import (
    STRATEGY_IDS,
    QueryScore,
    SimilarityMatrix,
    build_similarity,
    score_bald,
    score_id,
    score_lc,
    score_ltp,
    score_pool,
    score_random,
    select_batch_bald,
    select_top,
)
from .synth import GeneratorConfig, generate_synthetic_corpus

__version__ = "0.1.0"
