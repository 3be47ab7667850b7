"""Interactive attribute acquisition for zero-shot classification.

Train a cross-modal embedding on base classes, then teach it a novel class
through a handful of well-chosen attribute-group queries answered by an
expert (or a simulated oracle), imputing everything unasked from the most
similar base class. The bench module measures classification accuracy as a
function of the annotation budget.
"""

from .acquisition import (
    BudgetExhausted,
    ScoreVector,
    Strategy,
    global_variance_scores,
    image_based_scores,
    next_query,
    parse_strategy,
    representation_change_scores,
    sibling_variance_scores,
)
from .dataset import (
    AttributeSchema,
    ClassRecord,
    Dataset,
    DatasetFormatError,
    ImageSplit,
    SynthConfig,
    Taxonomy,
    generate_synthetic,
    image_split,
    load_dataset,
    normalize_attributes,
    save_dataset,
    siblings,
    synthetic_design,
)
from .learner import (
    EmbeddingModel,
    LatentClassifier,
    Metrics,
    ModelConfig,
    TrainingDivergedError,
    evaluate,
    harmonic_mean,
    load_model,
    save_model,
    train_classifier,
    train_embedding_model,
)
from .session import (
    OracleConfig,
    QueryProposal,
    SessionState,
    finalize,
    impute,
    load_transcript,
    propose_query,
    replay_transcript,
    run_session,
    save_transcript,
    simulated_oracle_answer,
    start_session,
    submit_answer,
    transcript_dict,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
