"""Active-learning annotation for structured data.

Label structured records with free-text descriptions: a clustered
round-robin sampler picks what to annotate next, a round-trip sequence
model ranks records by reconstruction uncertainty, the nearest labeled
neighbor prefills each suggestion, and corpus quality metrics say when
to stop.
"""

from .clustering import ClusterIndex, attribute_signature, build_index
from .corpus import (
    Corpus,
    DelimiterConfig,
    LinearizedData,
    ParseError,
    StructuredRecord,
    TextLabel,
    TokenizerConfig,
    Vocab,
    detokenize,
    linearize,
    parse_corpus,
    serialize_corpus,
    tokenize,
)
from .quality import QualityReport, StoppingThresholds, compute_report, should_stop
from .sampler import Batch, BatchItem, SamplerState, next_batch, random_batch
from .scorer import (
    ModelConfig,
    Seq2SeqModel,
    TrainConfig,
    score_batch,
    train_round_trip,
    uncertainty,
)
from .service import ServiceConfig, create_app, serve
from .session import Session, SessionConfig, create_session
from .simulate import (
    SimulationConfig,
    SimulationResult,
    bleu,
    make_synthetic_dataset,
    run_simulation,
)
from .suggester import LabeledPool, predict_all, suggest

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchItem",
    "ClusterIndex",
    "Corpus",
    "DelimiterConfig",
    "LabeledPool",
    "LinearizedData",
    "ModelConfig",
    "ParseError",
    "QualityReport",
    "SamplerState",
    "Seq2SeqModel",
    "ServiceConfig",
    "Session",
    "SessionConfig",
    "SimulationConfig",
    "SimulationResult",
    "StoppingThresholds",
    "StructuredRecord",
    "TextLabel",
    "TokenizerConfig",
    "TrainConfig",
    "Vocab",
    "attribute_signature",
    "bleu",
    "build_index",
    "compute_report",
    "create_app",
    "create_session",
    "detokenize",
    "linearize",
    "make_synthetic_dataset",
    "next_batch",
    "parse_corpus",
    "predict_all",
    "random_batch",
    "run_simulation",
    "score_batch",
    "serialize_corpus",
    "serve",
    "should_stop",
    "suggest",
    "tokenize",
    "train_round_trip",
    "uncertainty",
    "__version__",
]
