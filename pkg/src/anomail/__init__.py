"""Header-based anomalous email detection: featurization, paragraph-vector
embedding, LOF novelty scoring, rareness selection and correlation graphs."""

from .embedding import DocVector, EmbeddingParams, Vocabulary, build_vocab, cosine, train
from .errors import AnomailError
from .events import (
    Corpus,
    EmailEvent,
    parse_event_line,
    parse_raw_headers,
    read_corpus,
    serialize_event,
    write_corpus,
)
from .featurize import TokenDocument, featurize, featurize_corpus
from .graph import (
    CorrelationGraph,
    GraphEdge,
    GraphNode,
    build_graph,
    connected_components,
    export_graph,
    parse_graph_json,
)
from .novelty import (
    DecisionScore,
    NoveltyModel,
    NoveltyParams,
    decision_scores,
    filter_novel,
    fit,
    knn,
)
from .pipeline import (
    BatchFileSource,
    CorpusSource,
    DetectionReport,
    LineStreamSource,
    WindowConfig,
    run_cycle,
    run_rolling,
)
from .rareness import RelationKey, relation_key, select_rare
from .synth import AnomalySpec, GeneratorSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AnomailError",
    "AnomalySpec",
    "BatchFileSource",
    "Corpus",
    "CorpusSource",
    "CorrelationGraph",
    "DecisionScore",
    "DetectionReport",
    "DocVector",
    "EmailEvent",
    "EmbeddingParams",
    "GeneratorSpec",
    "GraphEdge",
    "GraphNode",
    "LineStreamSource",
    "NoveltyModel",
    "NoveltyParams",
    "RelationKey",
    "TokenDocument",
    "Vocabulary",
    "WindowConfig",
    "build_graph",
    "build_vocab",
    "connected_components",
    "cosine",
    "decision_scores",
    "export_graph",
    "featurize",
    "featurize_corpus",
    "filter_novel",
    "fit",
    "generate",
    "knn",
    "parse_event_line",
    "parse_graph_json",
    "parse_raw_headers",
    "read_corpus",
    "relation_key",
    "run_cycle",
    "run_rolling",
    "select_rare",
    "serialize_event",
    "train",
    "write_corpus",
]
