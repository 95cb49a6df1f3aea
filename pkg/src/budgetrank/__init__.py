"""Budget-aware multi-reformulation retrieval with online surrogate learning."""

from .analysis import AnalyzerConfig, tokenize
from .baselines import BaselineSpec, rrf_fuse, run_baseline
from .evaluation import Qrels, ndcg_at, paired_ttest, recall_at
from .index import Document, Index, build_index, bm25_score, bm25_term, search
from .loop import LoopConfig, RunResult, run_adaptive
from .pool import build_pool, feature_matrix, standardize
from .prf import relevance_model, rm3_expand, rm3_feature
from .reformulate import ReformulationSet, make_reformulation_set
from .simulate import TopicWorldSpec, simulate_world
from .surrogate import SurrogateModel, estimate_utility, estimation_error, init_weights
from .teachers import (
    CachedTeacher,
    HttpTeacher,
    LinearTeacher,
    QrelsTeacher,
    RecordingTeacher,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyzerConfig",
    "BaselineSpec",
    "CachedTeacher",
    "Document",
    "HttpTeacher",
    "Index",
    "LinearTeacher",
    "LoopConfig",
    "Qrels",
    "QrelsTeacher",
    "RecordingTeacher",
    "ReformulationSet",
    "RunResult",
    "SurrogateModel",
    "TopicWorldSpec",
    "bm25_score",
    "bm25_term",
    "build_index",
    "build_pool",
    "estimate_utility",
    "estimation_error",
    "feature_matrix",
    "init_weights",
    "make_reformulation_set",
    "ndcg_at",
    "paired_ttest",
    "recall_at",
    "relevance_model",
    "rm3_expand",
    "rm3_feature",
    "rrf_fuse",
    "run_adaptive",
    "run_baseline",
    "search",
    "simulate_world",
    "standardize",
    "tokenize",
]
