"""Implicit-feedback recommenders and a leave-one-out ranking harness.

Five models (item co-occurrence, truncated SVD, title-only MLP, plain and
adversarial autoencoders) share one fit/predict contract over a binary
document-item matrix with optional title features; the harness evaluates
them with time-axis splits, vocabulary pruning, shared leave-one-out
corruption, and mean reciprocal rank.
"""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    Document,
    PruningReport,
    SplitCorpus,
    generate_synthetic,
    load_corpus,
    prune,
    time_split,
    to_matrix,
)
from .errors import (
    CapacityError,
    ConfigError,
    DivergenceError,
    ExperimentError,
    ParseError,
    RecbenchError,
)
from .evalharness import (
    CorruptedTestSet,
    ExperimentConfig,
    RunResult,
    SyntheticSpec,
    corrupt,
    format_csv,
    mrr,
    reciprocal_rank,
    run_experiment,
)
from .linalg import SparseBinaryMatrix, SvdFactors, gram, spmm, truncated_svd
from .recommenders import (
    AaeModel,
    AeModel,
    CoocModel,
    MlpModel,
    PredictInput,
    SvdModel,
    aae_fit,
    aae_predict,
    ae_fit,
    ae_predict,
    cooc_fit,
    cooc_predict,
    load_model,
    mlp_fit,
    mlp_predict,
    save_model,
    svd_fit,
    svd_predict,
    svd_truncate,
)
from .textfeat import (
    EmbeddingTable,
    TfidfModel,
    TitleFeatures,
    embed_titles,
    fit_tfidf,
    load_embeddings,
    tokenize,
    transform_tfidf,
)
