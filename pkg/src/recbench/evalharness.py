"""Leave-one-out corruption, reciprocal-rank scoring, and the multi-run
experiment orchestrator.

The protocol per pruning threshold: load, split, and prune once; per run,
corrupt the test matrix with seed = base_seed + run and score every
configured model against that same corruption, so omissions are shared
across models within a run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import recommenders
from .corpus import generate_synthetic, load_corpus, prune, time_split, to_matrix
from .errors import ConfigError, ExperimentError
from .linalg import SparseBinaryMatrix
from .recommenders import PredictInput
from .textfeat import build_title_features, fit_tfidf, load_embeddings, tokenize

MODEL_NAMES = ("cooc", "svd", "mlp", "ae", "aae")
MODALITIES = ("items", "titles", "both")

RESULT_HEADER = "model,modality,alpha,run,seed,mrr,wall_time_s"


@dataclass(frozen=True)
class CorruptedTestSet:
    """Test matrix with exactly one nonzero removed per row."""

    x_corrupted: SparseBinaryMatrix
    omitted: np.ndarray  # per-row column index of the removed nonzero


def corrupt(x_test: SparseBinaryMatrix, seed: int) -> CorruptedTestSet:
    """Remove one uniformly chosen nonzero per row, deterministically.

    Every row must hold at least two nonzeros so the corrupted row keeps
    at least one.
    """
    rng = np.random.default_rng(seed)
    rows = []
    omitted = np.empty(x_test.n_rows, dtype=np.int64)
    for j in range(x_test.n_rows):
        cols = x_test.row_cols(j)
        if cols.size < 2:
            raise ValueError(f"test row {j} has {cols.size} nonzeros; need >= 2 to corrupt")
        drop = int(rng.integers(cols.size))
        omitted[j] = cols[drop]
        rows.append(np.delete(cols, drop))
    return CorruptedTestSet(
        x_corrupted=SparseBinaryMatrix.from_rows(rows, x_test.n_cols),
        omitted=omitted,
    )


def reciprocal_rank(scores: np.ndarray, omitted: int) -> float:
    """1 / position of the omitted item in the descending score order.

    Ties resolve by ascending index: rank = 1 + #{scores > s} + #{equal
    scores at smaller indices}, which makes the result deterministic.
    """
    scores = np.asarray(scores)
    if not 0 <= omitted < scores.size:
        raise ValueError(f"omitted index {omitted} out of range for {scores.size} scores")
    s = scores[omitted]
    rank = 1 + int(np.sum(scores > s)) + int(np.sum(scores[:omitted] == s))
    return 1.0 / rank


def mrr(scores: np.ndarray, corrupted: CorruptedTestSet) -> float:
    """Mean reciprocal rank of the omitted items over all test rows."""
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[0] != corrupted.omitted.size:
        raise ValueError(
            f"score matrix {scores.shape} does not match {corrupted.omitted.size} test rows"
        )
    total = 0.0
    for j in range(scores.shape[0]):
        total += reciprocal_rank(scores[j], int(corrupted.omitted[j]))
    return total / scores.shape[0]


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator arguments for an experiment over synthetic data."""

    mode: str
    n_clusters: int
    docs_per_cluster: int
    items_per_cluster: int
    items_per_doc: int
    seed: int


@dataclass(frozen=True)
class RunResult:
    model: str
    modality: str
    alpha: int
    run: int
    seed: int
    mrr: float
    wall_time_s: float


@dataclass
class ExperimentConfig:
    """Everything one experiment needs; paths may be replaced by a
    SyntheticSpec, in which case the files are generated next to `out`."""

    ratings: str | None = None
    meta: str | None = None
    split_year: int = 0
    out: str = "results.csv"
    alphas: tuple[int, ...] = (1,)
    models: tuple[str, ...] = MODEL_NAMES
    modality: str = "both"
    n_runs: int = 3
    base_seed: int = 0
    epochs: int = recommenders.DEFAULT_EPOCHS
    embeddings: str = "builtin:hash:50:0"
    synthetic: SyntheticSpec | None = None


def validate_config(config: ExperimentConfig) -> None:
    if config.synthetic is None and (not config.ratings or not config.meta):
        raise ConfigError("config needs either ratings+meta paths or a synthetic spec")
    if not config.alphas:
        raise ConfigError("alphas must be non-empty")
    if any(a < 1 for a in config.alphas):
        raise ConfigError("every alpha must be >= 1")
    if not config.models:
        raise ConfigError("models must be non-empty")
    unknown = [m for m in config.models if m not in MODEL_NAMES]
    if unknown:
        raise ConfigError(
            f"unknown models {unknown}; valid names are {', '.join(MODEL_NAMES)}"
        )
    if config.modality not in MODALITIES:
        raise ConfigError(
            f"unknown modality {config.modality!r}; valid values are {', '.join(MODALITIES)}"
        )
    if config.modality == "titles" and any(m != "mlp" for m in config.models):
        raise ConfigError("modality=titles supports only the mlp model")
    if config.modality == "items" and "mlp" in config.models:
        raise ConfigError("the mlp model needs titles; use modality=titles or both")
    if config.n_runs < 1:
        raise ConfigError("runs must be >= 1")
    if config.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if config.base_seed < 0:
        raise ConfigError("seed must be >= 0")


def effective_modality(model: str, config_modality: str) -> str:
    """The modality a model actually uses under a config setting.

    cooc never sees titles; mlp never sees items; the rest follow the
    configured setting.
    """
    if model == "cooc":
        return "items"
    if model == "mlp":
        return "titles"
    return config_modality


def _fit_and_score(name: str, modality: str, x_train, feats_train, feats_test,
                   corrupted: CorruptedTestSet, seed: int, epochs: int) -> np.ndarray:
    titled = modality in ("titles", "both")
    pin = PredictInput(corrupted.x_corrupted, feats_test if titled else None)
    if name == "cooc":
        return recommenders.cooc_predict(recommenders.cooc_fit(x_train), pin)
    if name == "svd":
        model = recommenders.svd_fit(x_train, feats_train if titled else None, seed=seed)
        return recommenders.svd_predict(model, pin)
    if name == "mlp":
        model = recommenders.mlp_fit(feats_train, x_train, epochs=epochs, seed=seed)
        return recommenders.mlp_predict(model, pin)
    if name == "ae":
        model = recommenders.ae_fit(x_train, feats_train if titled else None,
                                    epochs=epochs, seed=seed)
        return recommenders.ae_predict(model, pin)
    if name == "aae":
        model = recommenders.aae_fit(x_train, feats_train if titled else None,
                                     epochs=epochs, seed=seed)
        return recommenders.aae_predict(model, pin)
    raise ConfigError(f"unknown model {name!r}")


def run_experiment(config: ExperimentConfig, instrument=None, log=None) -> list[RunResult]:
    """Run the full protocol and return one RunResult per
    (model, modality, alpha, run), sorted by (alpha, run, model order).

    instrument, if given, is called as instrument(alpha=..., run=...,
    model=..., corrupted=...) right before each model is scored; log, if
    given, receives one progress string per completed cell.
    """
    validate_config(config)
    ratings, meta = config.ratings, config.meta
    if config.synthetic is not None:
        spec = config.synthetic
        out_dir = Path(config.out).resolve().parent
        ratings, meta = generate_synthetic(
            spec.mode, spec.n_clusters, spec.docs_per_cluster,
            spec.items_per_cluster, spec.items_per_doc, spec.seed, out_dir)
    corpus = load_corpus(ratings, meta)

    needs_titles = config.modality in ("titles", "both")
    results: list[RunResult] = []
    for alpha in config.alphas:
        split = time_split(corpus, config.split_year)
        pruned, _, report_test = prune(split, alpha)
        if report_test.n_documents == 0:
            raise ExperimentError(f"alpha={alpha}: pruning removed every test document")
        x_train = to_matrix(pruned.train)
        x_test = to_matrix(pruned.test)
        feats_train = feats_test = None
        if needs_titles:
            tokens_train = [tokenize(d.title) for d in pruned.train.documents]
            tokens_test = [tokenize(d.title) for d in pruned.test.documents]
            tfidf = fit_tfidf(tokens_train)
            emb = load_embeddings(config.embeddings)
            feats_train = build_title_features(tfidf, emb, tokens_train)
            feats_test = build_title_features(tfidf, emb, tokens_test)
        for run in range(config.n_runs):
            seed = config.base_seed + run
            corrupted = corrupt(x_test, seed)
            for name in config.models:
                modality = effective_modality(name, config.modality)
                if instrument is not None:
                    instrument(alpha=alpha, run=run, model=name, corrupted=corrupted)
                start = time.monotonic()
                try:
                    scores = _fit_and_score(name, modality, x_train, feats_train,
                                            feats_test, corrupted, seed, config.epochs)
                except Exception as exc:
                    raise ExperimentError(
                        f"model {name} failed at alpha={alpha} run={run}: {exc}"
                    ) from exc
                wall = time.monotonic() - start
                value = mrr(scores, corrupted)
                results.append(RunResult(model=name, modality=modality, alpha=alpha,
                                         run=run, seed=seed, mrr=value, wall_time_s=wall))
                if log is not None:
                    log(f"alpha={alpha} run={run} model={name} modality={modality} "
                        f"mrr={value:.4f} ({wall:.1f}s)")
    order = {name: i for i, name in enumerate(config.models)}
    return sorted(results, key=lambda r: (r.alpha, r.run, order[r.model]))


def format_csv(results) -> str:
    """The result CSV: exact header, one row per RunResult, '.' decimals,
    newline-terminated."""
    lines = [RESULT_HEADER]
    for r in results:
        lines.append(f"{r.model},{r.modality},{r.alpha},{r.run},{r.seed},"
                     f"{r.mrr:.6f},{r.wall_time_s:.1f}")
    return "\n".join(lines) + "\n"
