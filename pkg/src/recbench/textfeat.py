"""Title featurization.

Tokenization, TF-IDF fitted on training titles only, sparse TF-IDF
vectors (for concatenation with the item matrix), and TF-IDF-weighted
embedded bag-of-words vectors (for the neural models).
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

BUILTIN_PREFIX = "builtin:hash:"


def tokenize(title: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop single-digit tokens."""
    parts = _TOKEN_SPLIT.split(title.lower())
    return [t for t in parts if t and not (len(t) == 1 and t.isdigit())]


@dataclass(frozen=True)
class TfidfModel:
    """Vocabulary and smoothed idf weights fitted on training titles."""

    word_index: dict[str, int]
    idf: np.ndarray
    n_train_docs: int


def fit_tfidf(train_tokens: list[list[str]]) -> TfidfModel:
    """Fit idf(t) = ln((1+N)/(1+df(t))) + 1 over the training titles.

    The vocabulary covers every training token; transforms drop tokens
    outside it, so no test-set information ever enters the model.
    """
    if not train_tokens:
        raise ValueError("fit_tfidf requires at least one training title")
    n = len(train_tokens)
    df: Counter[str] = Counter()
    for tokens in train_tokens:
        df.update(set(tokens))
    vocab = sorted(df)
    word_index = {t: i for i, t in enumerate(vocab)}
    idf = np.array([np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in vocab])
    return TfidfModel(word_index=word_index, idf=idf, n_train_docs=n)


def transform_tfidf(model: TfidfModel, token_lists) -> sp.csr_matrix:
    """Term count times idf per entry, then L2-normalize each row.

    Zero rows (empty or fully out-of-vocabulary titles) stay zero.
    """
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in token_lists:
        counts: Counter[int] = Counter()
        for t in tokens:
            j = model.word_index.get(t)
            if j is not None:
                counts[j] += 1
        row_idx = sorted(counts)
        row_val = np.array([counts[j] * model.idf[j] for j in row_idx])
        norm = np.linalg.norm(row_val)
        if norm > 0:
            row_val = row_val / norm
        indices.extend(row_idx)
        data.extend(row_val)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(token_lists), len(model.word_index)),
    )


class EmbeddingTable:
    """Token-to-vector table from a word2vec text file or a seeded hash.

    In hash mode each token's vector is generated on demand: a stable
    digest of (seed, token) seeds a generator that draws a standard-normal
    vector, normalized to unit length. Tokens therefore always resolve and
    resolve identically across runs and processes.
    """

    def __init__(self, dim: int, vectors=None, hash_seed: int | None = None):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.dim = dim
        self.vectors: dict[str, np.ndarray] = dict(vectors or {})
        self._hash_seed = hash_seed

    def get(self, token: str) -> np.ndarray | None:
        """Vector for the token, or None if the table has no entry for it."""
        vec = self.vectors.get(token)
        if vec is None and self._hash_seed is not None:
            vec = _hash_vector(token, self.dim, self._hash_seed)
            self.vectors[token] = vec
        return vec


def _hash_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def load_embeddings(source) -> EmbeddingTable:
    """Load embeddings from a word2vec text file or a builtin selector.

    File format: a header line `n_words dim`, then one `word v1 ... v_dim`
    line per word. The selector `builtin:hash:<dim>:<seed>` returns the
    deterministic hash-backed table instead.
    """
    text = str(source)
    if text.startswith(BUILTIN_PREFIX):
        fields = text[len(BUILTIN_PREFIX):].split(":")
        if len(fields) != 2:
            raise ValueError(
                f"bad embedding selector {text!r}; expected {BUILTIN_PREFIX}<dim>:<seed>"
            )
        try:
            dim, seed = int(fields[0]), int(fields[1])
        except ValueError:
            raise ValueError(
                f"bad embedding selector {text!r}; dim and seed must be integers"
            ) from None
        return EmbeddingTable(dim=dim, hash_seed=seed)

    path = Path(source)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(path, 1, f"expected header 'n_words dim', got {header!r}")
        try:
            n_words, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(path, 1, f"non-integer header fields in {header!r}") from None
        vectors = {}
        line_no = 1
        for line in fh:
            line_no += 1
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise ParseError(
                    path, line_no, f"expected 1 word + {dim} values, got {len(fields)} fields"
                )
            try:
                vec = np.array([float(v) for v in fields[1:]])
            except ValueError:
                raise ParseError(path, line_no, "non-numeric embedding value") from None
            vectors[fields[0]] = vec
        if len(vectors) != n_words:
            raise ParseError(
                path, line_no, f"header promised {n_words} words, file has {len(vectors)}"
            )
    return EmbeddingTable(dim=dim, vectors=vectors)


def embed_titles(model: TfidfModel, emb: EmbeddingTable, token_lists) -> np.ndarray:
    """TF-IDF-weighted sum of token embeddings per title, L2-normalized.

    Tokens outside the TF-IDF vocabulary or without an embedding are
    skipped; titles with nothing left produce an all-zero row.
    """
    out = np.zeros((len(token_lists), emb.dim))
    for i, tokens in enumerate(token_lists):
        acc = np.zeros(emb.dim)
        counts: Counter[str] = Counter(t for t in tokens if t in model.word_index)
        for t, c in counts.items():
            vec = emb.get(t)
            if vec is None:
                continue
            acc += c * model.idf[model.word_index[t]] * vec
        norm = np.linalg.norm(acc)
        if norm > 0:
            out[i] = acc / norm
    return out


@dataclass(frozen=True)
class TitleFeatures:
    """Both title representations for one document set, rows aligned."""

    tfidf_sparse: sp.csr_matrix
    embedded: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.tfidf_sparse.shape[0]


def build_title_features(model: TfidfModel, emb: EmbeddingTable, token_lists) -> TitleFeatures:
    return TitleFeatures(
        tfidf_sparse=transform_tfidf(model, token_lists),
        embedded=embed_titles(model, emb, token_lists),
    )
