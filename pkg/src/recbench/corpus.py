"""Dataset ingestion, time-axis splitting, vocabulary pruning, and a
synthetic dataset generator.

Interchange formats (UTF-8, no headers):
  ratings file: one `doc_id<TAB>item_id` per line
  meta file:    one `doc_id<TAB>year<TAB>title` per line, 4-digit year,
                title free of tabs and newlines (may be empty)
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .linalg import SparseBinaryMatrix

_YEAR_RE = re.compile(r"^\d{4}$")

# Synthetic years: train years stay below the gap, test years above it, so
# any split year in 2009..2011 separates them at roughly 90:10.
_SYNTH_TRAIN_YEARS = tuple(range(2000, 2009))
_SYNTH_TEST_YEARS = (2011, 2012)
_SYNTH_KEYWORDS_PER_CLUSTER = 6
_SYNTH_TITLE_TOKENS = 3


@dataclass(frozen=True)
class Document:
    doc_id: str
    year: int
    title: str
    items: frozenset[str]


@dataclass(frozen=True)
class Corpus:
    """Ordered documents plus a dense item-id -> column-index map."""

    documents: tuple[Document, ...]
    item_index: dict[str, int]

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @property
    def n_nonzeros(self) -> int:
        return sum(len(d.items) for d in self.documents)

    def years(self) -> list[int]:
        return [d.year for d in self.documents]


@dataclass(frozen=True)
class SplitCorpus:
    train: Corpus
    test: Corpus
    split_year: int


@dataclass(frozen=True)
class PruningReport:
    alpha: int
    n_items: int
    n_nonzeros: int
    n_documents: int

    @property
    def density(self) -> float:
        if self.n_items == 0 or self.n_documents == 0:
            return 0.0
        return self.n_nonzeros / (self.n_items * self.n_documents)


def load_corpus(ratings_path, meta_path) -> Corpus:
    """Read the two interchange files into a Corpus.

    Every document in the meta file appears once (documents without
    ratings keep an empty item set); ratings lines referencing unknown
    documents abort the load with all offending ids listed.
    """
    meta_path = Path(meta_path)
    ratings_path = Path(ratings_path)

    order: list[str] = []
    meta: dict[str, tuple[int, str]] = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(meta_path, line_no,
                                 f"expected doc_id<TAB>year<TAB>title, got {len(fields)} fields")
            doc_id, year_text, title = fields
            if not doc_id:
                raise ParseError(meta_path, line_no, "empty doc_id")
            if doc_id in meta:
                raise ParseError(meta_path, line_no, f"duplicate doc_id {doc_id!r}")
            if not _YEAR_RE.match(year_text):
                raise ParseError(meta_path, line_no,
                                 f"year must be a 4-digit integer, got {year_text!r}")
            meta[doc_id] = (int(year_text), title)
            order.append(doc_id)

    items_by_doc: dict[str, set[str]] = {doc_id: set() for doc_id in order}
    all_items: set[str] = set()
    unknown: set[str] = set()
    with open(ratings_path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ParseError(ratings_path, line_no,
                                 f"expected doc_id<TAB>item_id, got {line!r}")
            doc_id, item_id = fields
            if doc_id not in items_by_doc:
                unknown.add(doc_id)
                continue
            items_by_doc[doc_id].add(item_id)
            all_items.add(item_id)
    if unknown:
        listing = ", ".join(sorted(unknown))
        raise ValueError(f"ratings reference doc ids absent from the meta file: {listing}")

    documents = tuple(
        Document(doc_id=doc_id, year=meta[doc_id][0], title=meta[doc_id][1],
                 items=frozenset(items_by_doc[doc_id]))
        for doc_id in order
    )
    item_index = {item: i for i, item in enumerate(sorted(all_items))}
    return Corpus(documents=documents, item_index=item_index)


def time_split(corpus: Corpus, split_year: int) -> SplitCorpus:
    """Partition on the time axis: train years < split_year <= test years."""
    train_docs = tuple(d for d in corpus.documents if d.year < split_year)
    test_docs = tuple(d for d in corpus.documents if d.year >= split_year)
    if not train_docs:
        raise ValueError(f"time split at {split_year} leaves the train side empty")
    if not test_docs:
        raise ValueError(f"time split at {split_year} leaves the test side empty")
    return SplitCorpus(
        train=Corpus(documents=train_docs, item_index=dict(corpus.item_index)),
        test=Corpus(documents=test_docs, item_index=dict(corpus.item_index)),
        split_year=split_year,
    )


def prune(split: SplitCorpus, alpha: int):
    """Vocabulary pruning in three steps.

    (1) keep items occurring at least alpha times across train documents,
    (2) drop out-of-vocabulary items from every document on both sides,
    (3) drop documents (both sides) left with fewer than two items.
    The item index is rebuilt densely over the vocabulary. Returns the
    pruned split plus one PruningReport per side.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    counts: Counter[str] = Counter()
    for doc in split.train.documents:
        counts.update(doc.items)
    vocab = {item for item, c in counts.items() if c >= alpha}
    item_index = {item: i for i, item in enumerate(sorted(vocab))}

    def filter_side(corpus: Corpus) -> Corpus:
        kept = []
        for doc in corpus.documents:
            items = frozenset(it for it in doc.items if it in vocab)
            if len(items) >= 2:
                kept.append(Document(doc.doc_id, doc.year, doc.title, items))
        return Corpus(documents=tuple(kept), item_index=dict(item_index))

    train = filter_side(split.train)
    test = filter_side(split.test)
    if not train.documents:
        raise ValueError(f"pruning with alpha={alpha} removed every training document")

    def report(corpus: Corpus) -> PruningReport:
        return PruningReport(
            alpha=alpha,
            n_items=len(vocab),
            n_nonzeros=corpus.n_nonzeros,
            n_documents=corpus.n_documents,
        )

    pruned = SplitCorpus(train=train, test=test, split_year=split.split_year)
    return pruned, report(train), report(test)


def to_matrix(corpus: Corpus) -> SparseBinaryMatrix:
    """Binary document-item matrix in document order.

    Requires a dense item index covering every document's items (the
    post-prune state).
    """
    rows = []
    for doc in corpus.documents:
        try:
            rows.append(sorted(corpus.item_index[item] for item in doc.items))
        except KeyError as exc:
            raise ValueError(
                f"document {doc.doc_id!r} holds item {exc.args[0]!r} missing from the item index"
            ) from None
    return SparseBinaryMatrix.from_rows(rows, corpus.n_items)


def generate_synthetic(mode: str, n_clusters: int, docs_per_cluster: int,
                       items_per_cluster: int, items_per_doc: int, seed: int,
                       out_dir) -> tuple[Path, Path]:
    """Write a synthetic ratings/meta pair and return their paths.

    relatedness: every document draws a ring-contiguous block of
    items_per_doc items from a single cluster (block offsets are multiples
    of items_per_doc), and its title samples from that cluster's keyword
    pool. Items of one document always share a cluster, so co-occurring
    items are related by construction.

    diversity: every document draws one item each from items_per_doc
    distinct clusters, so items of the same cluster never co-occur, and
    its title names exactly the clusters drawn from.

    Years are assigned so a 90:10 time split exists (train years 2000-2008,
    test years 2011-2012; every tenth document is a test document). Output
    is byte-identical for identical arguments.
    """
    if mode not in ("relatedness", "diversity"):
        raise ValueError(f"mode must be 'relatedness' or 'diversity', got {mode!r}")
    if min(n_clusters, docs_per_cluster, items_per_cluster, items_per_doc) < 1:
        raise ValueError("all synthetic sizes must be >= 1")
    if mode == "relatedness" and items_per_doc > items_per_cluster:
        raise ValueError(
            f"relatedness mode needs items_per_doc <= items_per_cluster "
            f"({items_per_doc} > {items_per_cluster})"
        )
    if mode == "diversity" and items_per_doc > n_clusters:
        raise ValueError(
            f"diversity mode needs items_per_doc <= n_clusters "
            f"({items_per_doc} > {n_clusters})"
        )
    n_docs = n_clusters * docs_per_cluster
    if n_docs < 10:
        raise ValueError("need at least 10 documents so a 90:10 time split exists")

    rng = np.random.default_rng(seed)
    clusters = np.repeat(np.arange(n_clusters), docs_per_cluster)
    rng.shuffle(clusters)
    n_blocks = math.ceil(items_per_cluster / items_per_doc)

    ratings_lines = []
    meta_lines = []
    for i in range(n_docs):
        doc_id = f"d{i:05d}"
        if i % 10 == 9:
            year = _SYNTH_TEST_YEARS[i % len(_SYNTH_TEST_YEARS)]
        else:
            year = _SYNTH_TRAIN_YEARS[i % len(_SYNTH_TRAIN_YEARS)]
        if mode == "relatedness":
            c = int(clusters[i])
            block = int(rng.integers(n_blocks))
            items = [
                f"c{c:03d}i{(block * items_per_doc + t) % items_per_cluster:03d}"
                for t in range(items_per_doc)
            ]
            pool = [f"c{c:03d}w{t}" for t in range(_SYNTH_KEYWORDS_PER_CLUSTER)]
            picks = rng.choice(_SYNTH_KEYWORDS_PER_CLUSTER,
                               size=min(_SYNTH_TITLE_TOKENS, len(pool)), replace=False)
            tokens = [pool[int(t)] for t in picks]
        else:
            chosen = rng.choice(n_clusters, size=items_per_doc, replace=False)
            items = [f"c{int(c):03d}i{int(rng.integers(items_per_cluster)):03d}"
                     for c in chosen]
            tokens = [f"topic{int(c):03d}" for c in chosen]
        for item in sorted(set(items)):
            ratings_lines.append(f"{doc_id}\t{item}")
        meta_lines.append(f"{doc_id}\t{year}\t{' '.join(tokens)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ratings_path = out_dir / "ratings.tsv"
    meta_path = out_dir / "meta.tsv"
    ratings_path.write_bytes(("\n".join(ratings_lines) + "\n").encode("utf-8"))
    meta_path.write_bytes(("\n".join(meta_lines) + "\n").encode("utf-8"))
    return ratings_path, meta_path
