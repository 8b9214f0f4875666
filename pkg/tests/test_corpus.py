from collections import Counter
from itertools import combinations

import numpy as np
import pytest

from recbench.corpus import (
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
from recbench.errors import ParseError


def write_dataset(tmp_path, ratings_lines, meta_lines):
    ratings = tmp_path / "ratings.tsv"
    meta = tmp_path / "meta.tsv"
    ratings.write_text("".join(line + "\n" for line in ratings_lines))
    meta.write_text("".join(line + "\n" for line in meta_lines))
    return ratings, meta


def make_corpus(docs):
    """docs: list of (doc_id, year, title, items)."""
    documents = tuple(Document(d, y, t, frozenset(items)) for d, y, t, items in docs)
    items = sorted({it for d in documents for it in d.items})
    return Corpus(documents=documents, item_index={it: i for i, it in enumerate(items)})


class TestLoadCorpus:
    def test_minimal(self, tmp_path):
        ratings, meta = write_dataset(
            tmp_path, ["d1\ti1", "d1\ti2"], ["d1\t2005\tsome title"])
        corpus = load_corpus(ratings, meta)
        assert corpus.n_documents == 1
        assert corpus.n_items == 2
        assert corpus.documents[0].items == {"i1", "i2"}
        assert corpus.documents[0].year == 2005

    def test_document_without_ratings_kept(self, tmp_path):
        ratings, meta = write_dataset(
            tmp_path, ["d1\ti1", "d1\ti2"], ["d1\t2005\ta", "d2\t2006\tb"])
        corpus = load_corpus(ratings, meta)
        assert corpus.n_documents == 2
        assert corpus.documents[1].items == frozenset()

    def test_unknown_doc_listed(self, tmp_path):
        ratings, meta = write_dataset(
            tmp_path, ["d9\ti1", "d1\ti1"], ["d1\t2005\ta"])
        with pytest.raises(ValueError, match="d9"):
            load_corpus(ratings, meta)

    def test_malformed_ratings_line_number(self, tmp_path):
        ratings, meta = write_dataset(
            tmp_path, ["d1\ti1", "not a rating"], ["d1\t2005\ta"])
        with pytest.raises(ParseError, match=":2:"):
            load_corpus(ratings, meta)

    def test_bad_year_rejected(self, tmp_path):
        ratings, meta = write_dataset(tmp_path, [], ["d1\t20x5\ta"])
        with pytest.raises(ParseError, match="4-digit"):
            load_corpus(ratings, meta)

    def test_duplicate_doc_rejected(self, tmp_path):
        ratings, meta = write_dataset(tmp_path, [], ["d1\t2005\ta", "d1\t2006\tb"])
        with pytest.raises(ParseError, match="duplicate"):
            load_corpus(ratings, meta)

    def test_empty_title_allowed(self, tmp_path):
        ratings, meta = write_dataset(tmp_path, ["d1\ti1"], ["d1\t2005\t"])
        corpus = load_corpus(ratings, meta)
        assert corpus.documents[0].title == ""

    def test_duplicate_rating_collapses(self, tmp_path):
        ratings, meta = write_dataset(
            tmp_path, ["d1\ti1", "d1\ti1"], ["d1\t2005\ta"])
        corpus = load_corpus(ratings, meta)
        assert corpus.documents[0].items == {"i1"}


class TestTimeSplit:
    def test_paper_style_split(self):
        corpus = make_corpus([
            ("a", 2009, "", ["i1", "i2"]),
            ("b", 2010, "", ["i1", "i3"]),
            ("c", 2011, "", ["i2", "i3"]),
        ])
        split = time_split(corpus, 2011)
        assert [d.doc_id for d in split.train.documents] == ["a", "b"]
        assert [d.doc_id for d in split.test.documents] == ["c"]

    def test_two_test_years(self):
        corpus = make_corpus([
            ("a", 2011, "", ["i1", "i2"]),
            ("b", 2012, "", ["i1", "i3"]),
            ("c", 2013, "", ["i2", "i3"]),
        ])
        split = time_split(corpus, 2012)
        assert sorted(d.year for d in split.test.documents) == [2012, 2013]

    def test_empty_side_errors(self):
        corpus = make_corpus([("a", 2009, "", ["i1"])])
        with pytest.raises(ValueError, match="test"):
            time_split(corpus, 2020)
        with pytest.raises(ValueError, match="train"):
            time_split(corpus, 2000)

    def test_disjoint_ids(self):
        corpus = make_corpus([(f"d{i}", 2000 + i, "", ["i1", "i2"]) for i in range(8)])
        split = time_split(corpus, 2004)
        train_ids = {d.doc_id for d in split.train.documents}
        test_ids = {d.doc_id for d in split.test.documents}
        assert not train_ids & test_ids


class TestPrune:
    def split_of(self, train_docs, test_docs):
        return SplitCorpus(train=make_corpus(train_docs), test=make_corpus(test_docs),
                           split_year=2010)

    def test_threshold_and_short_document_removal(self):
        # i1 occurs twice, i2 twice, i3 once in train
        split = self.split_of(
            [("a", 2001, "", ["i1", "i2"]), ("b", 2002, "", ["i1", "i2", "i3"])],
            [("t", 2011, "", ["i1", "i2"]), ("u", 2012, "", ["i1", "i3"])],
        )
        pruned, rep_train, rep_test = prune(split, alpha=2)
        assert set(pruned.train.item_index) == {"i1", "i2"}
        # test doc u drops to one item and is removed on the test side
        assert [d.doc_id for d in pruned.test.documents] == ["t"]
        assert rep_train.n_items == rep_test.n_items == 2
        assert rep_train.n_documents == 2
        assert rep_test.n_documents == 1

    def test_step3_applies_to_train_too(self):
        split = self.split_of(
            [("a", 2001, "", ["i1", "i2"]), ("b", 2002, "", ["i1", "i3"]),
             ("c", 2003, "", ["i1", "i2"])],
            [("t", 2011, "", ["i1", "i2"])],
        )
        pruned, _, _ = prune(split, alpha=2)
        # doc b keeps only i1 after vocabulary filtering and is dropped
        assert [d.doc_id for d in pruned.train.documents] == ["a", "c"]

    def test_alpha_one_keeps_all_train_items(self):
        split = self.split_of(
            [("a", 2001, "", ["i1", "i2"]), ("b", 2002, "", ["i3", "i4"])],
            [("t", 2011, "", ["i1", "i3"])],
        )
        pruned, rep_train, _ = prune(split, alpha=1)
        assert set(pruned.train.item_index) == {"i1", "i2", "i3", "i4"}
        assert rep_train.n_items == 4

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(0)
        docs = []
        for i in range(40):
            items = [f"i{j}" for j in rng.choice(15, size=rng.integers(2, 6), replace=False)]
            docs.append((f"d{i}", 2000 + (i % 12), "", items))
        corpus = make_corpus(docs)
        split = time_split(corpus, 2008)
        last_items, last_docs = None, None
        for alpha in (1, 2, 3, 4):
            _, rep_train, _ = prune(split, alpha)
            if last_items is not None:
                assert rep_train.n_items <= last_items
                assert rep_train.n_documents <= last_docs
            last_items, last_docs = rep_train.n_items, rep_train.n_documents

    def test_every_document_keeps_two_items(self):
        rng = np.random.default_rng(1)
        docs = []
        for i in range(30):
            items = [f"i{j}" for j in rng.choice(10, size=rng.integers(2, 5), replace=False)]
            docs.append((f"d{i}", 2000 + (i % 10), "", items))
        split = time_split(make_corpus(docs), 2006)
        pruned, _, _ = prune(split, alpha=3)
        for side in (pruned.train, pruned.test):
            for doc in side.documents:
                assert len(doc.items) >= 2

    def test_density_recomputation(self):
        report = PruningReport(alpha=3, n_items=7, n_nonzeros=21, n_documents=9)
        assert report.density == 21 / (7 * 9)

    def test_empty_train_errors(self):
        split = self.split_of([("a", 2001, "", ["i1", "i2"])],
                              [("t", 2011, "", ["i1", "i2"])])
        with pytest.raises(ValueError, match="alpha=5"):
            prune(split, alpha=5)


class TestToMatrix:
    def test_direct_construction(self):
        corpus = Corpus(
            documents=(Document("d", 2000, "", frozenset({"i0", "i2"})),),
            item_index={"i0": 0, "i1": 1, "i2": 2},
        )
        np.testing.assert_array_equal(to_matrix(corpus).to_dense(), [[1.0, 0.0, 1.0]])

    def test_empty_corpus(self):
        corpus = Corpus(documents=(), item_index={"i0": 0, "i1": 1})
        x = to_matrix(corpus)
        assert (x.n_rows, x.n_cols) == (0, 2)

    def test_shared_column_count(self):
        # two docs share i1: column 1 gets two nonzeros (counted by hand)
        corpus = make_corpus([
            ("a", 2000, "", ["i0", "i1"]),
            ("b", 2001, "", ["i1", "i2"]),
        ])
        dense = to_matrix(corpus).to_dense()
        np.testing.assert_array_equal(dense.sum(axis=0), [1.0, 2.0, 1.0])

    def test_missing_index_entry(self):
        corpus = Corpus(
            documents=(Document("d", 2000, "", frozenset({"raw"})),),
            item_index={"other": 0},
        )
        with pytest.raises(ValueError, match="raw"):
            to_matrix(corpus)


def cooccurrence_by_cluster(ratings_path):
    """(within_total, cross_total) co-occurring pair counts; the cluster of
    an item is encoded in its id prefix."""
    items_by_doc = {}
    for line in ratings_path.read_text().splitlines():
        doc, item = line.split("\t")
        items_by_doc.setdefault(doc, []).append(item)
    within = cross = 0
    for items in items_by_doc.values():
        for a, b in combinations(sorted(items), 2):
            if a.split("i")[0] == b.split("i")[0]:
                within += 1
            else:
                cross += 1
    return within, cross


class TestGenerateSynthetic:
    def test_relatedness_cooccurrence(self, tmp_path):
        ratings, _ = generate_synthetic("relatedness", 5, 10, 10, 2, 0, tmp_path)
        within, cross = cooccurrence_by_cluster(ratings)
        assert within > cross
        assert cross == 0

    def test_diversity_no_within_cluster_cooccurrence(self, tmp_path):
        ratings, _ = generate_synthetic("diversity", 5, 10, 10, 4, 0, tmp_path)
        within, cross = cooccurrence_by_cluster(ratings)
        assert within == 0
        assert cross > 0

    def test_byte_identical_under_seed(self, tmp_path):
        r1, m1 = generate_synthetic("relatedness", 3, 10, 6, 2, 9, tmp_path / "a")
        r2, m2 = generate_synthetic("relatedness", 3, 10, 6, 2, 9, tmp_path / "b")
        assert r1.read_bytes() == r2.read_bytes()
        assert m1.read_bytes() == m2.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        r1, _ = generate_synthetic("relatedness", 3, 10, 6, 2, 0, tmp_path / "a")
        r2, _ = generate_synthetic("relatedness", 3, 10, 6, 2, 1, tmp_path / "b")
        assert r1.read_bytes() != r2.read_bytes()

    def test_infeasible_parameters(self, tmp_path):
        with pytest.raises(ValueError, match="items_per_cluster"):
            generate_synthetic("relatedness", 3, 10, 4, 5, 0, tmp_path)
        with pytest.raises(ValueError, match="n_clusters"):
            generate_synthetic("diversity", 3, 10, 4, 5, 0, tmp_path)
        with pytest.raises(ValueError, match="mode"):
            generate_synthetic("other", 3, 10, 4, 2, 0, tmp_path)
        with pytest.raises(ValueError, match="10 documents"):
            generate_synthetic("relatedness", 1, 5, 4, 2, 0, tmp_path)

    def test_ninety_ten_split_exists(self, tmp_path):
        ratings, meta = generate_synthetic("relatedness", 4, 25, 8, 2, 3, tmp_path)
        corpus = load_corpus(ratings, meta)
        split = time_split(corpus, 2010)
        assert split.test.n_documents == 10
        assert split.train.n_documents == 90

    def test_items_per_doc_respected(self, tmp_path):
        ratings, _ = generate_synthetic("diversity", 6, 5, 3, 3, 4, tmp_path)
        counts = Counter()
        for line in ratings.read_text().splitlines():
            counts[line.split("\t")[0]] += 1
        assert set(counts.values()) == {3}
