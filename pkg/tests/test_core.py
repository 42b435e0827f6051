"""Core types, collapsing, and edit-distance metrics."""

from itertools import groupby

import numpy as np
import pytest

from condctc.core import (
    PosteriorLattice,
    Vocabulary,
    collapse,
    edit_distance,
    error_rate,
    min_frames,
)

A, B, C = 1, 2, 3


def oracle_collapse(path):
    """Independent reference: merge runs with groupby, then drop blanks."""
    return tuple(k for k, _ in groupby(path) if k != 0)


def oracle_edit_distance(ref, hyp):
    """Plain recursive Levenshtein with memoization."""
    memo = {}

    def rec(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        if (i, j) not in memo:
            if ref[i] == hyp[j]:
                memo[(i, j)] = rec(i + 1, j + 1)
            else:
                memo[(i, j)] = 1 + min(rec(i + 1, j), rec(i, j + 1), rec(i + 1, j + 1))
        return memo[(i, j)]

    return rec(0, 0)


class TestCollapse:
    @pytest.mark.parametrize(
        "path,expected",
        [
            ((A, A, 0, B), (A, B)),
            ((0, 0, 0), ()),
            ((A, 0, A), (A, A)),
            ((), ()),
            ((0, A, A, A, 0, 0, B, B, A), (A, B, A)),
        ],
    )
    def test_examples(self, path, expected):
        assert collapse(path) == expected

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            collapse((0, 5), k=3)
        with pytest.raises(ValueError):
            collapse((-1,), k=3)

    def test_matches_oracle_on_random_paths(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            path = tuple(int(v) for v in rng.integers(0, 4, size=rng.integers(0, 12)))
            assert collapse(path) == oracle_collapse(path)
            assert 0 not in collapse(path)

    def test_preimage_members_collapse_back(self):
        # every enumerated member of B^-1(Y) must collapse to exactly Y
        from condctc._enumerate import all_paths, paths_by_collapse

        for k, t in [(2, 4), (3, 5)]:
            paths = all_paths(k, t)
            for y, idx in paths_by_collapse(k, t).items():
                for i in idx:
                    assert oracle_collapse(tuple(paths[i])) == y


class TestMinFrames:
    @pytest.mark.parametrize(
        "labels,expected",
        [((), 0), ((A,), 1), ((A, B), 2), ((A, A), 3), ((A, A, A, B), 6)],
    )
    def test_counts_repeat_separators(self, labels, expected):
        assert min_frames(labels) == expected


class TestEditDistance:
    def test_identical(self):
        assert edit_distance((A, B, C), (A, B, C)) == 0

    def test_against_empty(self):
        assert edit_distance((A, B, C), ()) == 3
        assert edit_distance((), (A, B, C)) == 3

    def test_kitten_sitting(self):
        # classic fixture; oracle gives 3 (2 substitutions + 1 insertion)
        kitten = tuple("kitten".encode())
        sitting = tuple("sitting".encode())
        assert oracle_edit_distance(kitten, sitting) == 3
        assert edit_distance(kitten, sitting) == 3

    def test_matches_oracle_on_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = tuple(int(v) for v in rng.integers(1, 4, size=rng.integers(0, 9)))
            b = tuple(int(v) for v in rng.integers(1, 4, size=rng.integers(0, 9)))
            assert edit_distance(a, b) == oracle_edit_distance(a, b)

    def test_metric_properties(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            seqs = [
                tuple(int(v) for v in rng.integers(1, 4, size=rng.integers(0, 9)))
                for _ in range(3)
            ]
            x, y, z = seqs
            assert edit_distance(x, y) == edit_distance(y, x)
            assert edit_distance(x, x) == 0
            assert (edit_distance(x, y) == 0) == (x == y)
            assert edit_distance(x, z) <= edit_distance(x, y) + edit_distance(y, z)


class TestErrorRate:
    def test_exact_match(self):
        assert error_rate([(A, B)], [(A, B)]) == 0.0

    def test_single_deletion(self):
        assert error_rate([(A, B)], [(A,)]) == 0.5

    def test_multi_utterance(self):
        # edits (0 + 1) over reference length 4
        assert error_rate([(A, B), (C, A)], [(A, B), (C, B)]) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            error_rate([(A,)], [])

    def test_empty_references(self):
        assert error_rate([(), ()], [(), ()]) == 0.0
        assert error_rate([()], [(A,)]) == float("inf")


class TestVocabulary:
    def test_roundtrip(self):
        vocab = Vocabulary.from_labels(["a", "b", "c"])
        assert vocab.size == 4
        assert vocab.num_labels == 3
        assert vocab.blank_id == 0
        assert vocab.encode("a c") == (1, 3)
        assert vocab.decode((1, 3)) == ["a", "c"]

    def test_rejects_blank_in_labels(self):
        vocab = Vocabulary.from_labels(["a"])
        with pytest.raises(ValueError):
            vocab.encode("-")

    @pytest.mark.parametrize(
        "tokens",
        [("-",), ("a", "b"), ("-", "a", "a"), ("-", "")],
    )
    def test_invalid(self, tokens):
        with pytest.raises(ValueError):
            Vocabulary(tokens)


class TestPosteriorLattice:
    def test_valid(self):
        lat = PosteriorLattice(np.array([[0.25, 0.75], [0.5, 0.5]]))
        assert lat.T == 2 and lat.K == 2
        assert not lat.probs.flags.writeable

    @pytest.mark.parametrize(
        "probs",
        [
            np.array([[0.4, 0.4]]),  # bad row sum
            np.array([[1.2, -0.2]]),  # negative entry
            np.ones((0, 2)),  # T = 0
            np.ones((2, 1)),  # K = 1
            np.array([0.5, 0.5]),  # not 2-D
        ],
    )
    def test_invalid(self, probs):
        with pytest.raises(ValueError):
            PosteriorLattice(probs)

    def test_tolerates_small_row_error(self):
        PosteriorLattice(np.array([[0.5 + 4e-7, 0.5]]))
