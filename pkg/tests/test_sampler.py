"""Sampler tests: ranking rules, round-robin traces, and pool properties."""

from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datanno.clustering import build_index
from datanno.corpus import Corpus, StructuredRecord
from datanno.sampler import (
    Batch,
    BatchItem,
    SamplerState,
    next_batch,
    random_batch,
    rank_within_subtypes,
)


def av(rid: str, *pairs: tuple[str, str]) -> StructuredRecord:
    return StructuredRecord(id=rid, kind="attribute_value", pairs=tuple(pairs))


def corpus_of(*recs: StructuredRecord) -> Corpus:
    return Corpus(records=tuple(recs), kind="attribute_value")


def two_by_two_state() -> SamplerState:
    """Two signatures, each with two well-separated sub-clusters of two ids."""
    recs = [
        av("0", ("name", "a")),
        av("1", ("name", "a")),
        av("2", ("name", "b b b b b")),
        av("3", ("name", "b b b b b")),
        av("4", ("food", "p")),
        av("5", ("food", "p")),
        av("6", ("food", "q q q q q")),
        av("7", ("food", "q q q q q")),
    ]
    corpus = corpus_of(*recs)
    return SamplerState(index=build_index(corpus, k=2, seed=0))


def single_cell_state(ids: list[str], scores: dict[str, float]) -> SamplerState:
    corpus = corpus_of(*(av(i, ("name", "x")) for i in ids))
    state = SamplerState(index=build_index(corpus, k=1, seed=0))
    state.set_scores(scores)
    return state


class TestRanking:
    def test_descending_uncertainty(self):
        state = single_cell_state(["A", "B"], {"A": 0.2, "B": 1.5})
        ranked = rank_within_subtypes(state)
        assert list(ranked.values()) == [["B", "A"]]

    def test_no_scores_ascending_ids(self):
        state = single_cell_state(["2", "10", "1"], {})
        ranked = rank_within_subtypes(state)
        assert list(ranked.values()) == [["1", "2", "10"]]

    def test_unscored_after_scored(self):
        state = single_cell_state(["a", "b", "c", "d"], {"c": 0.5, "b": 0.9})
        ranked = rank_within_subtypes(state)
        assert list(ranked.values()) == [["b", "c", "a", "d"]]

    def test_score_tie_breaks_by_id(self):
        state = single_cell_state(["y", "x"], {"x": 1.0, "y": 1.0})
        ranked = rank_within_subtypes(state)
        assert list(ranked.values()) == [["x", "y"]]

    def test_all_labeled_empty(self):
        state = single_cell_state(["a", "b"], {})
        state.mark_labeled("a")
        state.mark_labeled("b")
        assert list(rank_within_subtypes(state).values()) == [[]]


class TestNextBatch:
    def test_one_from_each_of_four_cells(self):
        state = two_by_two_state()
        batch = next_batch(state, 4)
        got = set(batch.ids())
        assert len(got) == 4
        # exactly one id from each sub-cluster pair
        for pair in ({"0", "1"}, {"2", "3"}, {"4", "5"}, {"6", "7"}):
            assert len(got & pair) == 1

    def test_cursor_advances_between_singleton_batches(self):
        state = two_by_two_state()
        first = next_batch(state, 1).ids()
        second = next_batch(state, 1).ids()
        cells = {
            rid: cell
            for cell, ids in rank_within_subtypes(state).items()
            for rid in ids + first + second
            if rid in state.index.members(*cell)
        }
        assert first != second
        assert cells[first[0]] != cells[second[0]]

    def test_oversized_request_returns_all_remaining(self):
        state = two_by_two_state()
        state.mark_labeled("0")
        batch = next_batch(state, 50)
        assert sorted(batch.ids()) == ["1", "2", "3", "4", "5", "6", "7"]

    def test_empty_pool_empty_batch(self):
        state = single_cell_state(["a"], {})
        state.mark_labeled("a")
        assert next_batch(state, 3).ids() == []

    def test_issued_not_reissued_until_relabeled(self):
        state = single_cell_state(["a", "b"], {})
        assert next_batch(state, 1).ids() == ["a"]
        assert next_batch(state, 1).ids() == ["b"]
        assert next_batch(state, 1).ids() == []

    def test_highest_uncertainty_first_within_cell(self):
        state = single_cell_state(["a", "b", "c"], {"a": 0.1, "b": 2.0, "c": 1.0})
        assert next_batch(state, 3).ids() == ["b", "c", "a"]

    def test_size_validation(self):
        with pytest.raises(ValueError):
            next_batch(single_cell_state(["a"], {}), 0)

    def test_persistence_resumes_cursor(self):
        state = two_by_two_state()
        first = next_batch(state, 1).ids()
        # ids were issued but never labeled; a reloaded state may hand them out again
        reloaded = SamplerState.from_dict(state.to_dict())
        assert reloaded.cursor == state.cursor
        assert reloaded.issued == set()
        nxt = next_batch(reloaded, 1).ids()
        assert nxt != first  # cursor moved past the first cell

    def test_duplicate_batch_items_rejected(self):
        with pytest.raises(ValueError):
            Batch(items=(BatchItem("x"), BatchItem("x")))


class TestRandomBatch:
    def test_full_draw_is_permutation(self):
        state = two_by_two_state()
        batch = random_batch(state, 8, seed=3)
        assert sorted(batch.ids()) == [str(i) for i in range(8)]

    def test_same_seed_identical(self):
        a = random_batch(two_by_two_state(), 3, seed=11)
        b = random_batch(two_by_two_state(), 3, seed=11)
        assert a.ids() == b.ids()

    def test_excludes_labeled(self):
        state = two_by_two_state()
        for rid in ("0", "1", "2"):
            state.mark_labeled(rid)
        for seed in range(20):
            fresh = two_by_two_state()
            fresh.labeled_ids = {"0", "1", "2"}
            assert not set(random_batch(fresh, 5, seed).ids()) & {"0", "1", "2"}

    def test_frequency_roughly_uniform(self):
        counts = Counter()
        for seed in range(2000):
            state = single_cell_state(["a", "b", "c", "d"], {})
            counts[random_batch(state, 1, seed).ids()[0]] += 1
        for rid in ("a", "b", "c", "d"):
            assert 440 <= counts[rid] <= 560


# ---- generated-state properties ------------------------------------------

@st.composite
def state_strategy(draw):
    n = draw(st.integers(1, 14))
    recs = []
    for i in range(n):
        shape = draw(st.integers(0, 2))
        if shape == 0:
            pairs = (("name", draw(st.sampled_from(["aa", "bb", "cc cc cc"]))),)
        elif shape == 1:
            pairs = (
                ("name", "x"),
                ("area", draw(st.sampled_from(["north", "south south south"]))),
            )
        else:
            pairs = (("food", draw(st.sampled_from(["p", "q q q", "r"]))),)
        recs.append(av(str(i), *pairs))
    corpus = corpus_of(*recs)
    k = draw(st.integers(1, 3))
    index = build_index(corpus, k=k, seed=draw(st.integers(0, 50)))
    ids = [r.id for r in recs]
    labeled = draw(st.sets(st.sampled_from(ids))) if ids else set()
    scored = draw(st.sets(st.sampled_from(ids))) if ids else set()
    state = SamplerState(index=index, labeled_ids=set(labeled))
    state.set_scores({rid: draw(st.floats(0, 5, allow_nan=False)) for rid in scored})
    return state, set(ids)


class TestProperties:
    @given(state_strategy(), st.integers(1, 6))
    @settings(max_examples=100, deadline=None)
    def test_batches_clean_and_exhaustive(self, sp, size):
        state, all_ids = sp
        unlabeled = all_ids - state.labeled_ids
        seen: list[str] = []
        while True:
            batch = next_batch(state, size)
            if not len(batch):
                break
            ids = batch.ids()
            assert len(ids) <= size
            assert len(set(ids)) == len(ids)
            assert not set(ids) & state.labeled_ids
            seen.extend(ids)
        assert sorted(seen) == sorted(unlabeled)

    @given(state_strategy())
    @settings(max_examples=60, deadline=None)
    def test_fairness_one_per_nonempty_cell(self, sp):
        state, _ = sp
        ranked = rank_within_subtypes(state)
        nonempty = [cell for cell, ids in ranked.items() if ids]
        if not nonempty:
            return
        batch = next_batch(state, len(nonempty))
        per_cell = Counter()
        for rid in batch.ids():
            for cell in ranked:
                if rid in state.index.members(*cell):
                    per_cell[cell] += 1
        assert all(v == 1 for v in per_cell.values())
        assert sum(per_cell.values()) == len(nonempty)

    @given(state_strategy(), st.integers(1, 4))
    @settings(max_examples=60, deadline=None)
    def test_subcluster_order_non_increasing_uncertainty(self, sp, size):
        state, _ = sp
        order: dict[tuple, list[str]] = {c: [] for c in state.index.cells()}
        while True:
            batch = next_batch(state, size)
            if not len(batch):
                break
            for rid in batch.ids():
                for cell in order:
                    if rid in state.index.members(*cell):
                        order[cell].append(rid)
        for seq in order.values():
            scores = [state.scores[r] for r in seq if r in state.scores]
            assert scores == sorted(scores, reverse=True)
            # scored ids always precede unscored ones
            flags = [r in state.scores for r in seq]
            assert flags == sorted(flags, reverse=True)
