"""Batch selection: uncertainty-ranked within sub-types, round-robin across.

One id is taken from each sub-cluster before moving to the next, cycling
group-by-group in sorted-signature order, so every attribute pattern keeps
receiving attention. Within a sub-cluster the least-confident (highest
uncertainty) instances surface first; unscored ids queue after scored ones.

Ids handed out in a batch are tracked as issued and not re-issued while the
state lives in memory; the issued set is deliberately not persisted, so
batches that were in flight when a session was saved become available again
after a reload.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .clustering import ClusterIndex
from .corpus import TextLabel, record_id_key


@dataclass(frozen=True)
class BatchItem:
    record_id: str
    suggestion: Optional[TextLabel] = None


@dataclass(frozen=True)
class Batch:
    items: tuple[BatchItem, ...]

    def __post_init__(self):
        ids = [it.record_id for it in self.items]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate ids in batch")

    def ids(self) -> list[str]:
        return [it.record_id for it in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def with_suggestions(self, by_id: dict[str, TextLabel]) -> "Batch":
        return Batch(
            items=tuple(
                BatchItem(record_id=it.record_id, suggestion=by_id.get(it.record_id))
                for it in self.items
            )
        )


@dataclass
class SamplerState:
    """Round-robin bookkeeping owned by a single session writer."""

    index: ClusterIndex
    scores: dict[str, float] = field(default_factory=dict)
    labeled_ids: set[str] = field(default_factory=set)
    cursor: tuple[int, int] = (0, 0)
    rng_seed: int = 0
    issued: set[str] = field(default_factory=set)

    def mark_labeled(self, record_id: str) -> None:
        self.labeled_ids.add(record_id)
        self.issued.discard(record_id)

    def set_scores(self, scores: dict[str, float]) -> None:
        self.scores = dict(scores)

    def _cursor_linear(self) -> int:
        cells = self.index.cells()
        if not cells:
            return 0
        group_sizes: dict[str, int] = {}
        for sig, _ in cells:
            group_sizes[sig] = group_sizes.get(sig, 0) + 1
        sigs = list(dict.fromkeys(sig for sig, _ in cells))
        g, s = self.cursor
        g %= len(sigs)
        linear = sum(group_sizes[sigs[i]] for i in range(g))
        return linear + (s % group_sizes[sigs[g]])

    def _set_cursor_from_linear(self, linear: int) -> None:
        cells = self.index.cells()
        if not cells:
            self.cursor = (0, 0)
            return
        linear %= len(cells)
        sig, sub = cells[linear]
        sigs = list(dict.fromkeys(s for s, _ in cells))
        self.cursor = (sigs.index(sig), sub)

    def to_dict(self) -> dict:
        return {
            "index": self.index.to_dict(),
            "scores": dict(self.scores),
            "labeled_ids": sorted(self.labeled_ids),
            "cursor": list(self.cursor),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerState":
        return cls(
            index=ClusterIndex.from_dict(d["index"]),
            scores={k: float(v) for k, v in d["scores"].items()},
            labeled_ids=set(d["labeled_ids"]),
            cursor=(int(d["cursor"][0]), int(d["cursor"][1])),
            rng_seed=int(d["rng_seed"]),
        )


def rank_within_subtypes(state: SamplerState) -> dict[tuple[str, int], list[str]]:
    """Unlabeled ids per sub-cluster: uncertainty descending, unscored last."""
    ranked: dict[tuple[str, int], list[str]] = {}
    for sig, sub in state.index.cells():
        members = [
            m for m in state.index.members(sig, sub) if m not in state.labeled_ids
        ]
        scored = [m for m in members if m in state.scores]
        unscored = [m for m in members if m not in state.scores]
        scored.sort(key=lambda m: (-state.scores[m], record_id_key(m)))
        unscored.sort(key=record_id_key)
        ranked[(sig, sub)] = scored + unscored
    return ranked


def next_batch(state: SamplerState, size: int) -> Batch:
    """Take the top-ranked id from each sub-cluster in turn, cycling.

    The cursor survives across calls, so coverage resumes where the last
    batch stopped. Exhausted sub-clusters are skipped; an empty candidate
    pool yields an empty batch.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    cells = state.index.cells()
    if not cells:
        return Batch(items=())
    ranked = rank_within_subtypes(state)
    queues = {
        cell: [m for m in ids if m not in state.issued] for cell, ids in ranked.items()
    }
    picked: list[str] = []
    pos = state._cursor_linear()
    empty_streak = 0
    while len(picked) < size and empty_streak < len(cells):
        cell = cells[pos]
        queue = queues[cell]
        if queue:
            picked.append(queue.pop(0))
            empty_streak = 0
        else:
            empty_streak += 1
        pos = (pos + 1) % len(cells)
    state._set_cursor_from_linear(pos)
    state.issued.update(picked)
    return Batch(items=tuple(BatchItem(record_id=r) for r in picked))


def random_batch(state: SamplerState, size: int, seed: int) -> Batch:
    """Uniform draw without replacement from the unissued unlabeled pool."""
    if size < 1:
        raise ValueError("size must be >= 1")
    candidates = sorted(
        (
            m
            for m in state.index.all_ids()
            if m not in state.labeled_ids and m not in state.issued
        ),
        key=record_id_key,
    )
    take = min(size, len(candidates))
    picked = random.Random(seed).sample(candidates, take)
    state.issued.update(picked)
    return Batch(items=tuple(BatchItem(record_id=r) for r in picked))
