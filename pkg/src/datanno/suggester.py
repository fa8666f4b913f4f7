"""Retrieval-based label suggestion: nearest labeled neighbor by cosine.

Deliberately an exact exhaustive scan — pools are desk-scale and the
scan doubles as its own specification. Ties go to the smallest record
id under the corpus id ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .clustering import BowVector, cosine, vectorize
from .corpus import LinearizedData, TextLabel, Vocab, record_id_key


@dataclass(frozen=True)
class PoolEntry:
    record_id: str
    vector: BowVector
    label: TextLabel


class LabeledPool:
    """Immutable snapshot of the labeled (data, text) pairs."""

    def __init__(self, entries: Iterable[PoolEntry]):
        self.entries = tuple(entries)
        seen: set[str] = set()
        for e in self.entries:
            if e.record_id in seen:
                raise ValueError(f"duplicate id in pool: {e.record_id!r}")
            seen.add(e.record_id)
            if e.vector.norm == 0.0:
                raise ValueError(f"zero vector in pool: {e.record_id!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_labels(
        cls,
        labels: Iterable[TextLabel],
        linearized: dict[str, LinearizedData],
        vocab: Vocab,
    ) -> "LabeledPool":
        return cls(
            PoolEntry(
                record_id=lab.record_id,
                vector=vectorize(linearized[lab.record_id], vocab),
                label=lab,
            )
            for lab in labels
        )


def best_match(query: BowVector, pool: LabeledPool) -> Optional[tuple[float, str, TextLabel]]:
    """Highest-cosine pool entry as (similarity, record_id, label)."""
    if len(pool) == 0 or query.norm == 0.0:
        return None
    best: Optional[tuple[float, str, TextLabel]] = None
    for e in pool.entries:
        sim = cosine(query, e.vector)
        if (
            best is None
            or sim > best[0]
            or (sim == best[0] and record_id_key(e.record_id) < record_id_key(best[1]))
        ):
            best = (sim, e.record_id, e.label)
    return best


def suggest(d: LinearizedData, pool: LabeledPool, vocab: Vocab) -> Optional[TextLabel]:
    """Label of the most similar labeled record, or None for an empty pool."""
    if len(pool) == 0:
        return None
    found = best_match(vectorize(d, vocab), pool)
    return None if found is None else found[2]


def predict_all(
    queries: Sequence[LinearizedData], pool: LabeledPool, vocab: Vocab
) -> dict[str, TextLabel]:
    """Nearest-neighbor label for every query; requires a non-empty pool."""
    if len(pool) == 0:
        raise ValueError("nothing to predict from")
    out: dict[str, TextLabel] = {}
    for d in queries:
        lab = suggest(d, pool, vocab)
        if lab is not None:
            out[d.record_id] = lab
    return out
