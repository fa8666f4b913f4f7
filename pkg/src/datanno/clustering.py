"""Bag-of-words vectors and the two-layer attribute-type / sub-type index.

Records are first grouped by their attribute signature (which attribute
names appear), then each group is split into k sub-clusters by Lloyd's
K-means over bag-of-words count vectors. The index drives round-robin
batch sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import (
    Corpus,
    DelimiterConfig,
    LinearizedData,
    StructuredRecord,
    TokenizerConfig,
    Vocab,
    is_attribute_tag,
    linearize,
)

KMEANS_MAX_ITER = 100


class BowVector:
    """Sparse token-count vector with a cached Euclidean norm."""

    __slots__ = ("counts", "norm")

    def __init__(self, counts: Mapping[int, int]):
        self.counts = {t: int(c) for t, c in counts.items() if c}
        self.norm = math.sqrt(sum(c * c for c in self.counts.values()))

    def dot(self, other: "BowVector") -> float:
        if len(self.counts) > len(other.counts):
            self, other = other, self
        return float(
            sum(c * other.counts.get(t, 0) for t, c in self.counts.items())
        )

    def dense(self, dim: int) -> np.ndarray:
        v = np.zeros(dim, dtype=np.float64)
        for t, c in self.counts.items():
            v[t] = c
        return v

    def __eq__(self, other) -> bool:
        return isinstance(other, BowVector) and self.counts == other.counts

    def __repr__(self) -> str:
        return f"BowVector({self.counts})"


def vectorize(d: LinearizedData, vocab: Vocab) -> BowVector:
    """Count token multiplicities of a linearized record."""
    if not d.tokens:
        raise ValueError(f"record {d.record_id!r}: no tokens to vectorize")
    counts: dict[int, int] = {}
    for t in d.tokens:
        i = vocab.id_of(t, strict=vocab.unk_id is None)
        counts[i] = counts.get(i, 0) + 1
    return BowVector(counts)


def cosine(a: BowVector, b: BowVector) -> float:
    """Cosine similarity in [0, 1] for non-negative count vectors."""
    if a.norm == 0.0 or b.norm == 0.0:
        raise ValueError("cosine of zero-norm vector")
    return a.dot(b) / (a.norm * b.norm)


def attribute_signature(record: StructuredRecord, tag_delimiter: str = "__") -> str:
    """Grouping key: sorted de-duplicated attribute names (or graph tags)."""
    if record.kind == "attribute_value":
        names = {a for a, _ in record.pairs}
    else:
        names = {t for t in record.graph_tokens if is_attribute_tag(t, tag_delimiter)}
    return "|".join(sorted(names))


@dataclass(eq=False)
class SubCluster:
    """One K-means cell: its centroid and the record ids it holds."""

    centroid: np.ndarray
    member_ids: tuple[str, ...]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SubCluster)
            and self.member_ids == other.member_ids
            and np.array_equal(self.centroid, other.centroid)
        )


@dataclass(eq=False)
class ClusterIndex:
    """Two-layer partition: signature groups, each split into sub-clusters."""

    groups: dict[str, tuple[SubCluster, ...]]
    k: int
    seed: int

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ClusterIndex)
            and self.k == other.k
            and self.seed == other.seed
            and self.groups == other.groups
        )

    def cells(self) -> list[tuple[str, int]]:
        """Flattened (signature, sub-cluster index) traversal order."""
        return [(sig, i) for sig in self.groups for i in range(len(self.groups[sig]))]

    def members(self, signature: str, sub_idx: int) -> tuple[str, ...]:
        return self.groups[signature][sub_idx].member_ids

    def all_ids(self) -> set[str]:
        return {m for subs in self.groups.values() for sc in subs for m in sc.member_ids}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "groups": {
                sig: [
                    {"centroid": sc.centroid.tolist(), "member_ids": list(sc.member_ids)}
                    for sc in subs
                ]
                for sig, subs in self.groups.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterIndex":
        groups = {
            sig: tuple(
                SubCluster(
                    centroid=np.asarray(sc["centroid"], dtype=np.float64),
                    member_ids=tuple(sc["member_ids"]),
                )
                for sc in subs
            )
            for sig, subs in d["groups"].items()
        }
        return cls(groups=groups, k=d["k"], seed=d["seed"])


def kmeans(
    points: np.ndarray, k: int, seed: int, max_iter: int = KMEANS_MAX_ITER
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Lloyd's K-means with farthest-point seeding.

    The first center is drawn under ``seed``; each further center is the
    point farthest from its nearest chosen center (ties to the lowest
    index). Empty clusters are repaired by moving in the point farthest
    from its own centroid. Returns (labels, centroids).
    """
    n = points.shape[0]
    k = min(k, n)
    if k < 1:
        raise ValueError("k must be >= 1")
    X = points.astype(np.float64, copy=False)

    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    center_idx = [first]
    d2 = ((X - X[first]) ** 2).sum(axis=1)
    while len(center_idx) < k:
        nxt = int(np.argmax(d2))
        center_idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    centroids = X[center_idx].copy()

    labels: Optional[np.ndarray] = None
    for _ in range(max_iter):
        dists = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dists, axis=1)
        _repair_empty(new_labels, dists, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = X[labels == j].mean(axis=0)
    assert labels is not None
    for j in range(k):
        centroids[j] = X[labels == j].mean(axis=0)
    return labels, centroids


def _repair_empty(labels: np.ndarray, dists: np.ndarray, k: int) -> None:
    """Move the point farthest from its own centroid into each empty cluster."""
    n = labels.shape[0]
    own = dists[np.arange(n), labels]
    for j in range(k):
        if (labels == j).any():
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        candidates = np.where(movable, own, -np.inf)
        pick = int(np.argmax(candidates))
        labels[pick] = j
        own[pick] = 0.0


def build_index(
    corpus: Corpus,
    k: int,
    seed: int,
    *,
    delim: DelimiterConfig = DelimiterConfig(),
    tok: TokenizerConfig = TokenizerConfig(),
    vocab: Optional[Vocab] = None,
    linearized: Optional[Mapping[str, LinearizedData]] = None,
) -> ClusterIndex:
    """Group records by attribute signature and K-means each group.

    Each group is split into min(k, group size) sub-clusters; the per-group
    seed is derived from ``seed`` and the group's position so distinct
    groups do not share random draws.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if linearized is None:
        linearized = {r.id: linearize(r, delim, tok) for r in corpus}
    if vocab is None:
        vocab = Vocab.build([linearized[r.id].tokens for r in corpus])

    by_sig: dict[str, list[str]] = {}
    for r in corpus:
        by_sig.setdefault(attribute_signature(r, delim.attribute_tag_delimiter), []).append(r.id)

    groups: dict[str, tuple[SubCluster, ...]] = {}
    for gpos, sig in enumerate(sorted(by_sig)):
        ids = by_sig[sig]
        vectors = [vectorize(linearized[i], vocab) for i in ids]
        X = np.stack([v.dense(len(vocab)) for v in vectors])
        labels, centroids = kmeans(X, k, seed=seed + gpos)
        subs = []
        for j in range(centroids.shape[0]):
            members = tuple(ids[i] for i in range(len(ids)) if labels[i] == j)
            subs.append(SubCluster(centroid=centroids[j], member_ids=members))
        groups[sig] = tuple(subs)
    return ClusterIndex(groups=groups, k=k, seed=seed)
