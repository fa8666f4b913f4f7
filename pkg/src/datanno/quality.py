"""Lexical-diversity metrics over the labeled text, plus stopping rules.

All metrics are computed over the single token stream formed by
concatenating label tokens in submission order, so bigrams and trigrams
may span label boundaries. Entropies are reported in bits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .corpus import TextLabel

MSTTR_SEGMENT = 50


@dataclass(frozen=True)
class QualityReport:
    unique_tokens: int
    unique_trigrams: int
    shannon_token_entropy: float
    conditional_bigram_entropy: float
    ttr: float
    msttr: Optional[float]
    labeled_count: int
    total_tokens: int
    per_signature_coverage: Mapping[str, float]

    def to_flat(self) -> dict[str, object]:
        """Flat key-value view; coverage nests as ``coverage.<signature>``."""
        flat: dict[str, object] = {
            "unique_tokens": self.unique_tokens,
            "unique_trigrams": self.unique_trigrams,
            "shannon_token_entropy": self.shannon_token_entropy,
            "conditional_bigram_entropy": self.conditional_bigram_entropy,
            "ttr": self.ttr,
            "msttr": self.msttr,
            "labeled_count": self.labeled_count,
            "total_tokens": self.total_tokens,
        }
        for sig in sorted(self.per_signature_coverage):
            flat[f"coverage.{sig}"] = self.per_signature_coverage[sig]
        return flat

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_flat().items():
            lines.append(f"{key}={'undefined' if value is None else value}")
        return "\n".join(lines)


@dataclass(frozen=True)
class StoppingThresholds:
    min_labeled: Optional[int] = None
    min_msttr: Optional[float] = None
    min_ttr: Optional[float] = None

    def __post_init__(self):
        for name in ("min_labeled", "min_msttr", "min_ttr"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")

    def configured(self) -> tuple[str, ...]:
        out = []
        if self.min_labeled is not None:
            out.append("labeled")
        if self.min_msttr is not None:
            out.append("msttr")
        if self.min_ttr is not None:
            out.append("ttr")
        return tuple(out)


def _entropy_bits(counts: Sequence[int]) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        p = c / total
        h -= p * math.log2(p)
    return h


def _conditional_bigram_entropy(tokens: Sequence[str]) -> float:
    """H(w2 | w1) in bits over adjacent pairs of the stream."""
    if len(tokens) < 2:
        return 0.0
    joint = Counter(zip(tokens, tokens[1:]))
    first = Counter(tokens[:-1])
    n = len(tokens) - 1
    h = 0.0
    for (w1, _), c in joint.items():
        p_joint = c / n
        p_cond = c / first[w1]
        h -= p_joint * math.log2(p_cond)
    return h


def _msttr(tokens: Sequence[str], segment: int) -> Optional[float]:
    """Mean TTR of consecutive full segments; trailing partial discarded."""
    full = len(tokens) // segment
    if full == 0:
        return None
    ratios = []
    for s in range(full):
        seg = tokens[s * segment : (s + 1) * segment]
        ratios.append(len(set(seg)) / segment)
    return sum(ratios) / full


def compute_report(
    labels: Sequence[TextLabel],
    *,
    labeled_count: Optional[int] = None,
    per_signature_coverage: Optional[Mapping[str, float]] = None,
    msttr_segment: int = MSTTR_SEGMENT,
) -> QualityReport:
    """Compute every metric over the concatenated label token stream."""
    if msttr_segment < 1:
        raise ValueError("msttr_segment must be >= 1")
    tokens: list[str] = []
    for lab in labels:
        tokens.extend(lab.tokens)
    total = len(tokens)
    uniq = len(set(tokens))
    trigrams = set(zip(tokens, tokens[1:], tokens[2:]))
    return QualityReport(
        unique_tokens=uniq,
        unique_trigrams=len(trigrams),
        shannon_token_entropy=_entropy_bits(list(Counter(tokens).values())),
        conditional_bigram_entropy=_conditional_bigram_entropy(tokens),
        ttr=(uniq / total) if total else 0.0,
        msttr=_msttr(tokens, msttr_segment),
        labeled_count=len(labels) if labeled_count is None else labeled_count,
        total_tokens=total,
        per_signature_coverage=dict(per_signature_coverage or {}),
    )


class QualityAccumulator:
    """Streaming equivalent of :func:`compute_report`.

    Feeding label token sequences in submission order and calling
    :meth:`report` yields the same numbers as recomputing from scratch,
    but each append costs O(tokens) instead of O(stream).
    """

    def __init__(self, msttr_segment: int = MSTTR_SEGMENT):
        if msttr_segment < 1:
            raise ValueError("msttr_segment must be >= 1")
        self.segment = msttr_segment
        self.total = 0
        self.counts: Counter[str] = Counter()
        self.bigrams: Counter[tuple[str, str]] = Counter()
        self.firsts: Counter[str] = Counter()
        self.trigrams: set[tuple[str, str, str]] = set()
        self._tail: list[str] = []  # growing MSTTR segment, flushed at `segment`
        self._seg_sum = 0.0
        self._seg_n = 0
        self._last2: tuple[str, ...] = ()

    def add(self, tokens: Sequence[str]) -> None:
        for t in tokens:
            self.counts[t] += 1
            self.total += 1
            if self._last2:
                w1 = self._last2[-1]
                self.bigrams[(w1, t)] += 1
                self.firsts[w1] += 1
                if len(self._last2) == 2:
                    self.trigrams.add((self._last2[0], self._last2[1], t))
            self._last2 = (self._last2 + (t,))[-2:]
            self._tail.append(t)
            if len(self._tail) == self.segment:
                self._seg_sum += len(set(self._tail)) / self.segment
                self._seg_n += 1
                self._tail.clear()

    def report(
        self,
        *,
        labeled_count: int,
        per_signature_coverage: Optional[Mapping[str, float]] = None,
    ) -> QualityReport:
        uniq = len(self.counts)
        h_cond = 0.0
        if self.total >= 2:
            n = self.total - 1
            for (w1, _), c in self.bigrams.items():
                h_cond -= (c / n) * math.log2(c / self.firsts[w1])
        return QualityReport(
            unique_tokens=uniq,
            unique_trigrams=len(self.trigrams),
            shannon_token_entropy=_entropy_bits(list(self.counts.values())),
            conditional_bigram_entropy=h_cond,
            ttr=(uniq / self.total) if self.total else 0.0,
            msttr=(self._seg_sum / self._seg_n) if self._seg_n else None,
            labeled_count=labeled_count,
            total_tokens=self.total,
            per_signature_coverage=dict(per_signature_coverage or {}),
        )


def should_stop(
    report: QualityReport, thresholds: StoppingThresholds
) -> tuple[bool, str]:
    """True when every configured threshold is met.

    The reason string names the thresholds that held (when stopping) or
    the ones still unmet (when not). No configured thresholds never stops.
    """
    configured = thresholds.configured()
    if not configured:
        return False, ""
    unmet = []
    if thresholds.min_labeled is not None and report.labeled_count < thresholds.min_labeled:
        unmet.append("labeled")
    if thresholds.min_msttr is not None and (
        report.msttr is None or report.msttr < thresholds.min_msttr
    ):
        unmet.append("msttr")
    if thresholds.min_ttr is not None and report.ttr < thresholds.min_ttr:
        unmet.append("ttr")
    if unmet:
        return False, ",".join(unmet)
    return True, ",".join(configured)
