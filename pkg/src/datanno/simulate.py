"""Labeling-strategy simulation.

An oracle annotator replays gold labels through a session under one of
three selection strategies, and retrieval generation quality on a fixed
held-out test set is tracked across label budgets:

* ``sampler`` — cluster round-robin with uncertainty ranking, periodic
  round-trip retraining on the configured schedule;
* ``random``  — uniform selection from the unlabeled pool, no model
  training at all (pure baseline);
* ``all``     — every pool record labeled; budgets are immaterial, so one
  score is reported for each.

Evaluation is retrieval-only: the nearest labeled neighbor's text is the
prediction for each test record, scored with corpus BLEU against the
test gold labels.
"""

from __future__ import annotations

import math
import random
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .corpus import (
    Corpus,
    DelimiterConfig,
    LinearizedData,
    TokenizerConfig,
    linearize,
    parse_corpus,
    tokenize,
)
from .corpus import Vocab
from .quality import QualityReport
from .scorer import ModelConfig, TrainConfig
from .session import Session, SessionConfig
from .suggester import LabeledPool, predict_all

STRATEGIES = ("sampler", "random", "all")

# Small enough to retrain many times on one CPU core, large enough to
# drive uncertainty ranking.
SIM_MODEL = ModelConfig(dim=32, layers=1, heads=2, ff_dim=64, max_len=40)
SIM_TRAIN = TrainConfig(
    learning_rate=0.1,
    batch_size=16,
    epochs=1,
    max_len=40,
    clip_norm=1.0,
    seed=0,
    cycle_cap=128,
)
SIM_RETRAIN_INTERVAL = 400
_NEVER = 10**9  # retrain interval for strategies that skip the scorer


@dataclass(frozen=True)
class SimulationConfig:
    data: Union[str, Path]
    strategy: str = "sampler"
    budgets: tuple[int, ...] = (200, 500, 1000, 2000)
    batch_size: int = 20
    k: int = 5
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    test_data: Optional[Union[str, Path]] = None
    test_fraction: float = 0.2  # used only when test_data is absent
    retrain_interval: int = SIM_RETRAIN_INTERVAL
    model: ModelConfig = SIM_MODEL
    train: TrainConfig = SIM_TRAIN
    delim: DelimiterConfig = field(default_factory=DelimiterConfig)
    tok: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.budgets:
            raise ValueError("no budgets")
        if any(b < 1 for b in self.budgets) or list(self.budgets) != sorted(set(self.budgets)):
            raise ValueError("budgets must be ascending positive label counts")
        if not self.seeds:
            raise ValueError("no seeds")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.test_data is None and not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.retrain_interval < 1:
            raise ValueError("retrain_interval must be >= 1")


@dataclass(frozen=True)
class SimRow:
    strategy: str
    seed: int
    budget: int
    bleu: float
    runtime_s: float
    report: QualityReport


@dataclass(frozen=True)
class SimulationResult:
    rows: tuple[SimRow, ...]

    def to_csv(self) -> str:
        lines = ["strategy,seed,budget,bleu,runtime_s"]
        for r in self.rows:
            lines.append(f"{r.strategy},{r.seed},{r.budget},{r.bleu:.6f},{r.runtime_s:.3f}")
        return "\n".join(lines) + "\n"

    def seed_mean(self, strategy: str, budget: int) -> float:
        scores = [r.bleu for r in self.rows if r.strategy == strategy and r.budget == budget]
        if not scores:
            raise KeyError(f"no rows for {strategy!r} at budget {budget}")
        return sum(scores) / len(scores)


# -- BLEU ---------------------------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(c_len: int, refs: Sequence[Sequence[str]]) -> int:
    return min((abs(len(r) - c_len), len(r)) for r in refs)[1]


def bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
) -> float:
    """Corpus BLEU-4: uniform quarter weights, clipped modified precision,
    brevity penalty exp(1 - r/c) for c <= r.

    Precisions for n >= 2 are add-one smoothed per candidate/reference
    pair before aggregation, which keeps the score invariant under
    repeating the whole corpus.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if not candidates:
        raise ValueError("empty candidate list")
    matches = [0] * 4
    totals = [0] * 4
    c_len = 0
    r_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise ValueError("candidate with no references")
        c_len += len(cand)
        r_len += _closest_ref_len(len(cand), refs)
        for n in range(1, 5):
            c_counts = _ngrams(cand, n)
            clip: Counter = Counter()
            for ref in refs:
                for gram, count in _ngrams(ref, n).items():
                    if count > clip[gram]:
                        clip[gram] = count
            matches[n - 1] += sum(min(c, clip[g]) for g, c in c_counts.items())
            totals[n - 1] += sum(c_counts.values())
            if n >= 2:
                matches[n - 1] += 1
                totals[n - 1] += 1
    if c_len == 0 or matches[0] == 0:
        return 0.0
    log_sum = 0.0
    for m, t in zip(matches, totals):
        log_sum += math.log(m / t)
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_sum / 4.0)


# -- synthetic data -----------------------------------------------------------

_NAMES = (
    "Alimentum", "Aromi", "Cocum", "Zizzi", "Fitzbillies",
    "Cotto", "Strada", "Clowns", "Giraffe", "Eagle",
    "Vaults", "Tuscany", "Adriatic", "Bluebell", "Juniper",
    "Lantern", "Meadow", "Orchid", "Pavilion", "Quartz",
)
_EAT_TYPES = ("pub", "restaurant", "bistro")
_FOODS = ("Thai", "Chinese", "Indian", "French", "Italian", "Japanese", "English", "Mexican")
_AREAS = ("riverside", "city centre")
_PRICES = ("cheap", "moderate", "expensive")
_NEARS = ("the station", "the park", "the cinema", "the harbour")


@dataclass(frozen=True)
class _Pattern:
    weight: int
    # (attribute, value pool, draw weights or None for uniform)
    fields: tuple[tuple[str, tuple[str, ...], Optional[tuple[int, ...]]], ...]
    templates: tuple[str, ...]


# Frequent patterns draw from tiny, heavily skewed value pools, so they
# are full of near-duplicates and a handful of labels exhausts them;
# rare patterns spread over much larger value spaces and carry longer
# realizations, so coverage there keeps paying off.
_PATTERNS = (
    _Pattern(
        weight=36,
        fields=(
            ("name", _NAMES[:3], (8, 3, 1)),
            ("eatType", _EAT_TYPES[:2], (4, 1)),
            ("food", _FOODS[:2], (4, 1)),
        ),
        templates=(
            "{name} is a {eatType} serving {food} food .",
            "{name} , a friendly {eatType} , serves {food} food .",
        ),
    ),
    _Pattern(
        weight=24,
        fields=(
            ("name", _NAMES[3:6], (6, 3, 1)),
            ("eatType", _EAT_TYPES[:2], (4, 1)),
            ("area", _AREAS, (3, 1)),
        ),
        templates=(
            "{name} is a {eatType} located in the {area} .",
            "you will find {name} , a {eatType} , in the {area} .",
        ),
    ),
    _Pattern(
        weight=15,
        fields=(
            ("name", _NAMES[:10], None),
            ("food", _FOODS, None),
            ("priceRange", _PRICES, None),
        ),
        templates=(
            "{name} offers {food} dishes at {priceRange} prices .",
            "expect {priceRange} prices for {food} dishes at {name} .",
        ),
    ),
    _Pattern(
        weight=9,
        fields=(
            ("name", _NAMES[8:], None),
            ("eatType", _EAT_TYPES, None),
            ("food", _FOODS, None),
            ("area", _AREAS, None),
        ),
        templates=(
            "{name} is a {eatType} in the {area} that serves {food} food .",
            "in the {area} , {name} is a {eatType} with {food} food on the menu .",
        ),
    ),
    _Pattern(
        weight=8,
        fields=(
            ("name", _NAMES[8:], None),
            ("food", _FOODS, None),
            ("near", _NEARS, None),
        ),
        templates=(
            "close to {near} , {name} has {food} specialties on offer .",
            "{name} , near {near} , has {food} specialties on offer .",
        ),
    ),
    _Pattern(
        weight=8,
        fields=(
            ("name", _NAMES[8:14], None),
            ("eatType", _EAT_TYPES, None),
            ("food", _FOODS[:4], None),
            ("priceRange", _PRICES, None),
            ("near", _NEARS, None),
        ),
        templates=(
            "{name} is a {priceRange} {eatType} near {near} where the kitchen cooks {food} meals .",
            "near {near} , {name} is a {priceRange} {eatType} whose kitchen cooks {food} meals .",
        ),
    ),
)


def make_synthetic_dataset(n: int, seed: int) -> str:
    """Restaurant-style attribute-value corpus with templated gold labels.

    Six attribute signatures with skewed frequencies; deterministic under
    the seed, returned in the corpus file format (data TAB gold label).
    """
    if n < 100:
        raise ValueError("need at least 100 records")
    rng = random.Random(seed)
    weights = [p.weight for p in _PATTERNS]
    lines = []
    for _ in range(n):
        pat = rng.choices(_PATTERNS, weights=weights)[0]
        values = {
            attr: (rng.choices(pool, weights=w)[0] if w else rng.choice(pool))
            for attr, pool, w in pat.fields
        }
        data = ",".join(f"{attr}:{values[attr]}" for attr, _, _ in pat.fields)
        # Phrasing varies with the venue, not by coin flip, so records with
        # identical attributes always read the same.
        variant = _NAMES.index(values["name"]) % len(pat.templates)
        text = pat.templates[variant].format(**values)
        lines.append(f"{data}\t{text}")
    return "\n".join(lines) + "\n"


# -- the simulation loop ------------------------------------------------------


def _require_gold(records: Sequence, what: str) -> None:
    for r in records:
        if not r.gold_label:
            raise ValueError(f"{what} record {r.id!r} has no gold label")


def _evaluate(
    session: Session,
    pool_lin: dict[str, LinearizedData],
    test_lin: Sequence[LinearizedData],
    test_refs: Sequence[Sequence[Sequence[str]]],
    vocab: Vocab,
) -> float:
    pool = LabeledPool.from_labels(list(session.labels.values()), pool_lin, vocab)
    preds = predict_all(test_lin, pool, vocab)
    cands = [list(preds[d.record_id].tokens) for d in test_lin]
    return bleu(cands, test_refs)


def _run_cell(
    cfg: SimulationConfig,
    seed: int,
    pool_corpus: Corpus,
    pool_lin: dict[str, LinearizedData],
    test_lin: Sequence[LinearizedData],
    test_refs: Sequence[Sequence[Sequence[str]]],
    vocab: Vocab,
) -> list[SimRow]:
    interval = cfg.retrain_interval if cfg.strategy == "sampler" else _NEVER
    session = Session(
        pool_corpus,
        SessionConfig(
            delim=cfg.delim,
            tok=cfg.tok,
            kind=pool_corpus.kind,
            k=cfg.k,
            seed=seed,
            retrain_interval=interval,
            model=cfg.model,
            train=replace(cfg.train, seed=seed),
        ),
    )
    gold = {r.id: r.gold_label for r in pool_corpus}
    start = time.perf_counter()
    rows: list[SimRow] = []

    def checkpoint(budget: int) -> None:
        score = _evaluate(session, pool_lin, test_lin, test_refs, vocab)
        rows.append(
            SimRow(
                strategy=cfg.strategy,
                seed=seed,
                budget=budget,
                bleu=score,
                runtime_s=time.perf_counter() - start,
                report=session.report(),
            )
        )

    if cfg.strategy == "all":
        for r in pool_corpus:
            session.submit_label(r.id, gold[r.id])
        score = _evaluate(session, pool_lin, test_lin, test_refs, vocab)
        elapsed = time.perf_counter() - start
        report = session.report()
        return [
            SimRow(cfg.strategy, seed, b, score, elapsed, report) for b in cfg.budgets
        ]

    remaining = list(cfg.budgets)
    while remaining:
        batch = session.request_batch(cfg.batch_size, strategy=cfg.strategy)
        if not batch.items:
            break
        for item in batch.items:
            session.submit_label(item.record_id, gold[item.record_id])
            if remaining and session.labeled_count() == remaining[0]:
                checkpoint(remaining.pop(0))
            if not remaining:
                break
    return rows


def run_simulation(cfg: SimulationConfig) -> SimulationResult:
    """One strategy, every seed, scores at every budget checkpoint.

    Budgets are checkpoints of a single deterministic labeling run per
    seed: the labeled pool at a smaller budget is exactly the prefix of
    the same run, so per-budget restarts would reproduce the same
    scores. Runtimes are cumulative to each checkpoint.
    """
    data = parse_corpus(
        Path(cfg.data).read_text(encoding="utf-8"), delim=cfg.delim
    )
    if cfg.test_data is not None:
        test_records = list(
            parse_corpus(Path(cfg.test_data).read_text(encoding="utf-8"), delim=cfg.delim)
        )
        pool_records = list(data)
    else:
        held_out = max(1, int(len(data) * cfg.test_fraction))
        if held_out >= len(data):
            raise ValueError("test_fraction leaves no training pool")
        pool_records = list(data)[:-held_out]
        test_records = list(data)[-held_out:]
    _require_gold(pool_records, "pool")
    _require_gold(test_records, "test")
    if cfg.budgets[-1] > len(pool_records):
        raise ValueError(
            f"budget {cfg.budgets[-1]} exceeds training pool size {len(pool_records)}"
        )

    pool_corpus = Corpus(records=tuple(pool_records), kind=data.kind)
    pool_lin = {r.id: linearize(r, cfg.delim, cfg.tok) for r in pool_records}
    # Test records get fresh ids so they can never collide with pool ids.
    test_lin = [
        LinearizedData(
            record_id=f"test-{i}", tokens=linearize(r, cfg.delim, cfg.tok).tokens
        )
        for i, r in enumerate(test_records)
    ]
    test_refs = [[tokenize(r.gold_label, cfg.tok)] for r in test_records]
    # One vocabulary over both sides so unseen test values still vectorize.
    vocab = Vocab.build(
        [lin.tokens for lin in pool_lin.values()] + [lin.tokens for lin in test_lin]
    )

    rows: list[SimRow] = []
    for seed in cfg.seeds:
        rows.extend(_run_cell(cfg, seed, pool_corpus, pool_lin, test_lin, test_refs, vocab))
    return SimulationResult(rows=tuple(rows))
