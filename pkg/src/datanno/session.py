"""Annotation campaign state: batches, submissions, training, persistence.

A session owns the corpus, the cluster index, the sampler bookkeeping, the
labeled pool, and the latest model snapshot. All mutations go through one
lock; training consumes immutable copies of the pools and publishes its
snapshot (plus fresh uncertainty scores) atomically between mutations.
"""

from __future__ import annotations

import json
import threading
import zipfile
from collections import Counter
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import Optional, Union

from .clustering import build_index
from .corpus import (
    ATTRIBUTE_VALUE,
    Corpus,
    DelimiterConfig,
    LinearizedData,
    StructuredRecord,
    TextLabel,
    TokenizerConfig,
    Vocab,
    linearize,
    parse_corpus,
    record_id_key,
    serialize_corpus,
    serialize_record,
    tokenize,
    train_bpe,
)
from .quality import (
    QualityAccumulator,
    QualityReport,
    StoppingThresholds,
    should_stop,
)
from .sampler import Batch, SamplerState, next_batch, random_batch
from .scorer import (
    ModelConfig,
    Seq2SeqModel,
    TrainConfig,
    build_model_vocab,
    model_from_bytes,
    model_to_bytes,
    score_batch,
    train_round_trip,
)
from .suggester import LabeledPool, predict_all, suggest

ARCHIVE_FORMAT = 1
DEFAULT_RETRAIN_INTERVAL = 50
DEFAULT_K = 5


@dataclass(frozen=True)
class SessionConfig:
    delim: DelimiterConfig = DelimiterConfig()
    tok: TokenizerConfig = TokenizerConfig()
    kind: str = ATTRIBUTE_VALUE
    k: int = DEFAULT_K
    seed: int = 0
    retrain_interval: int = DEFAULT_RETRAIN_INTERVAL
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    thresholds: StoppingThresholds = StoppingThresholds()
    background_training: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.retrain_interval < 1:
            raise ValueError("retrain_interval must be >= 1")


@dataclass
class TrainingStatus:
    state: str = "idle"  # idle | running | failed
    progress: float = 0.0
    reason: str = ""


@dataclass(frozen=True)
class ExportBundle:
    """Annotated and predicted halves of the corpus, plus a quality echo."""

    annotated: tuple[tuple[StructuredRecord, TextLabel, str], ...]
    predicted: tuple[tuple[StructuredRecord, TextLabel], ...]
    report: QualityReport
    config: dict

    def __post_init__(self):
        ids = [r.id for r, *_ in self.annotated] + [r.id for r, _ in self.predicted]
        if len(ids) != len(set(ids)):
            raise ValueError("record exported twice")

    def to_lines(self, delim: DelimiterConfig = DelimiterConfig(), kind: str = ATTRIBUTE_VALUE) -> str:
        """Line-delimited ``data<TAB>label<TAB>source`` in corpus order.

        Ids are carried as a leading id pair whenever they differ from the
        line position, so the text re-imports losslessly.
        """
        by_id: dict[str, tuple[StructuredRecord, str, str]] = {}
        for rec, lab, source in self.annotated:
            by_id[rec.id] = (rec, lab.text, source)
        for rec, lab in self.predicted:
            by_id[rec.id] = (rec, lab.text, "predicted")
        ordered = sorted(by_id.values(), key=lambda t: record_id_key(t[0].id))
        lines = [] if kind == ATTRIBUTE_VALUE else [f"#kind={kind}"]
        for idx, (rec, text, source) in enumerate(ordered):
            data = serialize_record(rec, delim)
            if rec.kind == ATTRIBUTE_VALUE and rec.id != str(idx):
                sep = delim.attribute_value_separator
                data = f"id{sep}{rec.id}{delim.pair_delimiter}{data}"
            lines.append(f"{data}\t{text}\t{source}")
        return "\n".join(lines) + ("\n" if lines else "")


def _report_to_dict(report: QualityReport) -> dict:
    return {
        "unique_tokens": report.unique_tokens,
        "unique_trigrams": report.unique_trigrams,
        "shannon_token_entropy": report.shannon_token_entropy,
        "conditional_bigram_entropy": report.conditional_bigram_entropy,
        "ttr": report.ttr,
        "msttr": report.msttr,
        "labeled_count": report.labeled_count,
        "total_tokens": report.total_tokens,
        "per_signature_coverage": dict(report.per_signature_coverage),
    }


def _report_from_dict(d: dict) -> QualityReport:
    return QualityReport(**d)


class Session:
    """Single-writer annotation session."""

    def __init__(self, corpus: Corpus, config: SessionConfig = SessionConfig()):
        if config.tok.mode == "bpe" and config.tok.bpe_merges is None:
            texts = [v for r in corpus for _, v in r.pairs]
            texts += [r.gold_label for r in corpus if r.gold_label]
            merges = train_bpe(texts, config.tok.bpe_vocab_size)
            config = SessionConfig(
                **{**config.__dict__, "tok": config.tok.with_merges(merges)}
            )
        self.corpus = corpus
        self.config = config
        self._by_id = {r.id: r for r in corpus}
        self.linearized: dict[str, LinearizedData] = {
            r.id: linearize(r, config.delim, config.tok) for r in corpus
        }
        self.data_vocab = Vocab.build([self.linearized[r.id].tokens for r in corpus])
        gold_streams = [
            tokenize(r.gold_label, config.tok) for r in corpus if r.gold_label
        ]
        model_vocab = build_model_vocab(
            [self.linearized[r.id].tokens for r in corpus], gold_streams
        )
        index = build_index(
            corpus,
            config.k,
            config.seed,
            delim=config.delim,
            tok=config.tok,
            vocab=self.data_vocab,
            linearized=self.linearized,
        )
        self.sampler = SamplerState(index=index, rng_seed=config.seed)
        self.model = Seq2SeqModel(model_vocab, config.model, seed=config.seed)
        self.labels: dict[str, TextLabel] = {}
        self._sig_by_id = {
            m: sig for sig, subs in index.groups.items() for sc in subs for m in sc.member_ids
        }
        self._sig_total = Counter(self._sig_by_id.values())
        self._sig_done: Counter[str] = Counter()
        self._quality = QualityAccumulator()
        self.history: list[tuple[int, QualityReport]] = []
        self.status = TrainingStatus()
        self.last_trace: list = []
        self._labels_since_training = 0
        self._draws = 0
        self._issued_suggestions: dict[str, Optional[str]] = {}
        self._lock = threading.RLock()
        self._train_thread: Optional[threading.Thread] = None

    # -- introspection ------------------------------------------------------

    @property
    def index(self):
        return self.sampler.index

    def unlabeled_ids(self) -> list[str]:
        return [r.id for r in self.corpus if r.id not in self.labels]

    def labeled_count(self) -> int:
        return len(self.labels)

    def _pool(self) -> LabeledPool:
        return LabeledPool.from_labels(
            list(self.labels.values()), self.linearized, self.data_vocab
        )

    def _coverage(self) -> dict[str, float]:
        return {
            sig: self._sig_done[sig] / total for sig, total in self._sig_total.items()
        }

    def _fresh_report(self) -> QualityReport:
        return self._quality.report(
            labeled_count=len(self.labels),
            per_signature_coverage=self._coverage(),
        )

    def report(self) -> QualityReport:
        with self._lock:
            return self.history[-1][1] if self.history else self._fresh_report()

    def stats(self) -> dict:
        """Flat key-value snapshot for the stats endpoint and CLI."""
        with self._lock:
            rep = self.report()
            stop, reason = should_stop(rep, self.config.thresholds)
            flat = rep.to_flat()
            flat.update(
                {
                    "corpus_size": len(self.corpus),
                    "unlabeled_count": len(self.corpus) - len(self.labels),
                    "model_version": self.model.snapshot_version,
                    "training.state": self.status.state,
                    "training.progress": self.status.progress,
                    "training.reason": self.status.reason,
                    "training.until_next": min(
                        1.0, self._labels_since_training / self.config.retrain_interval
                    ),
                    "should_stop": stop,
                    "stop_reason": reason,
                }
            )
            return flat

    # -- the annotation loop -------------------------------------------------

    def request_batch(self, size: int, strategy: str = "sampler") -> Batch:
        """Next batch with retrieval suggestions attached (none while the
        labeled pool is empty)."""
        if size < 1:
            raise ValueError("size must be >= 1")
        if strategy not in ("sampler", "random"):
            raise ValueError(f"unknown strategy {strategy!r}")
        with self._lock:
            if strategy == "sampler":
                batch = next_batch(self.sampler, size)
            else:
                batch = random_batch(
                    self.sampler, size, seed=self.sampler.rng_seed + self._draws
                )
                self._draws += 1
            pool = self._pool()
            by_id: dict[str, TextLabel] = {}
            for rid in batch.ids():
                sug = (
                    suggest(self.linearized[rid], pool, self.data_vocab)
                    if len(pool)
                    else None
                )
                self._issued_suggestions[rid] = sug.text if sug is not None else None
                if sug is not None:
                    by_id[rid] = sug
            return batch.with_suggestions(by_id)

    def submit_label(self, record_id: str, text: str) -> TextLabel:
        """Record one annotation; may kick off background training."""
        with self._lock:
            if record_id not in self._by_id:
                raise ValueError(f"unknown id {record_id!r}")
            if record_id in self.labels:
                raise ValueError(f"already labeled: {record_id!r}")
            issued = self._issued_suggestions.get(record_id)
            if issued is not None:
                source = "suggested_accepted" if text == issued else "suggested_corrected"
            else:
                source = "human"
            label = TextLabel.from_text(record_id, text, self.config.tok, source)
            self.labels[record_id] = label
            self._quality.add(label.tokens)
            self._sig_done[self._sig_by_id[record_id]] += 1
            self._issued_suggestions.pop(record_id, None)
            self.sampler.mark_labeled(record_id)
            self._labels_since_training += 1
            self.history.append((len(self.labels), self._fresh_report()))
            if (
                self._labels_since_training >= self.config.retrain_interval
                and self.status.state != "running"
            ):
                self._launch_training()
            return label

    # -- training ------------------------------------------------------------

    def train_now(self, wait: bool = True) -> None:
        """Force a training round regardless of the label counter."""
        with self._lock:
            if self.status.state == "running":
                raise RuntimeError("training already running")
            self._launch_training()
        if wait:
            self.wait_training()

    def wait_training(self, timeout: Optional[float] = None) -> None:
        thread = self._train_thread
        if thread is not None and thread.is_alive():
            thread.join(timeout)

    def _launch_training(self) -> None:
        # caller holds the lock
        unlabeled = [
            self.linearized[rid]
            for rid in sorted(self.unlabeled_ids(), key=record_id_key)
        ]
        labeled = [(self.linearized[lab.record_id], lab) for lab in self.labels.values()]
        model = self.model
        cfg = self.config.train
        cfg = TrainConfig(**{**cfg.__dict__, "seed": cfg.seed + model.snapshot_version})
        self._labels_since_training = 0
        self.status = TrainingStatus(state="running", progress=0.0)

        def on_epoch(done: int, total: int) -> None:
            with self._lock:
                if self.status.state == "running":
                    self.status.progress = done / total

        def task() -> None:
            try:
                new_model, trace = train_round_trip(
                    model, unlabeled, labeled, cfg, on_epoch=on_epoch
                )
                scores = score_batch(new_model, unlabeled)
                with self._lock:
                    self.model = new_model
                    self.sampler.set_scores({s.record_id: s.score for s in scores})
                    self.last_trace = trace
                    self.status = TrainingStatus(state="idle", progress=1.0)
            except Exception as exc:  # publish the failure, never a partial model
                with self._lock:
                    self.status = TrainingStatus(state="failed", reason=str(exc))

        if self.config.background_training:
            self._train_thread = threading.Thread(target=task, daemon=True)
            self._train_thread.start()
        else:
            task()

    # -- export ----------------------------------------------------------------

    def export(self) -> ExportBundle:
        with self._lock:
            annotated = tuple(
                (self._by_id[rid], lab, lab.source)
                for rid, lab in self.labels.items()
            )
            predicted: tuple = ()
            remaining = self.unlabeled_ids()
            if self.labels and remaining:
                pool = self._pool()
                preds = predict_all(
                    [self.linearized[rid] for rid in remaining], pool, self.data_vocab
                )
                predicted = tuple(
                    (self._by_id[rid], preds[rid]) for rid in remaining
                )
            return ExportBundle(
                annotated=annotated,
                predicted=predicted,
                report=self.report(),
                config=self._config_dict(),
            )

    # -- persistence -------------------------------------------------------------

    def _config_dict(self) -> dict:
        c = self.config
        return {
            "delim": {
                "pair_delimiter": c.delim.pair_delimiter,
                "attribute_tag_delimiter": c.delim.attribute_tag_delimiter,
                "attribute_value_separator": c.delim.attribute_value_separator,
            },
            "tok": {
                "mode": c.tok.mode,
                "bpe_vocab_size": c.tok.bpe_vocab_size,
                "lowercase": c.tok.lowercase,
                "bpe_merges": [list(m) for m in c.tok.bpe_merges] if c.tok.bpe_merges else None,
            },
            "kind": c.kind,
            "k": c.k,
            "seed": c.seed,
            "retrain_interval": c.retrain_interval,
            "model": {
                "dim": c.model.dim,
                "layers": c.model.layers,
                "heads": c.model.heads,
                "ff_dim": c.model.ff_dim,
                "max_len": c.model.max_len,
            },
            "train": {
                "learning_rate": c.train.learning_rate,
                "batch_size": c.train.batch_size,
                "epochs": c.train.epochs,
                "max_len": c.train.max_len,
                "clip_norm": c.train.clip_norm,
                "seed": c.train.seed,
                "cycle_cap": c.train.cycle_cap,
            },
            "thresholds": {
                "min_labeled": c.thresholds.min_labeled,
                "min_msttr": c.thresholds.min_msttr,
                "min_ttr": c.thresholds.min_ttr,
            },
            "background_training": c.background_training,
        }

    @staticmethod
    def _config_from_dict(d: dict) -> SessionConfig:
        merges = d["tok"]["bpe_merges"]
        return SessionConfig(
            delim=DelimiterConfig(**d["delim"]),
            tok=TokenizerConfig(
                mode=d["tok"]["mode"],
                bpe_vocab_size=d["tok"]["bpe_vocab_size"],
                lowercase=d["tok"]["lowercase"],
                bpe_merges=tuple(tuple(m) for m in merges) if merges else None,
            ),
            kind=d["kind"],
            k=d["k"],
            seed=d["seed"],
            retrain_interval=d["retrain_interval"],
            model=ModelConfig(**d["model"]),
            train=TrainConfig(**d["train"]),
            thresholds=StoppingThresholds(**d["thresholds"]),
            background_training=d["background_training"],
        )

    def save(self, path: Union[str, Path]) -> None:
        """Write the whole session as one versioned archive, atomically."""
        with self._lock:
            meta = {
                "format": ARCHIVE_FORMAT,
                "config": self._config_dict(),
                "labels_since_training": self._labels_since_training,
                "draws": self._draws,
            }
            labels = [
                {
                    "record_id": lab.record_id,
                    "text": lab.text,
                    "tokens": list(lab.tokens),
                    "source": lab.source,
                }
                for lab in self.labels.values()
            ]
            history = [
                {"labeled_count": n, "report": _report_to_dict(rep)}
                for n, rep in self.history
            ]
            buf = BytesIO()
            with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
                zf.writestr("meta.json", json.dumps(meta))
                zf.writestr("corpus.txt", serialize_corpus(self.corpus, self.config.delim))
                zf.writestr("sampler.json", json.dumps(self.sampler.to_dict()))
                zf.writestr("labels.json", json.dumps(labels))
                zf.writestr("history.json", json.dumps(history))
                zf.writestr("model.pt", model_to_bytes(self.model))
        target = Path(path)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(buf.getvalue())
        tmp.replace(target)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Session":
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json"))
                if meta.get("format") != ARCHIVE_FORMAT:
                    raise ValueError(
                        f"unsupported session format {meta.get('format')!r}; "
                        f"expected {ARCHIVE_FORMAT}"
                    )
                config = cls._config_from_dict(meta["config"])
                corpus = parse_corpus(
                    zf.read("corpus.txt").decode("utf-8"),
                    delim=config.delim,
                    kind=config.kind,
                )
                session = cls.__new__(cls)
                Session.__init__(session, corpus, config)
                session.sampler = SamplerState.from_dict(
                    json.loads(zf.read("sampler.json"))
                )
                session.labels = {
                    row["record_id"]: TextLabel(
                        record_id=row["record_id"],
                        text=row["text"],
                        tokens=tuple(row["tokens"]),
                        source=row["source"],
                    )
                    for row in json.loads(zf.read("labels.json"))
                }
                for lab in session.labels.values():
                    session._quality.add(lab.tokens)
                    session._sig_done[session._sig_by_id[lab.record_id]] += 1
                session.history = [
                    (row["labeled_count"], _report_from_dict(row["report"]))
                    for row in json.loads(zf.read("history.json"))
                ]
                session.model = model_from_bytes(zf.read("model.pt"))
                session._labels_since_training = meta["labels_since_training"]
                session._draws = meta["draws"]
                return session
        except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
            raise ValueError(
                f"corrupt session file (expected format {ARCHIVE_FORMAT}): {exc}"
            ) from exc


def create_session(
    raw: Union[str, bytes, Corpus], config: SessionConfig = SessionConfig()
) -> Session:
    """Parse a corpus file and stand up a fresh session around it."""
    corpus = raw if isinstance(raw, Corpus) else parse_corpus(
        raw, delim=config.delim, kind=config.kind
    )
    return Session(corpus, config)
