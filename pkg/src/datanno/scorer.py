"""Toy Transformer encoder-decoder used in both directions, plus scoring.

A single parameter set serves data->text and text->data; the direction is
selected by a control token prepended to the encoder input. Training mixes
supervised losses on labeled pairs with a cycle loss on unlabeled data:
decode a text hypothesis without gradient, then teacher-force the model to
reconstruct the original data from it. The per-instance uncertainty score
is the mean per-token cross-entropy (nats) of that reconstruction.

Decoding is greedy everywhere and the optimizer is plain SGD with
gradient-norm clipping, so every run is deterministic under its seed.
"""

from __future__ import annotations

import copy
import io
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import LinearizedData, TextLabel, Vocab

logger = logging.getLogger(__name__)

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
TO_TEXT = "<to_text>"
TO_DATA = "<to_data>"
UNK = "<unk>"

SPECIALS = (PAD, BOS, EOS, TO_TEXT, TO_DATA, UNK)

_SERIAL_FORMAT = 1


def build_model_vocab(
    data_streams: Iterable[Sequence[str]],
    text_streams: Iterable[Sequence[str]] = (),
) -> Vocab:
    """Shared vocabulary over data and text tokens, specials first."""
    streams = list(data_streams) + list(text_streams)
    return Vocab.build(streams, specials=SPECIALS, unk_token=UNK)


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 2
    ff_dim: int = 128
    max_len: int = 64

    def __post_init__(self):
        for name in ("dim", "layers", "heads", "ff_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.dim % self.heads:
            raise ValueError("dim must be divisible by heads")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 8
    epochs: int = 3
    max_len: int = 64
    clip_norm: float = 1.0
    seed: int = 0
    # optional per-epoch cap on cycle-loss instances, for very large pools
    cycle_cap: Optional[int] = None

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "max_len", "clip_norm"):
            if getattr(self, name) < 0 or (name != "epochs" and getattr(self, name) == 0):
                raise ValueError(f"{name} must be positive")
        if self.cycle_cap is not None and self.cycle_cap < 1:
            raise ValueError("cycle_cap must be positive")


@dataclass(frozen=True)
class UncertaintyScore:
    record_id: str
    score: float
    model_version: int

    def __post_init__(self):
        if not math.isfinite(self.score) or self.score < 0:
            raise ValueError(f"invalid score {self.score!r}")


@dataclass
class EpochLosses:
    forward_loss: Optional[float]
    backward_loss: Optional[float]
    cycle_loss: Optional[float]

    def total(self) -> float:
        parts = [v for v in (self.forward_loss, self.backward_loss, self.cycle_loss) if v is not None]
        return sum(parts) / len(parts) if parts else 0.0


class _Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.o = nn.Linear(dim, dim)

    def forward(self, q_in: torch.Tensor, kv_in: torch.Tensor, keep: torch.Tensor) -> torch.Tensor:
        # keep: broadcastable boolean (B, 1, Lq-or-1, Lk); True = attend
        b, lq, _ = q_in.shape
        lk = kv_in.shape[1]
        q = self.q(q_in).view(b, lq, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(kv_in).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(kv_in).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~keep, torch.finfo(scores.dtype).min)
        out = torch.softmax(scores, dim=-1) @ v
        return self.o(out.transpose(1, 2).reshape(b, lq, -1))


class _FeedForward(nn.Module):
    def __init__(self, dim: int, ff_dim: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(dim, ff_dim), nn.ReLU(), nn.Linear(ff_dim, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class _EncoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = _Attention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.ff = _FeedForward(dim, ff_dim)

    def forward(self, x: torch.Tensor, keep: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        x = x + self.attn(h, h, keep)
        return x + self.ff(self.ln2(x))


class _DecoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.self_attn = _Attention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.cross_attn = _Attention(dim, heads)
        self.ln3 = nn.LayerNorm(dim)
        self.ff = _FeedForward(dim, ff_dim)

    def forward(
        self, x: torch.Tensor, memory: torch.Tensor, causal: torch.Tensor, mem_keep: torch.Tensor
    ) -> torch.Tensor:
        h = self.ln1(x)
        x = x + self.self_attn(h, h, causal)
        x = x + self.cross_attn(self.ln2(x), memory, mem_keep)
        return x + self.ff(self.ln3(x))


class Seq2SeqModel(nn.Module):
    """Shared-parameter bidirectional seq2seq with greedy decoding."""

    def __init__(self, vocab: Vocab, config: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__()
        self.vocab = vocab
        self.config = config
        self.snapshot_version = 0
        for tok in SPECIALS:
            if tok not in vocab:
                raise ValueError(f"vocabulary missing special token {tok!r}")
        self.pad_id = vocab.id_of(PAD)
        self.bos_id = vocab.id_of(BOS)
        self.eos_id = vocab.id_of(EOS)
        self.dir_ids = {"to_text": vocab.id_of(TO_TEXT), "to_data": vocab.id_of(TO_DATA)}
        torch.manual_seed(seed)
        d = config.dim
        self.embed = nn.Embedding(len(vocab), d, padding_idx=self.pad_id)
        self.pos = nn.Embedding(config.max_len, d)
        self.enc_layers = nn.ModuleList(
            _EncoderLayer(d, config.heads, config.ff_dim) for _ in range(config.layers)
        )
        self.dec_layers = nn.ModuleList(
            _DecoderLayer(d, config.heads, config.ff_dim) for _ in range(config.layers)
        )
        self.enc_ln = nn.LayerNorm(d)
        self.dec_ln = nn.LayerNorm(d)
        self.out = nn.Linear(d, len(vocab))

    # -- sequence plumbing -------------------------------------------------

    def payload_limit(self) -> int:
        """Longest token payload once the direction and EOS slots are taken."""
        return self.config.max_len - 2

    def _clip(self, ids: list[int], what: str) -> list[int]:
        limit = self.payload_limit()
        if len(ids) > limit:
            logger.warning("truncating %s from %d to %d tokens", what, len(ids), limit)
            return ids[:limit]
        return ids

    def data_ids(self, tokens: Sequence[str]) -> list[int]:
        # strict: the vocabulary must have been built over the corpus
        return self._clip([self.vocab.id_of(t, strict=True) for t in tokens], "data")

    def text_ids(self, tokens: Sequence[str]) -> list[int]:
        return self._clip([self.vocab.id_of(t, strict=False) for t in tokens], "text")

    def _pad_batch(self, seqs: list[list[int]]) -> torch.Tensor:
        width = max(len(s) for s in seqs)
        out = torch.full((len(seqs), width), self.pad_id, dtype=torch.long)
        for i, s in enumerate(seqs):
            out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        return out

    def _embed_in(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.embed(ids) + self.pos(positions)[None, :, :]

    def encode(self, src: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        keep = (src != self.pad_id)[:, None, None, :]
        x = self._embed_in(src)
        for layer in self.enc_layers:
            x = layer(x, keep)
        return self.enc_ln(x), keep

    def decode(self, memory: torch.Tensor, mem_keep: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        lt = tgt_in.shape[1]
        causal = torch.ones(lt, lt, dtype=torch.bool).tril()[None, None, :, :]
        x = self._embed_in(tgt_in)
        for layer in self.dec_layers:
            x = layer(x, memory, causal, mem_keep)
        return self.out(self.dec_ln(x))

    def teacher_forced_logits(
        self, src_payloads: list[list[int]], direction: str, tgt_payloads: list[list[int]]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Logits plus targets (payload + EOS, PAD elsewhere)."""
        d = self.dir_ids[direction]
        src = self._pad_batch([[d] + s + [self.eos_id] for s in src_payloads])
        tgt_in = self._pad_batch([[self.bos_id] + t for t in tgt_payloads])
        targets = self._pad_batch([t + [self.eos_id] for t in tgt_payloads])
        memory, keep = self.encode(src)
        return self.decode(memory, keep, tgt_in), targets

    def greedy_decode(self, src_payloads: list[list[int]], direction: str) -> list[list[int]]:
        """Batched greedy decode; stops rows at EOS, caps at the payload limit."""
        d = self.dir_ids[direction]
        src = self._pad_batch([[d] + s + [self.eos_id] for s in src_payloads])
        memory, keep = self.encode(src)
        n = len(src_payloads)
        ys = torch.full((n, 1), self.bos_id, dtype=torch.long)
        done = torch.zeros(n, dtype=torch.bool)
        for _ in range(self.payload_limit() + 1):
            logits = self.decode(memory, keep, ys)[:, -1, :]
            nxt = logits.argmax(dim=-1)
            nxt[done] = self.pad_id
            done |= nxt == self.eos_id
            ys = torch.cat([ys, nxt[:, None]], dim=1)
            if bool(done.all()):
                break
        out: list[list[int]] = []
        for row in ys[:, 1:].tolist():
            seq = []
            for t in row:
                if t in (self.eos_id, self.pad_id):
                    break
                seq.append(t)
            out.append(seq[: self.payload_limit()])
        return out

    def finite(self) -> bool:
        return all(bool(torch.isfinite(p).all()) for p in self.parameters())


def _mean_ce(logits: torch.Tensor, targets: torch.Tensor, pad_id: int) -> torch.Tensor:
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=pad_id
    )


def _per_example_ce(logits: torch.Tensor, targets: torch.Tensor, pad_id: int) -> torch.Tensor:
    raw = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        targets.reshape(-1),
        ignore_index=pad_id,
        reduction="none",
    ).reshape(targets.shape)
    mask = (targets != pad_id).to(raw.dtype)
    return (raw * mask).sum(dim=1) / mask.sum(dim=1)


# -- public operations -----------------------------------------------------

def reconstruct(model: Seq2SeqModel, d: LinearizedData) -> list[str]:
    """Round trip d -> text hypothesis -> data, both greedy."""
    with torch.no_grad():
        src = model.data_ids(d.tokens)
        t_hat = model.greedy_decode([src], "to_text")[0]
        d_prime = model.greedy_decode([t_hat], "to_data")[0]
    return [model.vocab.token_of(i) for i in d_prime]


def score_batch(
    model: Seq2SeqModel, ds: Sequence[LinearizedData], chunk: int = 128
) -> list[UncertaintyScore]:
    """Uncertainty for many records at once; identical to one-at-a-time."""
    out: list[UncertaintyScore] = []
    with torch.no_grad():
        for start in range(0, len(ds), chunk):
            part = ds[start : start + chunk]
            srcs = [model.data_ids(d.tokens) for d in part]
            t_hats = model.greedy_decode(srcs, "to_text")
            logits, targets = model.teacher_forced_logits(t_hats, "to_data", srcs)
            ces = _per_example_ce(logits, targets, model.pad_id)
            for d, ce in zip(part, ces.tolist()):
                out.append(
                    UncertaintyScore(
                        record_id=d.record_id, score=float(ce), model_version=model.snapshot_version
                    )
                )
    return out


def uncertainty(model: Seq2SeqModel, d: LinearizedData) -> UncertaintyScore:
    """Mean per-token reconstruction cross-entropy (nats) for one record."""
    return score_batch(model, [d])[0]


def train_round_trip(
    model: Seq2SeqModel,
    unlabeled: Sequence[LinearizedData],
    labeled: Sequence[tuple[LinearizedData, TextLabel]],
    cfg: TrainConfig = TrainConfig(),
    on_epoch: Optional[Callable[[int, int], None]] = None,
) -> tuple[Seq2SeqModel, list[EpochLosses]]:
    """Train a copy: supervised on labeled pairs, cycle loss on unlabeled.

    The cycle step decodes a text hypothesis without gradient, then
    teacher-forces the reconstruction of the original data from it. The
    input snapshot is never mutated; the returned one has version + 1.
    """
    if not unlabeled and not labeled:
        raise ValueError("nothing to train on")
    trained = copy.deepcopy(model)
    trained.snapshot_version = model.snapshot_version + 1
    if cfg.epochs == 0:
        return trained, []
    trained.train()
    opt = torch.optim.SGD(trained.parameters(), lr=cfg.learning_rate)
    gen = torch.Generator().manual_seed(cfg.seed)

    sup_src = [trained.data_ids(d.tokens) for d, _ in labeled]
    sup_tgt = [trained.text_ids(t.tokens) for _, t in labeled]
    unsup_src = [trained.data_ids(d.tokens) for d in unlabeled]

    def step(loss: torch.Tensor) -> float:
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(trained.parameters(), cfg.clip_norm)
        opt.step()
        value = float(loss.detach())
        if not math.isfinite(value):
            raise RuntimeError("non-finite loss; snapshot not published")
        return value

    trace: list[EpochLosses] = []
    for _ in range(cfg.epochs):
        f_losses: list[float] = []
        b_losses: list[float] = []
        c_losses: list[float] = []
        if labeled:
            order = torch.randperm(len(labeled), generator=gen).tolist()
            for i in range(0, len(order), cfg.batch_size):
                idx = order[i : i + cfg.batch_size]
                src = [sup_src[j] for j in idx]
                tgt = [sup_tgt[j] for j in idx]
                logits_f, targets_f = trained.teacher_forced_logits(src, "to_text", tgt)
                loss_f = _mean_ce(logits_f, targets_f, trained.pad_id)
                logits_b, targets_b = trained.teacher_forced_logits(tgt, "to_data", src)
                loss_b = _mean_ce(logits_b, targets_b, trained.pad_id)
                step(loss_f + loss_b)
                f_losses.append(float(loss_f.detach()))
                b_losses.append(float(loss_b.detach()))
        if unsup_src:
            order = torch.randperm(len(unsup_src), generator=gen).tolist()
            if cfg.cycle_cap is not None:
                order = order[: cfg.cycle_cap]
            for i in range(0, len(order), cfg.batch_size):
                idx = order[i : i + cfg.batch_size]
                src = [unsup_src[j] for j in idx]
                trained.eval()
                with torch.no_grad():
                    t_hat = trained.greedy_decode(src, "to_text")
                trained.train()
                logits, targets = trained.teacher_forced_logits(t_hat, "to_data", src)
                c_losses.append(step(_mean_ce(logits, targets, trained.pad_id)))
        trace.append(
            EpochLosses(
                forward_loss=sum(f_losses) / len(f_losses) if f_losses else None,
                backward_loss=sum(b_losses) / len(b_losses) if b_losses else None,
                cycle_loss=sum(c_losses) / len(c_losses) if c_losses else None,
            )
        )
        if on_epoch is not None:
            on_epoch(len(trace), cfg.epochs)
    trained.eval()
    if not trained.finite():
        raise RuntimeError("non-finite parameters; snapshot not published")
    return trained, trace


def gradient_check(
    model: Seq2SeqModel,
    batch: Sequence[tuple[LinearizedData, TextLabel]],
    n_samples: int = 64,
    step: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in 64-bit arithmetic on a copy. The loss is the supervised
    forward + backward objective on the given batch.
    """
    if n_samples < 1:
        raise ValueError("empty sample")
    if not batch:
        raise ValueError("empty batch")
    m = copy.deepcopy(model).double()
    m.eval()
    src = [m.data_ids(d.tokens) for d, _ in batch]
    tgt = [m.text_ids(t.tokens) for _, t in batch]

    def loss_value() -> torch.Tensor:
        logits_f, targets_f = m.teacher_forced_logits(src, "to_text", tgt)
        logits_b, targets_b = m.teacher_forced_logits(tgt, "to_data", src)
        return _mean_ce(logits_f, targets_f, m.pad_id) + _mean_ce(logits_b, targets_b, m.pad_id)

    params = [p for p in m.parameters() if p.requires_grad]
    for p in params:
        p.grad = None
    loss_value().backward()

    sizes = [p.numel() for p in params]
    total = sum(sizes)
    gen = torch.Generator().manual_seed(seed)
    picks = torch.randperm(total, generator=gen)[: min(n_samples, total)].tolist()

    worst = 0.0
    with torch.no_grad():
        for flat_idx in picks:
            p_idx, offset = 0, flat_idx
            while offset >= sizes[p_idx]:
                offset -= sizes[p_idx]
                p_idx += 1
            p = params[p_idx]
            flat = p.view(-1)
            orig = float(flat[offset])
            analytic = float(p.grad.view(-1)[offset]) if p.grad is not None else 0.0
            flat[offset] = orig + step
            hi = float(loss_value())
            flat[offset] = orig - step
            lo = float(loss_value())
            flat[offset] = orig
            fd = (hi - lo) / (2 * step)
            err = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
            worst = max(worst, err)
    return worst


# -- snapshot serialization --------------------------------------------------

def model_to_bytes(model: Seq2SeqModel) -> bytes:
    buf = io.BytesIO()
    torch.save(
        {
            "format": _SERIAL_FORMAT,
            "tokens": list(model.vocab.tokens),
            "unk": model.vocab.unk_token,
            "config": {
                "dim": model.config.dim,
                "layers": model.config.layers,
                "heads": model.config.heads,
                "ff_dim": model.config.ff_dim,
                "max_len": model.config.max_len,
            },
            "version": model.snapshot_version,
            "state": model.state_dict(),
        },
        buf,
    )
    return buf.getvalue()


def model_from_bytes(raw: bytes) -> Seq2SeqModel:
    payload = torch.load(io.BytesIO(raw), weights_only=False)
    if payload.get("format") != _SERIAL_FORMAT:
        raise ValueError(f"unsupported snapshot format {payload.get('format')!r}")
    vocab = Vocab(tokens=tuple(payload["tokens"]), unk_token=payload["unk"])
    model = Seq2SeqModel(vocab, ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state"])
    model.snapshot_version = payload["version"]
    model.eval()
    return model
