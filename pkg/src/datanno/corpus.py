"""Parsing, linearization and tokenization of structured-data corpora.

A corpus file holds one record per line, either attribute-value pairs
(``name:Clowns,eatType:pub``) or a graph token stream whose attribute tags
are wrapped by a tag delimiter (``__temp__ 72 __temp__``). Records are
linearized into flat token sequences consumable by the scorer and the
clustering layer.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Literal, Optional, Sequence

ATTRIBUTE_VALUE = "attribute_value"
GRAPH = "graph"
RecordKind = Literal["attribute_value", "graph"]

LabelSource = Literal["human", "suggested_accepted", "suggested_corrected", "predicted"]

# Terminal punctuation detached as separate tokens in word mode.
_TERMINAL_PUNCT = ".,!?;"

# End-of-word marker used internally by the BPE tokenizer.
BPE_EOW = "</w>"

_KIND_HEADER = re.compile(r"^#kind=(\w+)$")


class ParseError(ValueError):
    """Raised for malformed corpus input; carries a 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def record_id_key(record_id: str) -> tuple:
    """Sort key for record ids: numeric ids order numerically, others lexically."""
    if record_id.isdigit():
        return (0, int(record_id), record_id)
    return (1, 0, record_id)


@dataclass(frozen=True)
class DelimiterConfig:
    """Delimiters identifying pairs, attribute tags, and attribute/value splits."""

    pair_delimiter: str = ","
    attribute_tag_delimiter: str = "__"
    attribute_value_separator: str = ":"

    def __post_init__(self):
        for name in ("pair_delimiter", "attribute_tag_delimiter", "attribute_value_separator"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.pair_delimiter == self.attribute_value_separator:
            raise ValueError("pair_delimiter must differ from attribute_value_separator")


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenization granularity: whole words, characters, or byte-pair units.

    BPE mode only tokenizes once a merge table has been attached, either by
    ``with_merges`` or by passing the result of :func:`train_bpe`.
    """

    mode: Literal["word", "char", "bpe"] = "word"
    bpe_vocab_size: int = 200
    lowercase: bool = False
    bpe_merges: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self):
        if self.mode not in ("word", "char", "bpe"):
            raise ValueError(f"unknown tokenizer mode {self.mode!r}")
        if self.bpe_vocab_size < 1:
            raise ValueError("bpe_vocab_size must be positive")

    def with_merges(self, merges: Sequence[tuple[str, str]]) -> "TokenizerConfig":
        return replace(self, bpe_merges=tuple((a, b) for a, b in merges))


@dataclass(frozen=True)
class StructuredRecord:
    """One structured-data instance: attribute-value pairs or a graph token stream."""

    id: str
    kind: RecordKind
    pairs: tuple[tuple[str, str], ...] = ()
    graph_tokens: tuple[str, ...] = ()
    gold_label: Optional[str] = None

    def __post_init__(self):
        if self.kind == ATTRIBUTE_VALUE:
            if not self.pairs:
                raise ValueError(f"record {self.id!r}: attribute_value record needs pairs")
            for a, v in self.pairs:
                if not a:
                    raise ValueError(f"record {self.id!r}: empty attribute name")
                if not v:
                    raise ValueError(f"record {self.id!r}: empty value for attribute {a!r}")
        elif self.kind == GRAPH:
            if not self.graph_tokens:
                raise ValueError(f"record {self.id!r}: graph record needs tokens")
        else:
            raise ValueError(f"record {self.id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Corpus:
    """An immutable set of records with unique ids."""

    records: tuple[StructuredRecord, ...]
    kind: RecordKind

    def __post_init__(self):
        if not self.records:
            raise ParseError("empty corpus")
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise ParseError(f"duplicate id {r.id!r}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[StructuredRecord]:
        return iter(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def get(self, record_id: str) -> StructuredRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise KeyError(record_id)


@dataclass(frozen=True)
class LinearizedData:
    """The flat token sequence of one record under fixed configs."""

    record_id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"record {self.record_id!r}: empty linearization")


@dataclass(frozen=True)
class TextLabel:
    """A text annotation for one record, with provenance."""

    record_id: str
    text: str
    tokens: tuple[str, ...]
    source: LabelSource

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"label for {self.record_id!r} has no tokens")

    @classmethod
    def from_text(
        cls, record_id: str, text: str, tok: TokenizerConfig, source: LabelSource
    ) -> "TextLabel":
        return cls(record_id=record_id, text=text, tokens=tuple(tokenize(text, tok)), source=source)


def parse_corpus(
    raw: bytes | str,
    delim: DelimiterConfig = DelimiterConfig(),
    kind: RecordKind = ATTRIBUTE_VALUE,
) -> Corpus:
    """Parse a corpus file into records.

    One record per line. An optional first line ``#kind=graph`` (or
    ``#kind=attribute_value``) overrides ``kind``. Each data line may carry a
    trailing tab-separated gold label; further tab fields are ignored so that
    an export file re-imports cleanly. In attribute_value lines a leading
    ``id:<value>`` pair names the record explicitly; otherwise ids are the
    0-based position of the record in the file.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not valid UTF-8: {e}") from None
    else:
        text = raw

    lines = text.split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty corpus")

    offset = 0
    m = _KIND_HEADER.match(lines[0].rstrip("\r"))
    if m:
        header_kind = m.group(1)
        if header_kind not in (ATTRIBUTE_VALUE, GRAPH):
            raise ParseError(f"unknown kind {header_kind!r}", line=1)
        kind = header_kind  # type: ignore[assignment]
        offset = 1
    if offset == len(lines):
        raise ParseError("empty corpus")

    records: list[StructuredRecord] = []
    seen_ids: set[str] = set()
    for idx, rawline in enumerate(lines[offset:]):
        lineno = offset + idx + 1
        line = rawline.rstrip("\r")
        if not line.strip():
            raise ParseError("empty line", line=lineno)
        fields = line.split("\t")
        data = fields[0]
        gold = fields[1] if len(fields) > 1 and fields[1] else None

        record_id = str(idx)
        if kind == ATTRIBUTE_VALUE:
            pairs = _parse_pairs(data, delim, lineno)
            if pairs[0][0] == "id":
                record_id = pairs[0][1]
                pairs = pairs[1:]
                if not pairs:
                    raise ParseError("record has no attribute pairs besides id", line=lineno)
            record = StructuredRecord(
                id=record_id, kind=ATTRIBUTE_VALUE, pairs=tuple(pairs), gold_label=gold
            )
        else:
            tokens = tuple(data.split())
            if not tokens:
                raise ParseError("graph record has no tokens", line=lineno)
            record = StructuredRecord(
                id=record_id, kind=GRAPH, graph_tokens=tokens, gold_label=gold
            )
        if record.id in seen_ids:
            raise ParseError(f"duplicate id {record.id!r}", line=lineno)
        seen_ids.add(record.id)
        records.append(record)

    return Corpus(records=tuple(records), kind=kind)


def _parse_pairs(
    data: str, delim: DelimiterConfig, lineno: int
) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for chunk in data.split(delim.pair_delimiter):
        sep_at = chunk.find(delim.attribute_value_separator)
        if sep_at < 0:
            raise ParseError(
                f"missing {delim.attribute_value_separator!r} in pair {chunk!r}", line=lineno
            )
        attr = chunk[:sep_at].strip()
        value = chunk[sep_at + len(delim.attribute_value_separator):].strip()
        if not attr:
            raise ParseError(f"empty attribute in pair {chunk!r}", line=lineno)
        if not value:
            raise ParseError(f"empty value in pair {chunk!r}", line=lineno)
        pairs.append((attr, value))
    return pairs


def serialize_corpus(corpus: Corpus, delim: DelimiterConfig = DelimiterConfig()) -> str:
    """Render a corpus back to its file format; inverse of :func:`parse_corpus`."""
    lines: list[str] = []
    if corpus.kind == GRAPH:
        lines.append("#kind=graph")
    for idx, r in enumerate(corpus.records):
        data = serialize_record(r, delim)
        if r.kind == ATTRIBUTE_VALUE and r.id != str(idx):
            data = f"id{delim.attribute_value_separator}{r.id}{delim.pair_delimiter}{data}"
        if r.gold_label is not None:
            data = f"{data}\t{r.gold_label}"
        lines.append(data)
    return "\n".join(lines) + "\n"


def serialize_record(record: StructuredRecord, delim: DelimiterConfig = DelimiterConfig()) -> str:
    """Render one record's data field (no id, no label)."""
    if record.kind == ATTRIBUTE_VALUE:
        sep = delim.attribute_value_separator
        return delim.pair_delimiter.join(f"{a}{sep}{v}" for a, v in record.pairs)
    return " ".join(record.graph_tokens)


def is_attribute_tag(token: str, tag_delimiter: str = "__") -> bool:
    """True when a graph token is an attribute tag wrapped by the tag delimiter."""
    return (
        len(token) > 2 * len(tag_delimiter)
        and token.startswith(tag_delimiter)
        and token.endswith(tag_delimiter)
    )


def tokenize(text: str, tok: TokenizerConfig) -> list[str]:
    """Split text into tokens at the configured granularity.

    Word mode splits on whitespace and detaches terminal punctuation
    (``. , ! ? ;``) as separate tokens; char mode yields one token per
    non-space character; bpe mode applies the trained merge table greedily
    (word-final units carry a ``</w>`` marker).
    """
    if tok.lowercase:
        text = text.lower()
    if not text.strip():
        raise ValueError("empty text")
    if tok.mode == "word":
        return _word_tokens(text)
    if tok.mode == "char":
        return [c for c in text if not c.isspace()]
    if tok.bpe_merges is None:
        raise ValueError("BPE merge table not trained; call train_bpe first")
    ranks = {pair: i for i, pair in enumerate(tok.bpe_merges)}
    out: list[str] = []
    for word in text.split():
        out.extend(_bpe_encode_word(word, ranks))
    return out


def detokenize(tokens: Sequence[str], tok: TokenizerConfig) -> str:
    """Join tokens back into text. Char mode cannot restore spaces."""
    if tok.mode == "word":
        return " ".join(tokens)
    if tok.mode == "char":
        return "".join(tokens)
    return "".join(tokens).replace(BPE_EOW, " ").rstrip()


def _word_tokens(text: str) -> list[str]:
    out: list[str] = []
    for chunk in text.split():
        tail: list[str] = []
        while chunk and chunk[-1] in _TERMINAL_PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        if chunk:
            out.append(chunk)
        out.extend(reversed(tail))
    return out


def linearize(
    record: StructuredRecord, delim: DelimiterConfig, tok: TokenizerConfig
) -> LinearizedData:
    """Flatten a record into its token sequence.

    Attribute-value records emit, per pair in order, the attribute's tokens,
    the separator token, and the value's tokens, with the pair delimiter
    token between pairs. Graph records tokenize every non-tag token while
    attribute tags pass through intact.
    """
    tokens: list[str] = []
    if record.kind == ATTRIBUTE_VALUE:
        for i, (attr, value) in enumerate(record.pairs):
            if i:
                tokens.append(delim.pair_delimiter)
            tokens.extend(tokenize(attr, tok))
            tokens.append(delim.attribute_value_separator)
            tokens.extend(tokenize(value, tok))
    else:
        for t in record.graph_tokens:
            if is_attribute_tag(t, delim.attribute_tag_delimiter):
                tokens.append(t)
            else:
                tokens.extend(tokenize(t, tok))
    return LinearizedData(record_id=record.id, tokens=tuple(tokens))


def train_bpe(texts: Iterable[str], vocab_size: int) -> tuple[tuple[str, str], ...]:
    """Learn a deterministic BPE merge table from a text collection.

    Repeatedly merges the most frequent adjacent symbol pair (ties broken
    lexicographically) until the symbol inventory reaches ``vocab_size`` or
    no pair occurs at least twice. Word-final symbols carry the ``</w>``
    marker, and marked variants count as distinct alphabet symbols.
    """
    words: Counter[tuple[str, ...]] = Counter()
    for text in texts:
        for word in text.split():
            words[_initial_symbols(word)] += 1
    if not words:
        raise ValueError("empty text collection")

    alphabet = {sym for seq in words for sym in seq}
    if vocab_size <= len(alphabet):
        raise ValueError(
            f"vocab_size {vocab_size} must exceed alphabet size {len(alphabet)}"
        )

    merges: list[tuple[str, str]] = []
    n_symbols = len(alphabet)
    while n_symbols < vocab_size:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for seq, freq in words.items():
            for pair in zip(seq, seq[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < 2:
            break
        pair = best[0]
        merges.append(pair)
        words = Counter({_merge_seq(seq, pair): f for seq, f in words.items()})
        n_symbols += 1
    return tuple(merges)


def _initial_symbols(word: str) -> tuple[str, ...]:
    chars = list(word)
    chars[-1] = chars[-1] + BPE_EOW
    return tuple(chars)


def _merge_seq(seq: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and (seq[i], seq[i + 1]) == pair:
            out.append(seq[i] + seq[i + 1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return tuple(out)


def _bpe_encode_word(word: str, ranks: dict[tuple[str, str], int]) -> tuple[str, ...]:
    seq = _initial_symbols(word)
    while len(seq) > 1:
        best_rank = None
        best_pair = None
        for pair in zip(seq, seq[1:]):
            r = ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
                best_pair = pair
        if best_pair is None:
            break
        seq = _merge_seq(seq, best_pair)
    return seq


class Vocab:
    """Token-to-id mapping shared by clustering and the scorer.

    Ids are assigned to ``specials`` first, in the given order, then to the
    remaining tokens sorted lexicographically, so a vocabulary built twice
    from the same streams is identical.
    """

    def __init__(self, tokens: Sequence[str], unk_token: Optional[str] = None):
        self.tokens: tuple[str, ...] = tuple(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")
        self.unk_token = unk_token
        self.unk_id: Optional[int] = self._ids[unk_token] if unk_token is not None else None

    @classmethod
    def build(
        cls,
        streams: Iterable[Sequence[str]],
        specials: Sequence[str] = (),
        unk_token: Optional[str] = None,
    ) -> "Vocab":
        seen: set[str] = set()
        for stream in streams:
            seen.update(stream)
        ordered = list(specials) + sorted(seen - set(specials))
        return cls(ordered, unk_token=unk_token)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str, strict: bool = True) -> int:
        i = self._ids.get(token)
        if i is not None:
            return i
        if not strict and self.unk_id is not None:
            return self.unk_id
        raise KeyError(f"unknown token {token!r}")

    def ids(self, tokens: Iterable[str], strict: bool = True) -> list[int]:
        return [self.id_of(t, strict=strict) for t in tokens]

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]
