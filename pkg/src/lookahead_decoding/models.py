"""Step-scorer contract and the two built-in toy language models.

Every decoder in this package talks to a model through one call:
``model.step(prefix)`` returns a natural-log distribution over the whole
vocabulary for the token that follows ``prefix``.  Two concrete models are
provided, both keyed on a bounded context window:

* :class:`TableModel` stores explicit distributions per context.
* :class:`NGramModel` estimates them from counts with add-k smoothing.

Both also implement ``soft_step``, which conditions on positions holding a
probability mixture over tokens instead of a single token.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

NEG_INF = float("-inf")
MAX_VOCAB = 2**16
BOS = "<s>"
EOS = "</s>"


class DecodingError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(DecodingError, ValueError):
    pass


class UnsupportedCapabilityError(DecodingError):
    pass


class ParseError(DecodingError, ValueError):
    """Malformed model, corpus or constraint file.

    ``line`` and ``offset`` locate the problem when it is known.  For JSON
    documents whose syntax is fine but whose content is invalid, ``offset``
    is the index of the offending entry.
    """

    def __init__(self, message: str, *, path=None, line: int | None = None, offset: int | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line
        self.offset = offset


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token strings with a dense id mapping."""

    tokens: tuple[str, ...]
    bos: str = BOS
    eos: str = EOS
    ids: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if len(tokens) > MAX_VOCAB:
            raise InvalidInputError(f"vocabulary too large ({len(tokens)} > {MAX_VOCAB})")
        ids = {tok: i for i, tok in enumerate(tokens)}
        if len(ids) != len(tokens):
            dupes = [t for t, c in Counter(tokens).items() if c > 1]
            raise InvalidInputError(f"duplicate tokens in vocabulary: {dupes}")
        for special in (self.bos, self.eos):
            if special not in ids:
                raise InvalidInputError(f"special token {special!r} missing from vocabulary")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def build(cls, words: Iterable[str], bos: str = BOS, eos: str = EOS) -> "Vocabulary":
        """bos gets id 0, eos id 1, then ``words`` in the given order (duplicates dropped)."""
        seen = dict.fromkeys([bos, eos])
        for w in words:
            seen.setdefault(w, None)
        return cls(tuple(seen), bos=bos, eos=eos)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def bos_id(self) -> int:
        return self.ids[self.bos]

    @property
    def eos_id(self) -> int:
        return self.ids[self.eos]

    def encode(self, words: Iterable[str]) -> tuple[int, ...]:
        try:
            return tuple(self.ids[w] for w in words)
        except KeyError as exc:
            raise InvalidInputError(f"unknown token {exc.args[0]!r}") from None

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


@runtime_checkable
class StepScorer(Protocol):
    """Anything that maps a token-id prefix to next-token log-probabilities."""

    vocab: Vocabulary

    def step(self, prefix: Sequence[int]) -> np.ndarray: ...


def _check_distribution(probs: np.ndarray, bos_id: int, tol: float) -> str | None:
    if probs.ndim != 1:
        return "distribution must be a flat list"
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        return "probabilities must be finite and non-negative"
    if probs[bos_id] != 0:
        return "bos must have probability 0"
    total = float(probs.sum())
    if abs(total - 1.0) > tol:
        return f"probabilities sum to {total!r}, not 1"
    return None


def _to_logprobs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    probs = probs / probs.sum()
    with np.errstate(divide="ignore"):
        out = np.log(probs)
    out.setflags(write=False)
    return out


class ContextModel:
    """Shared machinery for models that only look at the last ``order`` tokens.

    Subclasses implement :meth:`_lookup`, mapping a context tuple of exactly
    ``order`` ids (left-padded with bos) to a read-only logprob vector.
    """

    supports_soft_step = True

    def __init__(self, vocab: Vocabulary, order: int):
        if order < 0:
            raise InvalidInputError("order must be >= 0")
        self.vocab = vocab
        self.order = order

    def _lookup(self, context: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def _context(self, prefix: Sequence[int]) -> tuple[int, ...]:
        n = self.order
        if n == 0:
            return ()
        ctx = tuple(prefix[-n:])
        if len(ctx) < n:
            ctx = (self.vocab.bos_id,) * (n - len(ctx)) + ctx
        return ctx

    def _validate(self, prefix: Sequence[int]) -> None:
        size = len(self.vocab)
        for tok in prefix:
            if not 0 <= tok < size:
                raise InvalidInputError(f"token id {tok} outside vocabulary of size {size}")

    def step(self, prefix: Sequence[int]) -> np.ndarray:
        self._validate(prefix)
        return self._lookup(self._context(prefix))

    def soft_step(self, hard_prefix: Sequence[int], soft_suffix: Sequence[np.ndarray]) -> np.ndarray:
        """Next-token distribution when trailing positions hold token mixtures.

        The result is the mixture-weighted average of the distributions for
        every concrete context the mixtures could produce.  Enumeration is
        exact over the soft positions inside the context window when the
        window is at most two tokens wide.  For wider windows only the last
        soft position is enumerated and earlier soft positions collapse to
        their most likely token.
        """
        self._validate(hard_prefix)
        if not soft_suffix:
            return self.step(hard_prefix)
        n = self.order
        if n == 0:
            return self._lookup(())
        size = len(self.vocab)
        mixtures = [np.asarray(m, dtype=np.float64) for m in soft_suffix]
        for m in mixtures:
            if m.shape != (size,):
                raise InvalidInputError("mixture length must equal vocabulary size")

        # each window slot holds a list of (token, weight) choices
        slots: list[list[tuple[int, float]]] = []
        hard_part = list(hard_prefix)
        positions: list = hard_part + mixtures
        window = positions[-n:]
        if len(window) < n:
            window = [self.vocab.bos_id] * (n - len(window)) + window
        soft_idx = [i for i, p in enumerate(window) if isinstance(p, np.ndarray)]
        enumerate_idx = set(soft_idx if n <= 2 else soft_idx[-1:])
        for i, p in enumerate(window):
            if not isinstance(p, np.ndarray):
                slots.append([(int(p), 1.0)])
            elif i in enumerate_idx:
                nz = np.flatnonzero(p)
                slots.append([(int(t), float(p[t])) for t in nz])
            else:
                slots.append([(int(np.argmax(p)), 1.0)])

        combos = list(itertools.product(*slots))
        if len(combos) == 1 and combos[0] and all(w == 1.0 for _, w in combos[0]):
            return self._lookup(tuple(t for t, _ in combos[0]))
        acc = np.zeros(size)
        for combo in combos:
            weight = math.prod(w for _, w in combo)
            acc += weight * np.exp(self._lookup(tuple(t for t, _ in combo)))
        return _to_logprobs(acc)


class TableModel(ContextModel):
    """Explicit conditional tables; unseen contexts fall back to ``default``."""

    def __init__(self, vocab: Vocabulary, order: int, table: Mapping[tuple[int, ...], np.ndarray], default: np.ndarray):
        super().__init__(vocab, order)
        self.table: dict[tuple[int, ...], np.ndarray] = {}
        for ctx, probs in table.items():
            ctx = tuple(ctx)
            if len(ctx) != order:
                raise InvalidInputError(f"context {ctx} does not have length {order}")
            self.table[ctx] = self._as_logprobs(probs)
        self.default = self._as_logprobs(default)

    def _as_logprobs(self, probs) -> np.ndarray:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (len(self.vocab),):
            raise InvalidInputError("distribution length must equal vocabulary size")
        problem = _check_distribution(probs, self.vocab.bos_id, 1e-6)
        if problem:
            raise InvalidInputError(problem)
        return _to_logprobs(probs)

    def _lookup(self, context):
        return self.table.get(context, self.default)

    @classmethod
    def context_free(cls, vocab: Vocabulary, probs: Mapping[str, float]) -> "TableModel":
        """Order-0 model with one fixed distribution given by token string."""
        row = np.zeros(len(vocab))
        for tok, p in probs.items():
            row[vocab.ids[tok]] = p
        return cls(vocab, 0, {}, row)

    @classmethod
    def uniform(cls, vocab: Vocabulary) -> "TableModel":
        row = np.ones(len(vocab))
        row[vocab.bos_id] = 0.0
        return cls(vocab, 0, {}, row / row.sum())


class NGramModel(ContextModel):
    """Add-k smoothed n-gram model; ``order`` is the number of context tokens.

    The smoothing support is every token except bos, so
    ``p(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k * (|V| - 1))``.
    """

    def __init__(self, vocab: Vocabulary, order: int, counts: Mapping[tuple[tuple[int, ...], int], int], k: float):
        if order < 1:
            raise InvalidInputError("n-gram order must be >= 1")
        if not k > 0 or not math.isfinite(k):
            raise InvalidInputError("smoothing constant k must be positive")
        super().__init__(vocab, order)
        self.k = float(k)
        self.counts: dict[tuple[tuple[int, ...], int], int] = {}
        for (ctx, tok), c in counts.items():
            if c:
                self.counts[(tuple(ctx), int(tok))] = int(c)

        size = len(vocab)
        support = size - 1
        per_context: dict[tuple[int, ...], np.ndarray] = {}
        for (ctx, tok), c in self.counts.items():
            row = per_context.setdefault(ctx, np.zeros(size))
            row[tok] += c
        self._rows = {}
        for ctx, row in per_context.items():
            self._rows[ctx] = self._smooth(row, support)
        self._default = self._smooth(np.zeros(size), support)

    def _smooth(self, row: np.ndarray, support: int) -> np.ndarray:
        probs = (row + self.k) / (row.sum() + self.k * support)
        probs[self.vocab.bos_id] = 0.0
        with np.errstate(divide="ignore"):
            out = np.log(probs)
        out.setflags(write=False)
        return out

    def _lookup(self, context):
        return self._rows.get(context, self._default)

    def prob(self, context: Sequence[int], token: int) -> float:
        """Closed-form add-k probability, computed straight from counts."""
        if token == self.vocab.bos_id:
            return 0.0
        ctx = self._context(context)
        total = sum(c for (cx, _), c in self.counts.items() if cx == ctx)
        return (self.counts.get((ctx, token), 0) + self.k) / (total + self.k * (len(self.vocab) - 1))


# ---------------------------------------------------------------------------
# functional interface


def step(model: StepScorer, prefix: Sequence[int]) -> np.ndarray:
    return model.step(prefix)


def soft_step(model: StepScorer, hard_prefix: Sequence[int], soft_suffix: Sequence[np.ndarray]) -> np.ndarray:
    if not getattr(model, "supports_soft_step", False):
        raise UnsupportedCapabilityError(f"{type(model).__name__} does not support soft steps")
    return model.soft_step(hard_prefix, soft_suffix)


def sequence_logprob(model: StepScorer, tokens: Sequence[int], start: int = 1) -> float:
    """Sum of step log-probabilities for ``tokens[start:]``.

    With the default ``start=1`` this is the log-probability of everything
    after the leading bos.  A larger ``start`` scores only a suffix, i.e.
    the continuation conditioned on a prompt.
    """
    total = 0.0
    for i in range(start, len(tokens)):
        total += float(model.step(tokens[:i])[tokens[i]])
    return total


# ---------------------------------------------------------------------------
# file formats


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc.reason}", path=path, offset=exc.start) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.colno) from None


def _require(doc, key, kind, path):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"missing field {key!r}", path=path)
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(f"field {key!r} has wrong type", path=path)
    return value


def _vocab_from_doc(doc, path) -> Vocabulary:
    words = _require(doc, "vocab", list, path)
    bos = doc.get("bos", BOS)
    eos = doc.get("eos", EOS)
    if not all(isinstance(w, str) for w in words):
        raise ParseError("vocab entries must be strings", path=path)
    # files may list bos/eos explicitly or leave them implied
    try:
        if bos in words and eos in words:
            return Vocabulary(tuple(words), bos, eos)
        return Vocabulary.build(words, bos=bos, eos=eos)
    except InvalidInputError as exc:
        raise ParseError(str(exc), path=path) from None


def load_table_model(path) -> TableModel:
    doc = _read_json(path)
    order = _require(doc, "order", int, path)
    vocab = _vocab_from_doc(doc, path)
    rows = _require(doc, "rows", list, path)
    default = doc.get("default")
    size = len(vocab)

    def parse_probs(raw, where):
        if not isinstance(raw, list) or len(raw) != size:
            raise ParseError(f"expected {size} probabilities", path=path, offset=where)
        probs = np.asarray(raw, dtype=np.float64)
        problem = _check_distribution(probs, vocab.bos_id, 1e-6)
        if problem:
            raise ParseError(problem, path=path, offset=where)
        return probs

    table = {}
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or "context" not in row or "probs" not in row:
            raise ParseError("row needs 'context' and 'probs'", path=path, offset=i)
        ctx_words = row["context"]
        if not isinstance(ctx_words, list) or len(ctx_words) != order:
            raise ParseError(f"context must list {order} tokens", path=path, offset=i)
        try:
            ctx = vocab.encode(ctx_words)
        except InvalidInputError as exc:
            raise ParseError(str(exc), path=path, offset=i) from None
        table[ctx] = parse_probs(row["probs"], i)
    if default is None:
        default_probs = np.ones(size)
        default_probs[vocab.bos_id] = 0.0
        default_probs /= default_probs.sum()
    else:
        default_probs = parse_probs(default, len(rows))
    return TableModel(vocab, order, table, default_probs)


def save_table_model(model: TableModel, path) -> None:
    vocab = model.vocab
    doc = {
        "order": model.order,
        "vocab": list(vocab.tokens),
        "bos": vocab.bos,
        "eos": vocab.eos,
        "rows": [
            {"context": vocab.decode(ctx), "probs": np.exp(lp).tolist()}
            for ctx, lp in sorted(model.table.items())
        ],
        "default": np.exp(model.default).tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_corpus(path, bos: str = BOS, eos: str = EOS) -> list[list[str]]:
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            words = line.split()
            for col, w in enumerate(words):
                if w in (bos, eos):
                    raise ParseError(f"reserved token {w!r} in corpus", path=path, line=lineno, offset=col)
            if words:
                lines.append(words)
    return lines


def ngram_from_sentences(sentences: Sequence[Sequence[str]], order: int, k: float,
                         vocab: Vocabulary | None = None) -> NGramModel:
    if vocab is None:
        vocab = Vocabulary.build(sorted({w for s in sentences for w in s}))
    counts: Counter = Counter()
    bos_id, eos_id = vocab.bos_id, vocab.eos_id
    for sent in sentences:
        ids = (bos_id,) * order + vocab.encode(sent) + (eos_id,)
        for i in range(order, len(ids)):
            counts[(ids[i - order:i], ids[i])] += 1
    return NGramModel(vocab, order, counts, k)


def train_ngram(corpus_path, order: int, k: float) -> NGramModel:
    return ngram_from_sentences(read_corpus(corpus_path), order, k)


def save_ngram(model: NGramModel, path) -> None:
    vocab = model.vocab
    counts = [
        {"context": vocab.decode(ctx), "token": vocab.tokens[tok], "count": c}
        for (ctx, tok), c in sorted(model.counts.items())
    ]
    doc = {"order": model.order, "k": model.k, "vocab": list(vocab.tokens),
           "bos": vocab.bos, "eos": vocab.eos, "counts": counts}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_ngram(path) -> NGramModel:
    doc = _read_json(path)
    order = _require(doc, "order", int, path)
    k = doc.get("k")
    if not isinstance(k, (int, float)) or isinstance(k, bool):
        raise ParseError("field 'k' must be a number", path=path)
    vocab = _vocab_from_doc(doc, path)
    counts = {}
    for i, entry in enumerate(_require(doc, "counts", list, path)):
        try:
            ctx = vocab.encode(entry["context"])
            tok = vocab.ids[entry["token"]]
            c = entry["count"]
        except (KeyError, TypeError, InvalidInputError) as exc:
            raise ParseError(f"bad count entry ({exc})", path=path, offset=i) from None
        if not isinstance(c, int) or isinstance(c, bool) or c < 0 or len(ctx) != order:
            raise ParseError("bad count entry", path=path, offset=i)
        counts[(ctx, tok)] = counts.get((ctx, tok), 0) + c
    try:
        return NGramModel(vocab, order, counts, float(k))
    except InvalidInputError as exc:
        raise ParseError(str(exc), path=path) from None


def load_model(path, kind: str | None = None) -> ContextModel:
    """Load a table or n-gram model, sniffing the format when ``kind`` is None."""
    if kind is None:
        doc = _read_json(path)
        kind = "ngram" if isinstance(doc, dict) and "counts" in doc else "table"
    if kind == "table":
        return load_table_model(path)
    if kind == "ngram":
        return load_ngram(path)
    raise InvalidInputError(f"unknown model type {kind!r}")
