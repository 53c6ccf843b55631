"""Rollout generators that produce the lookahead set for a candidate prefix.

All four strategies return a list of :class:`Continuation` objects.  A
continuation stops early when it emits eos.  When ``remaining`` is given it
is the number of token slots left before the sequence must end; the last
slot may only hold eos, which keeps every rollout inside the decoder's
length budget.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import StepScorer, UnsupportedCapabilityError, soft_step

STRATEGIES = ("greedy", "soft", "beam", "sampling")


@dataclass(frozen=True)
class LookaheadConfig:
    strategy: str = "greedy"
    horizon: int = 0
    rollouts: int = 1
    beam: int = 1
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown lookahead strategy {self.strategy!r}")
        if self.horizon < 0:
            raise ValueError("lookahead horizon must be >= 0")
        if self.rollouts < 1 or self.beam < 1:
            raise ValueError("rollouts and beam must be >= 1")
        if self.strategy in ("greedy", "soft") and self.rollouts != 1:
            raise ValueError(f"{self.strategy} lookahead produces exactly one rollout")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class Continuation:
    tokens: tuple[int, ...] = ()
    step_logprobs: tuple[float, ...] = ()
    soft_steps: tuple[np.ndarray, ...] | None = None

    @property
    def logprob(self) -> float:
        total = 0.0
        for lp in self.step_logprobs:
            total += lp
        return total

    def __len__(self) -> int:
        return len(self.tokens)


def _argmax(logprobs: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest id
    return int(np.argmax(logprobs))


def _steps_available(prefix, horizon, remaining, eos_id):
    if prefix and prefix[-1] == eos_id:
        return 0
    if remaining is not None:
        return max(0, min(horizon, remaining))
    return horizon


def _forced_eos(pos: int, remaining: int | None) -> bool:
    return remaining is not None and pos == remaining - 1


def _masked(logprobs: np.ndarray, bos_id: int, eos_id: int, force_eos: bool) -> np.ndarray:
    if not force_eos:
        return logprobs
    out = np.full_like(logprobs, -np.inf)
    out[eos_id] = logprobs[eos_id]
    return out


def greedy_lookahead(model: StepScorer, prefix: Sequence[int], horizon: int,
                     remaining: int | None = None) -> list[Continuation]:
    vocab = model.vocab
    seq = list(prefix)
    toks, lps = [], []
    for pos in range(_steps_available(prefix, horizon, remaining, vocab.eos_id)):
        dist = model.step(seq)
        if _forced_eos(pos, remaining):
            tok = vocab.eos_id
        else:
            tok = _argmax(dist)
        toks.append(tok)
        lps.append(float(dist[tok]))
        seq.append(tok)
        if tok == vocab.eos_id:
            break
    return [Continuation(tuple(toks), tuple(lps))]


def tempered(logprobs: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(logits / temperature); temperature 0 gives the argmax one-hot."""
    if temperature == 0:
        out = np.zeros_like(logprobs)
        out[_argmax(logprobs)] = 1.0
        return out
    z = logprobs / temperature
    z = z - np.max(z)
    with np.errstate(invalid="ignore"):
        w = np.exp(z)
    w[np.isnan(w)] = 0.0
    return w / w.sum()


def soft_lookahead(model: StepScorer, prefix: Sequence[int], horizon: int, temperature: float,
                   remaining: int | None = None) -> list[Continuation]:
    """Single rollout that feeds tempered token mixtures back into the model.

    The emitted token at each position is the mode of the tempered
    distribution and its recorded log-probability is taken from that
    tempered distribution, not from the model.  At temperature 0 the
    mixtures are one-hot, the tokens coincide with greedy lookahead, and
    every recorded log-probability is 0.
    """
    vocab = model.vocab
    if temperature > 0 and not getattr(model, "supports_soft_step", False):
        raise UnsupportedCapabilityError(f"{type(model).__name__} cannot take soft inputs")
    hard = list(prefix)
    toks, lps, mixtures = [], [], []
    for pos in range(_steps_available(prefix, horizon, remaining, vocab.eos_id)):
        if temperature == 0:
            dist = model.step(hard + toks)
        else:
            dist = soft_step(model, hard, mixtures)
        dist = _masked(dist, vocab.bos_id, vocab.eos_id, _forced_eos(pos, remaining))
        mix = tempered(dist, temperature)
        tok = _argmax(mix)
        toks.append(tok)
        with np.errstate(divide="ignore"):
            lps.append(float(np.log(mix[tok])))
        mixtures.append(mix)
        if tok == vocab.eos_id:
            break
    return [Continuation(tuple(toks), tuple(lps), tuple(mixtures))]


def beam_lookahead(model: StepScorer, prefix: Sequence[int], horizon: int, width: int,
                   remaining: int | None = None) -> list[Continuation]:
    """Width-``width`` beam search for up to ``horizon`` steps.

    Rollouts that hit eos keep their slot and stop growing.  The result is
    ranked by summed log-probability, ties going to the lexicographically
    smaller token sequence.
    """
    vocab = model.vocab
    eos, bos = vocab.eos_id, vocab.bos_id
    steps = _steps_available(prefix, horizon, remaining, eos)
    # entries: (score, tokens, step_logprobs, finished)
    beam = [(0.0, (), (), False)]
    base = tuple(prefix)
    for pos in range(steps):
        if all(done for *_, done in beam):
            break
        pool = []
        force = _forced_eos(pos, remaining)
        for score, toks, lps, done in beam:
            if done:
                pool.append((score, toks, lps, True))
                continue
            dist = model.step(base + toks)
            choices = (eos,) if force else range(len(vocab))
            for tok in choices:
                if tok == bos:
                    continue
                lp = float(dist[tok])
                pool.append((score + lp, toks + (tok,), lps + (lp,), tok == eos))
        beam = heapq.nsmallest(width, pool, key=lambda e: (-e[0], e[1]))
    beam.sort(key=lambda e: (-e[0], e[1]))
    return [Continuation(toks, lps) for _, toks, lps, _ in beam]


def _make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sampling_lookahead(model: StepScorer, prefix: Sequence[int], horizon: int, rollouts: int,
                       seed=0, remaining: int | None = None) -> list[Continuation]:
    """Independent ancestral samples; ``seed`` may be an int, a list of ints or a Generator."""
    vocab = model.vocab
    rng = _make_rng(seed)
    steps = _steps_available(prefix, horizon, remaining, vocab.eos_id)
    out = []
    for _ in range(rollouts):
        seq = list(prefix)
        toks, lps = [], []
        for pos in range(steps):
            dist = model.step(seq)
            if _forced_eos(pos, remaining):
                tok = vocab.eos_id
            else:
                probs = np.exp(dist)
                tok = int(rng.choice(len(probs), p=probs / probs.sum()))
            toks.append(tok)
            lps.append(float(dist[tok]))
            seq.append(tok)
            if tok == vocab.eos_id:
                break
        out.append(Continuation(tuple(toks), tuple(lps)))
    return out


def generate(model: StepScorer, prefix: Sequence[int], config: LookaheadConfig,
             seed=None, remaining: int | None = None) -> list[Continuation]:
    """Dispatch on ``config.strategy``; ``seed`` overrides ``config.seed`` for sampling."""
    s = config.strategy
    if s == "greedy":
        return greedy_lookahead(model, prefix, config.horizon, remaining)
    if s == "soft":
        return soft_lookahead(model, prefix, config.horizon, config.temperature, remaining)
    if s == "beam":
        return beam_lookahead(model, prefix, config.horizon, config.beam, remaining)
    return sampling_lookahead(model, prefix, config.horizon, config.rollouts,
                              config.seed if seed is None else seed, remaining)
