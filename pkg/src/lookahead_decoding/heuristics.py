"""Future-score estimates computed from a candidate's lookahead set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .lookahead import Continuation
from .models import StepScorer

NEG_INF = float("-inf")


@dataclass(frozen=True)
class HeuristicWeights:
    """Weights of the score terms.

    ``likelihood``: lookahead log-likelihood (unconstrained decoding).
    ``progress``: partial-phrase progress bonus.
    ``future``: log-probability of meeting one more constraint soon.
    ``clause_penalty``: cost per unsatisfied clause at end of sequence.
    """

    likelihood: float = 1.0
    progress: float = 0.1
    future: float = 0.1
    clause_penalty: float = 10.0

    def __post_init__(self):
        for name in ("likelihood", "progress", "future", "clause_penalty"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {value!r}")


def scaled(weight: float, value: float) -> float:
    # 0 * -inf would be nan; a zero weight switches the term off entirely
    return 0.0 if weight == 0 else weight * value


def _aggregate(values: list[float], how: str) -> float:
    if how == "max":
        return max(values)
    if how == "mean":
        if any(v == NEG_INF for v in values):
            return NEG_INF
        return math.fsum(values) / len(values)
    raise ValueError(f"unknown aggregation {how!r}")


def unconstrained_h(continuations: Sequence[Continuation], weight: float, aggregate: str = "max") -> float:
    if not continuations:
        raise ValueError("need at least one continuation")
    return scaled(weight, _aggregate([c.logprob for c in continuations], aggregate))


def phrase_prob_from(model: StepScorer, context: Sequence[int], phrase: Sequence[int]) -> float:
    """log p(phrase | context), force-feeding the phrase one token at a time."""
    if not phrase:
        raise ValueError("phrase must be non-empty")
    seq = list(context)
    total = 0.0
    for tok in phrase:
        lp = float(model.step(seq)[tok])
        if lp == NEG_INF:
            return NEG_INF
        total += lp
        seq.append(tok)
    return total


def future_satisfaction_h(model: StepScorer, prefix: Sequence[int], continuations: Sequence[Continuation],
                          targets: Sequence[tuple[Sequence[int], object]], weight: float,
                          aggregate: str = "max") -> float:
    """Weighted log-probability of the best (target, start offset) in the lookahead.

    A target phrase may start right after the candidate prefix or after any
    number of continuation tokens, but never after eos.  The phrase is
    priced by the model even where it runs past the sampled tokens.
    """
    if not targets or weight == 0:
        return 0.0
    if not continuations:
        raise ValueError("need at least one continuation")
    eos = model.vocab.eos_id
    base = tuple(prefix)
    memo: dict[tuple[int, ...], float] = {}

    def best_at(offset_tokens: tuple[int, ...]) -> float:
        if offset_tokens in memo:
            return memo[offset_tokens]
        ctx = base + offset_tokens
        if ctx and ctx[-1] == eos:
            value = NEG_INF
        else:
            value = max(phrase_prob_from(model, ctx, phrase) for phrase, _ in targets)
        memo[offset_tokens] = value
        return value

    per_continuation = []
    for cont in continuations:
        toks = tuple(cont.tokens)
        per_continuation.append(max(best_at(toks[:j]) for j in range(len(toks) + 1)))
    return scaled(weight, _aggregate(per_continuation, aggregate))


def combined_candidate_score(s_prefix: float, progress: float, h_unc: float, h_fut: float,
                             weights: HeuristicWeights) -> float:
    """Prefix log-probability plus progress bonus plus whichever heuristics are active.

    ``h_unc`` and ``h_fut`` arrive already weighted; pass 0 for a term that
    is not in use.
    """
    return s_prefix + scaled(weights.progress, progress) + h_fut + h_unc
