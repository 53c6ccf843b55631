"""Beam-style decoders: plain beam, lookahead (A*-like) beam, NeuroLogic,
NeuroLogic with future-constraint lookahead, and heuristic top-k sampling.

Every decoder runs the same loop: expand each live hypothesis by every
vocabulary token, score the candidates, and keep a beam of ``beam_size``.
Modes differ only in how candidates are scored and selected.

Length budget: ``max_len`` counts generated tokens including eos.  When a
hypothesis reaches its last free slot the only expansion allowed is eos, so
every output is eos-terminated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import constraints as C
from .constraints import ClauseStatus, ConstraintSet, ConstraintState
from .heuristics import (
    HeuristicWeights,
    combined_candidate_score,
    future_satisfaction_h,
    scaled,
    unconstrained_h,
)
from .lookahead import LookaheadConfig, generate
from .models import DecodingError, InvalidInputError, StepScorer

MODES = ("plain", "unconstrained_astar", "neurologic", "neurologic_astar")
CONSTRAINED_MODES = ("neurologic", "neurologic_astar")
LOOKAHEAD_MODES = ("unconstrained_astar", "neurologic_astar")
NEG_INF = float("-inf")

# extra stream id so top-k draws never share a seed with lookahead rollouts
_TOPK_STREAM = 2**31 - 1


class EmptyBeamError(DecodingError):
    """Raised when every candidate at some step was pruned.

    ``best`` holds the highest-likelihood pruned hypothesis, if any.
    """

    def __init__(self, message: str, best: "Hypothesis | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class DecodeParams:
    beam_size: int = 4
    max_len: int = 20
    weights: HeuristicWeights = HeuristicWeights()
    lookahead: LookaheadConfig = LookaheadConfig()
    alpha: float = 0.5
    beta: float = 0.5
    grouping: bool = True
    mode: str = "plain"
    topk: int = 5
    seed: int = 0
    # lookahead runs for the best beam_size * fanout candidates only
    lookahead_fanout: float = 20
    aggregate: str = "max"
    prune_rule: str = "union"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.beam_size < 1:
            raise InvalidInputError("beam_size must be >= 1")
        if self.max_len < 1:
            raise InvalidInputError("max_len must be >= 1")
        if not (0 < self.alpha <= 1 and 0 < self.beta <= 1):
            raise InvalidInputError("alpha and beta must lie in (0, 1]")
        if self.prune_rule not in ("union", "intersection"):
            raise InvalidInputError(f"unknown prune_rule {self.prune_rule!r}")
        if self.aggregate not in ("max", "mean"):
            raise InvalidInputError(f"unknown aggregate {self.aggregate!r}")
        if not self.lookahead_fanout > 0:
            raise InvalidInputError("lookahead_fanout must be positive")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    @property
    def constrained(self) -> bool:
        return self.mode in CONSTRAINED_MODES


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    cstate: ConstraintState
    finished: bool = False
    last_score: float = 0.0


@dataclass
class Candidate:
    hyp: Hypothesis
    # False for a finished hypothesis carried over from the previous beam
    fresh: bool = True
    score: float = NEG_INF

    @property
    def logprob(self) -> float:
        return self.hyp.logprob

    @property
    def tokens(self) -> tuple[int, ...]:
        return self.hyp.tokens

    def rank_key(self):
        return (-self.score, -self.hyp.logprob, self.hyp.tokens)


@dataclass(frozen=True)
class Output:
    tokens: tuple[int, ...]
    generated: tuple[int, ...]
    logprob: float
    objective: float
    satisfied: int
    violated: int
    statuses: tuple[ClauseStatus, ...]


@dataclass
class DecodeResult:
    outputs: list[Output] = field(default_factory=list)

    @property
    def best(self) -> Output:
        return self.outputs[0]

    @classmethod
    def from_hypotheses(cls, hyps: Sequence[Hypothesis], cs: ConstraintSet, clause_penalty: float,
                        start: int) -> "DecodeResult":
        outs = []
        for h in hyps:
            unsat = C.unsatisfied_clause_count(h.cstate)
            outs.append(Output(
                tokens=h.tokens,
                generated=h.tokens[start:],
                logprob=h.logprob,
                objective=h.logprob - scaled(clause_penalty, unsat),
                satisfied=C.satisfied_clause_count(h.cstate),
                violated=C.violated_clause_count(h.cstate),
                statuses=h.cstate.statuses,
            ))
        outs.sort(key=lambda o: (-o.objective, -o.logprob, o.tokens))
        return cls(outs)


def initial_hypothesis(model: StepScorer, cs: ConstraintSet, prompt: Sequence[int] = ()) -> Hypothesis:
    return Hypothesis((model.vocab.bos_id,) + tuple(prompt), 0.0, C.init_state(cs))


def expand(hyps: Sequence[Hypothesis], model: StepScorer, cs: ConstraintSet, params: DecodeParams,
           start: int = 1) -> tuple[list[Candidate], Hypothesis | None]:
    """The full candidate grid plus the best candidate dropped for a violation.

    Finished hypotheses pass through unchanged.  Zero-probability tokens
    are never proposed.  In constrained modes a candidate whose constraint
    state became irreversibly unsatisfied is dropped.
    """
    vocab = model.vocab
    bos, eos = vocab.bos_id, vocab.eos_id
    out: list[Candidate] = []
    best_pruned = None
    for h in hyps:
        if h.finished:
            out.append(Candidate(h, fresh=False))
            continue
        dist = model.step(h.tokens)
        last_slot = len(h.tokens) - start >= params.max_len - 1
        for tok in ((eos,) if last_slot else range(len(vocab))):
            if tok == bos:
                continue
            lp = float(dist[tok])
            if lp == NEG_INF:
                continue
            cstate = C.advance(cs, h.cstate, tok)
            child = Hypothesis(h.tokens + (tok,), h.logprob + lp, cstate, tok == eos)
            if params.constrained and C.is_pruned(cstate):
                if best_pruned is None or child.logprob > best_pruned.logprob:
                    best_pruned = child
                continue
            out.append(Candidate(child))
    return out, best_pruned


def _finished_score(h: Hypothesis, params: DecodeParams) -> float:
    if params.constrained:
        return h.logprob - scaled(params.weights.clause_penalty, C.unsatisfied_clause_count(h.cstate))
    return h.logprob


def _base_score(h: Hypothesis, cs: ConstraintSet, params: DecodeParams) -> float:
    if params.constrained:
        return combined_candidate_score(h.logprob, C.prefix_progress(cs, h.cstate), 0.0, 0.0, params.weights)
    return h.logprob


def _lookahead_term(model, cs, params, h: Hypothesis, seed, start) -> float:
    remaining = params.max_len - (len(h.tokens) - start)
    w = params.weights
    if params.mode == "unconstrained_astar":
        if w.likelihood == 0:
            return 0.0
        conts = generate(model, h.tokens, params.lookahead, seed=seed, remaining=remaining)
        return unconstrained_h(conts, w.likelihood, params.aggregate)
    targets = C.unsatisfied_targets(cs, h.cstate)
    if not targets or w.future == 0:
        return 0.0
    conts = generate(model, h.tokens, params.lookahead, seed=seed, remaining=remaining)
    return future_satisfaction_h(model, h.tokens, conts, targets, w.future, params.aggregate)


def score_candidates(cands: list[Candidate], model: StepScorer, cs: ConstraintSet, params: DecodeParams,
                     step: int = 0, start: int = 1) -> list[Candidate]:
    """Fill in ``score`` on each candidate in place and return the list."""
    lookahead_jobs = []
    for idx, c in enumerate(cands):
        if c.hyp.finished:
            c.score = _finished_score(c.hyp, params)
        else:
            c.score = _base_score(c.hyp, cs, params)
            if params.mode in LOOKAHEAD_MODES:
                lookahead_jobs.append(idx)
    if not lookahead_jobs:
        return cands

    limit = params.beam_size * params.lookahead_fanout
    if len(lookahead_jobs) > limit:
        lookahead_jobs.sort(key=lambda i: cands[i].rank_key())
        for i in lookahead_jobs[int(limit):]:
            cands[i].score = NEG_INF
        lookahead_jobs = sorted(lookahead_jobs[:int(limit)])

    def run(i):
        # per-candidate RNG stream, independent of evaluation order
        return _lookahead_term(model, cs, params, cands[i].hyp, [params.seed, step, i], start)

    if params.workers > 1 and len(lookahead_jobs) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            terms = list(pool.map(run, lookahead_jobs))
    else:
        terms = [run(i) for i in lookahead_jobs]
    for i, term in zip(lookahead_jobs, terms):
        cands[i].score += term
    return cands


def _top(cands: Sequence[Candidate], n: int) -> list[Candidate]:
    return sorted(cands, key=Candidate.rank_key)[:n]


def select(scored: Sequence[Candidate], params: DecodeParams) -> list[Candidate]:
    if not scored:
        raise EmptyBeamError("no candidates left to select from")
    k = params.beam_size
    if not params.constrained:
        return _top(scored, k)

    n = len(scored)
    idx = range(n)
    by_lp = sorted(idx, key=lambda i: (-scored[i].logprob, scored[i].tokens))
    by_sat = sorted(idx, key=lambda i: (-C.satisfied_clause_count(scored[i].hyp.cstate),
                                        -scored[i].logprob, scored[i].tokens))
    keep_lp = set(by_lp[:math.ceil(params.alpha * n)])
    keep_sat = set(by_sat[:math.ceil(params.beta * n)])
    keep = keep_lp | keep_sat if params.prune_rule == "union" else keep_lp & keep_sat
    pool = [scored[i] for i in sorted(keep)]
    if not pool:
        raise EmptyBeamError("likelihood/satisfaction pruning removed every candidate")

    if not params.grouping:
        return _top(pool, k)
    groups: dict[tuple[int, ...], list[Candidate]] = {}
    for c in pool:
        groups.setdefault(C.group_key(c.hyp.cstate), []).append(c)
    ordered = [sorted(g, key=Candidate.rank_key) for g in groups.values()]
    ordered.sort(key=lambda g: g[0].rank_key())
    chosen: list[Candidate] = []
    rnd = 0
    while len(chosen) < k:
        took = False
        for g in ordered:
            if rnd < len(g):
                chosen.append(g[rnd])
                took = True
                if len(chosen) == k:
                    break
        if not took:
            break
        rnd += 1
    return chosen


def decode(model: StepScorer, cs: ConstraintSet | None, params: DecodeParams,
           prompt: Sequence[int] = ()) -> DecodeResult:
    cs = cs if cs is not None else ConstraintSet()
    start = 1 + len(prompt)
    beam = [initial_hypothesis(model, cs, prompt)]
    finished: list[Hypothesis] = []
    for step in range(params.max_len):
        if all(h.finished for h in beam):
            break
        cands, best_pruned = expand(beam, model, cs, params, start)
        if not cands:
            raise EmptyBeamError(f"every candidate was pruned at step {step}", best_pruned)
        score_candidates(cands, model, cs, params, step, start)
        chosen = select(cands, params)
        beam = []
        for c in chosen:
            h = replace(c.hyp, last_score=c.score)
            if c.fresh and h.finished:
                finished.append(h)
            beam.append(h)
    return DecodeResult.from_hypotheses(finished, cs, params.weights.clause_penalty, start)


def greedy_decode(model: StepScorer, max_len: int, prompt: Sequence[int] = ()) -> tuple[int, ...]:
    """Argmax decoding with the same length budget as :func:`decode`."""
    vocab = model.vocab
    seq = [vocab.bos_id, *prompt]
    for pos in range(max_len):
        dist = model.step(seq)
        tok = vocab.eos_id if pos == max_len - 1 else int(np.argmax(dist))
        seq.append(tok)
        if tok == vocab.eos_id:
            break
    return tuple(seq)


def topk_adjusted_distribution(model: StepScorer, prefix: Sequence[int], params: DecodeParams,
                               step: int = 0, remaining: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Top-k token ids and their heuristic-adjusted, renormalised probabilities.

    Each of the ``params.topk`` most likely tokens is scored by its
    log-probability plus the weighted lookahead likelihood of the prefix it
    would create; ``exp`` of those scores is renormalised over the top-k set.
    The shared prefix log-probability cancels and is left out.
    """
    if params.topk < 1:
        raise InvalidInputError("topk must be >= 1")
    vocab = model.vocab
    dist = model.step(prefix)
    if remaining is not None and remaining <= 1:
        ids = np.array([vocab.eos_id])
    else:
        allowed = [t for t in range(len(vocab)) if t != vocab.bos_id and dist[t] != NEG_INF]
        allowed.sort(key=lambda t: (-dist[t], t))
        ids = np.array(allowed[:params.topk])
    scores = np.array([float(dist[t]) for t in ids])
    w = params.weights.likelihood
    if w != 0 and params.lookahead.horizon > 0:
        base = tuple(prefix)
        rem = None if remaining is None else remaining - 1
        for j, t in enumerate(ids):
            conts = generate(model, base + (int(t),), params.lookahead, seed=[params.seed, step, j], remaining=rem)
            scores[j] += unconstrained_h(conts, w, params.aggregate)
    z = np.exp(scores - scores.max())
    return ids, z / z.sum()


def topk_sample_decode(model: StepScorer, params: DecodeParams, prompt: Sequence[int] = (),
                       cs: ConstraintSet | None = None) -> DecodeResult:
    """One sample from heuristic-adjusted top-k sampling.

    ``cs`` is only used to report clause statuses on the output.
    """
    if params.topk < 1:
        raise InvalidInputError("topk must be >= 1")
    cs = cs if cs is not None else ConstraintSet()
    vocab = model.vocab
    seq = [vocab.bos_id, *prompt]
    start = len(seq)
    logprob = 0.0
    state = C.init_state(cs)
    for step in range(params.max_len):
        ids, probs = topk_adjusted_distribution(model, seq, params, step, params.max_len - step)
        rng = np.random.default_rng([params.seed, step, _TOPK_STREAM])
        tok = int(ids[rng.choice(len(ids), p=probs)])
        logprob += float(model.step(seq)[tok])
        seq.append(tok)
        state = C.advance(cs, state, tok)
        if tok == vocab.eos_id:
            break
    hyp = Hypothesis(tuple(seq), logprob, state, True)
    return DecodeResult.from_hypotheses([hyp], cs, params.weights.clause_penalty, start)
