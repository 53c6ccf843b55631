"""Exhaustive reference search over every eos-terminated sequence.

Deliberately naive: plain depth-first enumeration, direct substring checks
for clause satisfaction, no reuse of the decoders' bookkeeping.  Only
branches whose log-probability is already -inf are cut.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .constraints import ConstraintSet
from .models import DecodingError, StepScorer

NEG_INF = float("-inf")


class BudgetExceededError(DecodingError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_len: int
    cap: int = 10**7

    def check(self, vocab_size: int) -> None:
        """Refuse up front when the tree could exceed ``cap`` nodes."""
        branching = vocab_size - 1  # bos is never generated
        total = 0
        width = 1
        for _ in range(self.max_len):
            width *= branching
            total += width
            if total > self.cap:
                raise BudgetExceededError(
                    f"up to {total}+ sequences for |V|={vocab_size}, max_len={self.max_len} exceeds cap {self.cap}")


def contains(seq: Sequence[int], phrase: Sequence[int]) -> bool:
    n = len(phrase)
    phrase = list(phrase)
    return any(list(seq[i:i + n]) == phrase for i in range(len(seq) - n + 1))


def unsatisfied_clauses(cs: ConstraintSet, generated: Sequence[int]) -> int:
    bad = 0
    for clause in cs.clauses:
        ok = any(contains(generated, lit.phrase) == lit.positive for lit in clause.literals)
        bad += not ok
    return bad


def objective(model: StepScorer, cs: ConstraintSet, tokens: Sequence[int], clause_penalty: float,
              start: int = 1) -> float:
    lp = 0.0
    for i in range(start, len(tokens)):
        lp += float(model.step(tokens[:i])[tokens[i]])
    unsat = unsatisfied_clauses(cs, tokens[start:])
    return lp - (clause_penalty * unsat if unsat else 0.0)


def _completions(model: StepScorer, prefix: tuple[int, ...], logprob: float, slots: int):
    """Yield (sequence, logprob) for every eos-terminated extension using at most ``slots`` tokens."""
    vocab = model.vocab
    eos, bos = vocab.eos_id, vocab.bos_id
    if prefix[-1] == eos:
        yield prefix, logprob
        return
    if slots <= 0:
        return
    stack = [(prefix, logprob, slots)]
    while stack:
        seq, lp, left = stack.pop()
        dist = model.step(seq)
        choices = (eos,) if left == 1 else range(len(vocab))
        for tok in choices:
            if tok == bos:
                continue
            tlp = float(dist[tok])
            if tlp == NEG_INF:
                continue
            nxt = seq + (tok,)
            if tok == eos:
                yield nxt, lp + tlp
            else:
                stack.append((nxt, lp + tlp, left - 1))


def _best(candidates, cs: ConstraintSet, clause_penalty: float, start: int):
    best_seq, best_f = None, NEG_INF
    for seq, lp in candidates:
        unsat = unsatisfied_clauses(cs, seq[start:])
        f = lp - (clause_penalty * unsat if unsat else 0.0)
        if best_seq is None or f > best_f or (f == best_f and seq < best_seq):
            best_seq, best_f = seq, f
    return best_seq, best_f


def exact_argmax(model: StepScorer, cs: ConstraintSet | None, clause_penalty: float,
                 budget: OracleBudget, prompt: Sequence[int] = ()) -> tuple[tuple[int, ...], float]:
    """Maximiser of logprob - clause_penalty * (#unsatisfied clauses).

    Sequences hold at most ``budget.max_len`` generated tokens, the last
    being eos.  Ties go to the lexicographically smallest token sequence.
    """
    cs = cs if cs is not None else ConstraintSet()
    budget.check(len(model.vocab))
    prefix = (model.vocab.bos_id,) + tuple(prompt)
    return _best(_completions(model, prefix, 0.0, budget.max_len), cs, clause_penalty, len(prefix))


def exact_Q(model: StepScorer, cs: ConstraintSet | None, prefix: Sequence[int], token: int,
            clause_penalty: float, budget: OracleBudget, start: int = 1) -> float:
    """Best objective over every completion of ``prefix + [token]``.

    The objective covers the whole sequence from ``start`` on, so the
    prefix's own log-probability is included.
    """
    cs = cs if cs is not None else ConstraintSet()
    budget.check(len(model.vocab))
    head = tuple(prefix) + (int(token),)
    lp = 0.0
    for i in range(start, len(head)):
        lp += float(model.step(head[:i])[head[i]])
    used = len(head) - start
    if used > budget.max_len:
        raise ValueError("prefix already exceeds max_len")
    if head[-1] != model.vocab.eos_id and used == budget.max_len:
        return NEG_INF
    _, f = _best(_completions(model, head, lp, budget.max_len - used), cs, clause_penalty, start)
    return f
