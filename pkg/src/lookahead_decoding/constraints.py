"""CNF lexical constraints and their incremental per-hypothesis state.

A constraint set is a conjunction of clauses; each clause is a disjunction
of literals; each literal asks for a token phrase to appear (positive) or
to never appear (negative) in the generated sequence.

Every literal carries a failure-function automaton, so advancing a state by
one token costs O(phrase length) amortised and self-overlapping phrases such
as ``a a`` are tracked correctly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .models import InvalidInputError, ParseError, Vocabulary, _read_json


class ClauseStatus(enum.IntEnum):
    IRREVERSIBLY_UNSATISFIED = 0
    REVERSIBLY_UNSATISFIED = 1
    REVERSIBLY_SATISFIED = 2
    IRREVERSIBLY_SATISFIED = 3

    @property
    def satisfied(self) -> bool:
        return self >= ClauseStatus.REVERSIBLY_SATISFIED


def failure_function(phrase: Sequence[int]) -> tuple[int, ...]:
    """``fail[i]`` = length of the longest proper border of ``phrase[:i+1]``."""
    fail = [0] * len(phrase)
    j = 0
    for i in range(1, len(phrase)):
        while j and phrase[i] != phrase[j]:
            j = fail[j - 1]
        if phrase[i] == phrase[j]:
            j += 1
        fail[i] = j
    return tuple(fail)


@dataclass(frozen=True)
class Literal:
    phrase: tuple[int, ...]
    positive: bool = True
    fail: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "phrase", tuple(int(t) for t in self.phrase))
        if not self.phrase:
            raise InvalidInputError("literal phrase must be non-empty")
        object.__setattr__(self, "fail", failure_function(self.phrase))

    def feed(self, state: int, token: int) -> tuple[int, bool]:
        """Advance the automaton; returns (new active prefix length, completed)."""
        phrase, fail = self.phrase, self.fail
        while state and phrase[state] != token:
            state = fail[state - 1]
        if phrase[state] == token:
            state += 1
        if state == len(phrase):
            return fail[state - 1], True
        return state, False


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]

    def __post_init__(self):
        object.__setattr__(self, "literals", tuple(self.literals))
        if not self.literals:
            raise InvalidInputError("clause must contain at least one literal")


@dataclass(frozen=True)
class ConstraintSet:
    clauses: tuple[Clause, ...] = ()
    # positive literals of reversibly-satisfied clauses still count as pending
    include_reversibly_satisfied: bool = True

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        owners = []
        flat = []
        for ci, clause in enumerate(self.clauses):
            for lit in clause.literals:
                owners.append(ci)
                flat.append(lit)
        object.__setattr__(self, "_literals", tuple(flat))
        object.__setattr__(self, "_owners", tuple(owners))

    @property
    def M(self) -> int:
        return len(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)

    @property
    def literals(self) -> tuple[Literal, ...]:
        return self._literals

    @property
    def owners(self) -> tuple[int, ...]:
        return self._owners

    @classmethod
    def from_phrases(cls, clauses, vocab: Vocabulary | None = None, **kwargs) -> "ConstraintSet":
        """Build from nested lists ``[[(polarity, phrase), ...], ...]``.

        ``polarity`` is ``"+"``/``"-"`` or a bool; ``phrase`` is a list of
        token strings (resolved through ``vocab``) or token ids.
        """
        built = []
        for clause in clauses:
            lits = []
            for polarity, phrase in clause:
                positive = polarity if isinstance(polarity, bool) else polarity == "+"
                if vocab is not None and phrase and isinstance(phrase[0], str):
                    phrase = vocab.encode(phrase)
                lits.append(Literal(tuple(phrase), positive))
            built.append(Clause(tuple(lits)))
        return cls(tuple(built), **kwargs)

    @classmethod
    def from_json(cls, doc, vocab: Vocabulary, path=None, **kwargs) -> "ConstraintSet":
        if not isinstance(doc, list):
            raise ParseError("constraint file must hold a list of clauses", path=path)
        clauses = []
        for ci, clause in enumerate(doc):
            if not isinstance(clause, list) or not clause:
                raise ParseError("clause must be a non-empty list of literals", path=path, offset=ci)
            lits = []
            for lit in clause:
                if not isinstance(lit, dict) or lit.get("polarity") not in ("+", "-"):
                    raise ParseError("literal needs polarity '+' or '-'", path=path, offset=ci)
                phrase = lit.get("phrase")
                if not isinstance(phrase, list) or not phrase or not all(isinstance(w, str) for w in phrase):
                    raise ParseError("literal phrase must be a non-empty list of tokens", path=path, offset=ci)
                try:
                    ids = vocab.encode(phrase)
                except InvalidInputError as exc:
                    raise ParseError(str(exc), path=path, offset=ci) from None
                if vocab.bos_id in ids or vocab.eos_id in ids:
                    raise ParseError("phrases may not contain bos/eos", path=path, offset=ci)
                lits.append(Literal(ids, lit["polarity"] == "+"))
            clauses.append(Clause(tuple(lits)))
        return cls(tuple(clauses), **kwargs)

    def to_json(self, vocab: Vocabulary) -> list:
        return [
            [{"polarity": "+" if lit.positive else "-", "phrase": vocab.decode(lit.phrase)}
             for lit in clause.literals]
            for clause in self.clauses
        ]


def load_constraints(path, vocab: Vocabulary, **kwargs) -> ConstraintSet:
    return ConstraintSet.from_json(_read_json(path), vocab, path=path, **kwargs)


def save_constraints(cs: ConstraintSet, vocab: Vocabulary, path) -> None:
    Path(path).write_text(json.dumps(cs.to_json(vocab), indent=1) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ConstraintState:
    """Per-literal automaton positions and hits, plus derived clause statuses.

    ``hit`` means the phrase has occurred: for a positive literal the
    literal is satisfied for good, for a negative one it is violated for good.
    """

    progress: tuple[int, ...]
    hit: tuple[bool, ...]
    statuses: tuple[ClauseStatus, ...]


def _clause_statuses(cs: ConstraintSet, hit: Sequence[bool]) -> tuple[ClauseStatus, ...]:
    any_pos_hit = [False] * cs.M
    any_neg_alive = [False] * cs.M
    any_pos = [False] * cs.M
    for lit, owner, h in zip(cs.literals, cs.owners, hit):
        if lit.positive:
            any_pos[owner] = True
            any_pos_hit[owner] |= h
        else:
            any_neg_alive[owner] |= not h
    out = []
    for ci in range(cs.M):
        if any_pos_hit[ci]:
            out.append(ClauseStatus.IRREVERSIBLY_SATISFIED)
        elif any_neg_alive[ci]:
            out.append(ClauseStatus.REVERSIBLY_SATISFIED)
        elif any_pos[ci]:
            out.append(ClauseStatus.REVERSIBLY_UNSATISFIED)
        else:
            out.append(ClauseStatus.IRREVERSIBLY_UNSATISFIED)
    return tuple(out)


def init_state(cs: ConstraintSet) -> ConstraintState:
    n = len(cs.literals)
    hit = (False,) * n
    return ConstraintState((0,) * n, hit, _clause_statuses(cs, hit))


def advance(cs: ConstraintSet, state: ConstraintState, token: int) -> ConstraintState:
    if not cs.clauses:
        return state
    progress = []
    hit = list(state.hit)
    changed = False
    for i, lit in enumerate(cs.literals):
        p, done = lit.feed(state.progress[i], token)
        progress.append(p)
        if done and not hit[i]:
            hit[i] = True
            changed = True
    statuses = _clause_statuses(cs, hit) if changed else state.statuses
    return ConstraintState(tuple(progress), tuple(hit), statuses)


def state_for(cs: ConstraintSet, tokens: Sequence[int]) -> ConstraintState:
    state = init_state(cs)
    for tok in tokens:
        state = advance(cs, state, tok)
    return state


def _pending(cs: ConstraintSet, state: ConstraintState):
    """Positive literals of clauses that can still gain from matching them."""
    for i, (lit, owner) in enumerate(zip(cs.literals, cs.owners)):
        if not lit.positive:
            continue
        status = state.statuses[owner]
        if status == ClauseStatus.IRREVERSIBLY_SATISFIED:
            continue
        if status == ClauseStatus.REVERSIBLY_SATISFIED and not cs.include_reversibly_satisfied:
            continue
        yield i, lit


def prefix_progress(cs: ConstraintSet, state: ConstraintState) -> float:
    best = 0.0
    for i, lit in _pending(cs, state):
        best = max(best, state.progress[i] / len(lit.phrase))
    return best


def unsatisfied_targets(cs: ConstraintSet, state: ConstraintState) -> list[tuple[tuple[int, ...], int]]:
    """(phrase, literal index) for every positive literal still worth pursuing."""
    return [(lit.phrase, i) for i, lit in _pending(cs, state)]


def is_pruned(state: ConstraintState) -> bool:
    return ClauseStatus.IRREVERSIBLY_UNSATISFIED in state.statuses


def satisfied_clause_count(state: ConstraintState) -> int:
    return sum(1 for s in state.statuses if s >= ClauseStatus.REVERSIBLY_SATISFIED)


def violated_clause_count(state: ConstraintState) -> int:
    return sum(1 for s in state.statuses if s == ClauseStatus.IRREVERSIBLY_UNSATISFIED)


def unsatisfied_clause_count(state: ConstraintState) -> int:
    """Clauses that would count as unmet if the sequence ended now."""
    return len(state.statuses) - satisfied_clause_count(state)


def group_key(state: ConstraintState) -> tuple[int, ...]:
    return tuple(i for i, s in enumerate(state.statuses) if s == ClauseStatus.IRREVERSIBLY_SATISFIED)
