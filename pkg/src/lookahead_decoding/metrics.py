"""Constraint-satisfaction metrics over decoded outputs.

Matching is exact contiguous token-subsequence matching.  Inflected or
alternative surface forms are passed explicitly as alternatives.
"""

from __future__ import annotations

from typing import Hashable, Sequence

from .constraints import ConstraintSet
from .models import Vocabulary

Phrase = Sequence[Hashable]


def occurs(tokens: Sequence[Hashable], phrase: Phrase) -> bool:
    n = len(phrase)
    if n == 0:
        return True
    first = phrase[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and list(tokens[i:i + n]) == list(phrase):
            return True
    return False


def _as_phrase(term) -> list:
    # a bare string is a one-token phrase
    return [term] if isinstance(term, str) else list(term)


def present(tokens: Sequence[Hashable], concept: Sequence[Phrase]) -> bool:
    """True when any alternative of ``concept`` occurs in ``tokens``."""
    return any(occurs(tokens, _as_phrase(alt)) for alt in concept)


def coverage(output_tokens: Sequence[Hashable], concepts: Sequence[Sequence[Phrase]]) -> float:
    """Percent of concepts with at least one alternative present in the output.

    A concept is a list of alternatives; an alternative is a token or a
    list of tokens, e.g. ``[["apple", "tree"], "orchard"]``.
    """
    if not concepts:
        return 100.0
    hits = sum(present(output_tokens, alts) for alts in concepts)
    return 100.0 * hits / len(concepts)


def term_use_rate(outputs: Sequence[Sequence[Hashable]], terms: Sequence[Sequence[Sequence[Phrase]]]) -> float:
    """Percent of all constraint terms, pooled over the corpus, found in their output.

    ``terms[i]`` lists the terms for ``outputs[i]``, each in the same
    alternatives format that :func:`coverage` takes.
    """
    total = matched = 0
    for out, out_terms in zip(outputs, terms, strict=True):
        for term in out_terms:
            total += 1
            matched += present(out, term)
    return 100.0 * matched / total if total else 100.0


def concepts_from_constraints(cs: ConstraintSet, vocab: Vocabulary | None = None) -> list[list[list]]:
    """One concept per clause holding its positive phrases as alternatives."""
    concepts = []
    for clause in cs.clauses:
        alts = [list(lit.phrase) if vocab is None else vocab.decode(lit.phrase)
                for lit in clause.literals if lit.positive]
        if alts:
            concepts.append(alts)
    return concepts


def satisfaction_report(result, cs: ConstraintSet, vocab: Vocabulary | None = None) -> dict:
    """JSON-ready per-output clause statuses and summary counts."""
    rows = []
    for out in result.outputs:
        rows.append({
            "tokens": list(out.generated) if vocab is None else vocab.decode(out.generated),
            "objective": out.objective,
            "clause_statuses": [s.name.lower() for s in out.statuses],
            "satisfied": out.satisfied,
            "violated": out.violated,
            "unsatisfied": len(out.statuses) - out.satisfied,
        })
    best = rows[0] if rows else None
    return {
        "clauses": len(cs),
        "outputs": rows,
        "best_all_satisfied": bool(best) and best["unsatisfied"] == 0,
    }
