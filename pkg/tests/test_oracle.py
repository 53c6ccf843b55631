import itertools
import math

import numpy as np
import pytest

from lookahead_decoding import BudgetExceededError, ConstraintSet, OracleBudget, exact_argmax, exact_Q
from lookahead_decoding.models import sequence_logprob
from lookahead_decoding.oracle import objective

from instances import random_mixed_clauses, random_table_model


def all_sequences(n_vocab, max_len):
    """Every eos-terminated sequence of at most max_len generated tokens."""
    for length in range(1, max_len + 1):
        for body in itertools.product(range(2, n_vocab), repeat=length - 1):
            yield (0,) + body + (1,)


def test_uniform_prefers_shortest(uniform_table):
    seq, f = exact_argmax(uniform_table, None, 0.0, OracleBudget(4))
    assert seq == (0, 1)
    assert f == pytest.approx(math.log(1 / 3))


def test_penalty_forces_phrase(fixture_table):
    cs = ConstraintSet.from_phrases([[(True, [3])]])
    seq, f = exact_argmax(fixture_table, cs, 100.0, OracleBudget(4))
    assert seq == (0, 3, 1)
    assert f == pytest.approx(math.log(0.3) + math.log(0.1))
    seq, _ = exact_argmax(fixture_table, cs, 0.1, OracleBudget(4))
    assert seq == (0, 1)


@pytest.mark.parametrize("seed", range(10))
def test_argmax_against_listing(seed):
    rng = np.random.default_rng(seed)
    model = random_table_model(rng, 4, order=1)
    cs = random_mixed_clauses(rng, model.vocab, 2)
    values = {s: objective(model, cs, s, 3.0) for s in all_sequences(len(model.vocab), 4)}
    best = max(values.values())
    seq, f = exact_argmax(model, cs, 3.0, OracleBudget(4))
    assert f == pytest.approx(best, abs=1e-12)
    assert seq == min(s for s, v in values.items() if v == best)


@pytest.mark.parametrize("seed", range(5))
def test_q_bounds_completions(seed):
    rng = np.random.default_rng(seed)
    model = random_table_model(rng, 4, order=2)
    cs = random_mixed_clauses(rng, model.vocab, 1)
    budget = OracleBudget(4)
    for tok in (2, 3):
        q = exact_Q(model, cs, [0], tok, 2.0, budget)
        comps = [s for s in all_sequences(len(model.vocab), 4) if s[1] == tok]
        assert q >= max(objective(model, cs, s, 2.0) for s in comps) - 1e-12
        assert q == pytest.approx(max(objective(model, cs, s, 2.0) for s in comps), abs=1e-12)


def test_q_of_eos_is_objective(fixture_table):
    cs = ConstraintSet.from_phrases([[(True, [3])]])
    q = exact_Q(fixture_table, cs, [0, 2], 1, 5.0, OracleBudget(4))
    assert q == pytest.approx(sequence_logprob(fixture_table, (0, 2, 1)) - 5.0)


def test_q_at_budget(fixture_table):
    assert exact_Q(fixture_table, None, [0, 2], 2, 0.0, OracleBudget(2)) == -math.inf


def test_budget_refused_up_front(fixture_table):
    with pytest.raises(BudgetExceededError):
        exact_argmax(fixture_table, None, 0.0, OracleBudget(30, cap=1000))
    OracleBudget(6, cap=3**6 * 2).check(4)
