import numpy as np
import pytest

from lookahead_decoding import ConstraintSet, DecodeParams, HeuristicWeights, coverage, decode, term_use_rate
from lookahead_decoding.metrics import concepts_from_constraints, occurs, satisfaction_report
from lookahead_decoding.oracle import OracleBudget, exact_argmax, unsatisfied_clauses

from instances import random_positive_clauses, random_table_model

OUT = "the dog chases a ball in the park".split()


def test_occurs():
    assert occurs(OUT, ["a", "ball"])
    assert not occurs(OUT, ["ball", "a"])
    assert occurs([], [])


class TestCoverage:
    def test_half(self):
        assert coverage(OUT, [["ball"], ["cat"]]) == 50.0

    def test_full_with_phrases(self):
        assert coverage(OUT, [[["the", "park"]], [["dog"]]]) == 100.0

    def test_alternatives(self):
        assert coverage(OUT, [["chase", "chases"], [["a", "cat"], "park"]]) == 100.0

    def test_no_concepts(self):
        assert coverage(OUT, []) == 100.0


class TestTermUse:
    def test_all(self):
        assert term_use_rate([OUT], [[["dog"], ["park"]]]) == 100.0

    def test_none(self):
        assert term_use_rate([OUT, OUT], [[["cat"]], [["tree"]]]) == 0.0

    def test_pooled(self):
        rate = term_use_rate([OUT, ["a", "cat"]], [[["dog"], ["ball"]], [["dog"]]])
        assert rate == pytest.approx(200 / 3)

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            term_use_rate([OUT], [])


def test_report(order1_table):
    cs = ConstraintSet.from_phrases([[(True, [3])], [(False, [2, 2])]])
    params = DecodeParams(mode="neurologic", beam_size=2, max_len=4)
    report = satisfaction_report(decode(order1_table, cs, params), cs, order1_table.vocab)
    best = report["outputs"][0]
    assert report["clauses"] == 2
    assert best["tokens"][-1] == "</s>"
    assert best["satisfied"] + best["unsatisfied"] == 2
    assert report["best_all_satisfied"] == (best["unsatisfied"] == 0)


@pytest.mark.parametrize("seed", range(10))
def test_coverage_agrees_with_oracle(seed):
    rng = np.random.default_rng(seed)
    model = random_table_model(rng, 4, order=1)
    cs = random_positive_clauses(rng, model.vocab, 2)
    seq, _ = exact_argmax(model, cs, 1000.0, OracleBudget(5))
    concepts = concepts_from_constraints(cs)
    expected = 100.0 * (len(cs) - unsatisfied_clauses(cs, seq[1:])) / len(cs)
    assert coverage(list(seq[1:]), concepts) == pytest.approx(expected)
