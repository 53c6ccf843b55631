"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import pickle
import shutil
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lookahead_decoding import (
    ConstraintSet,
    DecodeParams,
    HeuristicWeights,
    LookaheadConfig,
    OracleBudget,
    beam_lookahead,
    decode,
    exact_argmax,
    exact_Q,
    greedy_lookahead,
    sampling_lookahead,
    soft_lookahead,
    topk_adjusted_distribution,
    topk_sample_decode,
    unconstrained_h,
)
from lookahead_decoding import constraints as C
from lookahead_decoding.cli import main
from lookahead_decoding.models import sequence_logprob
from lookahead_decoding.search import expand, initial_hypothesis

from acceptance_log import report
from instances import random_mixed_clauses, random_positive_clauses, random_table_model, reference_beam_search
from test_constraints import brute_status, rescan

pytestmark = pytest.mark.acceptance

GOLDEN = Path(__file__).parent / "golden" / "demo_decode.jsonl"
DATA = resources.files("lookahead_decoding") / "data"
NO_WEIGHTS = HeuristicWeights(likelihood=0, progress=0, future=0, clause_penalty=0)


def test_beam_degeneracy():
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(500):
        rng = np.random.default_rng(i)
        n_emit = int(rng.integers(2, 11))
        max_len = int(rng.integers(1, 13))
        beam = int(rng.integers(1, 6))
        model = random_table_model(rng, n_emit, order=int(rng.integers(0, 3)))
        expected = reference_beam_search(model, beam, max_len)
        base = DecodeParams(beam_size=beam, max_len=max_len, weights=NO_WEIGHTS,
                            lookahead=LookaheadConfig("greedy", 0))
        variants = [
            base,
            replace(base, mode="unconstrained_astar"),
            replace(base, mode="neurologic_astar", alpha=1, beta=1),
        ]
        for params in variants:
            mismatches += decode(model, None, params).best.tokens != expected
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report(1, "beam-search degeneracy", ok, f"{mismatches} mismatches, {elapsed:.1f}s")
    assert ok


def exhaustive_params(n_emit, max_len):
    width = n_emit ** max_len
    return DecodeParams(
        mode="neurologic_astar", beam_size=width, max_len=max_len, alpha=1, beta=1,
        weights=HeuristicWeights(likelihood=1.0, progress=0.0, future=0.5, clause_penalty=1000.0),
        lookahead=LookaheadConfig("beam", max_len, beam=width), lookahead_fanout=math.inf,
    )


def test_oracle_optimality():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(i)
        n_emit = int(rng.integers(2, 6))
        max_len = int(rng.integers(1, 7))
        model = random_table_model(rng, n_emit, order=int(rng.integers(0, 3)))
        cs = random_mixed_clauses(rng, model.vocab, int(rng.integers(0, 3)))
        params = exhaustive_params(n_emit, max_len)
        _, f_star = exact_argmax(model, cs, params.weights.clause_penalty, OracleBudget(max_len))
        got = decode(model, cs, params).best.objective
        worst = max(worst, abs(got - f_star))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60
    report(2, "oracle optimality", ok, f"max |F - F*| = {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_heuristic_convergence():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        rng = np.random.default_rng(10_000 + i)
        n_emit = int(rng.integers(2, 6))
        max_len = int(rng.integers(1, 7))
        model = random_table_model(rng, n_emit, order=int(rng.integers(0, 3)))
        budget = OracleBudget(max_len)
        remaining = max_len - 1
        params = DecodeParams(max_len=max_len)
        cands, _ = expand([initial_hypothesis(model, ConstraintSet())], model, ConstraintSet(), params)
        for tok in (c.tokens[-1] for c in cands):
            prefix = (0, tok)
            s_prefix = sequence_logprob(model, prefix)
            conts = beam_lookahead(model, prefix, remaining, max(1, n_emit ** remaining), remaining=remaining)
            h = unconstrained_h(conts, 1.0)
            q = exact_Q(model, None, [0], tok, 0.0, budget)
            gap = abs(s_prefix + h - q)
            worst = max(worst, gap)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60
    report(3, "heuristic convergence", ok, f"max gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def lift_suite():
    for i in range(200):
        rng = np.random.default_rng(1000 + i)
        model = random_table_model(rng, 8, order=1)
        yield model, random_positive_clauses(rng, model.vocab, 2)


def run_suite(params):
    f, sat = [], []
    for model, cs in lift_suite():
        best = decode(model, cs, params).best
        f.append(best.objective)
        sat.append(best.satisfied / len(cs))
    return np.array(f), np.array(sat)


LIFT_BASE = DecodeParams(mode="neurologic", beam_size=4, max_len=10,
                         weights=HeuristicWeights(future=0.5))
_suite_cache = {}


def suite_result(horizon):
    if horizon not in _suite_cache:
        params = LIFT_BASE if horizon is None else replace(
            LIFT_BASE, mode="neurologic_astar", lookahead=LookaheadConfig("greedy", horizon))
        _suite_cache[horizon] = run_suite(params)
    return _suite_cache[horizon]


def test_satisfaction_lift():
    t0 = time.perf_counter()
    f_base, sat_base = suite_result(None)
    f_astar, sat_astar = suite_result(4)
    # H1: lookahead lowers F.  Passing means that claim is not supported at 5%.
    p_worse = stats.ttest_rel(f_astar, f_base, alternative="less").pvalue
    elapsed = time.perf_counter() - t0
    ok = sat_astar.mean() >= sat_base.mean() and (f_astar.mean() >= f_base.mean() or p_worse >= 0.05)
    ok = ok and elapsed < 300
    report(4, "constraint-satisfaction lift", ok,
           f"sat {sat_astar.mean():.3f} vs {sat_base.mean():.3f}, "
           f"F {f_astar.mean():.3f} vs {f_base.mean():.3f}, p(worse)={p_worse:.3g}, {elapsed:.1f}s")
    assert ok


def test_horizon_ablation():
    means = {h: suite_result(h)[0].mean() for h in (0, 1, 2, 4)}
    ok = all(means[h] >= means[0] for h in (1, 2, 4))
    report(5, "horizon ablation", ok, ", ".join(f"l={h}: {m:.3f}" for h, m in means.items()))
    assert ok


def test_lookahead_equivalences():
    rng = np.random.default_rng(6)
    failures = 0
    for _ in range(1000):
        n_emit = int(rng.integers(2, 9))
        model = random_table_model(rng, n_emit, order=int(rng.integers(0, 4)))
        prefix = [0] + [int(t) for t in rng.integers(1, n_emit + 1, size=rng.integers(0, 4))]
        horizon = int(rng.integers(0, 7))
        g = greedy_lookahead(model, prefix, horizon)[0].tokens
        b = beam_lookahead(model, prefix, horizon, 1)[0].tokens
        s = soft_lookahead(model, prefix, horizon, 0.0)[0].tokens
        failures += not (g == b == s)
    ok = failures == 0
    report(6, "lookahead strategy equivalences", ok, f"{failures}/1000 differ")
    assert ok


phrase = st.one_of(
    st.lists(st.integers(2, 4), min_size=1, max_size=5),
    # self-overlapping shapes: periodic and border-heavy
    st.builds(lambda p, r: (p * r)[:6], st.lists(st.integers(2, 3), min_size=1, max_size=2), st.integers(2, 4)),
)
clause_st = st.lists(st.tuples(st.booleans(), phrase), min_size=1, max_size=3)
_automaton = {"pairs": 0, "bad": 0}


@settings(max_examples=1000, deadline=None, derandomize=True)
@given(clauses=st.lists(clause_st, min_size=1, max_size=3), seq=st.lists(st.integers(1, 4), max_size=25))
def _automaton_case(clauses, seq):
    cs = ConstraintSet.from_phrases(clauses)
    state = C.init_state(cs)
    for tok in seq:
        state = C.advance(cs, state, tok)
    _automaton["pairs"] += 1
    _automaton["bad"] += (state.progress, state.hit) != rescan(cs, seq) or state.statuses != brute_status(cs, seq)


def test_constraint_automaton():
    _automaton.update(pairs=0, bad=0)
    _automaton_case()
    ok = _automaton["bad"] == 0 and _automaton["pairs"] >= 1000
    report(7, "constraint automaton vs rescan", ok, f"{_automaton['bad']}/{_automaton['pairs']} differ")
    assert ok


def test_topk_sampling(order1_table, fixture_table):
    problems = []
    rng = np.random.default_rng(8)
    for _ in range(200):
        model = random_table_model(rng, int(rng.integers(2, 9)), order=1)
        params = DecodeParams(topk=int(rng.integers(1, 6)), lookahead=LookaheadConfig("greedy", int(rng.integers(0, 4))))
        prefix = [0, int(rng.integers(1, len(model.vocab)))]
        dist = model.step(prefix)
        ids, probs = topk_adjusted_distribution(model, prefix, params)
        top = sorted(range(1, len(model.vocab)), key=lambda t: (-dist[t], t))[:params.topk]
        if abs(probs.sum() - 1) > 1e-9:
            problems.append("sum")
        if not set(ids.tolist()) <= set(top):
            problems.append("support")
    for model, prefix in ((fixture_table, [0]), (order1_table, [0]), (order1_table, [0, 3])):
        for k in (1, 2, 3):
            params = DecodeParams(topk=k, weights=HeuristicWeights(likelihood=0.0),
                                  lookahead=LookaheadConfig("greedy", 3))
            ids, probs = topk_adjusted_distribution(model, prefix, params)
            p = np.exp(model.step(prefix))
            top = sorted(range(1, 4), key=lambda t: (-p[t], t))[:k]
            expected = p[top] / p[top].sum()
            if ids.tolist() != top or np.max(np.abs(probs - expected)) > 1e-12:
                problems.append(f"lambda=0 k={k}")
    params = DecodeParams(topk=3, seed=17, max_len=10, lookahead=LookaheadConfig("sampling", 2, rollouts=3))
    runs = [pickle.dumps([o.tokens for o in topk_sample_decode(order1_table, params).outputs]) for _ in range(2)]
    if runs[0] != runs[1]:
        problems.append("reproducibility")
    ok = not problems
    report(8, "top-k heuristic sampling", ok, ", ".join(problems) or "sums, support, lambda=0, seeds")
    assert ok


def test_sampling_statistics(fixture_table):
    conts = sampling_lookahead(fixture_table, [0], 1, 10_000, seed=0)
    freq = sum(c.tokens == (2,) for c in conts) / len(conts)
    ok = abs(freq - 0.6) <= 0.02
    report(9, "sampling lookahead statistics", ok, f"p(A) = {freq:.4f}")
    assert ok


def test_cli_reproducibility(tmp_path):
    for name in ("demo_table.json", "demo_constraints.json", "demo_inputs.txt", "demo_config.json"):
        shutil.copy(DATA / name, tmp_path / name)
    cfg = str(tmp_path / "demo_config.json")
    outs = []
    for i, workers in enumerate(("1", "1", "4")):
        out = tmp_path / f"run{i}.jsonl"
        assert main(["decode", "--config", cfg, "--out", str(out), "--workers", workers]) == 0
        outs.append(out.read_bytes())
    golden = GOLDEN.read_bytes()
    ok = all(o == golden for o in outs)
    report(10, "CLI golden-file reproducibility", ok, "two runs at workers=1, one at workers=4")
    assert ok
