"""
Checking the decoder against brute force
========================================

On a tiny random model, exhaustive search finds the best
eos-terminated sequence.  The lookahead decoder with an exhaustive beam
and full-horizon lookahead lands on the same objective value.
"""

import math

import numpy as np

from lookahead_decoding import (
    ConstraintSet,
    DecodeParams,
    HeuristicWeights,
    LookaheadConfig,
    OracleBudget,
    TableModel,
    Vocabulary,
    decode,
    exact_argmax,
)

rng = np.random.default_rng(4)
vocab = Vocabulary.build(["x", "y", "z"])
row = lambda: np.concatenate([[0.0], rng.dirichlet(np.ones(4))])
table = {(t,): row() for t in range(len(vocab))}
model = TableModel(vocab, 1, table, row())

# Require the phrase "y z", forbid "x".
cs = ConstraintSet.from_phrases([[("+", ["y", "z"])], [("-", ["x"])]], vocab)
max_len = 5
penalty = 100.0

seq, f_star = exact_argmax(model, cs, penalty, OracleBudget(max_len))
print("oracle :", vocab.decode(seq), round(f_star, 6))

width = 4 ** max_len
params = DecodeParams(mode="neurologic_astar", beam_size=width, max_len=max_len, alpha=1, beta=1,
                      weights=HeuristicWeights(future=0.5, clause_penalty=penalty),
                      lookahead=LookaheadConfig("beam", max_len, beam=width), lookahead_fanout=math.inf)
best = decode(model, cs, params).best
print("decoder:", vocab.decode(best.tokens), round(best.objective, 6))

# A narrow beam without lookahead can settle for less.
narrow = decode(model, cs, DecodeParams(mode="neurologic", beam_size=1, max_len=max_len,
                                        weights=HeuristicWeights(clause_penalty=penalty))).best
print("beam=1 :", vocab.decode(narrow.tokens), round(narrow.objective, 6))
