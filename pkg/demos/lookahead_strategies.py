"""
Four ways to roll out the future
================================

Greedy, beam, sampling and soft rollouts from the same prefix, and the
likelihood heuristic each one yields.
"""

from lookahead_decoding import (
    TableModel,
    Vocabulary,
    beam_lookahead,
    greedy_lookahead,
    sampling_lookahead,
    soft_lookahead,
    unconstrained_h,
)

vocab = Vocabulary.build(["A", "B"])
rows = {
    (0,): [0, 0.1, 0.5, 0.4],
    (2,): [0, 0.2, 0.2, 0.6],
    (3,): [0, 0.5, 0.3, 0.2],
}
model = TableModel(vocab, 1, rows, [0, 0.4, 0.3, 0.3])
prefix = [vocab.bos_id]


def show(name, conts):
    for c in conts:
        print(f"{name:9s} {vocab.decode(c.tokens)!s:28s} logprob={c.logprob:.3f}")
    print(f"{'':9s} heuristic (max) = {unconstrained_h(conts, 1.0):.3f}\n")


show("greedy", greedy_lookahead(model, prefix, 3))
show("beam", beam_lookahead(model, prefix, 3, 3))
show("sampling", sampling_lookahead(model, prefix, 3, 4, seed=0))

# Soft rollouts mix next-step distributions instead of committing to a
# token.  At temperature 0 they reduce to greedy.
for tau in (0.0, 1.0, 5.0):
    (c,) = soft_lookahead(model, prefix, 3, tau)
    print(f"tau={tau}: argmax path {vocab.decode(c.tokens)}, first mixture {c.soft_steps[0].round(3)}")
