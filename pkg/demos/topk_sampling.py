"""
Top-k sampling nudged by lookahead
==================================

Each top-k token is reweighted by how likely its best short rollout is.
With the likelihood weight at 0 this is ordinary top-k sampling.
"""

from dataclasses import replace

from lookahead_decoding import (
    DecodeParams,
    HeuristicWeights,
    LookaheadConfig,
    TableModel,
    Vocabulary,
    topk_adjusted_distribution,
    topk_sample_decode,
)

vocab = Vocabulary.build(["A", "B"])
# A is likely now but leads to a flat row; B leads straight to eos.
rows = {(0,): [0, 0, 0.55, 0.45], (2,): [0, 0.34, 0.33, 0.33], (3,): [0, 1.0, 0, 0]}
model = TableModel(vocab, 1, rows, [0, 1 / 3, 1 / 3, 1 / 3])

for weight in (0.0, 1.0):
    params = DecodeParams(topk=2, weights=HeuristicWeights(likelihood=weight),
                          lookahead=LookaheadConfig("greedy", 1))
    ids, probs = topk_adjusted_distribution(model, [vocab.bos_id], params)
    print(f"weight={weight}:", {vocab.tokens[i]: round(float(p), 3) for i, p in zip(ids, probs)})

# Each run is fully determined by its seed; the lookahead tilts draws toward B.
params = DecodeParams(topk=2, max_len=6, lookahead=LookaheadConfig("greedy", 1))
for weight in (0.0, 1.0):
    draws = [topk_sample_decode(model, replace(params, seed=seed, weights=HeuristicWeights(likelihood=weight))).best
             for seed in range(6)]
    print(f"weight={weight}:", [" ".join(vocab.decode(d.generated)) for d in draws])
