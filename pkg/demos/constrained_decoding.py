"""
Constrained decoding with and without lookahead
===============================================

Decodes the bundled demo table with three lexical constraints (two
required words and one banned word) under each search mode.
"""

from dataclasses import replace
from importlib import resources

from lookahead_decoding import DecodeParams, HeuristicWeights, LookaheadConfig, decode, load_model
from lookahead_decoding.constraints import load_constraints
from lookahead_decoding.metrics import satisfaction_report

data = resources.files("lookahead_decoding") / "data"
model = load_model(data / "demo_table.json")
vocab = model.vocab
cs = load_constraints(data / "demo_constraints.json", vocab)

base = DecodeParams(beam_size=4, max_len=10, weights=HeuristicWeights(future=0.5),
                    lookahead=LookaheadConfig("greedy", 3))

for mode in ("plain", "unconstrained_astar", "neurologic", "neurologic_astar"):
    params = replace(base, mode=mode)
    best = decode(model, cs, params).best
    print(f"{mode:20s} {' '.join(vocab.decode(best.generated)):40s} "
          f"logprob={best.logprob:7.3f} satisfied={best.satisfied}/{len(cs)}")

# Clause-by-clause view of the lookahead decoder's beam.
params = replace(base, mode="neurologic_astar")
report = satisfaction_report(decode(model, cs, params), cs, vocab)
for row in report["outputs"][:3]:
    print(row["tokens"], row["clause_statuses"])

# A prompt is forced into the output before decoding starts.
prompt = vocab.encode(["the", "cat"])
best = decode(model, cs, params, prompt).best
print("prompted:", vocab.decode(best.tokens))
