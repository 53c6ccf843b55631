"""
Toy step scorers
================

Two small models that expose the same ``step(prefix)`` interface: a
hand-written probability table and an add-k smoothed n-gram counted
from a few sentences.
"""

import numpy as np

from lookahead_decoding import TableModel, Vocabulary, sequence_logprob
from lookahead_decoding.models import ngram_from_sentences

# A vocabulary always starts with bos (id 0) and eos (id 1).
vocab = Vocabulary.build(["A", "B"])
print(vocab.tokens)

# A context-free table: the same row regardless of history.
table = TableModel.context_free(vocab, {"A": 0.6, "B": 0.3, "</s>": 0.1})
print(np.exp(table.step([vocab.bos_id])).round(3))

# Whole-sequence log-probability sums the per-step scores.
seq = vocab.encode(["<s>", "A", "B", "</s>"])
print(sequence_logprob(table, seq), np.log(0.6 * 0.3 * 0.1))

# A bigram counted from three sentences, with add-0.5 smoothing.
sentences = [s.split() for s in ("the dog runs", "the cat runs", "a dog sleeps")]
lm = ngram_from_sentences(sentences, order=1, k=0.5)
the = lm.vocab.ids["the"]
row = np.exp(lm.step([lm.vocab.bos_id, the]))
for tok, p in sorted(zip(lm.vocab.tokens, row), key=lambda e: -e[1])[:4]:
    print(f"p({tok} | the) = {p:.3f}")
