"""Walk through the tokenizer and vocabulary machinery.

Trains a tiny BPE vocab per "language", union-merges them into one
evolving vocabulary, and shows the old/overlap/new partition plus the
per-token update coefficients that fall out of it.
"""

import numpy as np

from lexcl import bpe, vocab

corpora = {
    "task 0 (anchor)": ["the cat sat on the mat", "the dog sat on the rug"] * 4,
    "task 1 (shares 'the'/'sat')": ["le cat sat avec the chien",
                                    "le chien sat avec the cat"] * 4,
    "task 2 (disjoint)": ["xyzzy qwrk xyzzy qwrk", "qwrk zzyx qwrk zzyx"] * 4,
}

state = vocab.new_state()
counts = np.zeros(0, dtype=np.int64)

for t, (name, corpus) in enumerate(corpora.items()):
    tv = bpe.train_bpe(corpus, target_size=280, task_index=t)
    merges = [bpe.token_to_text(tv.tokens[r.result]) for r in tv.rules]
    print(f"\n=== {name} ===")
    print(f"task vocab: 256 bytes + {len(tv.rules)} merges")
    print(f"first merges: {merges[:8]}")

    state, part = vocab.merge_vocab(state, tv)
    print(f"union vocab size: {state.size}")
    print(f"partition: old={len(part.old)} overlap={len(part.overlap)} "
          f"new={len(part.new)}")

    padded = np.zeros(state.size, dtype=np.int64)
    padded[: len(counts)] = counts
    lam = vocab.lambda_for(part, padded)
    values, freq = np.unique(lam, return_counts=True)
    print("lambda values:", {float(v): int(c) for v, c in zip(values, freq)})

    counts = vocab.update_counts(counts, tv, state)

sample = b"the cat sat"
ids = state.global_ids(sample, 0)
print(f"\nencode {sample!r} with task-0 rules -> {ids}")
print("decoded tokens:", [state.tokens[i] for i in ids])
