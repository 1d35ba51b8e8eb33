#!/usr/bin/env python3
"""Regenerate the committed fixtures under fixtures/.

The tiny-lattice model is a 3-token (a=0, b=1, blank=2), context-1 table
model over 3 feature keys, built so that greedy decoding of the canonical
3-frame utterance (keys 0,1,2) emits [a, b] at frames [0, 1]. Expected
beam outputs are frozen from the exhaustive-lattice reference.

Run from the repository root:  python3 scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from windt import EncoderOutput, Vocabulary, enumerate_lattice, exact_kbest, save_model
from windt.synthmodel import TableModel, build_table_model

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

# Probability rows per (context, feature key); logits are their logs.
TINY_ROWS = {
    ((), 0): [0.70, 0.10, 0.20],
    ((), 1): [0.15, 0.25, 0.60],
    ((), 2): [0.10, 0.15, 0.75],
    ((0,), 0): [0.15, 0.10, 0.75],
    ((0,), 1): [0.10, 0.60, 0.30],
    ((0,), 2): [0.20, 0.20, 0.60],
    ((1,), 0): [0.25, 0.15, 0.60],
    ((1,), 1): [0.10, 0.20, 0.70],
    ((1,), 2): [0.05, 0.15, 0.80],
}

# Feature values floor to keys 0, 1, 2.
TINY_FRAMES = [[0.2], [1.7], [2.4]]


def tiny_lattice_model():
    vocab = Vocabulary(size=3)
    table = {
        key: np.log(np.asarray(row, dtype=np.float64)).astype(np.float32)
        for key, row in TINY_ROWS.items()
    }
    return build_table_model(TableModel(
        vocab=vocab, context_len=1, num_feature_keys=3, logit_table=table,
    ))


def main():
    FIXTURES.mkdir(exist_ok=True)
    model = tiny_lattice_model()
    save_model(model, FIXTURES / "tiny-lattice.json", FIXTURES / "tiny-lattice.wndt")

    with open(FIXTURES / "tiny-lattice.corpus.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "utterance_id": "tiny-000",
            "frames": TINY_FRAMES,
            "format_version": "1.0",
        }) + "\n")

    enc = EncoderOutput(np.asarray(TINY_FRAMES, dtype=np.float64), utterance_id="tiny-000")
    lattice = enumerate_lattice(model, enc, max_symbols_per_frame=3)
    ranked = exact_kbest(lattice, 5)
    expected = {
        "format_version": "1.0",
        "utterances": [{
            "utterance_id": "tiny-000",
            "best_tokens": list(ranked[0][0]),
            "best_log_prob": ranked[0][1],
            "top5": [{"tokens": list(seq), "log_prob": lp} for seq, lp in ranked],
        }],
    }
    (FIXTURES / "tiny-lattice.expected.json").write_text(
        json.dumps(expected, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print("wrote", sorted(p.name for p in FIXTURES.iterdir()))
    print("oracle top:", ranked[0])


if __name__ == "__main__":
    main()
