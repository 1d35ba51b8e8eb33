import numpy as np
import pytest

from windt import EncoderOutput, Vocabulary, build_table_model
from windt.synthmodel import TableModel, enumerate_contexts

FIXTURES = __import__("pathlib").Path(__file__).resolve().parent.parent / "fixtures"


def random_table_model(rng, vocab_size=3, context_len=1, num_keys=4,
                       blank_lean=1.0, scale=1.0):
    """Random dense logit table; higher blank_lean favors blank argmaxes."""
    vocab = Vocabulary(vocab_size)
    table = {}
    for ctx in enumerate_contexts(vocab, context_len):
        for key in range(num_keys):
            raw = rng.normal(0.0, 1.0, size=vocab_size) * scale
            raw[vocab.blank_id] += blank_lean
            table[(ctx, key)] = raw.astype(np.float32)
    return build_table_model(TableModel(
        vocab=vocab, context_len=context_len, num_feature_keys=num_keys,
        logit_table=table,
    ))


def chain_table_model():
    """V={a=0, b=1, blank=2}, k=1 model with forced argmaxes so that the
    3-frame utterance with keys 0,1,2 greedily decodes to [a, b] at [0, 1]."""
    vocab = Vocabulary(3)
    rows = {
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
    table = {
        key: np.log(np.asarray(row, dtype=np.float64)).astype(np.float32)
        for key, row in rows.items()
    }
    return build_table_model(TableModel(
        vocab=vocab, context_len=1, num_feature_keys=3, logit_table=table,
    ))


def chain_utterance():
    # feature values floor to keys 0, 1, 2
    return EncoderOutput(np.array([[0.2], [1.7], [2.4]]), utterance_id="chain")


def all_blank_model(vocab_size=3):
    """Blank argmax at every (context, key)."""
    vocab = Vocabulary(vocab_size)
    table = {}
    for ctx in enumerate_contexts(vocab, 1):
        for key in range(4):
            raw = np.full(vocab_size, -2.0, dtype=np.float32)
            raw[vocab.blank_id] = 3.0
            table[(ctx, key)] = raw
    return build_table_model(TableModel(
        vocab=vocab, context_len=1, num_feature_keys=4, logit_table=table,
    ))


def utterance(rng, num_frames, dim=1, uid="u"):
    return EncoderOutput(rng.normal(0.0, 2.0, size=(num_frames, dim)), utterance_id=uid)


@pytest.fixture(scope="session")
def rng():
    return np.random.Generator(np.random.PCG64(20240817))
