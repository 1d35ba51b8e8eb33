"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. The corpora are built
once per session and shared across criteria; everything is seeded, so the
suite is fully deterministic.
"""

import numpy as np
import pytest

from windt import (
    BeamConfig,
    EncoderOutput,
    GreedyConfig,
    Vocabulary,
    WindowLogits,
    build_seeded_model,
    build_table_model,
    decode_batch,
    decode_graves_beam,
    decode_sequential,
    decode_wind,
    decode_wind_beam,
    enumerate_lattice,
    exact_kbest,
    first_emission_logprobs,
    generate_corpus,
    logsumexp,
    record_jump_histogram,
)
from windt.synthmodel import TableModel, enumerate_contexts

WINDOWS = (1, 2, 4, 8, 16)
CORPUS_SPECS = (  # (vocab size, blank bias, model seed, corpus seed)
    (8, 0.0, 101, 201),
    (8, 3.0, 102, 202),
    (32, 0.0, 103, 203),
    (32, 3.0, 104, 204),
)
UTTERANCES_PER_SPEC = 250  # 4 specs x 250 = 1000 utterances


def announce(criterion: int, message: str):
    print(f"\nACCEPTANCE {criterion}: PASS - {message}")


@pytest.fixture(scope="session")
def corpora():
    out = {}
    for vocab_size, bias, model_seed, corpus_seed in CORPUS_SPECS:
        model = build_seeded_model(model_seed, Vocabulary(vocab_size), 1, blank_bias=bias)
        corpus = generate_corpus(model, UTTERANCES_PER_SPEC, (20, 200), seed=corpus_seed)
        out[(vocab_size, bias)] = (model, corpus)
    return out


@pytest.fixture(scope="session")
def greedy_runs(corpora):
    """Sequential plus wind at every window size, for every corpus."""
    runs = {}
    for key, (model, corpus) in corpora.items():
        runs[key] = {"seq": [decode_sequential(model, u.encoder_output, GreedyConfig())
                             for u in corpus]}
        for window in WINDOWS:
            cfg = GreedyConfig(window_size=window)
            runs[key][window] = [decode_wind(model, u.encoder_output, cfg) for u in corpus]
    return runs


def random_tiny_table(rng, vocab_size, context_len, num_keys=4,
                      blank_lean=1.5, scale=1.5):
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


@pytest.fixture(scope="session")
def tiny_instances():
    """200 random tiny instances: T <= 4, V <= 3, context <= 1."""
    rng = np.random.Generator(np.random.PCG64(1234))
    instances = []
    for trial in range(200):
        vocab_size = int(rng.integers(2, 4))
        context_len = int(rng.integers(0, 2))
        num_frames = int(rng.integers(1, 5))
        model = random_tiny_table(rng, vocab_size, context_len)
        enc = EncoderOutput(rng.normal(0, 2, size=(num_frames, 1)),
                            utterance_id=f"tiny-{trial:03d}")
        instances.append((model, enc))
    return instances


def test_criterion_1_greedy_identity(corpora, greedy_runs):
    checked = 0
    for key, (model, corpus) in corpora.items():
        sequential = greedy_runs[key]["seq"]
        for window in WINDOWS:
            for seq_result, wind_result in zip(sequential, greedy_runs[key][window]):
                assert wind_result.hypothesis.tokens == seq_result.hypothesis.tokens
                assert wind_result.hypothesis.timestamps == seq_result.hypothesis.timestamps
                checked += 1
    assert checked == 4 * UTTERANCES_PER_SPEC * len(WINDOWS)
    announce(1, f"wind == sequential tokens+timestamps on {checked} (utterance, window) pairs")


def test_criterion_2_synchronization_reduction(greedy_runs):
    calls = {
        window: sum(
            result.cost.joiner_calls
            for vocab_size in (8, 32)
            for result in greedy_runs[(vocab_size, 3.0)][window]
        )
        for window in WINDOWS
    }
    assert calls[8] < calls[2] < calls[1]
    ratio = calls[16] / calls[8]
    assert 0.8 <= ratio <= 1.05
    announce(2, f"joiner calls w1={calls[1]} w2={calls[2]} w8={calls[8]} "
                f"w16={calls[16]}; w16/w8 = {ratio:.3f} in [0.8, 1.05]")


def test_criterion_3_batch_transparency(corpora, greedy_runs):
    checked = 0
    wind_rounds = baseline_rounds = 0
    for key, (model, corpus) in corpora.items():
        sequential = greedy_runs[key]["seq"]
        blank_heavy = key[1] == 3.0
        for batch_size in (2, 4, 8, 16):
            for variant in ("baseline", "wind"):
                cfg = GreedyConfig(window_size=8)
                for start in range(0, len(corpus), batch_size):
                    chunk = corpus[start:start + batch_size]
                    results = decode_batch(
                        model, [u.encoder_output for u in chunk], cfg, variant)
                    for single, batched in zip(sequential[start:start + batch_size], results):
                        assert batched.hypothesis.tokens == single.hypothesis.tokens
                        assert batched.hypothesis.timestamps == single.hypothesis.timestamps
                        checked += 1
                    if blank_heavy:
                        if variant == "wind":
                            wind_rounds += results[0].cost.joiner_calls
                        else:
                            baseline_rounds += results[0].cost.joiner_calls
    assert wind_rounds < baseline_rounds
    announce(3, f"batched outputs identical on {checked} decodes; blank-heavy rounds "
                f"wind={wind_rounds} < baseline={baseline_rounds}")


def test_criterion_4_first_emission_normalization():
    rng = np.random.Generator(np.random.PCG64(4444))
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 17))
        vocab_size = int(rng.choice([2, 8, 1024]))
        rows = rng.normal(0.0, 2.0, size=(n, vocab_size))
        rows = rows - logsumexp(rows, axis=1)[:, None]
        fed = first_emission_logprobs(WindowLogits(rows), blank_id=vocab_size - 1)
        worst = max(worst, abs(logsumexp(fed.log_probs)))
    assert worst <= 1e-6
    announce(4, f"10000 first-emission matrices normalize to 1 (worst |logsumexp| = {worst:.2e})")


def test_criterion_5_beam_oracle_equivalence(tiny_instances):
    wind_hits = graves_hits = 0
    cfg = BeamConfig(beam_size=16, window_size=4, max_expansions_per_timestep=3)
    for model, enc in tiny_instances:
        lattice = enumerate_lattice(model, enc, max_symbols_per_frame=3)
        best_seq, _ = exact_kbest(lattice, 1)[0]
        if decode_wind_beam(model, enc, cfg).best.tokens == best_seq:
            wind_hits += 1
        if decode_graves_beam(model, enc, 16, max_symbols_per_frame=3).best.tokens == best_seq:
            graves_hits += 1
    assert wind_hits == 200
    assert graves_hits == 200
    announce(5, f"wind beam {wind_hits}/200 and frame-sync beam {graves_hits}/200 "
                f"match the exhaustive-lattice optimum")


def test_criterion_6_degenerate_beam(corpora, greedy_runs):
    cfg = BeamConfig(beam_size=1, window_size=1)
    checked = 0
    for key, (model, corpus) in corpora.items():
        sequential = greedy_runs[key]["seq"]
        for utt, seq_result in zip(corpus, sequential):
            best = decode_wind_beam(model, utt.encoder_output, cfg).best
            assert best.tokens == seq_result.hypothesis.tokens
            checked += 1
    assert checked == 1000
    announce(6, f"beam K=1 N=1 tokens equal sequential greedy on {checked} utterances")


def test_criterion_7_beam_monotonicity():
    # blank-dominant regime: the windowed blank candidate stays
    # competitive, buckets rarely overflow the beam, and widening it only
    # adds recombined mass
    model = build_seeded_model(77, Vocabulary(8), 1, blank_bias=4.5)
    corpus = generate_corpus(model, 100, (8, 30), seed=771)
    improved = 0
    for utt in corpus:
        best_scores = [
            decode_wind_beam(model, utt.encoder_output,
                             BeamConfig(beam_size=k, window_size=8)).best.score
            for k in (1, 2, 3, 4)
        ]
        for narrow, wide in zip(best_scores, best_scores[1:]):
            assert wide >= narrow - 1e-9
        if best_scores[-1] > best_scores[0] + 1e-9:
            improved += 1
    announce(7, f"best beam score non-decreasing in K over {{1,2,3,4}} on 100 instances "
                f"(strictly improved on {improved})")


def test_criterion_8_memory_bound(greedy_runs):
    for (vocab_size, _bias), runs in greedy_runs.items():
        for window in WINDOWS:
            for result in runs[window]:
                assert result.cost.peak_logit_floats <= window * vocab_size  # batch of 1
    # window 16 against a 1024-token table model
    vocab = Vocabulary(1024)
    rng = np.random.Generator(np.random.PCG64(88))
    table = {((), key): rng.normal(0, 1, size=1024).astype(np.float32) for key in range(4)}
    model = build_table_model(TableModel(
        vocab=vocab, context_len=0, num_feature_keys=4, logit_table=table))
    enc = EncoderOutput(rng.normal(0, 2, size=(64, 1)))
    result = decode_wind(model, enc, GreedyConfig(window_size=16))
    assert result.cost.peak_logit_floats == 16 * 1024
    assert result.cost.peak_logit_floats <= 16400
    announce(8, f"peak logit buffer bounded by window x vocab in every greedy run; "
                f"w=16, V=1024 table model peaks at {result.cost.peak_logit_floats} <= 16400 floats")


def test_criterion_9_jump_histogram_shape():
    model = build_seeded_model(99, Vocabulary(8), 1, blank_bias=2.0)
    corpus = generate_corpus(model, 300, (20, 200), seed=990)

    def histogram(window):
        results = [decode_wind(model, u.encoder_output, GreedyConfig(window_size=window))
                   for u in corpus]
        return record_jump_histogram(results)

    support_w1 = set(histogram(1))
    assert support_w1 <= {0, 1}

    h8, h16 = histogram(8), histogram(16)
    n8, n16 = sum(h8.values()), sum(h16.values())
    tv = 0.5 * sum(
        abs(h8.get(j, 0) / n8 - h16.get(j, 0) / n16)
        for j in set(h8) | set(h16)
    )
    assert tv <= 0.1
    announce(9, f"w=1 jump support {sorted(support_w1)}; TV(w8, w16) = {tv:.4f} <= 0.1")


def test_criterion_10_oracle_self_consistency():
    rng = np.random.Generator(np.random.PCG64(1010))
    vocab = Vocabulary(2)
    worst = 0.0
    for _ in range(100):
        # label probability capped at 0.45, so paths with more than 25
        # emissions at one frame carry < 1e-6 of the mass
        table = {}
        for ctx in enumerate_contexts(vocab, 1):
            for key in range(4):
                label_p = float(rng.uniform(0.05, 0.45))
                table[(ctx, key)] = np.log([label_p, 1.0 - label_p]).astype(np.float32)
        model = build_table_model(TableModel(
            vocab=vocab, context_len=1, num_feature_keys=4, logit_table=table))
        num_frames = int(rng.integers(1, 4))
        enc = EncoderOutput(rng.normal(0, 2, size=(num_frames, 1)))
        lattice = enumerate_lattice(model, enc, max_symbols_per_frame=25)
        worst = max(worst, abs(lattice.total_log_prob))
    assert worst <= 1e-6
    announce(10, f"lattice total probability = 1 within 1e-6 on 100 instances "
                 f"(worst |log total| = {worst:.2e})")
