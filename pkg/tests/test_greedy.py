import numpy as np
import pytest

from windt import (
    DecodeError,
    EncoderOutput,
    GreedyConfig,
    Vocabulary,
    build_seeded_model,
    decode_sequential,
    decode_wind,
    generate_corpus,
    record_jump_histogram,
)
from windt.core import TransducerModel

from conftest import all_blank_model, chain_table_model, chain_utterance, random_table_model, utterance


def test_empty_utterance_decodes_to_empty_hypothesis():
    model = chain_table_model()
    enc = EncoderOutput(np.zeros((0, 1)), utterance_id="empty")
    for fn in (decode_sequential, decode_wind):
        result = fn(model, enc, GreedyConfig(window_size=4))
        assert result.hypothesis.tokens == ()
        assert result.hypothesis.score == 0.0
        assert result.cost.joiner_calls == 0
        assert result.cost.frames_evaluated == 0
        assert result.cost.peak_logit_floats == 0


def test_sequential_on_forced_chain():
    model = chain_table_model()
    result = decode_sequential(model, chain_utterance(), GreedyConfig())
    assert result.hypothesis.tokens == (0, 1)
    assert result.hypothesis.timestamps == (0, 1)
    assert result.cost.joiner_calls == 5
    assert result.cost.frames_evaluated == 5
    assert result.cost.decoder_calls == 2


def test_wind_on_forced_chain():
    # window 4 over 3 frames: windows of 3 (emit a), 3 (emit b at offset 1),
    # then 2 all-blank frames consumed in one jump.
    model = chain_table_model()
    result = decode_wind(model, chain_utterance(), GreedyConfig(window_size=4))
    assert result.hypothesis.tokens == (0, 1)
    assert result.hypothesis.timestamps == (0, 1)
    assert result.cost.joiner_calls == 3
    assert result.cost.frames_evaluated == 3 + 3 + 2
    assert result.cost.jump_events == (0, 1, 2)


def test_window_one_reproduces_sequential_exactly(rng):
    model = build_seeded_model(21, Vocabulary(8), 1, blank_bias=2.0)
    corpus = generate_corpus(model, 200, (5, 80), seed=13)
    cfg = GreedyConfig(window_size=1)
    for utt in corpus:
        seq = decode_sequential(model, utt.encoder_output, cfg)
        wind = decode_wind(model, utt.encoder_output, cfg)
        assert wind.hypothesis == seq.hypothesis
        assert wind.cost == seq.cost


def test_all_blank_model_jumps_whole_windows():
    model = all_blank_model()
    enc = EncoderOutput(np.linspace(0, 3, 16).reshape(16, 1), utterance_id="blanky")
    result = decode_wind(model, enc, GreedyConfig(window_size=8))
    assert result.hypothesis.tokens == ()
    assert result.cost.joiner_calls == 2
    assert result.cost.jump_events == (8, 8)
    seq = decode_sequential(model, enc, GreedyConfig())
    assert seq.hypothesis.tokens == ()
    assert seq.cost.joiner_calls == 16


@pytest.mark.parametrize("window", [1, 2, 4, 8, 16])
def test_wind_output_identity_across_windows(window, rng):
    models = [
        build_seeded_model(31, Vocabulary(8), 1, blank_bias=3.0),
        build_seeded_model(32, Vocabulary(32), 2, blank_bias=0.0),
    ]
    for model in models:
        corpus = generate_corpus(model, 40, (10, 120), seed=99)
        for utt in corpus:
            seq = decode_sequential(model, utt.encoder_output, GreedyConfig())
            wind = decode_wind(model, utt.encoder_output, GreedyConfig(window_size=window))
            assert wind.hypothesis.tokens == seq.hypothesis.tokens
            assert wind.hypothesis.timestamps == seq.hypothesis.timestamps
            assert wind.hypothesis.score == pytest.approx(seq.hypothesis.score, abs=1e-9)


def test_wind_identity_on_random_table_models(rng):
    # table models exercise sharp/degenerate rows the seeded family avoids
    for trial in range(60):
        model = random_table_model(
            rng,
            vocab_size=int(rng.integers(2, 5)),
            context_len=int(rng.integers(0, 3)),
            blank_lean=float(rng.uniform(-1, 3)),
        )
        enc = utterance(rng, int(rng.integers(0, 30)))
        seq = decode_sequential(model, enc, GreedyConfig())
        for window in (2, 3, 8):
            wind = decode_wind(model, enc, GreedyConfig(window_size=window))
            assert wind.hypothesis.tokens == seq.hypothesis.tokens
            assert wind.hypothesis.timestamps == seq.hypothesis.timestamps


def test_cost_invariants_and_bounds(rng):
    model = build_seeded_model(41, Vocabulary(8), 1, blank_bias=3.0)
    corpus = generate_corpus(model, 30, (20, 100), seed=17)
    vocab_size = model.vocab.size
    prev_calls = None
    for window in (1, 2, 4, 8, 16):
        cfg = GreedyConfig(window_size=window)
        total_calls = 0
        for utt in corpus:
            seq = decode_sequential(model, utt.encoder_output, cfg)
            wind = decode_wind(model, utt.encoder_output, cfg)
            total_calls += wind.cost.joiner_calls
            # synchronization monotonicity, frame-work bound, memory bound
            assert wind.cost.joiner_calls <= seq.cost.joiner_calls
            assert wind.cost.frames_evaluated <= seq.cost.frames_evaluated * window
            n_max = max(wind.cost.jump_events, default=0)
            assert wind.cost.peak_logit_floats <= window * vocab_size
            assert all(0 <= j <= window for j in wind.cost.jump_events)
            assert wind.cost.frames_evaluated >= wind.cost.joiner_calls
        if prev_calls is not None:
            assert total_calls <= prev_calls
        prev_calls = total_calls


def test_peak_logit_floats_is_exactly_max_window_by_vocab(rng):
    model = build_seeded_model(5, Vocabulary(8), 1, blank_bias=3.0)
    enc = utterance(rng, 37, dim=model.feature_dim)
    # T > window guarantees at least one full window gets evaluated
    result = decode_wind(model, enc, GreedyConfig(window_size=8))
    assert result.cost.peak_logit_floats == 8 * model.vocab.size
    short = EncoderOutput(enc.frames[:5])
    result = decode_wind(model, short, GreedyConfig(window_size=8))
    assert result.cost.peak_logit_floats == 5 * model.vocab.size


def test_max_symbols_per_frame_safeguard_terminates():
    # model that never emits blank: the safeguard must force frame advances
    vocab = Vocabulary(3, blank_id=2)

    class StuckModel(TransducerModel):
        @property
        def vocab(self):
            return vocab

        @property
        def feature_dim(self):
            return 1

        def initial_state(self):
            return ()

        def advance_state(self, state, token):
            return ()

        def joint(self, enc_rows, state):
            from windt import WindowLogits, log_normalize
            row = log_normalize([5.0, 0.0, -5.0])
            return WindowLogits(np.tile(row, (len(enc_rows), 1)))

    model = StuckModel()
    enc = EncoderOutput(np.zeros((3, 1)))
    for fn, window in ((decode_sequential, 1), (decode_wind, 2)):
        result = fn(model, enc, GreedyConfig(window_size=window, max_symbols_per_frame=4))
        assert len(result.hypothesis.tokens) == 3 * 4
        # every 4th emission is a forced advance
        assert result.hypothesis.timestamps == (0,) * 4 + (1,) * 4 + (2,) * 4


def test_wind_matches_sequential_under_safeguard(rng):
    # near-stuck model: strong label bias makes multi-emission frames common
    model = random_table_model(rng, vocab_size=3, context_len=1, blank_lean=-2.5)
    for trial in range(20):
        enc = utterance(rng, int(rng.integers(1, 12)))
        seq = decode_sequential(model, enc, GreedyConfig(max_symbols_per_frame=3))
        for window in (2, 4):
            wind = decode_wind(model, enc, GreedyConfig(window_size=window, max_symbols_per_frame=3))
            assert wind.hypothesis.tokens == seq.hypothesis.tokens
            assert wind.hypothesis.timestamps == seq.hypothesis.timestamps


def test_decode_error_carries_frame_index():
    vocab = Vocabulary(3)

    class ExplodingModel(TransducerModel):
        @property
        def vocab(self):
            return vocab

        @property
        def feature_dim(self):
            return 1

        def initial_state(self):
            return ()

        def advance_state(self, state, token):
            return ()

        def joint(self, enc_rows, state):
            raise RuntimeError("boom")

    with pytest.raises(DecodeError) as err:
        decode_sequential(ExplodingModel(), EncoderOutput(np.zeros((2, 1))), GreedyConfig())
    assert err.value.frame == 0


# -- jump histograms ----------------------------------------------------------

def test_jump_histogram_window_one_support(rng):
    model = build_seeded_model(51, Vocabulary(8), 1, blank_bias=2.0)
    corpus = generate_corpus(model, 20, (10, 60), seed=23)
    results = [decode_wind(model, u.encoder_output, GreedyConfig(window_size=1)) for u in corpus]
    histogram = record_jump_histogram(results)
    assert set(histogram) <= {0, 1}
    assert sum(histogram.values()) == sum(len(r.cost.jump_events) for r in results)


def test_jump_histogram_all_blank():
    model = all_blank_model()
    enc = EncoderOutput(np.zeros((16, 1)))
    result = decode_wind(model, enc, GreedyConfig(window_size=8))
    assert record_jump_histogram([result]) == {8: 2}


def test_jump_histogram_rejects_empty():
    with pytest.raises(ValueError):
        record_jump_histogram([])


def test_large_windows_use_long_jumps_less(rng):
    # the largest jump's share shrinks as the window grows
    model = build_seeded_model(61, Vocabulary(8), 1, blank_bias=3.0)
    corpus = generate_corpus(model, 40, (40, 120), seed=29)

    def max_jump_share(window):
        results = [decode_wind(model, u.encoder_output, GreedyConfig(window_size=window))
                   for u in corpus]
        histogram = record_jump_histogram(results)
        total = sum(histogram.values())
        return histogram.get(window, 0) / total

    assert max_jump_share(16) < max_jump_share(2)
