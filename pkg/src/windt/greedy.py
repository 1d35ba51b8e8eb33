"""Single-utterance greedy decoding: sequential baseline and windowed variant.

The sequential decoder evaluates one frame per joiner call. The windowed
decoder evaluates up to ``window_size`` consecutive frames against the
current decoder state in a single call and jumps the time pointer past
runs of blank argmaxes; because the decoder state cannot change while
blanks are being emitted, its token and timestamp output is identical to
the sequential decoder on every input. Window size 1 degenerates to the
sequential algorithm, cost counters included.
"""

from dataclasses import dataclass

import numpy as np

from .core import (
    CostCounter,
    CostReport,
    DecodeError,
    EncoderOutput,
    Hypothesis,
    TransducerModel,
)


@dataclass(frozen=True)
class GreedyConfig:
    """Greedy decoding knobs.

    window_size 1 is the standard frame-by-frame algorithm.
    max_symbols_per_frame bounds consecutive emissions at one time step;
    when reached, the time pointer is forced one frame ahead so decoding
    always terminates.
    """

    window_size: int = 1
    max_symbols_per_frame: int = 10

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.max_symbols_per_frame < 1:
            raise ValueError("max_symbols_per_frame must be >= 1")


@dataclass(frozen=True)
class GreedyResult:
    hypothesis: Hypothesis
    cost: CostReport


def decode_sequential(model: TransducerModel, enc: EncoderOutput, cfg: GreedyConfig) -> GreedyResult:
    """Frame-by-frame greedy decode.

    Per loop iteration: one joiner call on the current frame; a non-blank
    argmax appends the token and advances the decoder state while the time
    pointer stays put (jump 0), a blank advances the pointer one frame
    (jump 1). ``cfg.window_size`` is ignored.
    """
    blank = model.vocab.blank_id
    num_frames = enc.num_frames
    state = model.initial_state()
    tokens: list[int] = []
    stamps: list[int] = []
    score = 0.0
    cost = CostCounter()
    t = 0
    symbols_at_t = 0
    while t < num_frames:
        try:
            window = model.joint(enc.frames[t:t + 1], state)
        except Exception as exc:
            raise DecodeError(f"joiner failed: {exc}", frame=t) from exc
        cost.joiner(frames=1, logit_floats=model.vocab.size)
        row = window.log_probs[0]
        label = int(np.argmax(row))
        if label != blank:
            score += row[label]
            tokens.append(label)
            stamps.append(t)
            try:
                state = model.advance_state(state, label)
            except Exception as exc:
                raise DecodeError(f"decoder failed: {exc}", frame=t) from exc
            cost.decoder()
            symbols_at_t += 1
            if symbols_at_t >= cfg.max_symbols_per_frame:
                t += 1
                symbols_at_t = 0
                cost.jump(1)
            else:
                cost.jump(0)
        else:
            score += row[blank]
            t += 1
            symbols_at_t = 0
            cost.jump(1)
    hyp = Hypothesis(tokens=tuple(tokens), score=score, timestamps=tuple(stamps), state=state)
    return GreedyResult(hypothesis=hyp, cost=cost.freeze())


def decode_wind(model: TransducerModel, enc: EncoderOutput, cfg: GreedyConfig) -> GreedyResult:
    """Windowed greedy decode.

    Per loop iteration, evaluates n = min(window_size, T - t) frames in one
    joiner call. If every argmax in the window is blank the pointer jumps
    n frames; otherwise the first non-blank label is emitted at offset i,
    the decoder state advances, and the pointer jumps i frames. The
    max_symbols_per_frame safeguard mirrors decode_sequential, so outputs
    are identical to the sequential algorithm for every input.
    """
    blank = model.vocab.blank_id
    num_frames = enc.num_frames
    vocab_size = model.vocab.size
    state = model.initial_state()
    tokens: list[int] = []
    stamps: list[int] = []
    score = 0.0
    cost = CostCounter()
    t = 0
    symbols_at_t = 0
    while t < num_frames:
        n = min(cfg.window_size, num_frames - t)
        try:
            window = model.joint(enc.frames[t:t + n], state)
        except Exception as exc:
            raise DecodeError(f"joiner failed: {exc}", frame=t) from exc
        cost.joiner(frames=n, logit_floats=n * vocab_size)
        log_probs = window.log_probs
        labels = np.argmax(log_probs, axis=1)
        non_blank = np.nonzero(labels != blank)[0]
        if non_blank.size == 0:
            # Whole window is blank: consume it in one jump. Blank scores
            # accumulate in frame order so the running score stays
            # bit-identical to the sequential decoder's.
            for r in range(n):
                score += log_probs[r, blank]
            t += n
            symbols_at_t = 0
            cost.jump(n)
        else:
            i = int(non_blank[0])
            label = int(labels[i])
            for r in range(i):
                score += log_probs[r, blank]
            score += log_probs[i, label]
            tokens.append(label)
            stamps.append(t + i)
            try:
                state = model.advance_state(state, label)
            except Exception as exc:
                raise DecodeError(f"decoder failed: {exc}", frame=t + i) from exc
            cost.decoder()
            symbols_at_t = symbols_at_t + 1 if i == 0 else 1
            if symbols_at_t >= cfg.max_symbols_per_frame:
                t += i + 1
                symbols_at_t = 0
                cost.jump(i + 1)
            else:
                t += i
                cost.jump(i)
    hyp = Hypothesis(tokens=tuple(tokens), score=score, timestamps=tuple(stamps), state=state)
    return GreedyResult(hypothesis=hyp, cost=cost.freeze())


def record_jump_histogram(results) -> dict[int, int]:
    """Histogram of jump sizes over the given decode results.

    The total count equals the total number of decode-loop iterations.
    """
    results = list(results)
    if not results:
        raise ValueError("results must be non-empty")
    histogram: dict[int, int] = {}
    for result in results:
        for jump in result.cost.jump_events:
            histogram[jump] = histogram.get(jump, 0) + 1
    return dict(sorted(histogram.items()))
