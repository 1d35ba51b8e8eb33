"""Label-looping batched greedy decoding, baseline and windowed variants.

The decode alternates two phases until every utterance is exhausted:

  phase A (blank skipping)  — every utterance that is still scanning
      evaluates a joiner window (one frame for the baseline variant,
      ``window_size`` frames for the wind variant) through a single
      ``joint_batched`` round shared by all scanners; blank-only windows
      advance that utterance's time pointer and it scans again next
      round, while an utterance whose window contains a non-blank argmax
      parks on the emission frame and waits.
  phase B (label advance)   — once nobody can blank-skip, all parked
      utterances emit their token and advance their decoder states in one
      batched round.

Decoder updates therefore happen only when labels are emitted, which is
what makes the scheme batch-friendly. Per-utterance tokens and timestamps
are identical to the single-utterance sequential decoder.

Cost semantics: every counter in a returned CostReport describes the
whole batch (joiner_calls = joint_batched rounds, decoder_calls =
batched advance rounds, frames_evaluated = frame evaluations summed over
the batch, peak_logit_floats = the largest simultaneous logit buffer)
and is replicated into every utterance's report; only ``jump_events``
is per-utterance, since jumps are a property of one utterance's
trajectory. Use ``batch_cost_report`` to collapse one batch into a
single report.
"""

import numpy as np

from .core import (
    BatchMismatch,
    CostReport,
    DecodeError,
    EncoderOutput,
    Hypothesis,
    TransducerModel,
)
from .greedy import GreedyConfig, GreedyResult

VARIANTS = ("baseline", "wind")


class _Lane:
    """Mutable per-utterance decode state."""

    __slots__ = ("enc", "t", "state", "tokens", "stamps", "score",
                 "symbols_at_t", "pending", "pending_offset", "jumps")

    def __init__(self, enc: EncoderOutput, state):
        self.enc = enc
        self.t = 0
        self.state = state
        self.tokens: list[int] = []
        self.stamps: list[int] = []
        self.score = 0.0
        self.symbols_at_t = 0
        self.pending: int | None = None  # label waiting for phase B
        self.pending_offset = 0          # in-window offset of that label
        self.jumps: list[int] = []

    @property
    def scanning(self) -> bool:
        return self.pending is None and self.t < self.enc.num_frames

    @property
    def done(self) -> bool:
        return self.pending is None and self.t >= self.enc.num_frames


def decode_batch(
    model: TransducerModel,
    batch: list[EncoderOutput],
    cfg: GreedyConfig,
    variant: str = "wind",
) -> list[GreedyResult]:
    """Decode a batch of utterances with the label-looping scheme.

    ``variant`` selects the phase-A window: "baseline" scans one frame per
    round, "wind" scans ``cfg.window_size`` frames. Utterances may have
    different lengths; finished ones are masked out of later rounds, never
    reordered, so outputs line up with the input batch.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    dims = {enc.feature_dim for enc in batch}
    if len(dims) > 1:
        raise BatchMismatch(f"mixed feature dimensions in batch: {sorted(dims)}")
    if batch[0].feature_dim != model.feature_dim:
        raise BatchMismatch(
            f"batch feature dim {batch[0].feature_dim} != model feature dim {model.feature_dim}"
        )

    window_size = 1 if variant == "baseline" else cfg.window_size
    blank = model.vocab.blank_id
    vocab_size = model.vocab.size
    lanes = [_Lane(enc, model.initial_state()) for enc in batch]

    joiner_rounds = 0
    decoder_rounds = 0
    total_frames = 0
    peak_logit_floats = 0

    while not all(lane.done for lane in lanes):
        # Phase A: blank skipping. One joint_batched round per pass over
        # the utterances that can still scan.
        while True:
            scanners = [lane for lane in lanes if lane.scanning]
            if not scanners:
                break
            requests = []
            widths = []
            for lane in scanners:
                n = min(window_size, lane.enc.num_frames - lane.t)
                widths.append(n)
                requests.append((lane.enc.frames[lane.t:lane.t + n], lane.state))
            try:
                windows = model.joint_batched(requests)
            except Exception as exc:
                raise DecodeError(f"batched joiner failed: {exc}",
                                  frame=scanners[0].t) from exc
            joiner_rounds += 1
            round_floats = sum(n * vocab_size for n in widths)
            peak_logit_floats = max(peak_logit_floats, round_floats)
            for lane, n, window in zip(scanners, widths, windows):
                total_frames += n
                log_probs = window.log_probs
                labels = np.argmax(log_probs, axis=1)
                non_blank = np.nonzero(labels != blank)[0]
                if non_blank.size == 0:
                    for r in range(n):
                        lane.score += log_probs[r, blank]
                    lane.t += n
                    lane.symbols_at_t = 0
                    lane.jumps.append(n)
                else:
                    i = int(non_blank[0])
                    for r in range(i):
                        lane.score += log_probs[r, blank]
                    lane.score += log_probs[i, int(labels[i])]
                    lane.pending = int(labels[i])
                    lane.pending_offset = i
                    # Park on the emission frame; the jump is recorded when
                    # the emission is applied in phase B.
                    lane.t += i

        # Phase B: apply all pending emissions in one batched advance round.
        parked = [lane for lane in lanes if lane.pending is not None]
        if not parked:
            break
        decoder_rounds += 1
        for lane in parked:
            label = lane.pending
            offset = lane.pending_offset
            lane.pending = None
            lane.tokens.append(label)
            lane.stamps.append(lane.t)
            try:
                lane.state = model.advance_state(lane.state, label)
            except Exception as exc:
                raise DecodeError(f"decoder failed: {exc}", frame=lane.t) from exc
            lane.symbols_at_t = lane.symbols_at_t + 1 if offset == 0 else 1
            if lane.symbols_at_t >= cfg.max_symbols_per_frame:
                lane.t += 1
                lane.symbols_at_t = 0
                lane.jumps.append(offset + 1)
            else:
                lane.jumps.append(offset)

    results = []
    for lane in lanes:
        hyp = Hypothesis(
            tokens=tuple(lane.tokens),
            score=lane.score,
            timestamps=tuple(lane.stamps),
            state=lane.state,
        )
        cost = CostReport(
            joiner_calls=joiner_rounds,
            frames_evaluated=total_frames,
            decoder_calls=decoder_rounds,
            jump_events=tuple(lane.jumps),
            peak_logit_floats=peak_logit_floats,
        )
        results.append(GreedyResult(hypothesis=hyp, cost=cost))
    return results


def batch_cost_report(results: list[GreedyResult]) -> CostReport:
    """Collapse one decode_batch output into a single batch-level report.

    Batch-level counters are replicated across the batch, so they are
    taken once; per-utterance jump multisets are merged.
    """
    if not results:
        raise ValueError("results must be non-empty")
    first = results[0].cost
    jumps: list[int] = []
    for result in results:
        jumps.extend(result.cost.jump_events)
    return CostReport(
        joiner_calls=first.joiner_calls,
        frames_evaluated=first.frames_evaluated,
        decoder_calls=first.decoder_calls,
        jump_events=tuple(jumps),
        peak_logit_floats=first.peak_logit_floats,
    )
