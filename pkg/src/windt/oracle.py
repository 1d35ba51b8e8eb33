"""Exhaustive brute-force references for tiny decoding instances.

``replay_sequential`` is a deliberately naive, line-by-line transcription
of the frame-by-frame greedy loop, kept independent of the production
decoder as an N-version check. ``enumerate_lattice`` walks every
alignment path (interleavings of token and blank emissions that consume
exactly T frames, with a per-frame emission cap) and aggregates each
label sequence's probability over its paths; ``exact_kbest`` ranks the
aggregates. Enumeration is intentionally unoptimized and guarded by a
work estimate.
"""

from dataclasses import dataclass

import numpy as np

from .core import (
    EncoderOutput,
    FeasibilityExceeded,
    Hypothesis,
    TransducerModel,
    logsumexp,
)

# Hard feasibility limits for enumeration.
_MAX_FRAMES = 6
_MAX_VOCAB = 4
_MAX_PATHS = 2_000_000


def replay_sequential(model: TransducerModel, enc: EncoderOutput,
                      max_symbols_per_frame: int = 10) -> Hypothesis:
    """Naive re-implementation of frame-by-frame greedy decoding.

    Same tie-break (lowest index wins) and same per-frame symbol safeguard
    as the production decoder, but written as a plain scan with no shared
    code, so the two can check each other.
    """
    blank = model.vocab.blank_id
    state = model.initial_state()
    tokens = []
    stamps = []
    score = 0.0
    t = 0
    emitted_here = 0
    while t < enc.num_frames:
        row = model.joint(enc.frames[t:t + 1], state).log_probs[0]
        best = 0
        for v in range(1, model.vocab.size):
            if row[v] > row[best]:
                best = v
        if best == blank:
            score += float(row[blank])
            t += 1
            emitted_here = 0
            continue
        tokens.append(best)
        stamps.append(t)
        score += float(row[best])
        state = model.advance_state(state, best)
        emitted_here += 1
        if emitted_here >= max_symbols_per_frame:
            t += 1
            emitted_here = 0
    return Hypothesis(tokens=tuple(tokens), score=score, timestamps=tuple(stamps), state=state)


@dataclass(frozen=True)
class LatticeEnumeration:
    """Every alignment path of one instance, plus per-sequence aggregates.

    ``paths`` holds (label sequence, path log probability) per complete
    path; ``by_sequence`` maps each label sequence to the logsumexp of its
    paths' probabilities; ``total_log_prob`` is the logsumexp over all
    paths (0 when the cap truncates negligible mass).
    """

    paths: tuple[tuple[tuple[int, ...], float], ...]
    by_sequence: dict[tuple[int, ...], float]
    total_log_prob: float
    max_symbols_per_frame: int

    @property
    def path_count(self) -> int:
        return len(self.paths)


def _estimated_paths(num_frames: int, num_labels: int, cap: int) -> float:
    per_frame = sum(float(num_labels) ** e for e in range(cap + 1))
    return per_frame ** num_frames


def enumerate_lattice(model: TransducerModel, enc: EncoderOutput,
                      max_symbols_per_frame: int = 3) -> LatticeEnumeration:
    """Depth-first enumeration of all alignment paths.

    Blank emissions advance the time pointer by one frame; non-blank
    emissions stay at the frame and advance the decoder state, at most
    ``max_symbols_per_frame`` per frame (mirroring the decode-side
    safeguard so search and oracle explore the same hypothesis space).

    Raises FeasibilityExceeded when T, V, or the estimated path count is
    out of range.
    """
    num_frames = enc.num_frames
    vocab = model.vocab
    if num_frames > _MAX_FRAMES or vocab.size > _MAX_VOCAB:
        raise FeasibilityExceeded(
            f"instance too large to enumerate (T={num_frames}, V={vocab.size})"
        )
    if max_symbols_per_frame < 1:
        raise ValueError("max_symbols_per_frame must be >= 1")
    est = _estimated_paths(num_frames, vocab.size - 1, max_symbols_per_frame)
    if est > _MAX_PATHS:
        raise FeasibilityExceeded(
            f"~{est:.3g} paths exceed the {_MAX_PATHS} enumeration budget"
        )

    labels = vocab.non_blank_tokens()
    blank = vocab.blank_id
    row_cache: dict[tuple, np.ndarray] = {}

    def row_for(state, t):
        key = (state, t)
        row = row_cache.get(key)
        if row is None:
            row = model.joint(enc.frames[t:t + 1], state).log_probs[0]
            row_cache[key] = row
        return row

    paths: list[tuple[tuple[int, ...], float]] = []
    by_sequence: dict[tuple[int, ...], float] = {}

    def walk(t: int, emitted_here: int, state, tokens: tuple[int, ...], logp: float):
        if t == num_frames:
            paths.append((tokens, logp))
            prev = by_sequence.get(tokens)
            by_sequence[tokens] = logp if prev is None else float(np.logaddexp(prev, logp))
            return
        row = row_for(state, t)
        walk(t + 1, 0, state, tokens, logp + float(row[blank]))
        if emitted_here < max_symbols_per_frame:
            for v in labels:
                walk(t, emitted_here + 1, model.advance_state(state, v),
                     tokens + (v,), logp + float(row[v]))

    walk(0, 0, model.initial_state(), (), 0.0)
    total = logsumexp([lp for _, lp in paths])
    return LatticeEnumeration(
        paths=tuple(paths),
        by_sequence=by_sequence,
        total_log_prob=float(total),
        max_symbols_per_frame=max_symbols_per_frame,
    )


def exact_kbest(lattice: LatticeEnumeration, k: int) -> list[tuple[tuple[int, ...], float]]:
    """Top-k label sequences by aggregated (summed-over-paths) probability.

    Ties break toward the shorter sequence, then lexicographic tokens,
    matching the beam module's rule.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        lattice.by_sequence.items(),
        key=lambda item: (-item[1], len(item[0]), item[0]),
    )
    return ranked[:k]
