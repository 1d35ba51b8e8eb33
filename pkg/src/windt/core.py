"""Core types and the model interface for windowed transducer decoding.

Every decoding algorithm in this package (sequential greedy, windowed
greedy, batched label-looping, beam search, and the exhaustive reference
implementations) talks to acoustic models exclusively through the small
surface defined here: a handful of immutable value types, the
``TransducerModel`` interface, and two log-probability helpers.

All probabilities are carried in natural-log space; probability products
become sums, which keeps long utterances numerically stable.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

# Tolerance for "this row is a normalized log distribution".
ROW_NORM_TOL = 1e-6


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class InvalidLogits(ValueError):
    """Raised when a logit vector is unusable (NaN, +inf, or all -inf)."""


class IncompleteTable(LookupError):
    """Raised when a table-backed model is missing a (context, key) row."""


class DecodeError(RuntimeError):
    """A model call failed during decoding.

    Carries the frame index at which the failure occurred.
    """

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message if frame is None else f"{message} (frame {frame})")
        self.frame = frame


class BatchMismatch(ValueError):
    """Raised when utterances in one batch are not mutually compatible."""


class FeasibilityExceeded(ValueError):
    """Raised when an exhaustive-enumeration request is too large to run."""


class ReportMismatch(ValueError):
    """Raised when reports from different corpora are mixed in one table."""


# ---------------------------------------------------------------------------
# Log-probability helpers
# ---------------------------------------------------------------------------

def logsumexp(values, axis: int | None = None):
    """Numerically stable log(sum(exp(values))) along ``axis``.

    Entries equal to -inf are legal and contribute zero probability; an
    all--inf reduction yields -inf. Returns a float when ``axis`` is None,
    otherwise an ndarray.
    """
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        return float(-np.inf) if axis is None else np.full(0, -np.inf)
    m = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis))
    if axis is None:
        return float(out + shift.reshape(()))
    return out + np.squeeze(shift, axis=axis)


def log_normalize(raw_scores) -> np.ndarray:
    """Shift a vector of raw scores so that it is a log distribution.

    Returns ``raw - logsumexp(raw)``; the result satisfies
    ``logsumexp(result) == 0`` up to floating-point error.

    Raises:
        InvalidLogits: if any entry is NaN or infinite.
    """
    row = np.asarray(raw_scores, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise InvalidLogits(f"expected a non-empty vector, got shape {row.shape}")
    if not np.all(np.isfinite(row)):
        raise InvalidLogits("raw scores must be finite")
    return row - logsumexp(row)


def argmax_with_tiebreak(row) -> int:
    """Index of the maximum entry, ties broken to the lowest index.

    Entries may be -inf (impossible outcomes). Raises InvalidLogits when
    the row contains NaN/+inf or consists solely of -inf.
    """
    a = np.asarray(row, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidLogits(f"expected a non-empty vector, got shape {a.shape}")
    if np.any(np.isnan(a)) or np.any(a == np.inf):
        raise InvalidLogits("row contains NaN or +inf")
    if np.all(a == -np.inf):
        raise InvalidLogits("all entries are -inf")
    # np.argmax returns the first occurrence of the maximum.
    return int(np.argmax(a))


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Vocabulary:
    """Token inventory of a transducer model, including the blank symbol.

    Attributes:
        size: number of tokens, blank included. Must be at least 2.
        blank_id: index of the blank token; defaults to ``size - 1``.
    """

    size: int
    blank_id: int = -1

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"vocabulary needs blank plus at least one label, got size={self.size}")
        if self.blank_id == -1:
            object.__setattr__(self, "blank_id", self.size - 1)
        if not 0 <= self.blank_id < self.size:
            raise ValueError(f"blank_id {self.blank_id} out of range [0, {self.size})")

    def non_blank_tokens(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.size) if v != self.blank_id)


@dataclass(frozen=True)
class EncoderOutput:
    """Acoustic features produced upstream of decoding: a T x D matrix.

    T may be zero; empty utterances are legal and decode to the empty
    hypothesis. The frame matrix is made read-only at construction.
    """

    frames: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ValueError(f"frames must be 2-D (T x D), got shape {frames.shape}")
        if frames.size and not np.all(np.isfinite(frames)):
            raise ValueError("encoder frames must be finite")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[1]


# Decoder states are opaque to decoding algorithms: obtain one from
# TransducerModel.initial_state() or advance_state() and hand it back
# unchanged. Models must give handles value semantics (immutable and
# hashable); the synthetic models here use tuples of token ids.
DecoderStateHandle = Hashable


@dataclass(frozen=True)
class Hypothesis:
    """A (partial) decoding result.

    ``tokens`` holds non-blank token ids, ``timestamps`` the frame index at
    which each token was emitted (same length, non-decreasing), ``score``
    the cumulative natural-log probability, and ``state`` the decoder-state
    handle after consuming ``tokens``.
    """

    tokens: tuple[int, ...] = ()
    score: float = 0.0
    timestamps: tuple[int, ...] = ()
    state: DecoderStateHandle = None

    def __post_init__(self):
        if len(self.tokens) != len(self.timestamps):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.timestamps)} timestamps"
            )

    def trailing_emissions_at(self, frame: int) -> int:
        """Number of most-recent tokens emitted at ``frame``."""
        count = 0
        for ts in reversed(self.timestamps):
            if ts != frame:
                break
            count += 1
        return count


@dataclass(frozen=True)
class WindowLogits:
    """Per-frame log distributions for one decoder state over a frame window.

    ``log_probs`` has shape (n, V); each row is a normalized log
    distribution over the vocabulary for one encoder frame, starting at
    absolute frame ``window_start``.
    """

    log_probs: np.ndarray
    window_start: int = 0

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=np.float64)
        if lp.ndim != 2 or lp.shape[0] < 1 or lp.shape[1] < 2:
            raise InvalidLogits(f"log_probs must be (n >= 1) x (V >= 2), got {lp.shape}")
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise InvalidLogits("log_probs contain NaN or +inf")
        totals = logsumexp(lp, axis=1)
        if np.any(np.abs(totals) > ROW_NORM_TOL):
            raise InvalidLogits(
                f"rows are not normalized log distributions (max |logsumexp| = {np.max(np.abs(totals)):.3g})"
            )
        lp = lp.copy()
        lp.flags.writeable = False
        object.__setattr__(self, "log_probs", lp)

    @classmethod
    def from_normalized(cls, log_probs: np.ndarray, window_start: int = 0) -> "WindowLogits":
        """Wrap rows the caller guarantees are normalized log distributions.

        Skips validation and the defensive copy; the caller hands over
        ownership of ``log_probs``. This is the hot path for model
        implementations that normalize immediately before wrapping.
        """
        window = object.__new__(cls)
        object.__setattr__(window, "log_probs", log_probs)
        object.__setattr__(window, "window_start", window_start)
        return window

    @property
    def n(self) -> int:
        return self.log_probs.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.log_probs.shape[1]

    def argmax_labels(self) -> np.ndarray:
        """Per-row argmax with lowest-index tie-break, shape (n,)."""
        return np.argmax(self.log_probs, axis=1)


@dataclass(frozen=True)
class CostReport:
    """Cost counters for one decode (or an aggregate of decodes).

    joiner_calls counts joint/joint_batched invocations, i.e. sequential
    synchronization rounds; frames_evaluated counts frame-by-state joiner
    evaluations; decoder_calls counts decoder-state advances;
    jump_events holds the time-pointer jump of each decode-loop iteration;
    peak_logit_floats is the largest simultaneous logit buffer, in floats.
    prefix_cap_hits counts prefix-search completions skipped because they
    exceeded the completion-length cap.
    """

    joiner_calls: int = 0
    frames_evaluated: int = 0
    decoder_calls: int = 0
    jump_events: tuple[int, ...] = ()
    peak_logit_floats: int = 0
    prefix_cap_hits: int = 0

    def __post_init__(self):
        for name in ("joiner_calls", "frames_evaluated", "decoder_calls",
                     "peak_logit_floats", "prefix_cap_hits"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.frames_evaluated < self.joiner_calls:
            raise ValueError("every joiner call evaluates at least one frame")


class CostCounter:
    """Mutable accumulator used inside decode loops; freezes to CostReport."""

    __slots__ = ("joiner_calls", "frames_evaluated", "decoder_calls",
                 "jump_events", "peak_logit_floats", "prefix_cap_hits")

    def __init__(self):
        self.joiner_calls = 0
        self.frames_evaluated = 0
        self.decoder_calls = 0
        self.jump_events: list[int] = []
        self.peak_logit_floats = 0
        self.prefix_cap_hits = 0

    def joiner(self, frames: int, logit_floats: int):
        self.joiner_calls += 1
        self.frames_evaluated += frames
        if logit_floats > self.peak_logit_floats:
            self.peak_logit_floats = logit_floats

    def decoder(self, calls: int = 1):
        self.decoder_calls += calls

    def jump(self, size: int):
        self.jump_events.append(size)

    def prefix_cap_hit(self):
        self.prefix_cap_hits += 1

    def freeze(self) -> CostReport:
        return CostReport(
            joiner_calls=self.joiner_calls,
            frames_evaluated=self.frames_evaluated,
            decoder_calls=self.decoder_calls,
            jump_events=tuple(self.jump_events),
            peak_logit_floats=self.peak_logit_floats,
            prefix_cap_hits=self.prefix_cap_hits,
        )


# ---------------------------------------------------------------------------
# Model interface
# ---------------------------------------------------------------------------

class TransducerModel(ABC):
    """Abstract decoder/joiner pair; the only thing decoders may call.

    Implementations must be deterministic and safe for concurrent
    read-only use: ``advance_state`` returns a new handle and never
    mutates its input, and ``joint`` on a window of n frames must equal
    the row-stack of ``joint`` on each frame individually (windowing is a
    batching of independent per-frame evaluations).
    """

    @property
    @abstractmethod
    def vocab(self) -> Vocabulary:
        """Token inventory, including blank."""

    @property
    @abstractmethod
    def feature_dim(self) -> int:
        """Expected number of columns in encoder frames."""

    @abstractmethod
    def initial_state(self) -> DecoderStateHandle:
        """Decoder state before any token has been consumed."""

    @abstractmethod
    def advance_state(self, state: DecoderStateHandle, token: int) -> DecoderStateHandle:
        """State after feeding one non-blank ``token``; input unchanged."""

    @abstractmethod
    def joint(self, enc_rows: np.ndarray, state: DecoderStateHandle) -> WindowLogits:
        """Normalized log distributions for each row of ``enc_rows``."""

    def joint_batched(
        self, pairs: Sequence[tuple[np.ndarray, DecoderStateHandle]]
    ) -> list[WindowLogits]:
        """Element-wise equal to mapping ``joint``; override to fuse work."""
        return [self.joint(enc_rows, state) for enc_rows, state in pairs]
