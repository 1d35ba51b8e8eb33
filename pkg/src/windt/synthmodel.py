"""Deterministic synthetic transducer models, corpora, and their file formats.

Two model families stand in for trained checkpoints:

  * ``TableModel`` — an explicit logit table over (decoder context,
    frame-feature key). Its states are enumerable, which makes exhaustive
    search tractable, and it round-trips through a binary tensor file.
  * ``SeededSyntheticModel`` — weights derived from a 64-bit seed, with an
    additive blank bias that controls blank density. Logits are a pure
    function of (context, encoder row), so windowed evaluation decomposes
    frame by frame.

Both use a limited-context decoder: the state is the last ``context_len``
non-blank tokens, so identical token histories always map to identical
joiner outputs.
"""

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    DecoderStateHandle,
    EncoderOutput,
    IncompleteTable,
    TransducerModel,
    Vocabulary,
    WindowLogits,
    log_normalize,
)

FORMAT_VERSION = "1.0"
TENSOR_MAGIC = b"WNDT"

# Internal scale of seeded logits; chosen so that blank_bias=+3 puts the
# blank argmax fraction in the 80-90% range for V=8.
_LOGIT_SCALE = 1.15
_BIAS_SCALE = 0.35


def enumerate_contexts(vocab: Vocabulary, context_len: int) -> list[tuple[int, ...]]:
    """All reachable decoder contexts, shortest first, then lexicographic.

    A context is the tuple of up to ``context_len`` most recent non-blank
    tokens; the empty tuple is the start-of-sequence state.
    """
    labels = vocab.non_blank_tokens()
    contexts: list[tuple[int, ...]] = [()]
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(context_len):
        frontier = [ctx + (v,) for ctx in frontier for v in labels]
        contexts.extend(frontier)
    return contexts


def _advance_context(context: tuple[int, ...], token: int, context_len: int) -> tuple[int, ...]:
    if context_len == 0:
        return ()
    return (context + (token,))[-context_len:]


def default_feature_key(row: np.ndarray, num_keys: int) -> int:
    """Quantize an encoder row to a small integer key.

    The first feature component selects the bucket: floor(row[0]) modulo
    num_keys. Deterministic and trivially controllable from fixtures.
    """
    return int(math.floor(float(row[0]))) % num_keys


# ---------------------------------------------------------------------------
# Table-backed models
# ---------------------------------------------------------------------------

@dataclass
class TableModel:
    """Description of an explicit-logit-table transducer.

    ``logit_table`` maps (context tuple, feature key) to a length-V vector
    of raw scores (stored float32 so the file format is lossless). The
    optional ``feature_key_fn`` overrides the standard quantizer; models
    with a custom key function cannot be serialized.
    """

    vocab: Vocabulary
    context_len: int
    num_feature_keys: int
    logit_table: dict[tuple[tuple[int, ...], int], np.ndarray]
    feature_key_fn: Callable[[np.ndarray], int] | None = None

    def feature_key(self, row: np.ndarray) -> int:
        if self.feature_key_fn is not None:
            return self.feature_key_fn(row)
        return default_feature_key(row, self.num_feature_keys)


class _TableTransducer(TransducerModel):
    """TransducerModel backed by a complete TableModel description."""

    def __init__(self, spec: TableModel):
        self._spec = spec
        self._vocab = spec.vocab
        self._context_len = spec.context_len
        # Pre-normalized float64 rows, keyed like the raw table.
        self._rows = {
            key: log_normalize(np.asarray(raw, dtype=np.float64))
            for key, raw in spec.logit_table.items()
        }

    @property
    def spec(self) -> TableModel:
        return self._spec

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def feature_dim(self) -> int:
        return 1

    @property
    def context_len(self) -> int:
        return self._context_len

    def initial_state(self) -> DecoderStateHandle:
        return ()

    def advance_state(self, state: DecoderStateHandle, token: int) -> DecoderStateHandle:
        if token == self._vocab.blank_id or not 0 <= token < self._vocab.size:
            raise ValueError(f"cannot advance decoder state with token {token}")
        return _advance_context(state, token, self._context_len)

    def joint(self, enc_rows: np.ndarray, state: DecoderStateHandle) -> WindowLogits:
        rows = []
        for row in enc_rows:
            key = self._spec.feature_key(row)
            try:
                rows.append(self._rows[(state, key)])
            except KeyError:
                raise IncompleteTable(f"no table row for context {state}, feature key {key}") from None
        return WindowLogits.from_normalized(np.stack(rows))


def build_table_model(spec: TableModel) -> TransducerModel:
    """Build a TransducerModel from a table description.

    The table must be complete: one row per reachable context per feature
    key. Raises IncompleteTable otherwise.
    """
    if spec.context_len < 0:
        raise ValueError("context_len must be >= 0")
    if spec.num_feature_keys < 1:
        raise ValueError("num_feature_keys must be >= 1")
    missing = [
        (ctx, key)
        for ctx in enumerate_contexts(spec.vocab, spec.context_len)
        for key in range(spec.num_feature_keys)
        if (ctx, key) not in spec.logit_table
    ]
    if missing:
        raise IncompleteTable(
            f"table is missing {len(missing)} rows, first: context {missing[0][0]}, key {missing[0][1]}"
        )
    for key, raw in spec.logit_table.items():
        row = np.asarray(raw)
        if row.shape != (spec.vocab.size,):
            raise ValueError(f"table row {key} has shape {row.shape}, expected ({spec.vocab.size},)")
    return _TableTransducer(spec)


# ---------------------------------------------------------------------------
# Seeded models
# ---------------------------------------------------------------------------

class SeededSyntheticModel(TransducerModel):
    """Transducer whose weights are derived from a seed.

    Per decoder context, a random projection (W, b) is drawn from a
    context-keyed RNG stream; logits for an encoder row are W @ row + b
    with ``blank_bias`` added to the blank entry, then log-normalized.
    Identical (seed, vocab, context_len, blank_bias, smoothness) and
    identical inputs always yield identical logits.

    ``smoothness`` does not enter the logit function itself (logits must
    stay a pure per-row function for window decomposition); it is the
    frame-to-frame correlation the corpus generator applies when
    synthesizing encoder outputs for this model.
    """

    def __init__(
        self,
        seed: int,
        vocab: Vocabulary,
        context_len: int,
        blank_bias: float = 3.0,
        smoothness: float = 0.5,
        feature_dim: int = 8,
    ):
        if context_len < 0 or context_len > 4:
            raise ValueError("context_len must be in [0, 4]")
        if not 0.0 <= smoothness <= 1.0:
            raise ValueError("smoothness must lie in [0, 1]")
        if feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        self.seed = int(seed)
        self._vocab = vocab
        self.context_len = context_len
        self.blank_bias = float(blank_bias)
        self.smoothness = float(smoothness)
        self._feature_dim = int(feature_dim)
        # Lazily filled (context -> (W, b)); idempotent, so benign under
        # concurrent read-mostly use.
        self._params: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def feature_dim(self) -> int:
        return self._feature_dim

    def initial_state(self) -> DecoderStateHandle:
        return ()

    def advance_state(self, state: DecoderStateHandle, token: int) -> DecoderStateHandle:
        if token == self._vocab.blank_id or not 0 <= token < self._vocab.size:
            raise ValueError(f"cannot advance decoder state with token {token}")
        return _advance_context(state, token, self.context_len)

    def _context_params(self, context: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        params = self._params.get(context)
        if params is None:
            entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, 0x57494E44, len(context), *context]
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
            w = rng.normal(0.0, _LOGIT_SCALE / math.sqrt(self._feature_dim),
                           size=(self._vocab.size, self._feature_dim))
            b = rng.normal(0.0, _BIAS_SCALE, size=self._vocab.size)
            params = (w, b)
            self._params[context] = params
        return params

    def joint(self, enc_rows: np.ndarray, state: DecoderStateHandle) -> WindowLogits:
        rows = np.asarray(enc_rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self._feature_dim:
            raise ValueError(f"expected (n, {self._feature_dim}) encoder rows, got {rows.shape}")
        w, b = self._context_params(state)
        raw = rows @ w.T
        raw += b
        raw[:, self._vocab.blank_id] += self.blank_bias
        raw -= np.max(raw, axis=1, keepdims=True)
        raw -= np.log(np.sum(np.exp(raw), axis=1, keepdims=True))
        return WindowLogits.from_normalized(raw)


def build_seeded_model(
    seed: int,
    vocab: Vocabulary,
    context_len: int,
    blank_bias: float = 3.0,
    smoothness: float = 0.5,
    feature_dim: int = 8,
) -> SeededSyntheticModel:
    """Construct a deterministic seeded model; see SeededSyntheticModel."""
    return SeededSyntheticModel(seed, vocab, context_len, blank_bias, smoothness, feature_dim)


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticUtterance:
    """One test utterance: encoder output plus a reference transcript."""

    encoder_output: EncoderOutput
    reference_tokens: tuple[int, ...]


def generate_corpus(
    model: TransducerModel,
    count: int,
    frame_range: tuple[int, int],
    seed: int,
) -> list[SyntheticUtterance]:
    """Deterministic synthetic corpus for ``model``.

    Frame counts are drawn uniformly from ``frame_range`` (inclusive).
    Encoder rows follow an AR(1) process whose coefficient is the model's
    ``smoothness`` (0 for models without one), with unit marginal variance.
    Reference transcripts are the model's own sequential-greedy output, so
    greedy decoding scores a WER of exactly zero by construction and any
    beam-search WER delta is attributable to the search.
    """
    from .greedy import GreedyConfig, decode_sequential

    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = frame_range
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid frame range {frame_range}")
    smoothness = float(getattr(model, "smoothness", 0.0))
    dim = model.feature_dim
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xC0B9A5])))
    cfg = GreedyConfig()
    corpus = []
    for i in range(count):
        num_frames = int(rng.integers(lo, hi + 1))
        noise = rng.standard_normal((num_frames, dim))
        frames = np.empty_like(noise)
        for t in range(num_frames):
            if t == 0 or smoothness == 0.0:
                frames[t] = noise[t]
            else:
                frames[t] = smoothness * frames[t - 1] + math.sqrt(1.0 - smoothness**2) * noise[t]
        enc = EncoderOutput(frames, utterance_id=f"utt-{seed}-{i:05d}")
        reference = decode_sequential(model, enc, cfg).hypothesis.tokens
        corpus.append(SyntheticUtterance(enc, reference))
    return corpus


# ---------------------------------------------------------------------------
# File formats: binary tensors and JSON model manifests
# ---------------------------------------------------------------------------

def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Write a float32 tensor: magic "WNDT", u32 rank, u32 dims, LE data."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"not a tensor file (magic {magic!r})")
        (rank,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        data = np.frombuffer(fh.read(), dtype="<f4")
    expected = int(np.prod(dims)) if rank else 1
    if data.size != expected:
        raise ValueError(f"tensor payload has {data.size} floats, header promises {expected}")
    return data.reshape(dims).astype(np.float32)


def _check_format_version(version: str, what: str) -> None:
    major = str(version).split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise ValueError(f"unsupported {what} format_version {version!r}")


def save_model(model: TransducerModel, manifest_path: str | Path,
               tensor_path: str | Path | None = None) -> None:
    """Write a model manifest (and, for table models, its tensor file).

    The tensor file defaults to the manifest path with a ``.wndt`` suffix
    and is referenced from the manifest by name, so the pair can be moved
    together.
    """
    manifest_path = Path(manifest_path)
    doc: dict = {
        "format_version": FORMAT_VERSION,
        "vocab_size": model.vocab.size,
        "blank_id": model.vocab.blank_id,
    }
    if isinstance(model, SeededSyntheticModel):
        doc["kind"] = "seeded"
        doc["context_len"] = model.context_len
        doc["seeded"] = {
            "seed": model.seed,
            "blank_bias": model.blank_bias,
            "smoothness": model.smoothness,
            "feature_dim": model.feature_dim,
        }
    elif isinstance(model, _TableTransducer):
        spec = model.spec
        if spec.feature_key_fn is not None:
            raise ValueError("models with a custom feature_key_fn cannot be serialized")
        if tensor_path is None:
            tensor_path = manifest_path.with_suffix(".wndt")
        tensor_path = Path(tensor_path)
        contexts = enumerate_contexts(spec.vocab, spec.context_len)
        table = np.stack([
            np.stack([np.asarray(spec.logit_table[(ctx, key)], dtype=np.float32)
                      for key in range(spec.num_feature_keys)])
            for ctx in contexts
        ])
        write_tensor(tensor_path, table)
        doc["kind"] = "table"
        doc["context_len"] = spec.context_len
        doc["table"] = {
            "tensor_file": tensor_path.name,
            "num_feature_keys": spec.num_feature_keys,
        }
    else:
        raise ValueError(f"cannot serialize model of type {type(model).__name__}")
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(manifest_path: str | Path) -> TransducerModel:
    """Load a model previously written by save_model."""
    manifest_path = Path(manifest_path)
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    _check_format_version(doc.get("format_version", "?"), "model manifest")
    vocab = Vocabulary(size=int(doc["vocab_size"]), blank_id=int(doc["blank_id"]))
    kind = doc.get("kind")
    if kind == "seeded":
        cfg = doc["seeded"]
        return SeededSyntheticModel(
            seed=int(cfg["seed"]),
            vocab=vocab,
            context_len=int(doc["context_len"]),
            blank_bias=float(cfg["blank_bias"]),
            smoothness=float(cfg["smoothness"]),
            feature_dim=int(cfg["feature_dim"]),
        )
    if kind == "table":
        cfg = doc["table"]
        tensor = read_tensor(manifest_path.parent / cfg["tensor_file"])
        contexts = enumerate_contexts(vocab, int(doc["context_len"]))
        num_keys = int(cfg["num_feature_keys"])
        if tensor.shape != (len(contexts), num_keys, vocab.size):
            raise ValueError(
                f"tensor shape {tensor.shape} does not match manifest "
                f"({len(contexts)} contexts, {num_keys} keys, V={vocab.size})"
            )
        table = {
            (ctx, key): tensor[i, key].copy()
            for i, ctx in enumerate(contexts)
            for key in range(num_keys)
        }
        return build_table_model(TableModel(
            vocab=vocab,
            context_len=int(doc["context_len"]),
            num_feature_keys=num_keys,
            logit_table=table,
        ))
    raise ValueError(f"unknown model kind {kind!r}")
