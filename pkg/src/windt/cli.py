"""Command-line entry points: decode a corpus, compare two algorithm
configurations, and sweep configurations into tradeoff/jump reports.

All outputs are deterministic functions of the run manifest. Wall-clock
time is never part of any artifact; synchronization-round counts from the
cost reports are the speed proxy.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import batched, beam, greedy, metrics, synthmodel
from .core import EncoderOutput, ReportMismatch
from .synthmodel import SyntheticUtterance

FORMAT_VERSION = "1.0"

ALGORITHMS = ("sequential", "wind", "batched-baseline", "batched-wind",
              "wind-beam", "graves-beam")

TRADEOFF_HEADER = ["algo", "window", "beam", "batch", "wer", "joiner_calls",
                   "frames_evaluated", "decoder_calls", "peak_logit_floats"]
JUMPS_HEADER = ["algo", "window", "beam", "batch", "jump", "count"]


class ConfigError(ValueError):
    """Invalid manifest/flags; maps to exit code 2."""


@dataclass
class RunManifest:
    """Everything one decode run depends on."""

    model_path: Path
    algo: str
    corpus_seed: int = 42
    corpus_count: int = 100
    frames: tuple[int, int] = (20, 60)
    corpus_file: Path | None = None
    window: int = 8
    beam: int = 4
    batch: int = 8
    max_symbols: int = 10
    out_dir: Path | None = None
    workers: int = 1

    def validate(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        if not self.model_path.exists():
            raise ConfigError(f"model manifest not found: {self.model_path}")
        if self.corpus_file is not None and not self.corpus_file.exists():
            raise ConfigError(f"corpus file not found: {self.corpus_file}")
        if self.corpus_file is None and self.corpus_count < 1:
            raise ConfigError("corpus is empty (--corpus-count must be >= 1)")
        if self.window < 1 or self.beam < 1 or self.batch < 1 or self.max_symbols < 1:
            raise ConfigError("window, beam, batch, and max-symbols must be >= 1")
        if self.frames[0] < 0 or self.frames[1] < self.frames[0]:
            raise ConfigError(f"bad frame range {self.frames[0]}:{self.frames[1]}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _load_corpus(manifest: RunManifest, model) -> list[SyntheticUtterance]:
    if manifest.corpus_file is not None:
        utterances = []
        with open(manifest.corpus_file, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                _check_major(doc.get("format_version", FORMAT_VERSION), "corpus file")
                frames = np.asarray(doc["frames"], dtype=np.float64)
                if frames.size == 0:
                    frames = frames.reshape(0, model.feature_dim)
                enc = EncoderOutput(frames, utterance_id=doc["utterance_id"])
                utterances.append(SyntheticUtterance(enc, tuple(doc.get("reference_tokens", ()))))
        if not utterances:
            raise ConfigError(f"corpus file {manifest.corpus_file} holds no utterances")
        return utterances
    return synthmodel.generate_corpus(
        model, manifest.corpus_count, manifest.frames, manifest.corpus_seed
    )


def _check_major(version, what: str):
    if str(version).split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ConfigError(f"unsupported {what} format_version {version!r}")


def _decode_corpus(manifest: RunManifest, model, corpus,
                   algo: str | None = None, window: int | None = None,
                   beam_size: int | None = None):
    """Run one algorithm over the corpus.

    Returns (records, costs): one {tokens, timestamps, score} record per
    utterance in corpus order, and the list of cost reports to aggregate
    (per utterance, or per batch for the batched algorithms).
    """
    algo = algo or manifest.algo
    window = window or manifest.window
    beam_size = beam_size or manifest.beam
    cfg = greedy.GreedyConfig(window_size=window, max_symbols_per_frame=manifest.max_symbols)

    if algo in ("sequential", "wind"):
        fn = greedy.decode_sequential if algo == "sequential" else greedy.decode_wind

        def one(utt):
            result = fn(model, utt.encoder_output, cfg)
            return result.hypothesis, result.cost

        if manifest.workers > 1:
            with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
                outcomes = list(pool.map(one, corpus))
        else:
            outcomes = [one(utt) for utt in corpus]
        return [h for h, _ in outcomes], [c for _, c in outcomes]

    if algo in ("batched-baseline", "batched-wind"):
        variant = "baseline" if algo == "batched-baseline" else "wind"
        hyps = []
        costs = []
        for start in range(0, len(corpus), manifest.batch):
            chunk = corpus[start:start + manifest.batch]
            results = batched.decode_batch(model, [u.encoder_output for u in chunk], cfg, variant)
            hyps.extend(r.hypothesis for r in results)
            costs.append(batched.batch_cost_report(results))
        return hyps, costs

    if algo in ("wind-beam", "graves-beam"):
        if algo == "wind-beam":
            bcfg = beam.BeamConfig(beam_size=beam_size, window_size=window,
                                   max_expansions_per_timestep=manifest.max_symbols)

            def one(utt):
                result = beam.decode_wind_beam(model, utt.encoder_output, bcfg)
                return result.best, result.cost
        else:
            def one(utt):
                result = beam.decode_graves_beam(model, utt.encoder_output, beam_size,
                                                 max_symbols_per_frame=manifest.max_symbols)
                return result.best, result.cost

        if manifest.workers > 1:
            with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
                outcomes = list(pool.map(one, corpus))
        else:
            outcomes = [one(utt) for utt in corpus]
        return [h for h, _ in outcomes], [c for _, c in outcomes]

    raise ConfigError(f"unknown algorithm {algo!r}")


def _write_outputs(manifest: RunManifest, corpus, hyps, costs):
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "hyps.jsonl", "w", encoding="utf-8") as fh:
        for utt, hyp in zip(corpus, hyps):
            fh.write(json.dumps({
                "utterance_id": utt.encoder_output.utterance_id,
                "tokens": list(hyp.tokens),
                "timestamps": list(hyp.timestamps),
                "score": float(hyp.score),
                "format_version": FORMAT_VERSION,
            }, sort_keys=True) + "\n")
    total = metrics.aggregate_costs(costs)
    histogram = {}
    for jump in total.jump_events:
        histogram[jump] = histogram.get(jump, 0) + 1
    with open(out / "cost.json", "w", encoding="utf-8") as fh:
        json.dump({
            "format_version": FORMAT_VERSION,
            "joiner_calls": total.joiner_calls,
            "frames_evaluated": total.frames_evaluated,
            "decoder_calls": total.decoder_calls,
            "peak_logit_floats": total.peak_logit_floats,
            "prefix_cap_hits": total.prefix_cap_hits,
            "jump_histogram": {str(k): v for k, v in sorted(histogram.items())},
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_hyps_jsonl(path) -> list[dict]:
    """Read a hyps.jsonl artifact, rejecting unknown format majors."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            _check_major(doc.get("format_version", "?"), "hyps.jsonl")
            records.append(doc)
    return records


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_decode(manifest: RunManifest) -> int:
    manifest.validate()
    if manifest.out_dir is None:
        raise ConfigError("--out is required for decode")
    model = synthmodel.load_model(manifest.model_path)
    corpus = _load_corpus(manifest, model)
    hyps, costs = _decode_corpus(manifest, model, corpus)
    _write_outputs(manifest, corpus, hyps, costs)
    return 0


def cmd_compare(manifest_a: RunManifest, manifest_b: RunManifest) -> int:
    """Decode under two configurations and diff token-by-token.

    Exit 0 iff all hypotheses are identical; on the first divergence,
    print the utterance, position, and each side's window argmaxes at its
    divergence frame.
    """
    manifest_a.validate()
    manifest_b.validate()
    model = synthmodel.load_model(manifest_a.model_path)
    corpus = _load_corpus(manifest_a, model)
    hyps_a, _ = _decode_corpus(manifest_a, model, corpus)
    hyps_b, _ = _decode_corpus(manifest_b, model, corpus)
    for utt, a, b in zip(corpus, hyps_a, hyps_b):
        if a.tokens == b.tokens and a.timestamps == b.timestamps:
            continue
        pos = 0
        while (pos < min(len(a.tokens), len(b.tokens))
               and a.tokens[pos] == b.tokens[pos]
               and a.timestamps[pos] == b.timestamps[pos]):
            pos += 1
        uid = utt.encoder_output.utterance_id
        frame_a = a.timestamps[pos] if pos < len(a.tokens) else utt.encoder_output.num_frames
        frame_b = b.timestamps[pos] if pos < len(b.tokens) else utt.encoder_output.num_frames
        print(f"DIVERGED utterance={uid} token_index={pos}")
        print(f"  A: tokens={list(a.tokens)} timestamps={list(a.timestamps)}")
        print(f"  B: tokens={list(b.tokens)} timestamps={list(b.timestamps)}")
        for side, hyp, frame, m in (("A", a, frame_a, manifest_a), ("B", b, frame_b, manifest_b)):
            argmaxes = _window_argmaxes(model, utt.encoder_output, hyp, pos, frame, m.window)
            print(f"  {side}: frame={frame} window_argmaxes={argmaxes}")
        return 1
    print(f"IDENTICAL over {len(corpus)} utterances")
    return 0


def _window_argmaxes(model, enc, hyp, pos, frame, window):
    """Argmax labels of the joiner window at the divergence point."""
    state = model.initial_state()
    for token in hyp.tokens[:pos]:
        state = model.advance_state(state, token)
    start = min(frame, max(enc.num_frames - 1, 0))
    n = min(window, enc.num_frames - start)
    if n <= 0:
        return []
    return model.joint(enc.frames[start:start + n], state).argmax_labels().tolist()


def cmd_bench(manifest: RunManifest, sweep: list[int], svg: bool = False) -> int:
    """Sweep window sizes (greedy/batched algos) or beam sizes (beam algos).

    Writes tradeoff.csv and jumps.csv into the output directory, plus an
    optional jumps.svg bar chart with smaller jumps on the left.
    """
    manifest.validate()
    if manifest.out_dir is None:
        raise ConfigError("--out is required for bench")
    if not sweep:
        raise ConfigError("--sweep must name at least one configuration")
    model = synthmodel.load_model(manifest.model_path)
    corpus = _load_corpus(manifest, model)
    beam_algo = manifest.algo in ("wind-beam", "graves-beam")
    corpus_id = f"{manifest.model_path.name}:{manifest.corpus_seed}:{manifest.corpus_count}"

    rows = []
    histograms = {}
    for value in sweep:
        window = manifest.window if beam_algo else value
        beam_size = value if beam_algo else manifest.beam
        hyps, costs = _decode_corpus(manifest, model, corpus,
                                     window=window, beam_size=beam_size)
        edits = sum(
            metrics.token_error_rate(utt.reference_tokens, hyp.tokens).edits
            for utt, hyp in zip(corpus, hyps)
        )
        ref_total = sum(len(utt.reference_tokens) for utt in corpus)
        wer = edits / ref_total if ref_total else 0.0
        total = metrics.aggregate_costs(costs)
        rows.append(metrics.TradeoffRow(
            algo=manifest.algo,
            window=window,
            beam=beam_size if beam_algo else None,
            batch=manifest.batch if manifest.algo.startswith("batched") else None,
            wer=wer, cost=total, corpus_id=corpus_id,
        ))
        histogram = {}
        for jump in total.jump_events:
            histogram[jump] = histogram.get(jump, 0) + 1
        histograms[value] = histogram

    table = metrics.build_tradeoff_table(rows)
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tradeoff.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRADEOFF_HEADER)
        for row in table:
            writer.writerow([
                row.algo, row.window if row.window is not None else "",
                row.beam if row.beam is not None else "",
                row.batch if row.batch is not None else "",
                f"{row.wer:.6f}", row.cost.joiner_calls, row.cost.frames_evaluated,
                row.cost.decoder_calls, row.cost.peak_logit_floats,
            ])
    with open(out / "jumps.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(JUMPS_HEADER)
        for value in sweep:
            window = manifest.window if beam_algo else value
            beam_size = value if beam_algo else ""
            for jump, count in sorted(histograms[value].items()):
                writer.writerow([manifest.algo, window,
                                 beam_size if beam_algo else "",
                                 manifest.batch if manifest.algo.startswith("batched") else "",
                                 jump, count])
    if svg:
        _write_jump_svg(out / "jumps.svg", manifest.algo, sweep, histograms)
    return 0


def _write_jump_svg(path, algo, sweep, histograms):
    """Bar chart of jump distributions, smallest jumps leftmost."""
    width, row_height, pad = 640, 120, 28
    height = row_height * len(sweep) + pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">'
    ]
    for idx, value in enumerate(sweep):
        histogram = histograms[value]
        top = idx * row_height + pad
        parts.append(f'<text x="4" y="{top - 8}">{algo} config={value}</text>')
        if histogram:
            peak = max(histogram.values())
            jumps = sorted(histogram)
            bar_w = max(4, min(36, (width - 60) // max(1, len(jumps))))
            for k, jump in enumerate(jumps):
                h = max(1, int(80 * histogram[jump] / peak))
                x = 40 + k * (bar_w + 3)
                parts.append(
                    f'<rect x="{x}" y="{top + 80 - h}" width="{bar_w}" height="{h}" fill="#4477aa"/>'
                )
                parts.append(f'<text x="{x}" y="{top + 94}">{jump}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _parse_frames(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"--frames wants MIN:MAX, got {text!r}") from None


def _add_run_flags(parser, suffix=""):
    parser.add_argument(f"--algo{suffix}", required=True, choices=ALGORITHMS)
    parser.add_argument(f"--window{suffix}", type=int, default=8)
    parser.add_argument(f"--beam{suffix}", type=int, default=4)
    parser.add_argument(f"--batch{suffix}", type=int, default=8)


def _add_shared_flags(parser):
    parser.add_argument("--model", required=True, help="model manifest JSON")
    parser.add_argument("--corpus-seed", type=int, default=42)
    parser.add_argument("--corpus-count", type=int, default=100)
    parser.add_argument("--frames", default="20:60", help="frame-count range MIN:MAX")
    parser.add_argument("--corpus-file", default=None,
                        help="JSONL corpus (utterance_id + frames) instead of a seeded corpus")
    parser.add_argument("--max-symbols", type=int, default=10)
    parser.add_argument("--workers", type=int, default=1)


def _manifest_from(args, suffix="") -> RunManifest:
    return RunManifest(
        model_path=Path(args.model),
        algo=getattr(args, f"algo{suffix}".replace("-", "_")),
        corpus_seed=args.corpus_seed,
        corpus_count=args.corpus_count,
        frames=_parse_frames(args.frames),
        corpus_file=Path(args.corpus_file) if args.corpus_file else None,
        window=getattr(args, f"window{suffix}".replace("-", "_")),
        beam=getattr(args, f"beam{suffix}".replace("-", "_")),
        batch=getattr(args, f"batch{suffix}".replace("-", "_")),
        max_symbols=args.max_symbols,
        out_dir=Path(args.out) if getattr(args, "out", None) else None,
        workers=args.workers,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windt",
        description="Transducer decoding engine: greedy, windowed, batched, and beam search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_decode = sub.add_parser("decode", help="decode a corpus, write hyps.jsonl + cost.json")
    _add_shared_flags(p_decode)
    _add_run_flags(p_decode)
    p_decode.add_argument("--out", required=True)

    p_compare = sub.add_parser("compare", help="decode under two configs and diff outputs")
    _add_shared_flags(p_compare)
    _add_run_flags(p_compare, suffix="-a")
    _add_run_flags(p_compare, suffix="-b")

    p_bench = sub.add_parser("bench", help="sweep configs, write tradeoff.csv + jumps.csv")
    _add_shared_flags(p_bench)
    _add_run_flags(p_bench)
    p_bench.add_argument("--sweep", required=True,
                         help="comma-separated windows (greedy) or beams (beam algos)")
    p_bench.add_argument("--svg", action="store_true", help="also write jumps.svg")
    p_bench.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "decode":
            return cmd_decode(_manifest_from(args))
        if args.command == "compare":
            return cmd_compare(_manifest_from(args, "-a"), _manifest_from(args, "-b"))
        if args.command == "bench":
            try:
                sweep = [int(v) for v in args.sweep.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"bad --sweep value {args.sweep!r}") from None
            return cmd_bench(_manifest_from(args), sweep, svg=args.svg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ReportMismatch, ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
