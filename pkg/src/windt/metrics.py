"""Token error rate, cost aggregation, and speed-accuracy tradeoff rows."""

from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import CostReport, ReportMismatch


@dataclass(frozen=True)
class WerReport:
    """Edit-distance breakdown of one hypothesis against a reference."""

    substitutions: int
    insertions: int
    deletions: int
    num_ref_tokens: int
    wer: float

    @property
    def edits(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def token_error_rate(reference: Sequence[int], hypothesis: Sequence[int]) -> WerReport:
    """Minimal-edit-distance error rate at token granularity.

    Uniform edit costs. The traceback is deterministic: on ties it prefers
    substitution over insertion (extra hypothesis token) over deletion
    (missing reference token). For an empty reference the rate is 0.0 when
    the hypothesis is empty too, otherwise infinity.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    R, H = len(ref), len(hyp)
    # dist[i][j] = edit distance between ref[:i] and hyp[:j]
    dist = [[0] * (H + 1) for _ in range(R + 1)]
    for i in range(R + 1):
        dist[i][0] = i
    for j in range(H + 1):
        dist[0][j] = j
    for i in range(1, R + 1):
        row = dist[i]
        prev = dist[i - 1]
        ri = ref[i - 1]
        for j in range(1, H + 1):
            diag = prev[j - 1] + (0 if ri == hyp[j - 1] else 1)
            row[j] = min(diag, row[j - 1] + 1, prev[j] + 1)

    subs = ins = dels = 0
    i, j = R, H
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and here == dist[i - 1][j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif j > 0 and here == dist[i][j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1

    if R > 0:
        wer = (subs + ins + dels) / R
    else:
        wer = 0.0 if H == 0 else float("inf")
    return WerReport(substitutions=subs, insertions=ins, deletions=dels,
                     num_ref_tokens=R, wer=wer)


def aggregate_costs(items: Iterable) -> CostReport:
    """Combine cost reports: counters sum, jump multisets merge, peaks max.

    Accepts CostReport instances or anything carrying a ``cost`` attribute
    (GreedyResult, BeamResult).
    """
    joiner = frames = decoder = peak = cap_hits = 0
    jumps: list[int] = []
    for item in items:
        cost = item if isinstance(item, CostReport) else item.cost
        joiner += cost.joiner_calls
        frames += cost.frames_evaluated
        decoder += cost.decoder_calls
        cap_hits += cost.prefix_cap_hits
        peak = max(peak, cost.peak_logit_floats)
        jumps.extend(cost.jump_events)
    return CostReport(
        joiner_calls=joiner,
        frames_evaluated=frames,
        decoder_calls=decoder,
        jump_events=tuple(jumps),
        peak_logit_floats=peak,
        prefix_cap_hits=cap_hits,
    )


@dataclass(frozen=True)
class TradeoffRow:
    """One line of a speed-accuracy comparison table.

    Rows are only comparable within a single corpus and model; the
    ``corpus_id`` tag enforces that in build_tradeoff_table.
    """

    algo: str
    window: int | None
    beam: int | None
    batch: int | None
    wer: float
    cost: CostReport
    corpus_id: str = ""


def build_tradeoff_table(runs: Iterable[TradeoffRow]) -> list[TradeoffRow]:
    """Validate and sort tradeoff rows (by algorithm, then configuration)."""
    rows = list(runs)
    corpora = {row.corpus_id for row in rows}
    if len(corpora) > 1:
        raise ReportMismatch(f"rows mix corpora: {sorted(corpora)}")
    rows.sort(key=lambda r: (r.algo, r.window or 0, r.beam or 0, r.batch or 0))
    return rows
