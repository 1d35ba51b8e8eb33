"""Windowed beam search with first-emission scoring, plus the classic
frame-synchronous beam search as a reference baseline.

The windowed search keeps hypotheses bucketed by the frame they are
positioned at. Popping the earliest bucket, it recombines duplicates,
folds strict-prefix hypotheses into their extensions, prunes to the beam,
then scores every (token, frame-offset) expansion of each survivor in one
batched joiner call over a window of frames. Scoring uses the
first-emission distribution: the probability that a token is the first
symbol produced within the window, emitted at a given offset. Blank mass
is carried entirely by the last offset (a blank "expansion" means the
whole window was consumed without output), which makes the distribution
sum to one and lets hypotheses jump several frames per step.

Recombination inside the search merges hypotheses only when they are
indistinguishable for the future: same token sequence AND same number of
tokens already emitted at the current frame (the per-frame emission
budget). With full-vocabulary models the budget is almost always 0 or 1
and this coincides with plain sequence merging; on tiny vocabularies it
is what keeps the saturated beam in exact agreement with exhaustive
enumeration under the same per-frame cap.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CostCounter,
    CostReport,
    DecodeError,
    EncoderOutput,
    Hypothesis,
    TransducerModel,
)

# Prefix-completion length cap: longer completions are skipped and counted
# in CostReport.prefix_cap_hits.
PREFIX_COMPLETION_CAP = 4


@dataclass(frozen=True)
class BeamConfig:
    """Windowed beam-search knobs.

    max_expansions_per_timestep bounds how many tokens one hypothesis may
    emit at a single frame; once reached, its further expansions must
    advance time. length_normalize_final switches the final ranking to
    score divided by token count.
    """

    beam_size: int = 4
    window_size: int = 8
    max_expansions_per_timestep: int = 10
    length_normalize_final: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.max_expansions_per_timestep < 1:
            raise ValueError("max_expansions_per_timestep must be >= 1")


@dataclass(frozen=True)
class BeamResult:
    """K-best hypotheses (sorted best first) and the decode's cost."""

    hypotheses: list[Hypothesis]
    cost: CostReport

    @property
    def best(self) -> Hypothesis:
        return self.hypotheses[0]


@dataclass(frozen=True)
class FirstEmissionDistribution:
    """log P'(v, t): v is the first output in the window, at offset t.

    Shape (n, V). For non-blank v, entry (t, v) is the probability of
    blanks at every offset before t and v at offset t. Blank carries the
    all-blank mass and lives only at the last offset; earlier blank
    entries are -inf. The whole matrix logsumexps to zero.
    """

    log_probs: np.ndarray
    window_start: int = 0

    @property
    def n(self) -> int:
        return self.log_probs.shape[0]


def first_emission_logprobs(window, blank_id: int) -> FirstEmissionDistribution:
    """Turn per-frame log distributions into the first-emission matrix.

    ``window`` is a WindowLogits with normalized rows; ``blank_id`` names
    the blank column. For offsets t and tokens v:

        P'(v, t) = P(blank | first t offsets) * P(v | offset t)   v != blank
        P'(blank, n-1) = P(blank | every offset in the window)
        P'(blank, t < n-1) = 0
    """
    if not 0 <= blank_id < window.log_probs.shape[1]:
        raise ValueError(f"blank_id {blank_id} out of range")
    return FirstEmissionDistribution(
        log_probs=_first_emission(window.log_probs, blank_id),
        window_start=window.window_start,
    )


def _first_emission(log_probs: np.ndarray, blank: int) -> np.ndarray:
    n = log_probs.shape[0]
    blank_lp = log_probs[:, blank]
    # prefix[t] = sum of blank log-probs at offsets < t
    prefix = np.concatenate(([0.0], np.cumsum(blank_lp)))
    out = log_probs + prefix[:n, None]
    out[:, blank] = -np.inf
    out[n - 1, blank] = prefix[n]
    return out


# ---------------------------------------------------------------------------
# recombine / prune / prefix search
# ---------------------------------------------------------------------------

def merge_duplicate_hypotheses(hyps: list[Hypothesis]) -> list[Hypothesis]:
    """Merge hypotheses with identical token sequences, summing probability.

    The surviving representative (timestamps, state) comes from the
    highest-scoring copy; deterministic order is preserved.
    """
    merged: dict[tuple[int, ...], Hypothesis] = {}
    for hyp in hyps:
        _merge_keyed(merged, hyp.tokens, hyp)
    return list(merged.values())


def _merge_keyed(pool: dict, key, hyp: Hypothesis) -> None:
    kept = pool.get(key)
    if kept is None:
        pool[key] = hyp
    else:
        score = float(np.logaddexp(kept.score, hyp.score))
        rep = kept if (kept.score, kept.timestamps) >= (hyp.score, hyp.timestamps) else hyp
        pool[key] = replace(rep, score=score)


def recombine_prune_prefix_search(
    hyps: list[Hypothesis],
    model: TransducerModel,
    enc: EncoderOutput,
    frame: int,
    beam_size: int,
    cost: CostCounter | None = None,
    completion_cap: int = PREFIX_COMPLETION_CAP,
) -> list[Hypothesis]:
    """Deduplicate, fold prefixes into extensions, keep the top beam.

    All input hypotheses must be positioned at ``frame``. Steps:

      1. identical token sequences are combined, probabilities summed;
      2. for each pair (A, B) with A a strict prefix of B, the probability
         of completing A into B by emitting the missing tokens at the
         current frame is added to B, and A is removed. Donations use A's
         pre-fold score (longer receivers are processed first), which
         transfers each donor's mass to every present extension exactly
         once. Completions longer than ``completion_cap`` tokens are
         skipped and counted;
      3. the top ``beam_size`` hypotheses by score survive, ties broken by
         shorter token sequence then lexicographic tokens.
    """
    if not hyps:
        return []
    merged = merge_duplicate_hypotheses(hyps)
    merged.sort(key=lambda h: (-len(h.tokens), h.tokens))
    base_scores = [h.score for h in merged]
    folded = list(base_scores)
    removed = [False] * len(merged)
    row_cache: dict = {}

    def frame_row(state):
        row = row_cache.get(state)
        if row is None:
            row = model.joint(enc.frames[frame:frame + 1], state).log_probs[0]
            if cost is not None:
                cost.joiner(frames=1, logit_floats=model.vocab.size)
            row_cache[state] = row
        return row

    for j, receiver in enumerate(merged):
        for i in range(j + 1, len(merged)):
            donor = merged[i]
            d = len(donor.tokens)
            if d >= len(receiver.tokens) or donor.tokens != receiver.tokens[:d]:
                continue
            removed[i] = True
            completion = receiver.tokens[d:]
            if len(completion) > completion_cap:
                if cost is not None:
                    cost.prefix_cap_hit()
                continue
            extra = base_scores[i]
            state = donor.state
            for token in completion:
                extra += float(frame_row(state)[token])
                state = model.advance_state(state, token)
                if cost is not None:
                    cost.decoder()
            folded[j] = float(np.logaddexp(folded[j], extra))

    survivors = [
        h if folded[idx] == base_scores[idx] else replace(h, score=folded[idx])
        for idx, h in enumerate(merged)
        if not removed[idx]
    ]
    survivors.sort(key=lambda h: (-h.score, len(h.tokens), h.tokens))
    return survivors[:beam_size]


# ---------------------------------------------------------------------------
# Windowed beam search
# ---------------------------------------------------------------------------

def _consolidate(
    hyps: list[Hypothesis],
    model: TransducerModel,
    enc: EncoderOutput,
    frame: int,
    cfg: BeamConfig,
    cost: CostCounter,
    completion_cap: int = PREFIX_COMPLETION_CAP,
) -> list[tuple[Hypothesis, frozenset[int]]]:
    """Pop-time recombine/prune/prefix-search used by the windowed search.

    Same three steps as recombine_prune_prefix_search with two refinements
    that make probability bookkeeping lossless:

      * hypotheses merge on (tokens, emissions already made at this frame)
        rather than tokens alone, so the per-frame emission budget stays
        exact for every merged family;
      * a folded prefix is not dropped: the fold covers exactly its
        stay-at-frame continuations into sequences present here, so the
        prefix keeps expanding with those specific moves blocked, and its
        blank-exit and later-frame mass survives. Fold families that would
        overrun the per-frame budget are skipped (they do not exist in
        the capped search space).

    Returns (hypothesis, blocked next tokens) pairs, pruned to the beam.
    """
    pool: dict[tuple, Hypothesis] = {}
    for hyp in hyps:
        pool_key = (hyp.tokens, hyp.trailing_emissions_at(frame))
        _merge_keyed(pool, pool_key, hyp)
    entries = sorted(
        pool.values(),
        key=lambda h: (-len(h.tokens), h.tokens, -h.trailing_emissions_at(frame)),
    )
    present = {h.tokens for h in entries}
    base_scores = {id(h): h.score for h in entries}
    row_cache: dict = {}

    def frame_row(state):
        row = row_cache.get(state)
        if row is None:
            row = model.joint(enc.frames[frame:frame + 1], state).log_probs[0]
            cost.joiner(frames=1, logit_floats=model.vocab.size)
            row_cache[state] = row
        return row

    # Direct folds: each donor entry contributes to every present strict
    # extension of its sequence, using its pre-fold score.
    additions: list[Hypothesis] = []
    for donor in entries:
        budget_used = donor.trailing_emissions_at(frame)
        for seq in present:
            d = len(donor.tokens)
            if len(seq) <= d or seq[:d] != donor.tokens:
                continue
            completion = seq[d:]
            if len(completion) > completion_cap:
                cost.prefix_cap_hit()
                continue
            if budget_used + len(completion) > cfg.max_expansions_per_timestep:
                continue
            extra = base_scores[id(donor)]
            state = donor.state
            for token in completion:
                extra += float(frame_row(state)[token])
                state = model.advance_state(state, token)
                cost.decoder()
            additions.append(Hypothesis(
                tokens=seq,
                score=extra,
                timestamps=donor.timestamps + (frame,) * len(completion),
                state=state,
            ))
    for hyp in additions:
        _merge_keyed(pool, (hyp.tokens, hyp.trailing_emissions_at(frame)), hyp)

    # The beam prunes over candidate sequences; budget sub-entries of a
    # surviving sequence ride along (at most max_expansions_per_timestep
    # of them, so the per-pop work stays bounded).
    sequence_mass: dict[tuple[int, ...], float] = {}
    for hyp in pool.values():
        prev = sequence_mass.get(hyp.tokens)
        sequence_mass[hyp.tokens] = hyp.score if prev is None else float(np.logaddexp(prev, hyp.score))
    kept_sequences = set(
        seq for seq, _ in sorted(
            sequence_mass.items(), key=lambda item: (-item[1], len(item[0]), item[0])
        )[:cfg.beam_size]
    )

    out = []
    for hyp in pool.values():
        if hyp.tokens not in kept_sequences:
            continue
        blocked = frozenset(
            seq[-1] for seq in present
            if len(seq) == len(hyp.tokens) + 1 and seq[:-1] == hyp.tokens
        )
        out.append((hyp, blocked))
    out.sort(key=lambda pair: (-pair[0].score, len(pair[0].tokens), pair[0].tokens))
    return out


def decode_wind_beam(model: TransducerModel, enc: EncoderOutput, cfg: BeamConfig) -> BeamResult:
    """Windowed beam search over ``enc``; returns the K best hypotheses.

    Hypotheses live in a frame-indexed map. Each step pops the earliest
    frame t, recombines/prunes its hypotheses, evaluates one batched
    joiner call over the window starting at t, and takes the top-K
    (token, offset) expansions of each hypothesis under the
    first-emission distribution: a non-blank expansion lands back in the
    map at its emission frame t+offset; a blank expansion consumes the
    whole window and lands at t+n. Hypotheses that have already emitted
    max_expansions_per_timestep tokens at t may only take expansions that
    advance time. Terminates when the earliest bucket is the end of the
    utterance; duplicates there are merged before final ranking.
    """
    vocab = model.vocab
    blank = vocab.blank_id
    num_frames = enc.num_frames
    cost = CostCounter()
    t2hyps: dict[int, list[Hypothesis]] = {
        0: [Hypothesis(state=model.initial_state())]
    }
    while t2hyps:
        t = min(t2hyps)
        if t >= num_frames:
            break
        popped = _consolidate(t2hyps.pop(t), model, enc, t, cfg, cost)
        n = min(cfg.window_size, num_frames - t)
        rows = enc.frames[t:t + n]
        try:
            windows = model.joint_batched([(rows, h.state) for h, _ in popped])
        except Exception as exc:
            raise DecodeError(f"joiner failed: {exc}", frame=t) from exc
        cost.joiner(frames=n * len(popped), logit_floats=n * vocab.size * len(popped))
        for (hyp, blocked), window in zip(popped, windows):
            # n == 1 degenerates to the plain per-frame row
            flat = window.log_probs[0] if n == 1 else _first_emission(window.log_probs, blank).ravel()
            if hyp.trailing_emissions_at(t) >= cfg.max_expansions_per_timestep:
                # Emission budget at this frame is spent: only expansions
                # that advance time remain legal.
                flat = flat.copy()
                zero_jump = flat[:vocab.size]
                zero_jump[np.arange(vocab.size) != blank] = -np.inf
            elif blocked:
                flat = flat.copy()
                for token in blocked:
                    flat[token] = -np.inf
            order = np.argsort(-flat, kind="stable")[:cfg.beam_size]
            for idx in order:
                lp = float(flat[idx])
                if lp == -np.inf:
                    continue
                jump, token = divmod(int(idx), vocab.size)
                if token != blank:
                    try:
                        new_state = model.advance_state(hyp.state, token)
                    except Exception as exc:
                        raise DecodeError(f"decoder failed: {exc}", frame=t + jump) from exc
                    cost.decoder()
                    child = Hypothesis(
                        tokens=hyp.tokens + (token,),
                        score=hyp.score + lp,
                        timestamps=hyp.timestamps + (t + jump,),
                        state=new_state,
                    )
                    bucket = t + jump
                    cost.jump(jump)
                else:
                    child = replace(hyp, score=hyp.score + lp)
                    bucket = t + n
                    cost.jump(n)
                assert bucket <= num_frames, "expansion jumped past the utterance end"
                t2hyps.setdefault(bucket, []).append(child)

    final = merge_duplicate_hypotheses(t2hyps.get(num_frames, []))
    final.sort(key=lambda h: (-_rank_score(h, cfg.length_normalize_final),
                              len(h.tokens), h.tokens))
    return BeamResult(hypotheses=final[:cfg.beam_size], cost=cost.freeze())


def _rank_score(hyp: Hypothesis, length_normalize: bool) -> float:
    if length_normalize:
        return hyp.score / max(1, len(hyp.tokens))
    return hyp.score


# ---------------------------------------------------------------------------
# Frame-synchronous reference beam search
# ---------------------------------------------------------------------------

def decode_graves_beam(
    model: TransducerModel,
    enc: EncoderOutput,
    beam_size: int,
    max_symbols_per_frame: int = 10,
    length_normalize_final: bool = False,
) -> BeamResult:
    """Classic frame-synchronous beam search, the speed/accuracy baseline.

    Per frame, hypotheses are expanded one at a time (prefixes before
    their extensions, so probability mass flows exactly once): the blank
    extension moves a hypothesis to the next frame, non-blank extensions
    stay at the frame, and recombination sums probabilities on both
    sides. Within a frame, hypotheses recombine on (tokens, emissions
    made at this frame) so the per-frame emission cap applies to exactly
    the right families. Expansion stops early once the next frame already
    holds ``beam_size`` hypotheses that outscore everything still
    expandable. One joiner call per expanded hypothesis per frame, which
    is what makes this the slow baseline.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    vocab = model.vocab
    blank = vocab.blank_id
    labels = vocab.non_blank_tokens()
    cost = CostCounter()

    frontier: list[Hypothesis] = [Hypothesis(state=model.initial_state())]
    for t in range(enc.num_frames):
        active: dict[tuple, Hypothesis] = {}
        for hyp in frontier:
            _merge_keyed(active, (hyp.tokens, hyp.trailing_emissions_at(t)), hyp)
        advanced: dict[tuple, Hypothesis] = {}
        while active:
            # Prefixes first so that every donor is fully accumulated
            # before any of its extensions expands.
            key = min(active, key=lambda k: (len(k[0]), k[0], -k[1]))
            hyp = active.pop(key)
            try:
                window = model.joint(enc.frames[t:t + 1], hyp.state)
            except Exception as exc:
                raise DecodeError(f"joiner failed: {exc}", frame=t) from exc
            cost.joiner(frames=1, logit_floats=vocab.size)
            row = window.log_probs[0]
            _merge_keyed(advanced, hyp.tokens,
                         replace(hyp, score=hyp.score + float(row[blank])))
            cost.jump(1)
            if hyp.trailing_emissions_at(t) < max_symbols_per_frame:
                for token in labels:
                    try:
                        new_state = model.advance_state(hyp.state, token)
                    except Exception as exc:
                        raise DecodeError(f"decoder failed: {exc}", frame=t) from exc
                    cost.decoder()
                    cost.jump(0)
                    child = Hypothesis(
                        tokens=hyp.tokens + (token,),
                        score=hyp.score + float(row[token]),
                        timestamps=hyp.timestamps + (t,),
                        state=new_state,
                    )
                    _merge_keyed(active, (child.tokens, child.trailing_emissions_at(t)), child)
            if len(advanced) >= beam_size and active:
                kth = sorted((h.score for h in advanced.values()), reverse=True)[beam_size - 1]
                if kth > max(h.score for h in active.values()):
                    break
        ranked = sorted(advanced.values(), key=lambda h: (-h.score, len(h.tokens), h.tokens))
        frontier = ranked[:beam_size]

    final = sorted(
        frontier,
        key=lambda h: (-_rank_score(h, length_normalize_final), len(h.tokens), h.tokens),
    )
    return BeamResult(hypotheses=final[:beam_size], cost=cost.freeze())
