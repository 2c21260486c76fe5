"""Gluing engine: refine a pseudo-trajectory into a true shadowing orbit.

The pseudo-trajectory splits into true-orbit segments at its perturbation
moments.  Rounds of parallel gluing merge adjacent segment pairs (junctions
with even label, counted from the segment containing time 0) until one
segment covers the whole window.  Every bound consumed here derives from a
summable gluing rate: the gap recursion, the e^Phi cap on gap sums, and the
final eps * Phi * e^Phi shadowing bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import (
    MapSystem,
    NonGluableError,
    Orbit,
    PseudoTrajectory,
    RateFunction,
    UnsupportedMapError,
    UsageError,
    Window,
    monotone_envelope,
    symmetrize,
)


@dataclass(frozen=True, eq=False)
class _Segment:
    start: int
    states: np.ndarray

    @property
    def end(self) -> int:
        return self.start + self.states.shape[0] - 1


@dataclass(frozen=True, eq=False)
class SegmentChain:
    """True-orbit segments separated by the perturbation moments."""

    segments: tuple[_Segment, ...]
    moments: tuple[int, ...]
    gaps: tuple[float, ...]

    def __post_init__(self):
        if len(self.moments) != len(self.segments) - 1:
            raise UsageError("need exactly one junction between consecutive segments")
        if len(self.gaps) != len(self.moments):
            raise UsageError("need one gap per junction")


def segment_split(pseudo: PseudoTrajectory) -> SegmentChain:
    """One segment per maximal perturbation-free run of the pseudo-trajectory."""
    lo = pseudo.window.lo
    segments = []
    start = lo
    for m in pseudo.moments:
        end = m
        segments.append(_Segment(start, pseudo.states[start - lo:end - lo + 1]))
        start = m + 1
    segments.append(_Segment(start, pseudo.states[start - lo:]))
    gaps = tuple(pseudo.gap_at(m) for m in pseudo.moments)
    return SegmentChain(tuple(segments), tuple(pseudo.moments), gaps)


class StageSnapshot(NamedTuple):
    """Junction moments and gaps of the chain at one stage of the gluing."""

    moments: tuple[int, ...]
    gaps: tuple[float, ...]


@dataclass(frozen=True)
class RoundStats:
    """Chain statistics at one stage (stage n = state after n rounds)."""

    round_index: int
    junction_count: int
    max_gap: float
    min_segment: int
    max_segment: int
    gap_sums: tuple[float, ...]        # R_k over the radius ladder
    gap_sum_bounds: tuple[float, ...]  # e^Phi * R_k at stage 0
    avg_errors: tuple[float, ...]      # Q_k over the ladder, vs the input
    sup_change: float                  # largest pointwise move from the previous stage


class TheoremBound(NamedTuple):
    """The average-shadowing bound eps * Phi * e^Phi."""

    epsilon: float
    rate_total: float
    gap_sum_factor: float
    bound: float


def theorem_bound(epsilon: float, rate_total: float) -> TheoremBound:
    if epsilon < 0 or rate_total < 0:
        raise UsageError("epsilon and the rate sum must be nonnegative")
    factor = math.exp(rate_total)
    return TheoremBound(float(epsilon), float(rate_total), factor,
                        float(epsilon) * float(rate_total) * factor)


def product_bound(values: Sequence[float]) -> tuple[float, float]:
    """(prod(1 + b_k), exp(sum b_k)) for a nonnegative sequence; first <= second."""
    arr = np.asarray(values, float)
    if arr.size and float(arr.min()) < 0:
        raise UsageError("sequence entries must be nonnegative")
    return float(np.prod(1.0 + arr)), float(math.exp(arr.sum()))


@dataclass(frozen=True, eq=False)
class ShadowingResult:
    """Everything a bound check needs about one gluing run."""

    orbit: Orbit
    pseudo: PseudoTrajectory
    rate: RateFunction           # symmetrized monotone envelope of the map rate
    rate_total: float            # Phi, truncated at the window radius
    ladder: tuple[int, ...]
    rounds: tuple[RoundStats, ...]
    history: tuple[StageSnapshot, ...]
    consumed: tuple[tuple[int, ...], ...]   # moments removed per transition
    mode: str

    @property
    def bound(self) -> TheoremBound:
        return theorem_bound(self.pseudo.average_gap(), self.rate_total)


def _default_ladder(radius: int) -> tuple[int, ...]:
    if radius < 1:
        return (0,)
    ladder = []
    k = 16
    while k < radius:
        ladder.append(k)
        k *= 2
    if not ladder:
        ladder = [max(radius // 2, 1)]
    return tuple(ladder)


def _engine_rate(system: MapSystem, window: Window) -> tuple[RateFunction, float]:
    span = len(window)
    base = system.rate(span)
    shaped = monotone_envelope(symmetrize(base))
    total = shaped.truncated(window.outer_radius).total
    return shaped, total


def _anchor(moments: Sequence[int]) -> int:
    """Index of the junction bounding the segment that contains time 0."""
    for p, m in enumerate(moments):
        if m >= 0:
            return p
    return len(moments) - 1


def _junction_labels(moments: Sequence[int]) -> np.ndarray:
    shift = sum(1 for m in moments if m < 0)
    return np.arange(len(moments)) - shift


def _gap_sums(moments: Sequence[int], gaps: Sequence[float],
              ladder: Sequence[int]) -> tuple[float, ...]:
    labels = _junction_labels(moments)
    gaps = np.asarray(gaps, float)
    return tuple(float(gaps[np.abs(labels) <= k].sum()) for k in ladder)


def _chain_states(chain: SegmentChain) -> np.ndarray:
    return np.concatenate([seg.states for seg in chain.segments])


def _avg_errors(system: MapSystem, window: Window, states: np.ndarray,
                pseudo: PseudoTrajectory, ladder: Sequence[int]) -> tuple[float, ...]:
    errs = np.asarray(system.metric_many(states, pseudo.states), float)
    prefix = np.concatenate([[0.0], np.cumsum(errs)])
    out = []
    for k in ladder:
        if window.one_sided:
            if k > window.hi:
                out.append(math.nan)
                continue
            a, b, norm = 0, k, k + 1
        else:
            if k > window.inner_radius:
                out.append(math.nan)
                continue
            a, b, norm = -k, k, 2 * k + 1
        lo = window.offset(a)
        hi = window.offset(b)
        out.append(float((prefix[hi + 1] - prefix[lo]) / norm))
    return tuple(out)


def _recompute_gaps(system: MapSystem, segments: Sequence[_Segment]) -> tuple[float, ...]:
    gaps = []
    for left, right in zip(segments, segments[1:]):
        image = system.forward(left.states[-1])
        gaps.append(float(system.metric(image, right.states[0])))
    return tuple(gaps)


def _merge_pair(system: MapSystem, left: _Segment, right: _Segment,
                round_index: int) -> _Segment:
    """Glue two adjacent segments around the junction at left.end."""
    moment = left.end
    tau = moment + 1
    x_states = np.concatenate([left.states,
                               np.asarray(system.forward(left.states[-1]), float)[None]
                               if left.states.ndim > 1 else
                               np.array([system.forward(left.states[-1])], float)])
    x = Orbit(Window(left.start - tau, 0), x_states, map_id=system.map_id)
    y = Orbit(Window(0, right.end - tau), right.states, map_id=system.map_id)
    cert = system.glue(x, y)
    if not cert.gluable:
        raise NonGluableError(
            f"gluing failed at moment {moment} in round {round_index}: "
            + "; ".join(cert.notes),
            moment=moment, round_index=round_index)
    return _Segment(left.start, cert.z.states)


def _round_stats(system: MapSystem, pseudo: PseudoTrajectory, chain: SegmentChain,
                 ladder: Sequence[int], stage: int, base_sums: Optional[tuple],
                 factor: float, prev_states: Optional[np.ndarray],
                 states: np.ndarray) -> tuple[RoundStats, np.ndarray]:
    sums = _gap_sums(chain.moments, chain.gaps, ladder)
    if base_sums is None:
        base_sums = sums
    bounds = tuple(factor * b for b in base_sums)
    seg_lengths = [seg.states.shape[0] for seg in chain.segments]
    sup_change = 0.0
    if prev_states is not None:
        sup_change = float(np.max(system.metric_many(states, prev_states)))
    stats = RoundStats(
        round_index=stage,
        junction_count=len(chain.moments),
        max_gap=float(max(chain.gaps, default=0.0)),
        min_segment=min(seg_lengths),
        max_segment=max(seg_lengths),
        gap_sums=sums,
        gap_sum_bounds=bounds,
        avg_errors=_avg_errors(system, pseudo.window, states, pseudo, ladder),
        sup_change=sup_change,
    )
    return stats, states


def parallel_glue(system: MapSystem, pseudo: PseudoTrajectory,
                  ladder: Optional[Sequence[int]] = None) -> ShadowingResult:
    """Merge all segments by rounds of simultaneous pairwise gluing.

    Each round consumes the junctions whose label relative to the segment
    containing time 0 is even: the 0-segment merges with its right neighbor,
    and pairing continues outward in both directions.  Unpaired edge segments
    pass through a round untouched.
    """
    if not hasattr(system, "glue") or not hasattr(system, "rate"):
        raise UnsupportedMapError(f"{system.map_id} exposes no gluing operation")
    chain = segment_split(pseudo)
    if ladder is None:
        ladder = _default_ladder(pseudo.window.outer_radius)
    ladder = tuple(int(k) for k in ladder)
    rate, total = _engine_rate(system, pseudo.window)

    history = [StageSnapshot(chain.moments, chain.gaps)]
    consumed_log: list[tuple[int, ...]] = []
    factor = math.exp(total)
    states = _chain_states(chain)
    stats0, prev_states = _round_stats(system, pseudo, chain, ladder, 0, None,
                                       factor, None, states)
    rounds = [stats0]
    base_sums = stats0.gap_sums

    stage = 0
    while chain.moments:
        stage += 1
        j0 = _anchor(chain.moments)
        consumed = [p for p in range(len(chain.moments)) if (p - j0) % 2 == 0]
        segments = list(chain.segments)
        new_segments: list[_Segment] = []
        consumed_moments = []
        p = 0
        consumed_set = set(consumed)
        while p < len(segments):
            if p < len(chain.moments) and p in consumed_set:
                merged = _merge_pair(system, segments[p], segments[p + 1], stage - 1)
                consumed_moments.append(chain.moments[p])
                new_segments.append(merged)
                p += 2
            else:
                new_segments.append(segments[p])
                p += 1
        consumed_moment_set = set(consumed_moments)
        surviving = tuple(m for m in chain.moments if m not in consumed_moment_set)
        gaps = _recompute_gaps(system, new_segments)
        chain = SegmentChain(tuple(new_segments), surviving, gaps)
        history.append(StageSnapshot(chain.moments, chain.gaps))
        consumed_log.append(tuple(consumed_moments))
        states = _chain_states(chain)
        stats, prev_states = _round_stats(system, pseudo, chain, ladder, stage,
                                          base_sums, factor, prev_states, states)
        rounds.append(stats)

    orbit = Orbit(pseudo.window, chain.segments[0].states, map_id=system.map_id)
    return ShadowingResult(orbit, pseudo, rate, total, ladder, tuple(rounds),
                           tuple(history), tuple(consumed_log), "parallel")


def sequential_glue(system: MapSystem, pseudo: PseudoTrajectory,
                    ladder: Optional[Sequence[int]] = None) -> ShadowingResult:
    """Glue neighbors one at a time, starting from the segment containing 0.

    Only usable when the certified rate satisfies phi(1) < 1 and phi(-1) < 1;
    otherwise the one-at-a-time error accounting diverges and the engine
    refuses.
    """
    if not hasattr(system, "glue") or not hasattr(system, "rate"):
        raise UnsupportedMapError(f"{system.map_id} exposes no gluing operation")
    probe = system.rate(2)
    if probe.phi(1) >= 1.0 or probe.phi(-1) >= 1.0:
        raise UnsupportedMapError(
            f"sequential gluing needs a one-step rate below 1; got "
            f"phi(-1) = {probe.phi(-1):g}, phi(1) = {probe.phi(1):g}")
    chain = segment_split(pseudo)
    if ladder is None:
        ladder = _default_ladder(pseudo.window.outer_radius)
    ladder = tuple(int(k) for k in ladder)
    rate, total = _engine_rate(system, pseudo.window)

    history = [StageSnapshot(chain.moments, chain.gaps)]
    consumed_log: list[tuple[int, ...]] = []
    factor = math.exp(total)
    states = _chain_states(chain)
    stats0, prev_states = _round_stats(system, pseudo, chain, ladder, 0, None,
                                       factor, None, states)
    rounds = [stats0]
    base_sums = stats0.gap_sums

    stage = 0
    prefer_right = True
    while chain.moments:
        stage += 1
        segments = list(chain.segments)
        # index of the segment containing time 0
        i0 = next(i for i, seg in enumerate(segments) if seg.start <= 0 <= seg.end)
        right_ok = i0 < len(chain.moments)
        left_ok = i0 > 0
        take_right = (prefer_right and right_ok) or not left_ok
        p = i0 if take_right else i0 - 1
        merged = _merge_pair(system, segments[p], segments[p + 1], stage - 1)
        consumed_moment = chain.moments[p]
        new_segments = segments[:p] + [merged] + segments[p + 2:]
        surviving = tuple(m for m in chain.moments if m != consumed_moment)
        gaps = _recompute_gaps(system, new_segments)
        chain = SegmentChain(tuple(new_segments), surviving, gaps)
        history.append(StageSnapshot(chain.moments, chain.gaps))
        consumed_log.append((consumed_moment,))
        states = _chain_states(chain)
        stats, prev_states = _round_stats(system, pseudo, chain, ladder, stage,
                                          base_sums, factor, prev_states, states)
        rounds.append(stats)
        prefer_right = not prefer_right

    orbit = Orbit(pseudo.window, chain.segments[0].states, map_id=system.map_id)
    return ShadowingResult(orbit, pseudo, rate, total, ladder, tuple(rounds),
                           tuple(history), tuple(consumed_log), "sequential")


# ---------------------------------------------------------------------------
# bound checks


class RecursionVerdict(NamedTuple):
    round_index: int
    ok: bool
    worst_slack: float


def gap_recursion_check(result: ShadowingResult,
                        tolerance: float = 1e-9) -> list[RecursionVerdict]:
    """Junction-by-junction growth bound across every transition.

    A junction surviving a round inherits error mass from the gluings at its
    consumed neighbors, scaled by the rate at the moment distance:
    new_gap <= gap + phi(-d_left) * gap_left + phi(d_right) * gap_right.
    """
    phi = result.rate.phi
    verdicts = []
    for n, consumed in enumerate(result.consumed):
        before = result.history[n]
        after = result.history[n + 1]
        gaps_before = dict(zip(before.moments, before.gaps))
        gaps_after = dict(zip(after.moments, after.gaps))
        consumed_set = set(consumed)
        worst = math.inf
        ok = True
        for idx, m in enumerate(before.moments):
            if m in consumed_set:
                continue
            bound = gaps_before[m]
            if idx > 0 and before.moments[idx - 1] in consumed_set:
                d = m - before.moments[idx - 1]
                bound += phi(-d) * gaps_before[before.moments[idx - 1]]
            if idx + 1 < len(before.moments) and before.moments[idx + 1] in consumed_set:
                d = before.moments[idx + 1] - m
                bound += phi(d) * gaps_before[before.moments[idx + 1]]
            slack = bound - gaps_after[m]
            worst = min(worst, slack)
            if slack < -tolerance * max(1.0, gaps_before[m]):
                ok = False
        if not math.isfinite(worst):
            worst = 0.0
        verdicts.append(RecursionVerdict(n, ok, worst))
    return verdicts


class GapSumVerdict(NamedTuple):
    round_index: int
    radius: int
    gap_sum: float
    bound: float
    slack_allowance: float
    ok: bool


def gap_sum_check(result: ShadowingResult,
                  tolerance: float = 1e-9) -> list[GapSumVerdict]:
    """R_k at every stage against e^Phi times the stage-0 mass it can draw on.

    The plain bound compares against e^Phi * R_k at stage 0; junctions whose
    label enters [-k, k] at a later stage carry mass from stage-0 moments
    outside the radius-k window, which the reported slack allowance covers
    (a finite-window artifact, zero on an infinite window).
    """
    factor = math.exp(result.rate_total)
    stage0 = result.history[0]
    m0 = np.asarray(stage0.moments, int)
    g0 = np.asarray(stage0.gaps, float)
    labels0 = _junction_labels(stage0.moments)
    verdicts = []
    for n, snap in enumerate(result.history):
        labels = _junction_labels(snap.moments)
        gaps = np.asarray(snap.gaps, float)
        moments = np.asarray(snap.moments, int)
        for k_idx, k in enumerate(result.ladder):
            inside = np.abs(labels) <= k
            r_nk = float(gaps[inside].sum())
            r_0k = float(g0[np.abs(labels0) <= k].sum())
            bound = factor * r_0k
            if inside.any():
                span_lo = int(moments[inside].min())
                span_hi = int(moments[inside].max())
                in_span = (m0 >= span_lo) & (m0 <= span_hi)
                r_span = float(g0[in_span].sum())
            else:
                r_span = r_0k
            slack = factor * max(r_span - r_0k, 0.0)
            ok = r_nk <= bound + slack + tolerance * max(1.0, r_0k)
            verdicts.append(GapSumVerdict(n, k, r_nk, bound, slack, ok))
    return verdicts


class FinalVerdict(NamedTuple):
    epsilon: float
    rate_total: float
    bound: float
    average_error: float
    uniform_error: float
    average_ok: bool
    uniform_ok: Optional[bool]


def final_check(system: MapSystem, result: ShadowingResult,
                uniformly_bounded: bool = False) -> FinalVerdict:
    """The endgame bound: average shadowing error within eps * Phi * e^Phi.

    With uniformly bounded perturbations the same constant also caps the
    uniform error, which is checked when requested.
    """
    from .core import shadow_error_average, shadow_error_uniform

    tb = result.bound
    w = result.pseudo.window
    radius = w.hi if w.one_sided else w.inner_radius
    avg = shadow_error_average(system, result.orbit, result.pseudo, radius)
    uni = shadow_error_uniform(system, result.orbit, result.pseudo)
    avg_ok = avg <= tb.bound
    uni_ok = (uni <= tb.bound) if uniformly_bounded else None
    return FinalVerdict(tb.epsilon, tb.rate_total, tb.bound, avg, uni,
                        bool(avg_ok), uni_ok)
