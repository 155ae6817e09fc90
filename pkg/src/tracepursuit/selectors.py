"""Stepwise (STP), forward (FTP), and hybrid (HTP) trace pursuit.

STP alternates a forward addition (largest trace gain over candidates
outside the working set, admitted when n times the gain exceeds the
upper-alpha quantile of its estimated null law) with a backward deletion
(the member whose removal costs the least, removed when its statistic falls
below its own recomputed threshold).  FTP greedily grows a nested solution
path by trace gain alone and scores each prefix with a modified BIC; HTP
screens with FTP, keeps the BIC-minimizing prefix, and refines it with STP.

Ties in every argmax break toward the smallest index, candidate scans are
order-independent reductions, and a visited-set cycle guard makes STP
terminate on data that oscillates at a threshold boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .data import Dataset, IndexSet, SliceAssignment, compute_moments, validate_working_set
from .errors import TracePursuitError
from .kernels import Method, auxiliary_stats, residualize, trace_diff
from .nulldist import statistic_and_threshold


@dataclass(frozen=True)
class StpConfig:
    """Configuration for the stepwise selector.

    ``alpha`` defaults to 0.1/p when left as None; ``max_set_size`` defaults
    to min(p, n - H - 2), keeping the working-set covariance invertible with
    slack for the slices.
    """

    method: Method
    alpha: float | None = None
    max_iterations: int = 100
    max_set_size: int | None = None

    def resolved_alpha(self, p: int) -> float:
        alpha = 0.1 / p if self.alpha is None else self.alpha
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {alpha}")
        return alpha

    def resolved_max_set_size(self, n: int, p: int, h_count: int) -> int:
        cap = default_path_cap(n, p, h_count)
        size = cap if self.max_set_size is None else self.max_set_size
        if not 1 <= size < n:
            raise ValueError(f"max_set_size must be in 1..n-1, got {size}")
        return min(size, cap)


def default_path_cap(n: int, p: int, h_count: int) -> int:
    """Largest working-set size kept numerically and statistically sane."""
    return min(p, n - h_count - 2)


@dataclass(frozen=True)
class PathStep:
    added_index: int
    trace_value: float
    bic_value: float


@dataclass(frozen=True)
class SolutionPath:
    """Nested forward path with per-step trace and BIC values."""

    method: Method
    steps: tuple[PathStep, ...]
    k_max: int  # realized path length
    requested_k_max: int
    skipped: tuple[int, ...] = ()

    def prefix(self, k: int) -> IndexSet:
        return tuple(sorted(step.added_index for step in self.steps[:k]))

    def bic_argmin(self) -> int:
        """1-based prefix length minimizing BIC; ties go to the shorter prefix."""
        best_k, best = 0, math.inf
        for k, step in enumerate(self.steps, start=1):
            if step.bic_value < best:
                best_k, best = k, step.bic_value
        return best_k


@dataclass(frozen=True)
class TrailEntry:
    action: str  # "add" | "delete" | "skip" | "stop"
    index: int | None
    statistic: float | None
    threshold: float | None
    note: str = ""


@dataclass(frozen=True)
class SelectionReport:
    """Final selected set plus the audit trail that reproduces it."""

    selected: IndexSet
    trail: tuple[TrailEntry, ...]
    method: Method
    stage_sizes: tuple[int, int]  # (screened universe size, final size)


def replay_trail(trail: Iterable[TrailEntry]) -> IndexSet:
    """Re-derive the selected set from the add/delete actions of a trail."""
    current: set[int] = set()
    for entry in trail:
        if entry.action == "add":
            current.add(entry.index)
        elif entry.action == "delete":
            current.discard(entry.index)
    return tuple(sorted(current))


def bic_score(trace_value: float, set_size: int, n: int, p: int) -> float:
    """Modified BIC: -log(trace) plus |F| (log n + 2 log p) / n.

    Nonpositive traces score +inf so they are never selected.
    """
    if set_size < 1:
        raise ValueError("bic_score is defined for nonempty sets")
    if trace_value <= 0.0:
        return math.inf
    return -math.log(trace_value) + set_size * (math.log(n) + 2.0 * math.log(p)) / n


def _scan_candidates(
    d: Dataset,
    s: SliceAssignment,
    method: Method,
    f: IndexSet,
    candidates: Iterable[int],
):
    """Evaluate the trace gain of each candidate over working set ``f``.

    Returns (best_j, best_gain, best parts, skipped) where the argmax breaks
    ties toward the smallest index and candidates that fail with a domain
    error are skipped rather than aborting the scan.
    """
    m = compute_moments(d, s, f)
    best_j = None
    best_gain = -math.inf
    best_parts = None
    skipped = []
    for j in sorted(candidates):
        try:
            r = residualize(d, s, m, j)
            aux = None if method is Method.SIR else auxiliary_stats(m, r)
            gain = trace_diff(method, m, r, aux)
        except TracePursuitError as err:
            skipped.append((j, err.category))
            continue
        if gain > best_gain:
            best_j, best_gain, best_parts = j, gain, (m, r, aux)
    return best_j, best_gain, best_parts, skipped


def ftp_run(
    d: Dataset,
    s: SliceAssignment,
    method: Method,
    k_max: int | None = None,
) -> SolutionPath:
    """Greedy forward path of trace-maximizing additions with BIC scores.

    The path trace accumulates the closed-form gains, which matches the
    kernel trace of each prefix to floating point; for SIR the gains are
    nonnegative so the path trace is nondecreasing.
    """
    cap = default_path_cap(d.n, d.p, s.h_count)
    if k_max is None:
        k_max = cap
    if not 1 <= k_max <= cap:
        raise ValueError(f"k_max must be in 1..{cap}, got {k_max}")

    steps: list[PathStep] = []
    selected: list[int] = []
    skipped_all: list[int] = []
    trace_value = 0.0
    remaining = set(range(1, d.p + 1))

    for k in range(1, k_max + 1):
        best_j, best_gain, _, skipped = _scan_candidates(
            d, s, method, tuple(sorted(selected)), remaining
        )
        skipped_all.extend(j for j, _ in skipped)
        if best_j is None:
            break  # every remaining candidate failed; path ends early
        trace_value += best_gain
        steps.append(
            PathStep(
                added_index=best_j,
                trace_value=trace_value,
                bic_value=bic_score(trace_value, k, d.n, d.p),
            )
        )
        selected.append(best_j)
        remaining.discard(best_j)

    return SolutionPath(
        method=method,
        steps=tuple(steps),
        k_max=len(steps),
        requested_k_max=k_max,
        skipped=tuple(sorted(set(skipped_all))),
    )


def stp_run(
    d: Dataset,
    s: SliceAssignment,
    cfg: StpConfig,
    universe: Iterable[int] | None = None,
) -> SelectionReport:
    """Stepwise selection over ``universe`` (all predictors by default).

    Each pass attempts one tested addition and one tested deletion; the run
    stops when a full pass changes nothing, a prior working set recurs, or
    the pass budget is exhausted.
    """
    method = cfg.method
    if universe is None:
        universe = range(1, d.p + 1)
    uni = validate_working_set(universe, d.p)
    if not uni:
        return SelectionReport(
            selected=(),
            trail=(TrailEntry("stop", None, None, None, "empty universe"),),
            method=method,
            stage_sizes=(0, 0),
        )
    alpha = cfg.resolved_alpha(d.p)
    max_size = cfg.resolved_max_set_size(d.n, d.p, s.h_count)

    current: set[int] = set()
    visited = {frozenset()}
    trail: list[TrailEntry] = []
    skipped_seen: set[int] = set()
    stop_note = "converged"

    def record_skips(skips):
        for j, category in skips:
            if j not in skipped_seen:
                skipped_seen.add(j)
                trail.append(TrailEntry("skip", j, None, None, category))

    for _ in range(cfg.max_iterations):
        changed = False

        # forward addition
        if len(current) < max_size:
            candidates = [j for j in uni if j not in current]
            if candidates:
                best_j, _, parts, skips = _scan_candidates(
                    d, s, method, tuple(sorted(current)), candidates
                )
                record_skips(skips)
                if best_j is not None:
                    m, r, aux = parts
                    stat, thr, _ = statistic_and_threshold(
                        method, d, s, m, r, aux, alpha
                    )
                    if stat > thr:
                        current.add(best_j)
                        trail.append(TrailEntry("add", best_j, stat, thr))
                        changed = True
                        state = frozenset(current)
                        if state in visited:
                            stop_note = "cycle detected"
                            trail.append(TrailEntry("stop", None, None, None, stop_note))
                            return _finish(current, trail, method, uni)
                        visited.add(state)

        # backward deletion
        if current:
            best_d = None
            best_loss = math.inf
            best_parts = None
            for j in sorted(current):
                reduced = tuple(sorted(current - {j}))
                try:
                    m = compute_moments(d, s, reduced)
                    r = residualize(d, s, m, j)
                    aux = None if method is Method.SIR else auxiliary_stats(m, r)
                    loss = trace_diff(method, m, r, aux)
                except TracePursuitError as err:
                    record_skips([(j, err.category)])
                    continue
                if loss < best_loss:
                    best_d, best_loss, best_parts = j, loss, (m, r, aux)
            if best_d is not None:
                m, r, aux = best_parts
                stat, thr, _ = statistic_and_threshold(method, d, s, m, r, aux, alpha)
                if stat < thr:
                    current.remove(best_d)
                    trail.append(TrailEntry("delete", best_d, stat, thr))
                    changed = True
                    state = frozenset(current)
                    if state in visited:
                        stop_note = "cycle detected"
                        trail.append(TrailEntry("stop", None, None, None, stop_note))
                        return _finish(current, trail, method, uni)
                    visited.add(state)

        if not changed:
            break
    else:
        stop_note = "iteration cap reached"

    trail.append(TrailEntry("stop", None, None, None, stop_note))
    return _finish(current, trail, method, uni)


def _finish(current, trail, method, universe) -> SelectionReport:
    return SelectionReport(
        selected=tuple(sorted(current)),
        trail=tuple(trail),
        method=method,
        stage_sizes=(len(universe), len(current)),
    )


def htp_run(
    d: Dataset,
    s: SliceAssignment,
    method: Method,
    cfg: StpConfig | None = None,
    k_max: int | None = None,
) -> SelectionReport:
    """Two-stage hybrid: FTP screening, BIC prefix choice, then STP refinement.

    The refinement reuses the original slicing and tests only indices inside
    the BIC-chosen prefix.
    """
    if cfg is None:
        cfg = StpConfig(method=method)
    elif cfg.method is not method:
        cfg = replace(cfg, method=method)

    path = ftp_run(d, s, method, k_max=k_max)
    m_hat = path.bic_argmin()
    screened = path.prefix(m_hat)
    if not screened:
        return SelectionReport(
            selected=(),
            trail=(TrailEntry("stop", None, None, None, "screening produced no set"),),
            method=method,
            stage_sizes=(0, 0),
        )
    report = stp_run(d, s, cfg, universe=screened)
    return replace(report, stage_sizes=(len(screened), len(report.selected)))
