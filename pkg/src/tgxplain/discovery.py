"""Dominant time-window discovery over candidate explanation networks.

A network's fit to a window is the mean of its per-snapshot scores; the
reported value subtracts the edgeless network on the same variables, so
only edge structure is measured. A (network, window) pair is interesting
when that value strictly exceeds the threshold, and dominant when its
window is not strictly inside any other interesting window. Discovery
runs either exhaustively or as a breadth-first walk down the window
lattice that prunes everything below a recorded window.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import RangeError
from .graph import TimeWindow
from .model import ModelOracle
from .pgm import BayesianNetwork, bic_score, empty_network, explain_dataset
from .perturb import TemporalDataset, generate_temporal_dataset


@dataclass(frozen=True)
class CandidateSet:
    """Deduplicated explanation networks with their first snapshot of origin."""

    entries: tuple

    def __post_init__(self):
        seen = set()
        for b, origin in self.entries:
            key = b.canonical_key()
            if key in seen:
                raise ValueError("candidate set contains duplicate canonical forms")
            seen.add(key)
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def networks(self) -> list[BayesianNetwork]:
        return [b for b, _ in self.entries]


@dataclass(frozen=True)
class InterestRecord:
    network: BayesianNetwork
    window: TimeWindow
    f_value: float


@dataclass(frozen=True)
class DominantSet:
    records: tuple
    windows_evaluated: int
    score_evaluations: int

    def keys(self) -> set:
        """(canonical network, window) identity pairs, for comparisons."""
        return {
            (r.network.canonical_key(), (r.window.start, r.window.end)) for r in self.records
        }


def tbic(b: BayesianNetwork, data: TemporalDataset, w: TimeWindow) -> float:
    """Mean per-snapshot score of one fixed network across the window."""
    if not data.interval.contains(w):
        raise RangeError(f"window [{w.start}, {w.end}] outside explained interval")
    return sum(bic_score(b, data.snapshot(t)) for t in w.snapshots()) / w.length


def normalized_tbic(b: BayesianNetwork, data: TemporalDataset, w: TimeWindow) -> float:
    """Gain of b's edges over the edgeless network on the same variables."""
    b0 = empty_network(b.variables, b.target)
    return tbic(b, data, w) - tbic(b0, data, w)


def is_interesting(
    b: BayesianNetwork,
    data: TemporalDataset,
    w: TimeWindow,
    threshold: float,
    raw: bool = False,
) -> tuple[bool, float]:
    """Strict threshold test; returns the measured value for reporting."""
    value = tbic(b, data, w) if raw else normalized_tbic(b, data, w)
    return value > threshold, value


def window_children(w: TimeWindow) -> list[TimeWindow]:
    """The two windows one step shorter, clipped from either end."""
    if w.start == w.end:
        return []
    return [TimeWindow(w.start + 1, w.end), TimeWindow(w.start, w.end - 1)]


def all_windows(interval: TimeWindow) -> list[TimeWindow]:
    """Every sub-window, sorted by (start, end)."""
    return [
        TimeWindow(a, b)
        for a in interval.snapshots()
        for b in range(a, interval.end + 1)
    ]


class _GainCache:
    """Per-snapshot score gains, computed once per (candidate, snapshot).

    Keeps window evaluations cheap without touching the evaluation
    counters, which track (candidate, window) visits.
    """

    def __init__(self, cands: CandidateSet, data: TemporalDataset, raw: bool):
        self.data = data
        self.raw = raw
        self._gain = {}
        self._empty = [
            None if raw else empty_network(b.variables, b.target) for b in cands.networks()
        ]

    def window_value(self, ci: int, b: BayesianNetwork, w: TimeWindow) -> float:
        total = 0.0
        for t in w.snapshots():
            key = (ci, t)
            g = self._gain.get(key)
            if g is None:
                g = bic_score(b, self.data.snapshot(t))
                if not self.raw:
                    g -= bic_score(self._empty[ci], self.data.snapshot(t))
                self._gain[key] = g
            total += g
        return total / w.length


def _sorted_records(records, cands: CandidateSet) -> tuple:
    order = {b.canonical_key(): i for i, (b, _) in enumerate(cands.entries)}
    return tuple(
        sorted(
            records,
            key=lambda r: (r.window.start, r.window.end, order[r.network.canonical_key()]),
        )
    )


def brute_force_discover(
    cands: CandidateSet,
    data: TemporalDataset,
    threshold: float,
    raw: bool = False,
) -> DominantSet:
    """Score every candidate on every window, then drop dominated records.

    A record is dominated when its window is a strict subset of any
    other interesting record's window, regardless of which network the
    other record carries.
    """
    if not len(cands):
        raise ValueError("need at least one candidate network")
    cache = _GainCache(cands, data, raw)
    windows = all_windows(data.interval)
    interesting = []
    evaluations = 0
    for w in windows:
        for ci, (b, _) in enumerate(cands.entries):
            evaluations += 1
            value = cache.window_value(ci, b, w)
            if value > threshold:
                interesting.append(InterestRecord(b, w, value))
    survivors = [
        rec
        for rec in interesting
        if not any(other.window.strictly_contains(rec.window) for other in interesting)
    ]
    return DominantSet(
        records=_sorted_records(survivors, cands),
        windows_evaluated=len(windows),
        score_evaluations=evaluations,
    )


def prune_discover(
    cands: CandidateSet,
    data: TemporalDataset,
    threshold: float,
    raw: bool = False,
    paper_faithful: bool = False,
) -> DominantSet:
    """Breadth-first walk of the window lattice with dominance pruning.

    Starts at the full interval; children drop one step from either end.
    Once a window hosts an interesting candidate it is recorded and its
    whole sub-lattice is skipped. By default every candidate is scored at
    a recorded window, which makes the output identical to the exhaustive
    search; paper_faithful stops at the first interesting candidate, so
    the output then depends on candidate order.
    """
    if not len(cands):
        raise ValueError("need at least one candidate network")
    cache = _GainCache(cands, data, raw)
    full = data.interval
    queue = deque([full])
    enqueued = {full}
    recorded_windows: list[TimeWindow] = []
    records = []
    windows_evaluated = 0
    evaluations = 0
    while queue:
        w = queue.popleft()
        # a recording made after this window was enqueued may cover it
        if any(rw.contains(w) for rw in recorded_windows):
            continue
        windows_evaluated += 1
        found = False
        for ci, (b, _) in enumerate(cands.entries):
            evaluations += 1
            value = cache.window_value(ci, b, w)
            if value > threshold:
                records.append(InterestRecord(b, w, value))
                found = True
                if paper_faithful:
                    break
        if found:
            recorded_windows.append(w)
            continue
        for child in window_children(w):
            if child in enqueued:
                continue
            if any(rw.contains(child) for rw in recorded_windows):
                continue
            enqueued.add(child)
            queue.append(child)
    return DominantSet(
        records=_sorted_records(records, cands),
        windows_evaluated=windows_evaluated,
        score_evaluations=evaluations,
    )


def collect_candidates(
    oracle: ModelOracle,
    g,
    interval: TimeWindow,
    target: int,
    cfg,
    M: int | None = None,
    max_parents: int = 3,
    variables=None,
    data: TemporalDataset | None = None,
) -> CandidateSet:
    """Explain every snapshot independently and deduplicate the results.

    Passing a prebuilt temporal dataset skips regeneration; otherwise one
    is generated over the target's two-hop candidate variables.
    """
    if data is None:
        if variables is None:
            from .pgm import candidate_variables

            variables = candidate_variables(g, target)
        data = generate_temporal_dataset(oracle, g, interval, target, variables, cfg)
    entries = []
    seen = set()
    for t in data.interval.snapshots():
        b = explain_dataset(data.snapshot(t), M=M, max_parents=max_parents)
        key = b.canonical_key()
        if key not in seen:
            seen.add(key)
            entries.append((b, t))
    return CandidateSet(entries=tuple(entries))


def gain_series(cands: CandidateSet, data: TemporalDataset, raw: bool = False) -> dict:
    """Per-snapshot window-of-one values for each candidate, for plotting."""
    cache = _GainCache(cands, data, raw)
    series = {}
    for ci, (b, origin) in enumerate(cands.entries):
        series[ci] = {
            t: cache.window_value(ci, b, TimeWindow(t, t))
            for t in data.interval.snapshots()
        }
    return series


def dominant_report(
    result: DominantSet, threshold: float, mode: str, raw: bool = False
) -> dict:
    from .pgm import network_to_json

    return {
        "threshold": threshold,
        "measure": "tbic" if raw else "normalized_tbic",
        "mode": mode,
        "records": [
            {
                "network": network_to_json(r.network),
                "window": [r.window.start, r.window.end],
                "f_value": r.f_value,
            }
            for r in result.records
        ],
        "instrumentation": {
            "windows_evaluated": result.windows_evaluated,
            "score_evaluations": result.score_evaluations,
        },
    }
