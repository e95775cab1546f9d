"""Request-level replay: per-CBS LRU caches, tick-based rejection and metrics."""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .model import AllocationMatrix, Instance
from .rng import stream
from .scenario import ScenarioConfig, World, build_flows, shuffle_sections, zipf_pmf
from .solvers import SolveResult, get_solver

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

TIMELINE_COLUMNS = ("interval", "solver", "section_len", "seed", "qos_per_request",
                    "consistent_fraction", "miss_ratio", "chrd", "rejected")


class LruCache:
    """Reference LRU over hashable content ids."""

    def __init__(self, slots: int):
        if slots < 1:
            raise ValueError("an LRU cache needs at least one slot")
        self.slots = slots
        self._items: OrderedDict = OrderedDict()

    def access(self, content) -> bool:
        if content in self._items:
            self._items.move_to_end(content)
            return True
        if len(self._items) >= self.slots:
            self._items.popitem(last=False)
        self._items[content] = None
        return False

    def __contains__(self, content) -> bool:
        return content in self._items

    def __len__(self) -> int:
        return len(self._items)

    @property
    def residents(self) -> list:
        return list(self._items)


def lru_access(cache: LruCache, content) -> str:
    return "hit" if cache.access(content) else "miss"


# -- replay kernel -------------------------------------------------------
#
# LRU state for every CBS lives in flat arrays so the kernel compiles under
# numba: slot_of[m, c] is the slot holding content c (or -1); slots form a
# doubly linked recency list per CBS, head = most recent.


class LruState:
    def __init__(self, n_cbs: int, n_contents: int, slots: int):
        self.slot_of = np.full((n_cbs, max(n_contents, 1)), -1, dtype=np.int32)
        self.content = np.full((n_cbs, slots), -1, dtype=np.int64)
        self.prev = np.full((n_cbs, slots), -1, dtype=np.int32)
        self.next = np.full((n_cbs, slots), -1, dtype=np.int32)
        self.head = np.full(n_cbs, -1, dtype=np.int32)
        self.tail = np.full(n_cbs, -1, dtype=np.int32)
        self.size = np.zeros(n_cbs, dtype=np.int32)

    def residents(self, m: int) -> list[int]:
        """Contents of CBS m from most to least recent."""
        out, s = [], self.head[m]
        while s != -1:
            out.append(int(self.content[m, s]))
            s = self.next[m, s]
        return out


def _replay(ev_tick, ev_cbs, ev_gain, ev_content, ev_sample, cap_per_tick,
            slot_of, content, prev, nxt, head, tail, size,
            tick_now, tick_used, max_tick_used,
            out_counts, out_rejected, sample_hits, sample_served):
    """Serve a time-ordered batch of requests.

    out_counts = [served, rejected, unallocated, hits, misses]; returns the
    QoS gain earned by served requests.
    """
    n_slots = content.shape[1]
    qos = 0.0
    for e in range(ev_tick.shape[0]):
        m = ev_cbs[e]
        if m < 0:
            out_counts[2] += 1
            continue
        t = ev_tick[e]
        if tick_now[m] != t:
            tick_now[m] = t
            tick_used[m] = 0
        if tick_used[m] >= cap_per_tick[m]:
            out_counts[1] += 1
            out_rejected[m] += 1
            continue
        tick_used[m] += 1
        if tick_used[m] > max_tick_used[m]:
            max_tick_used[m] = tick_used[m]
        out_counts[0] += 1
        qos += ev_gain[e]
        smp = ev_sample[e]
        sample_served[smp] += 1
        c = ev_content[e]
        s = slot_of[m, c]
        if s >= 0:
            out_counts[3] += 1
            sample_hits[smp] += 1
            if head[m] != s:
                # unlink s, push to front
                p = prev[m, s]
                n = nxt[m, s]
                nxt[m, p] = n
                if n >= 0:
                    prev[m, n] = p
                else:
                    tail[m] = p
                prev[m, s] = -1
                nxt[m, s] = head[m]
                prev[m, head[m]] = s
                head[m] = s
            continue
        out_counts[4] += 1
        if size[m] < n_slots:
            s = size[m]
            size[m] += 1
        else:
            s = tail[m]
            slot_of[m, content[m, s]] = -1
            p = prev[m, s]
            tail[m] = p
            if p >= 0:
                nxt[m, p] = -1
            else:
                head[m] = -1
        content[m, s] = c
        slot_of[m, c] = s
        prev[m, s] = -1
        nxt[m, s] = head[m]
        if head[m] >= 0:
            prev[m, head[m]] = s
        head[m] = s
        if tail[m] < 0:
            tail[m] = s
    return qos


replay_py = _replay
replay = njit(cache=True, nogil=True)(_replay) if njit is not None else _replay


# -- metrics -------------------------------------------------------------


@dataclass
class IntervalRecord:
    interval: int
    start_s: float
    warmup: bool
    generated: int
    served: int
    rejected: int
    unallocated: int
    hits: int
    misses: int
    qos_total: float
    consistent_fraction: float
    chrd: float
    objective: float
    allocated_units: int

    @property
    def qos_per_request(self) -> float:
        return self.qos_total / self.generated if self.generated else 0.0

    @property
    def miss_ratio(self) -> float:
        return self.misses / self.served if self.served else 0.0


@dataclass
class MetricsTimeline:
    solver: str
    section_len: int
    seed: int
    records: list[IntervalRecord] = field(default_factory=list)
    hit_samples: list[tuple[float, float]] = field(default_factory=list)
    rejected_per_cbs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    max_tick_served: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cap_per_tick: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def reported(self) -> list[IntervalRecord]:
        return [r for r in self.records if not r.warmup]

    def summary(self) -> dict[str, float]:
        """Means over reported intervals; interval 0 never counts for
        consistency or CHRD since nothing was recomputed there."""
        rep = self.reported
        recomputed = [r for r in rep if r.interval > 0]

        def mean(vals):
            vals = list(vals)
            return float(np.mean(vals)) if vals else 0.0

        return {
            "qos_per_request": mean(r.qos_per_request for r in rep),
            "consistent_fraction": mean(r.consistent_fraction for r in recomputed),
            "miss_ratio": mean(r.miss_ratio for r in rep),
            "chrd": mean(r.chrd for r in recomputed),
            "rejected": mean(r.rejected for r in rep),
            "objective": mean(r.objective for r in rep),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TIMELINE_COLUMNS)
        for r in self.reported:
            writer.writerow([r.interval, self.solver, self.section_len, self.seed,
                             _fmt(r.qos_per_request), _fmt(r.consistent_fraction),
                             _fmt(r.miss_ratio), _fmt(r.chrd), r.rejected])
        return buf.getvalue()

    def hit_ratio_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("time_s", "hit_ratio"))
        for t, h in self.hit_samples:
            writer.writerow([_fmt(t), _fmt(h)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(round(float(v), 12))


def consistent_fraction(prev: Optional[AllocationMatrix], new: AllocationMatrix,
                        n_domains: int) -> float:
    """Share of allocated units whose CBS served the same domain under ``prev``."""
    per_pair = new.x.sum(axis=2)
    total = int(per_pair.sum())
    if total == 0:
        return 1.0
    if prev is None:
        return 0.0
    served = prev.served_domains(n_domains)
    hits = served[new.flow_domains] & (per_pair > 0)
    return float(per_pair[hits].sum()) / total


def chrd(hit_samples: Iterable[tuple[float, float]], recompute_time: float,
         window: float) -> float:
    """Hit-ratio drop: last sample before the recompute minus the minimum
    sample inside ``window`` seconds after it, floored at 0.

    A sample stamped ``t`` covers the period ending at ``t``.
    """
    samples = list(hit_samples)
    before = [h for t, h in samples if t <= recompute_time]
    after = [h for t, h in samples if recompute_time < t <= recompute_time + window]
    if not after:
        raise ValueError("no hit-ratio samples inside the window")
    if not before:
        raise ValueError("no hit-ratio sample before the recompute time")
    return max(0.0, before[-1] - min(after))


# -- simulation ----------------------------------------------------------


@dataclass
class IntervalDemand:
    """Traffic of one interval: expected flow rates and concrete requests.

    ``times`` are absolute seconds, ``flows`` index UG-major flows and
    ``contents`` are dense content ids.
    """

    rates: np.ndarray  # (U, S)
    times: np.ndarray
    flows: np.ndarray
    contents: np.ndarray


def synthesize_requests(rates: np.ndarray, start: float, duration: float,
                        domain_of_flow: np.ndarray, content_cdf: np.ndarray,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Poisson arrivals per flow with Zipf content draws inside the flow's domain.

    Returns time-sorted (times, flows, contents); content id =
    domain * catalog_size + rank.
    """
    rates = np.asarray(rates, dtype=float).reshape(-1)
    counts = rng.poisson(rates * duration)
    flows = np.repeat(np.arange(len(rates)), counts)
    times = start + rng.uniform(0.0, duration, size=flows.size)
    order = np.argsort(times, kind="stable")
    times, flows = times[order], flows[order]
    ranks = np.searchsorted(content_cdf, rng.random(flows.size), side="right")
    ranks = np.minimum(ranks, len(content_cdf) - 1)
    contents = domain_of_flow[flows] * len(content_cdf) + ranks
    return times, flows, contents


def _route(inst: Instance, alloc: AllocationMatrix, residuals: np.ndarray, flows: np.ndarray,
           rng: np.random.Generator) -> np.ndarray:
    """CBS (or -1) serving each request, picking the sub-flow by its share.

    A flow with |K| units and residual r spreads its traffic as |K| equal
    unit streams of lambda0 each plus an unallocated stream r; when r < 0
    the unit streams shrink to rate / |K| each.
    """
    counts = inst.unit_counts
    rate = np.array([f.rate for f in inst.flows], dtype=float)
    per_unit = np.where(residuals >= 0, inst.lambda0, rate / np.maximum(counts, 1))
    share = np.where(rate > 0, per_unit / np.where(rate > 0, rate, 1.0), 0.0)
    k_max = alloc.x.shape[2]
    target = np.full((inst.n_flows, k_max + 1), -1, dtype=np.int64)
    if alloc.x.size:
        i_idx, j_idx, k_idx = np.nonzero(alloc.x)
        target[i_idx, k_idx] = j_idx
    u = rng.random(flows.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.floor(u / share[flows])
    k = np.where(np.isfinite(k), k, k_max).astype(np.int64)
    k = np.where(k < counts[flows], k, k_max)
    return target[flows, k]


def shuffle_demands(world: World, section_len: int, seed: int, n_intervals: int
                    ) -> Iterator[IntervalDemand]:
    """Randomly-shuffled workload: domain popularity reshuffled every interval."""
    cfg = world.config
    cdf = np.cumsum(zipf_pmf(cfg.contents_per_domain, cfg.alpha_c))
    domains = np.tile(np.arange(world.n_domains), world.n_ugs)
    for n in range(n_intervals):
        pmf = shuffle_sections(world.domain_pmf, section_len, stream(seed, "shuffle", section_len, n))
        rates = build_flows(cfg.rate, world.ug_pmf, pmf)
        times, flows, contents = synthesize_requests(
            rates, n * cfg.interval_s, cfg.interval_s, domains, cdf,
            stream(seed, "requests", section_len, n))
        yield IntervalDemand(rates=rates, times=times, flows=flows, contents=contents)


def run_simulation(world: World, solver: str | Callable[..., SolveResult],
                   demands: Iterable[IntervalDemand], n_contents: int,
                   section_len: int = 0, seed: Optional[int] = None,
                   tick_s: Optional[float] = None) -> MetricsTimeline:
    """Replay ``demands`` interval by interval under one allocation policy.

    Each interval: rebuild the instance from the interval's rates, solve with
    the previous policy feeding the consistency weights, replay requests
    through tick-limited CBSs and LRU caches, append metrics.
    """
    cfg = world.config
    seed = cfg.seed if seed is None else seed
    tick_s = cfg.tick_s if tick_s is None else tick_s
    solve = get_solver(solver) if isinstance(solver, str) else solver
    name = solver if isinstance(solver, str) else getattr(solver, "__name__", "custom")
    n_m = world.n_cbs
    timeline = MetricsTimeline(solver=name, section_len=section_len, seed=seed)
    cap_per_tick = np.floor(world.capacities * tick_s + 1e-9).astype(np.int64)
    timeline.cap_per_tick = cap_per_tick
    state = LruState(n_m, n_contents, cfg.cache_slots)
    tick_now = np.full(n_m, -1, dtype=np.int64)
    tick_used = np.zeros(n_m, dtype=np.int64)
    max_tick = np.zeros(n_m, dtype=np.int64)
    rejected_total = np.zeros(n_m, dtype=np.int64)
    warm_n = int(round(cfg.warmup_s / cfg.interval_s))
    sample_dt = cfg.hit_sample_s
    all_samples: list[tuple[float, float]] = []
    prev: Optional[AllocationMatrix] = None
    last_ratio = 0.0

    for n, demand in enumerate(demands):
        start = n * cfg.interval_s
        n_req = int(demand.times.size)
        if float(np.sum(demand.rates)) > 0 and world.n_ugs and n_m:
            inst, residuals = world.instance(demand.rates)
            result = solve(inst, prev)
            alloc = result.allocation
            objective = result.breakdown.total
            frac = consistent_fraction(prev, alloc, world.n_domains) if n > 0 else 1.0
            cbs = _route(inst, alloc, residuals, demand.flows, stream(seed, "route", name, n))
            gains = inst.gains[demand.flows, np.maximum(cbs, 0)] if n_req else np.zeros(0)
            units = int(alloc.x.sum())
        else:
            alloc, objective, frac, units = None, 0.0, 1.0, 0
            cbs = np.full(n_req, -1, dtype=np.int64)
            gains = np.zeros(n_req)
        n_samples = int(math.ceil(cfg.interval_s / sample_dt - 1e-9))
        ev_sample = np.minimum(((demand.times - start) / sample_dt).astype(np.int64),
                               n_samples - 1)
        ev_tick = np.floor(demand.times / tick_s).astype(np.int64)
        counts = np.zeros(5, dtype=np.int64)
        rej = np.zeros(n_m, dtype=np.int64)
        s_hits = np.zeros(n_samples, dtype=np.int64)
        s_served = np.zeros(n_samples, dtype=np.int64)
        qos = replay(ev_tick, cbs.astype(np.int64), gains.astype(float),
                     demand.contents.astype(np.int64), ev_sample, cap_per_tick,
                     state.slot_of, state.content, state.prev, state.next, state.head,
                     state.tail, state.size, tick_now, tick_used, max_tick,
                     counts, rej, s_hits, s_served)
        rejected_total += rej
        samples = []
        for s in range(n_samples):
            if s_served[s]:
                last_ratio = s_hits[s] / s_served[s]
            samples.append((start + (s + 1) * sample_dt, float(last_ratio)))
        prev_sample = all_samples[-1:]  # last sample of the previous interval
        all_samples.extend(samples)
        drop = 0.0
        if n > 0 and prev_sample:
            window = [(t, h) for t, h in samples if t <= start + cfg.chrd_window]
            if window:
                drop = chrd(prev_sample + window, start, cfg.chrd_window)
        warm = n < warm_n
        timeline.records.append(IntervalRecord(
            interval=n, start_s=start, warmup=warm, generated=n_req,
            served=int(counts[0]), rejected=int(counts[1]), unallocated=int(counts[2]),
            hits=int(counts[3]), misses=int(counts[4]), qos_total=float(qos),
            consistent_fraction=frac, chrd=drop, objective=float(objective),
            allocated_units=units))
        if not warm:
            timeline.hit_samples.extend(samples)
        if alloc is not None:
            prev = alloc
    timeline.rejected_per_cbs = rejected_total
    timeline.max_tick_served = max_tick
    return timeline


def n_intervals(config: ScenarioConfig) -> int:
    return int(round((config.warmup_s + config.duration_s) / config.interval_s))


def simulate_shuffle(world: World, solver: str, section_len: Optional[int] = None,
                     seed: Optional[int] = None) -> MetricsTimeline:
    cfg = world.config
    section_len = section_len or cfg.section_len
    seed = cfg.seed if seed is None else seed
    demands = shuffle_demands(world, section_len, seed, n_intervals(cfg))
    return run_simulation(world, solver, demands,
                          n_contents=world.n_domains * cfg.contents_per_domain,
                          section_len=section_len, seed=seed)
