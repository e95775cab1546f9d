"""Trace-driven workloads from ``timestamp,user_id,content_id`` request logs."""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Optional, Union

import numpy as np

from .cachesim import IntervalDemand, MetricsTimeline, run_simulation
from .rng import stable_hash
from .scenario import World, generate_world, proportional_capacities, zipf_pmf


@dataclass(frozen=True, order=True)
class TraceRecord:
    timestamp: float
    user: str
    content: str


@dataclass
class ParsedTrace:
    records: list[TraceRecord]
    malformed_count: int = 0


def parse_trace(source: Union[str, bytes, IO]) -> ParsedTrace:
    """Parse CSV lines ``timestamp,user_id,content_id``.

    A header line and ``#`` comments are skipped; malformed lines are counted.
    Records come back sorted by (timestamp, user, content).
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    records, bad, seen = [], 0, False
    for raw in source:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        first, seen = not seen, True
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or not parts[1] or not parts[2]:
            bad += 1
            continue
        try:
            ts = float(parts[0])
        except ValueError:
            if not first:
                bad += 1
            continue
        if not math.isfinite(ts):
            bad += 1
            continue
        records.append(TraceRecord(ts, parts[1], parts[2]))
    records.sort()
    return ParsedTrace(records=records, malformed_count=bad)


def read_trace(path) -> ParsedTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh)


@dataclass
class Catalog:
    domain_of: dict[str, int]
    group_of: dict[str, int]
    content_index: dict[str, int]
    records: list[TraceRecord]
    n_domains: int
    n_groups: int


def derive_catalog(records: Iterable[TraceRecord], n_domains: int, n_groups: int,
                   top_k: Optional[int] = None) -> Catalog:
    """Keep the ``top_k`` most requested contents and hash contents to domains
    and users to groups with the stable 64-bit hash."""
    if n_domains < 1 or n_groups < 1:
        raise ValueError("n_domains and n_groups must be >= 1")
    records = list(records)
    popularity = Counter(r.content for r in records)
    ranked = sorted(popularity, key=lambda c: (-popularity[c], c))
    kept = ranked if top_k is None else ranked[:top_k]
    content_index = {c: n for n, c in enumerate(kept)}
    domain_of = {c: stable_hash(c) % n_domains for c in kept}
    filtered = [r for r in records if r.content in content_index]
    group_of = {u: stable_hash(u) % n_groups for u in sorted({r.user for r in filtered})}
    return Catalog(domain_of=domain_of, group_of=group_of, content_index=content_index,
                   records=filtered, n_domains=n_domains, n_groups=n_groups)


@dataclass
class IntervalWorkload:
    index: int
    start_s: float
    rate: float
    flow_rates: np.ndarray  # (n_groups, n_domains)
    records: list[TraceRecord] = field(default_factory=list)


@dataclass
class TraceWorkloads:
    interval_s: float
    capacity: float
    intervals: list[IntervalWorkload]

    def to_dict(self) -> dict:
        return {
            "interval_s": self.interval_s,
            "capacity": self.capacity,
            "intervals": [
                {"index": w.index, "start_s": w.start_s, "rate": w.rate,
                 "flows": [[int(u), int(s), float(w.flow_rates[u, s])]
                           for u, s in zip(*np.nonzero(w.flow_rates))]}
                for w in self.intervals
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def interval_workloads(catalog: Catalog, interval_s: float,
                       capacity_fraction: float = 0.8) -> TraceWorkloads:
    """Bucket surviving requests by interval; rates are counts / interval_s.

    Interval 0 starts at the first timestamp.
    """
    recs = catalog.records
    if not recs:
        return TraceWorkloads(interval_s=interval_s, capacity=0.0, intervals=[])
    t0 = recs[0].timestamp
    n_int = int((recs[-1].timestamp - t0) // interval_s) + 1
    buckets: list[list[TraceRecord]] = [[] for _ in range(n_int)]
    for r in recs:
        buckets[int((r.timestamp - t0) // interval_s)].append(r)
    out = []
    for n, bucket in enumerate(buckets):
        rates = np.zeros((catalog.n_groups, catalog.n_domains))
        for r in bucket:
            rates[catalog.group_of[r.user], catalog.domain_of[r.content]] += 1
        rates /= interval_s
        out.append(IntervalWorkload(index=n, start_s=n * interval_s,
                                    rate=len(bucket) / interval_s, flow_rates=rates,
                                    records=bucket))
    peak = max(w.rate for w in out)
    return TraceWorkloads(interval_s=interval_s, capacity=capacity_fraction * peak,
                          intervals=out)


def trace_world(base: World, workloads: TraceWorkloads, n_groups: int) -> World:
    """World for trace replay: CBS geometry from ``base``, ``n_groups`` UGs,
    capacities rescaled to the trace-derived total."""
    cfg = base.config
    forced = generate_world(cfg, n_ugs=n_groups)
    caps = proportional_capacities(base.radii, workloads.capacity) if base.n_cbs else base.radii
    n_domains = workloads.intervals[0].flow_rates.shape[1] if workloads.intervals else 1
    return World(config=cfg, cbs_pos=base.cbs_pos, radii=base.radii, capacities=caps,
                 ug_pos=forced.ug_pos, ug_pmf=zipf_pmf(n_groups, cfg.alpha_u),
                 domain_pmf=np.full(n_domains, 1.0 / n_domains))


def trace_demands(catalog: Catalog, workloads: TraceWorkloads) -> list[IntervalDemand]:
    out = []
    t0 = catalog.records[0].timestamp if catalog.records else 0.0
    n_s = catalog.n_domains
    for w in workloads.intervals:
        times = np.array([r.timestamp - t0 for r in w.records], dtype=float)
        flows = np.array([catalog.group_of[r.user] * n_s + catalog.domain_of[r.content]
                          for r in w.records], dtype=np.int64)
        contents = np.array([catalog.content_index[r.content] for r in w.records],
                            dtype=np.int64)
        out.append(IntervalDemand(rates=w.flow_rates, times=times, flows=flows,
                                  contents=contents))
    return out


def simulate_trace(base: World, parsed: ParsedTrace, solver: str,
                   seed: Optional[int] = None) -> tuple[MetricsTimeline, TraceWorkloads]:
    """Replay a parsed trace; one rejection bucket spans one interval."""
    cfg = base.config
    catalog = derive_catalog(parsed.records, cfg.n_domains, cfg.n_groups, cfg.top_k)
    workloads = interval_workloads(catalog, cfg.interval_s)
    world = trace_world(base, workloads, cfg.n_groups)
    # every trace interval is reported
    world.config = replace(cfg, warmup_s=0.0)
    demands = trace_demands(catalog, workloads)
    timeline = run_simulation(world, solver, demands, n_contents=len(catalog.content_index),
                              section_len=0, seed=seed, tick_s=cfg.interval_s)
    return timeline, workloads

