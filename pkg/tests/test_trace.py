import io

import numpy as np
import pytest

from utacache.rng import stable_hash
from utacache.scenario import ScenarioConfig, generate_world
from utacache.trace import (TraceRecord, derive_catalog, interval_workloads, parse_trace,
                            read_trace, simulate_trace)


def test_parse_examples():
    p = parse_trace("5,u2,c9\n0,u1,c9")
    assert p.records == [TraceRecord(0.0, "u1", "c9"), TraceRecord(5.0, "u2", "c9")]
    bad = parse_trace("0,u1,c1\nbad\n")
    assert bad.malformed_count == 1 and len(bad.records) == 1
    empty = parse_trace("")
    assert empty.records == [] and empty.malformed_count == 0


def test_parse_header_comments_and_streams(tmp_path):
    text = "timestamp,user_id,content_id\n# note\n1,u,c\n2,u,\nx,u,c\n"
    p = parse_trace(io.StringIO(text))
    assert len(p.records) == 1 and p.malformed_count == 2
    assert parse_trace(text.encode()).records == p.records
    path = tmp_path / "t.csv"
    path.write_text(text)
    assert read_trace(path).records == p.records


def _records(counts):
    out, t = [], 0.0
    for content, n in counts.items():
        for m in range(n):
            out.append(TraceRecord(t, f"u{m}", content))
            t += 1.0
    return sorted(out)


def test_catalog_filter_and_hashing():
    recs = _records({"a": 5, "b": 3})
    assert set(derive_catalog(recs, 20, 10).content_index) == {"a", "b"}
    top = derive_catalog(recs, 20, 10, top_k=1)
    assert list(top.content_index) == ["a"] and all(r.content == "a" for r in top.records)
    one = derive_catalog(recs, 1, 10)
    assert set(one.domain_of.values()) == {0}
    cat = derive_catalog(recs, 20, 10)
    assert cat.domain_of["a"] == stable_hash("a") % 20
    assert cat.group_of["u0"] == stable_hash("u0") % 10


def test_catalog_ties_by_id():
    recs = _records({"z": 2, "m": 2})
    assert list(derive_catalog(recs, 5, 5, top_k=1).content_index) == ["m"]


def test_interval_workloads_examples():
    recs = [TraceRecord(float(t), f"u{t % 7}", f"c{t % 13}") for t in range(0, 300)]
    cat = derive_catalog(recs, 4, 3)
    wl = interval_workloads(cat, 1.0)
    assert {w.rate for w in wl.intervals} == {1.0}
    uniform = interval_workloads(cat, 100.0)
    assert [w.rate for w in uniform.intervals] == [1.0, 1.0, 1.0]
    assert uniform.capacity == pytest.approx(0.8)
    for w in uniform.intervals:
        assert w.flow_rates.sum() == pytest.approx(w.rate)
    gap = [TraceRecord(0.0, "u", "c"), TraceRecord(250.0, "u", "c")]
    mid = interval_workloads(derive_catalog(gap, 2, 2), 100.0).intervals[1]
    assert mid.rate == 0 and not mid.flow_rates.any()
    peak = [TraceRecord(float(t) / 2, "u", "c") for t in range(200)] + \
           [TraceRecord(100.0 + t, "u", "c") for t in range(100)]
    assert interval_workloads(derive_catalog(peak, 2, 2), 100.0).capacity == pytest.approx(1.6)


def test_toy_trace_runs_one_interval():
    world = generate_world(ScenarioConfig(seed=0))
    parsed = parse_trace("0,u1,c9\n5,u2,c9\n7,u1,c3\n")
    tl, wl = simulate_trace(world, parsed, "greedy", seed=0)
    assert len(wl.intervals) == 1 and len(tl.reported) == 1
    r = tl.records[0]
    assert r.generated == 3 and r.served + r.rejected + r.unallocated == 3
    again, _ = simulate_trace(world, parsed, "greedy", seed=0)
    assert again.to_csv() == tl.to_csv()
    assert np.isclose(wl.to_dict()["intervals"][0]["rate"], 3 / world.config.interval_s)
