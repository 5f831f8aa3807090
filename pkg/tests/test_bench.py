import csv
import io

import numpy as np
import pytest

from clusterdyn.bench import (CSV_HEADER, BenchmarkSpec, count_forward_dynamics, default_seed,
                              linear_fit_r2, rows_to_csv, run_benchmark)
from clusterdyn.generators import belt_leg, random_state


def _parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_csv_header_and_rows():
    spec = BenchmarkSpec(depths=[1, 2], branches=[1, 2], algorithms=["cluster-aba", "kkt"])
    text = rows_to_csv(run_benchmark(spec))
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = _parse(text)
    assert len(rows) == 8
    for r in rows:
        parts = sum(int(r[k]) for k in ("adds", "mults", "divs", "sqrts"))
        assert int(r["total"]) >= parts > 0


def test_deterministic_for_a_seed():
    spec = BenchmarkSpec(family="transmission-branches", d_t=4, d_l=[1, 3],
                         algorithms=["cluster-aba", "kkt", "approximate-aba"], seed=7)
    assert rows_to_csv(run_benchmark(spec)) == rows_to_csv(run_benchmark(spec))


def test_counting_does_not_change_results():
    m = belt_leg()
    q, qd, tau = random_state(m, np.random.default_rng(1))
    for alg in ("cluster-aba", "kkt", "approximate-aba"):
        _, on = count_forward_dynamics(m, alg, q, qd, tau, counting=True)
        off_counter, off = count_forward_dynamics(m, alg, q, qd, tau, counting=False)
        assert [float(x) for x in on] == [float(x) for x in off]
        assert off_counter.as_dict()["total"] == 0


def test_chain_depth_scaling_is_linear():
    spec = BenchmarkSpec(mechanism="link-rotor", depths=[2, 4, 8, 16])
    rows = run_benchmark(spec)
    d = [r["d_a"] for r in rows]
    t = [r["total"] for r in rows]
    assert linear_fit_r2(d, t) > 0.99
    slope_lo = (t[1] - t[0]) / (d[1] - d[0])
    slope_hi = (t[3] - t[2]) / (d[3] - d[2])
    assert abs(slope_hi - slope_lo) <= 0.05 * slope_lo


def test_unsupported_algorithm_gives_error_row():
    err = io.StringIO()
    spec = BenchmarkSpec(mechanism="four-bar", depths=[1], algorithms=["approximate-aba", "cluster-aba"])
    rows = run_benchmark(spec, err=err)
    assert rows[0]["total"] == "" and "unsupported" in err.getvalue()
    assert rows[1]["total"] > 0


def test_spec_validation():
    with pytest.raises(ValueError):
        BenchmarkSpec(family="nope").validate()
    with pytest.raises(ValueError):
        BenchmarkSpec(family="transmission-branches", d_t=3, d_l=[4]).validate()
    with pytest.raises(ValueError):
        BenchmarkSpec(algorithms=["crba"]).validate()


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("CLUSTER_DYN_SEED", "42")
    assert default_seed() == 42
    monkeypatch.delenv("CLUSTER_DYN_SEED")
    assert default_seed() == 0
