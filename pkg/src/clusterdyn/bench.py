"""Operation-count benchmarks over generated mechanism families.

Each grid point builds a model, draws a feasible state from the seed, and
evaluates forward dynamics once with counting scalars as inputs.  Counts are
emitted as CSV rows with the columns in :data:`CSV_HEADER`.  ``total`` also
includes comparisons and trig calls, which have no column of their own.
"""

from __future__ import annotations

import csv
import io
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .counting import OpCounter, counted_array
from .dynamics import DynamicsState, Workspace, approximate_aba, approximate_tree, cluster_aba
from .generators import generate_constrained_branches, generate_mechanism_chain, random_state
from .oracle import kkt_forward_dynamics

CSV_HEADER = ["family", "mechanism", "d_a", "b_a", "d_t", "d_l", "algorithm",
              "adds", "mults", "divs", "sqrts", "total"]
FAMILIES = ("mechanism-chain", "transmission-branches", "connecting-rod-branches")
ALGORITHMS = ("cluster-aba", "kkt", "approximate-aba")


def default_seed():
    return int(os.environ.get("CLUSTER_DYN_SEED", "0"))


@dataclass
class BenchmarkSpec:
    family: str = "mechanism-chain"
    mechanism: str = "link-rotor"
    depths: list = field(default_factory=lambda: [1])       # d_a values
    branches: list = field(default_factory=lambda: [1])     # b_a values
    d_t: int = 10
    d_l: list = field(default_factory=lambda: [1])
    algorithms: list = field(default_factory=lambda: ["cluster-aba"])
    seed: int = 0
    trials: int = 1
    eta: float = 2.0

    def validate(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}")
        if self.family == "mechanism-chain":
            if not self.depths or not self.branches:
                raise ValueError("depth and branch ranges must be nonempty")
        elif not self.d_l or any(d > self.d_t or d < 1 for d in self.d_l):
            raise ValueError("need 1 <= d_l <= d_t")

    def grid(self):
        if self.family == "mechanism-chain":
            for b_a in self.branches:
                for d_a in self.depths:
                    yield {"mechanism": self.mechanism, "d_a": d_a, "b_a": b_a}
        else:
            for d_l in self.d_l:
                yield {"d_t": self.d_t, "d_l": d_l}


def build_model(spec: BenchmarkSpec, point):
    if spec.family == "mechanism-chain":
        return generate_mechanism_chain(point["mechanism"], point["d_a"], point["b_a"], spec.seed)
    kind = "transmission" if spec.family == "transmission-branches" else "connecting-rod"
    return generate_constrained_branches(kind, point["d_t"], point["d_l"], spec.eta, spec.seed)


def count_forward_dynamics(model, algorithm, q, qd, tau_tree, counting=True):
    """Evaluate one forward-dynamics call on counted inputs.

    Returns ``(counter, qdd_or_ydd)``.  With ``counting=False`` the same
    counting scalars are used but the counter stays disabled, so the result
    is bit-for-bit what the counted run produces.
    """
    counter = OpCounter(enabled=counting)
    ws = Workspace(model)
    ind = model.independent_indices()
    cq, cqd = counted_array(q, counter), counted_array(qd, counter)
    if algorithm == "cluster-aba":
        tau = counted_array(np.asarray(tau_tree)[ind], counter)
        out = cluster_aba(model, DynamicsState(q=cq, qd=cqd, tau=tau), ws=ws).qdd
    elif algorithm == "kkt":
        out = kkt_forward_dynamics(model, cq, cqd, counted_array(tau_tree, counter)).qdd
    elif algorithm == "approximate-aba":
        red = approximate_tree(model)
        tau = counted_array(np.asarray(tau_tree)[ind], counter)
        out = approximate_aba(model, DynamicsState(q=cq, qd=cqd, tau=tau), reduced=red)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return counter, out


def run_benchmark(spec: BenchmarkSpec, err=None):
    """Rows (dicts keyed by :data:`CSV_HEADER`) for every grid point and algorithm."""
    spec.validate()
    err = sys.stderr if err is None else err
    rows = []
    for point in spec.grid():
        base = {"family": spec.family, "mechanism": point.get("mechanism", ""),
                "d_a": point.get("d_a", ""), "b_a": point.get("b_a", ""),
                "d_t": point.get("d_t", ""), "d_l": point.get("d_l", "")}
        try:
            model = build_model(spec, point)
            rng = np.random.default_rng(spec.seed)
            q, qd, tau = random_state(model, rng, q_scale=0.3)
        except Exception as exc:  # recorded per row; the run continues
            model = None
            setup_error = exc
        for alg in spec.algorithms:
            row = dict(base, algorithm=alg)
            try:
                if model is None:
                    raise setup_error
                totals = OpCounter()
                for _ in range(spec.trials):
                    counter, _ = count_forward_dynamics(model, alg, q, qd, tau)
                    totals += counter
                d = totals.as_dict()
                row.update({k: d[k] // spec.trials for k in ("adds", "mults", "divs", "sqrts")})
                row["total"] = d["total"] // spec.trials
            except Exception as exc:
                print(f"error: {alg} at {point}: {exc}", file=err)
                row.update({k: "" for k in ("adds", "mults", "divs", "sqrts", "total")})
            rows.append(row)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def linear_fit_r2(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack((x, np.ones_like(x))).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    return 1.0 - float(resid @ resid) / float(ss_tot) if ss_tot > 0 else 1.0
