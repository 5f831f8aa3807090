"""Command-line entry point: ``clusterdyn {fd,id,check,bench,experiment}``.

Exit status: 0 on success, 1 on validation errors (bad model, bad
coordinates), 2 on numerical failures (singular cluster, oracle divergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .bench import BenchmarkSpec, default_seed, rows_to_csv, run_benchmark
from .cluster import cluster_joint_model, duality_residuals
from .dynamics import (DynamicsState, SingularClusterError, Workspace, cluster_aba, cluster_rnea,
                       inverse_dynamics_error_experiment)
from .generators import belt_leg, random_state
from .joints import ConstraintError
from .model import ModelError, load_model, validate_model
from .oracle import KKTConvergenceError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2


class UsageError(ValueError):
    pass


def _vec(text):
    if text is None:
        return None
    text = text.strip()
    if not text:
        return np.zeros(0)
    return np.array([float(t) for t in text.split(",")])


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _fmt(v):
    return " ".join(f"{x:.12g}" for x in np.asarray(v, dtype=float))


def _state_from_args(args, model, ws):
    st = {}
    if getattr(args, "state", None):
        with open(args.state, encoding="utf-8") as fh:
            st = json.load(fh)
    pos = _vec(args.q) if args.q is not None else st.get("q", st.get("y"))
    vel = _vec(args.qd) if args.qd is not None else st.get("qd", st.get("yd"))
    coords = args.coords
    if coords is None:
        coords = "independent" if ("y" in st and args.q is None) else "spanning"
    if pos is None:
        raise UsageError("positions are required (--q or --state)")
    pos = np.asarray(pos, dtype=float)
    vel = np.zeros_like(pos) if vel is None else np.asarray(vel, dtype=float)
    expect = model.n if coords == "spanning" else ws.n_y
    if len(pos) != expect or len(vel) != expect:
        raise UsageError(f"{coords} coordinates need {expect} entries, got {len(pos)} and {len(vel)}")
    if coords == "spanning":
        return DynamicsState(q=pos, qd=vel)
    return DynamicsState(y=pos, yd=vel)


def cmd_fd(args):
    model = load_model(args.model)
    ws = Workspace(model)
    state = _state_from_args(args, model, ws)
    tau = _vec(args.tau) if args.tau is not None else np.zeros(ws.n_y)
    if len(tau) == ws.n_y and (len(tau) != model.n or args.coords != "spanning"):
        state.tau = tau
    elif len(tau) == model.n:
        state.tau_tree = tau
    else:
        raise UsageError(f"tau needs {ws.n_y} (independent) or {model.n} (spanning) entries")
    res = cluster_aba(model, state, _gravity(args), ws)
    print(f"ydd: {_fmt(res.ydd)}")
    print(f"qdd: {_fmt(res.qdd)}")
    return EXIT_OK


def cmd_id(args):
    model = load_model(args.model)
    ws = Workspace(model)
    state = _state_from_args(args, model, ws)
    acc = _vec(args.qdd)
    if acc is None:
        raise UsageError("--qdd is required")
    if len(acc) == ws.n_y and (len(acc) != model.n or args.coords != "spanning"):
        state.ydd = acc
    elif len(acc) == model.n:
        state.qdd = acc
    else:
        raise UsageError(f"accelerations need {ws.n_y} or {model.n} entries")
    tau = cluster_rnea(model, state, _gravity(args), ws)
    print(f"tau: {_fmt(tau)}")
    return EXIT_OK


def cmd_check(args):
    model = load_model(args.model)
    diags = validate_model(model)
    for d in diags:
        print(f"diagnostic [{d.code}]: {d.message}")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        q, qd, _ = random_state(model, rng)
        for c in model.clusters:
            res = duality_residuals(cluster_joint_model(model, c, q, qd))
            worst = max(worst, max(res.values()))
    ok = worst <= args.tol
    print(f"diagnostics: {'none' if not diags else len(diags)}")
    print(f"duality: {'PASS' if ok else 'FAIL'} (max residual {worst:.3e})")
    return EXIT_OK if ok and not diags else EXIT_VALIDATION


def cmd_bench(args):
    spec = BenchmarkSpec(
        family=args.family, mechanism=args.mechanism,
        depths=_ints(args.depths), branches=_ints(args.branches),
        d_t=args.dt, d_l=_ints(args.dl), algorithms=args.algorithms.split(","),
        seed=args.seed if args.seed is not None else default_seed(), trials=args.trials,
        eta=args.eta)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = rows_to_csv(run_benchmark(spec))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args):
    model = load_model(args.model) if args.model else belt_leg()
    out = inverse_dynamics_error_experiment(model, args.A, args.omega, args.dt, args.duration,
                                            _gravity(args))
    m = out["tau_exact"].shape[1]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"{kind}_{j}" for kind in ("exact", "unconstrained", "approximate")
                                for j in range(m)])
            for k, t in enumerate(out["t"]):
                w.writerow([f"{t:.6g}"] + [f"{x:.12g}" for kind in
                                           ("tau_exact", "tau_unconstrained", "tau_approximate")
                                           for x in out[kind][k]])
    for kind in ("unconstrained", "approximate"):
        print(f"rms {kind}-vs-exact: {out['rms'][kind]:.6g}")
    return EXIT_OK


def _gravity(args):
    g = _vec(getattr(args, "gravity", None))
    return (0.0, 0.0, -9.81) if g is None else tuple(g)


def build_parser():
    p = argparse.ArgumentParser(prog="clusterdyn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def state_args(sp):
        sp.add_argument("--model", required=True)
        sp.add_argument("--q", help="comma-separated positions")
        sp.add_argument("--qd", help="comma-separated velocities")
        sp.add_argument("--state", help="JSON state file with q/qd or y/yd")
        sp.add_argument("--coords", choices=["spanning", "independent"], default=None)
        sp.add_argument("--gravity", default=None, help="gx,gy,gz (default 0,0,-9.81)")

    fd = sub.add_parser("fd", help="forward dynamics")
    state_args(fd)
    fd.add_argument("--tau", help="independent or spanning torques (inferred from length)")
    fd.set_defaults(func=cmd_fd)

    idp = sub.add_parser("id", help="inverse dynamics")
    state_args(idp)
    idp.add_argument("--qdd", help="independent or spanning accelerations")
    idp.set_defaults(func=cmd_id)

    ck = sub.add_parser("check", help="model diagnostics and duality identities")
    ck.add_argument("--model", required=True)
    ck.add_argument("--samples", type=int, default=5)
    ck.add_argument("--tol", type=float, default=1e-10)
    ck.add_argument("--seed", type=int, default=None)
    ck.set_defaults(func=cmd_check)

    bn = sub.add_parser("bench", help="operation-count benchmark to CSV")
    bn.add_argument("--family", default="mechanism-chain",
                    choices=["mechanism-chain", "transmission-branches", "connecting-rod-branches"])
    bn.add_argument("--mechanism", default="link-rotor", choices=["link-rotor", "belt", "four-bar"])
    bn.add_argument("--depths", default="1")
    bn.add_argument("--branches", default="1")
    bn.add_argument("--dt", type=int, default=10)
    bn.add_argument("--dl", default="1")
    bn.add_argument("--eta", type=float, default=2.0)
    bn.add_argument("--algorithms", default="cluster-aba")
    bn.add_argument("--trials", type=int, default=1)
    bn.add_argument("--seed", type=int, default=None)
    bn.add_argument("--out")
    bn.set_defaults(func=cmd_bench)

    ex = sub.add_parser("experiment", help="studies")
    exs = ex.add_subparsers(dest="study", required=True)
    ide = exs.add_parser("id-error", help="inverse-dynamics torque gap along sinusoids")
    ide.add_argument("--model", default=None, help="model file (default: synthetic belt leg)")
    ide.add_argument("--A", type=float, default=0.5)
    ide.add_argument("--omega", type=float, default=1.5)
    ide.add_argument("--dt", type=float, default=0.01)
    ide.add_argument("--duration", type=float, default=None)
    ide.add_argument("--gravity", default=None)
    ide.add_argument("--out")
    ide.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "check":
        args.seed = default_seed()
    try:
        return args.func(args)
    except (UsageError, ModelError, ConstraintError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SingularClusterError, KKTConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
