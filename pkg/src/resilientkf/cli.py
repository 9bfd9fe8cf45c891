"""Command-line front end.

Subcommands:

- ``bounds``     tolerance bounds (c_max or theta_max) for a model file
- ``worstcase``  error-variance-vs-time series of several filters under the
                 worst-case model, per budget
- ``filter``     run a configured filter over a measurement CSV
- ``bench``      the mass-spring-damper Monte-Carlo benchmark
- ``lf``         build and/or simulate the hostile observation-channel model

Every artifact is written atomically (temp file + rename) and accompanied
by a ``<name>.manifest.json`` recording the command, configuration hash,
seed, and outputs, so reruns are verifiable.  Exit codes: 0 success,
2 validation error, 3 numerical failure, 4 I/O error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .model import (
    GaussianBelief,
    ModelError,
    belief_from_dict,
    load_model,
)
from .numerics import NumericsError
from .filters import FilterConfig, FilterError, run_filter, covariance_schedule
from .least_favorable import (
    SynthesisError,
    assemble_lf,
    backward_pass,
    error_cov_recursion,
    forward_gains,
    simulate_lf,
    worst_case_error_cov,
)
from .stability import StabilityError, c_max, theta_max, ThetaSearchConfig
from .bench import BenchError, McConfig, MseReport, Scenario, run_monte_carlo

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _atomic_write(path, text):
    """Write text to path via a temp file in the same directory + rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_csv(path, header, rows):
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _write_manifest(out_path, command, inputs, outputs, seed=None):
    digest = hashlib.sha256(
        json.dumps(inputs, sort_keys=True, default=str).encode()).hexdigest()[:16]
    manifest = {
        "command": command,
        "config_hash": digest,
        "tool_version": __version__,
        "seed": seed,
        "outputs": outputs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(out_path + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


def _load_init(args, model):
    if getattr(args, "init", None):
        with open(args.init) as f:
            return belief_from_dict(json.load(f))
    return GaussianBelief(mean=np.zeros(model.n), cov=np.eye(model.n))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_bounds(args):
    model = load_model(args.model)
    if args.mode == "cmax":
        report = c_max(model, k=args.k, q=args.q)
    else:
        cfg = ThetaSearchConfig()
        report = theta_max(model, k=args.k, config=cfg)
    _atomic_write(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    _write_manifest(args.out, "bounds",
                    {"model": args.model, "mode": args.mode,
                     "k": args.k, "q": args.q},
                    [args.out])
    return EXIT_OK


def cmd_worstcase(args):
    model = load_model(args.model)
    budgets = []
    for c in args.c or []:
        budgets.append(("c", float(c)))
    for th in args.theta or []:
        budgets.append(("theta", float(th)))
    if not budgets:
        raise ModelError("worstcase requires at least one --c or --theta")
    filters = [f.strip() for f in args.filters.split(",") if f.strip()]
    N = args.horizon
    P0 = None
    rows = []
    header = ["budget_kind", "budget", "t", "theta"] + [f"var_{f}" for f in filters]
    for kind, val in budgets:
        fwd = forward_gains(model, {kind: val}, N, P0)
        bwd = backward_pass(fwd, model) if args.channel else None
        series = []
        for name in filters:
            if name in ("urkf", "ursf"):
                gains = fwd.gains
            else:
                if name == "kf":
                    fc = FilterConfig(kind="kf")
                elif kind == "c":
                    # budgeted comparators under a budgeted adversary
                    fc = FilterConfig(kind="urkf" if name == "urkf" else "prkf",
                                      c=val)
                else:
                    # fixed-theta comparators under a fixed-theta adversary
                    fc = FilterConfig(kind="ursf" if name in ("urkf", "ursf")
                                      else "prsf", theta=val)
                gains = covariance_schedule(model, fc, fwd.cov_pred[0], N)[0]
            if args.channel:
                Pis = error_cov_recursion(model, gains, fwd, bwd)
            else:
                Pis = worst_case_error_cov(model, gains, fwd)
            series.append([float(np.trace(Pi[:model.n, :model.n]))
                           for Pi in Pis])
        for t in range(N + 1):
            rows.append([kind, val, t, fwd.thetas[t]]
                        + [series[i][t] for i in range(len(filters))])
    _write_csv(args.out, header, rows)
    _write_manifest(args.out, "worstcase",
                    {"model": args.model, "budgets": budgets,
                     "horizon": N, "filters": filters,
                     "channel": bool(args.channel)},
                    [args.out])
    return EXIT_OK


def cmd_filter(args):
    model = load_model(args.model)
    with open(args.config) as f:
        fc = FilterConfig.from_dict(json.load(f))
    init = _load_init(args, model)
    ys = []
    with open(args.data) as f:
        for i, row in enumerate(csv.reader(f)):
            if not row or (i == 0 and any(not _is_number(v) for v in row)):
                continue  # skip blank lines and a header row
            if len(row) != model.m:
                raise ModelError(
                    f"data line {i + 1}: expected {model.m} columns, got {len(row)}")
            try:
                ys.append([float(v) for v in row])
            except ValueError:
                raise ModelError(f"data line {i + 1}: non-numeric value")
    steps = run_filter(model, fc, init, np.asarray(ys))
    header = (["t", "theta"]
              + [f"gain_{i}_{j}" for i in range(model.n) for j in range(model.m)]
              + [f"mean_filt_{i}" for i in range(model.n)]
              + [f"mean_pred_{i}" for i in range(model.n)]
              + [f"cov_filt_{i}_{j}" for i in range(model.n) for j in range(model.n)])
    rows = []
    for t, s in enumerate(steps):
        rows.append([t, s.theta] + list(s.gain.ravel()) + list(s.mean_filt)
                    + list(s.mean_pred) + list(s.cov_filt.ravel()))
    _write_csv(args.out, header, rows)
    _write_manifest(args.out, "filter",
                    {"model": args.model, "config": args.config,
                     "data": args.data},
                    [args.out])
    return EXIT_OK


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_bench(args):
    filters = {
        "kf": FilterConfig(kind="kf"),
        "urkf": FilterConfig(kind="urkf", c=args.c),
    }
    cfg = McConfig(trials=args.trials, horizon=args.horizon,
                   seed=args.seed, filters=filters)
    scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    outputs = []
    os.makedirs(args.out, exist_ok=True)
    for kind in scenarios:
        rep = run_monte_carlo(cfg, Scenario(kind=kind))
        base = os.path.join(args.out, f"bench_{kind}")
        names = sorted(rep.mse_t)
        rows = [[t] + [rep.mse_t[nm][t] for nm in names]
                for t in range(rep.horizon)]
        _write_csv(base + ".csv", ["t"] + names, rows)
        _atomic_write(base + ".json", json.dumps(rep.to_dict(), indent=2) + "\n")
        outputs += [base + ".csv", base + ".json"]
    manifest_base = os.path.join(args.out, "bench")
    _write_manifest(manifest_base, "bench",
                    {"trials": args.trials, "horizon": args.horizon,
                     "c": args.c, "scenarios": scenarios},
                    outputs, seed=args.seed)
    return EXIT_OK


def cmd_lf(args):
    model = load_model(args.model)
    budget = {"c": args.c} if args.c is not None else {"theta": args.theta}
    if args.c is not None and args.theta is not None:
        raise ModelError("lf takes either --c or --theta, not both")
    if args.c is None and args.theta is None:
        raise ModelError("lf requires --c or --theta")
    fwd = forward_gains(model, budget, args.horizon)
    bwd = backward_pass(fwd, model)
    lf = assemble_lf(fwd, bwd, model)
    outputs = []
    if args.action in ("build", "both"):
        payload = {
            "n": lf.n, "m": lf.m, "N": lf.N,
            "Xi": lf.Xi.tolist(),
            "Abar": [M.tolist() for M in lf.Abar],
            "Bbar": [M.tolist() for M in lf.Bbar],
            "Cbar": [M.tolist() for M in lf.Cbar],
            "Dbar": [M.tolist() for M in lf.Dbar],
        }
        path = args.out + ".json" if args.action == "both" else args.out
        _atomic_write(path, json.dumps(payload) + "\n")
        outputs.append(path)
    if args.action in ("simulate", "both"):
        init = _load_init(args, model)
        etas, X, Y = simulate_lf(lf, init, args.seed, n_traj=args.trajectories)
        path = args.out + ".csv" if args.action == "both" else args.out
        header = (["traj", "t"]
                  + [f"x_{i}" for i in range(model.n)]
                  + [f"y_{i}" for i in range(model.m)]
                  + [f"eta_{i}" for i in range(3 * model.n)])
        rows = []
        for r in range(X.shape[0]):
            for t in range(X.shape[1]):
                rows.append([r, t] + list(X[r, t]) + list(Y[r, t])
                            + list(etas[r, t]))
        _write_csv(path, header, rows)
        outputs.append(path)
    _write_manifest(args.out, "lf",
                    {"model": args.model, "budget": budget,
                     "horizon": args.horizon, "action": args.action,
                     "trajectories": args.trajectories},
                    outputs, seed=args.seed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser / entry point


def build_parser():
    p = argparse.ArgumentParser(
        prog="resilientkf",
        description="Robust linear-Gaussian state estimation toolkit")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads for internal linear algebra")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="compute tolerance bounds")
    b.add_argument("--model", required=True)
    b.add_argument("--mode", choices=("cmax", "thetamax"), required=True)
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--q", type=int, default=20)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bounds)

    w = sub.add_parser("worstcase", help="worst-case variance series")
    w.add_argument("--model", required=True)
    w.add_argument("--c", action="append", type=float,
                   help="budget tolerance (repeatable)")
    w.add_argument("--theta", action="append", type=float,
                   help="fixed risk parameter (repeatable)")
    w.add_argument("--horizon", type=int, default=400)
    w.add_argument("--filters", default="kf,prkf,urkf")
    w.add_argument("--channel", action="store_true",
                   help="evaluate under the observation-channel adversary "
                        "instead of the saddle-achieving one")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_worstcase)

    f = sub.add_parser("filter", help="run a filter over a data CSV")
    f.add_argument("--model", required=True)
    f.add_argument("--config", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--init", help="JSON initial belief {mean, cov}")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_filter)

    be = sub.add_parser("bench", help="mass-spring-damper benchmark")
    be.add_argument("--trials", type=int, default=200)
    be.add_argument("--horizon", type=int, default=200)
    be.add_argument("--c", type=float, default=0.5)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--scenarios",
                    default="drift,uniform,deadzone,outlier,nominal")
    be.add_argument("--out", required=True, help="output directory")
    be.set_defaults(func=cmd_bench)

    lf = sub.add_parser("lf", help="build/simulate the hostile channel model")
    lf.add_argument("action", choices=("build", "simulate", "both"))
    lf.add_argument("--model", required=True)
    lf.add_argument("--c", type=float)
    lf.add_argument("--theta", type=float)
    lf.add_argument("--horizon", type=int, default=200)
    lf.add_argument("--trajectories", type=int, default=1)
    lf.add_argument("--seed", type=int, default=0)
    lf.add_argument("--init", help="JSON initial belief {mean, cov}")
    lf.add_argument("--out", required=True)
    lf.set_defaults(func=cmd_lf)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except (ModelError, BenchError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericsError, FilterError, SynthesisError, StabilityError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
