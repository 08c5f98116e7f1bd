"""Command-line entry point: ``modfree <subcommand> [--config FILE] ...``.

Every subcommand reads the same INI file (see :mod:`modfree.config`);
``--seed``, ``--out-dir`` and ``--workers`` override the ``[run]`` section.
Outputs go to ``OUT_DIR/<subcommand>/``.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .config import config_hash, dump_config, load_config
from .diagnostics import (DiagnosticsRecord, ensemble_record, master_inequality_check,
                          master_records)
from .hypotheses import check_hypotheses
from .kernels import kernel_from_label
from .liouville import product_state
from .particles import SimConfig, Snapshot, blowup_monitor, min_distances, run
from .pde import free_energy, make_state, run_pde
from .profiles import density_profile
from .regularizer import build_regularized
from .sweep import ExperimentPlan, run_rate_sweep
from .tables import export_kernel, write_table

log = logging.getLogger("modfree")


def _kernel(cfg, n=None):
    k = cfg["kernel"]
    base = kernel_from_label(k["label"], n or k["n"], k["dim"])
    if k["epsilon"] is not None:
        return build_regularized(base, k["epsilon"], k["doubling_C"]).kernel
    return base


def _out(cfg, name):
    path = os.path.join(cfg["run"]["out_dir"], name)
    os.makedirs(path, exist_ok=True)
    return path


def _sim_config(cfg, kernel):
    p = cfg["particles"]
    return SimConfig(N=p["N"], kernel=kernel, sigma=p["sigma"], beta=p["beta"], dt=p["dt"],
                     T=p["T"], R=p["R"], seed=cfg["run"]["seed"], d=cfg["kernel"]["dim"],
                     init=p["init"], stride=p["stride"], r_min=p["r_min"],
                     allow_capped=p["allow_capped"],
                     sigma_mode="vanishing" if p["beta"] > 0 else "fixed")


def cmd_simulate(cfg):
    out = _out(cfg, "simulate")
    h = config_hash(cfg)
    config = _sim_config(cfg, _kernel(cfg))
    snaps = run(config, workers=cfg["run"]["workers"])
    d = config.d
    rows = []
    for s in snaps:
        R, N, _ = s.positions.shape
        for r in range(R):
            for i in range(N):
                row = {"t": s.t, "step": s.step, "replica": r, "particle": i}
                for a in range(d):
                    row[f"x{a}"] = s.positions[r, i, a]
                rows.append(row)
    io.write_csv(os.path.join(out, "positions.csv"), rows, config_hash=h)
    mon = blowup_monitor(snaps) if len(snaps) > 2 else None
    io.write_manifest(os.path.join(out, "manifest.json"),
                      {"command": "simulate", "config": cfg, "seed": config.seed,
                       "positions": "positions.csv",
                       "cap_events": snaps[-1].cap_events, "blowup_monitor": mon}, h)
    return out


def _load_snapshots(path, dim):
    _, rows = io.read_csv(path)
    steps = sorted({r["step"] for r in rows})
    R = max(r["replica"] for r in rows) + 1
    N = max(r["particle"] for r in rows) + 1
    snaps = []
    for s in steps:
        pos = np.empty((R, N, dim))
        t = 0.0
        for r in rows:
            if r["step"] == s:
                pos[r["replica"], r["particle"]] = [r[f"x{a}"] for a in range(dim)]
                t = r["t"]
        snaps.append(Snapshot(t, s, pos, min_distances(pos), np.zeros(R, dtype=np.int64)))
    return snaps


def cmd_diagnose(cfg, manifest=None):
    """Diagnostics for a simulate run (its manifest or the default location)."""
    manifest = manifest or os.path.join(cfg["run"]["out_dir"], "simulate", "manifest.json")
    man = io.read_manifest(manifest)
    run_cfg = man["config"]
    out = _out(cfg, "diagnose")
    h = config_hash(cfg)
    dim = run_cfg["kernel"]["dim"]
    kernel = _kernel(run_cfg)
    snaps = _load_snapshots(os.path.join(os.path.dirname(manifest), man["positions"]), dim)
    p = run_cfg["particles"]
    sigma_N = p["sigma"] * p["N"] ** (-p["beta"])
    n = cfg["pde"]["n"]
    # mean-field reference on the PDE grid, sampled at the snapshot times
    state = make_state(density_profile(p["init"], n, dim), 0.0 if p["beta"] > 0 else p["sigma"],
                       kernel)
    dg = cfg["diagnostics"]
    recs = []
    for s in snaps:
        steps = int(round((s.t - state.t) / p["dt"]))
        if steps > 0:
            state = run_pde(state, steps * p["dt"], p["dt"], stride=steps)[-1]
        ref = state.rho.values
        recs.append(ensemble_record(s, ref, kernel, sigma_N, eta=dg["eta"], delta=dg["delta"],
                                    seed=cfg["run"]["seed"],
                                    w1_reference=ref if dg["w1"] and dim == 1 else None))
    io.write_csv(os.path.join(out, "records.csv"), [r.as_dict() for r in recs],
                 DiagnosticsRecord.columns(), h)
    io.write_manifest(os.path.join(out, "manifest.json"),
                      {"command": "diagnose", "source": os.path.abspath(manifest),
                       "estimators": {"eta": dg["eta"], "delta": dg["delta"],
                                      "profile": dg["profile"], "bootstrap_resamples": 200,
                                      "sigma_N": sigma_N, "reference_grid": n},
                       "seed": cfg["run"]["seed"]}, h)
    return out


def cmd_solve_pde(cfg):
    out = _out(cfg, "solve-pde")
    h = config_hash(cfg)
    pc = cfg["pde"]
    dim = cfg["kernel"]["dim"]
    kernel = _kernel(cfg)
    state = make_state(density_profile(pc["init"], pc["n"], dim), cfg["particles"]["sigma"],
                       kernel)
    states = run_pde(state, pc["T"], pc["dt"], pc["stride"])
    binary = cfg["run"]["binary"]
    rows = []
    for i, s in enumerate(states):
        fe = free_energy(s)
        rows.append({"t": s.t, "mass": float(s.rho.values.mean()), "entropy": fe.entropy,
                     "interaction": fe.interaction, "free_energy": fe.total,
                     "floor_events": s.floor_events})
        write_table(os.path.join(out, f"rho_{i:04d}.{'bin' if binary else 'csv'}"),
                    {"kind": "density", "t": s.t, "dim": dim, "config_hash": h},
                    s.rho.values, binary=binary)
    io.write_csv(os.path.join(out, "energy.csv"), rows, config_hash=h)
    io.write_manifest(os.path.join(out, "manifest.json"),
                      {"command": "solve-pde", "config": cfg, "snapshots": len(states)}, h)
    return out


def cmd_liouville(cfg):
    out = _out(cfg, "liouville")
    h = config_hash(cfg)
    lc = cfg["liouville"]
    if cfg["kernel"]["dim"] != 1:
        raise SystemExit("liouville: particles must live on the circle (kernel dim 1)")
    kernel = _kernel(cfg)
    sigma = cfg["particles"]["sigma"]
    rho_bar = density_profile(lc["init"], lc["m"], 1)
    state = product_state(rho_bar, lc["N"], sigma, kernel, lc["allow_singular"])
    series = master_inequality_check(state, rho_bar, lc["T"], lc["dt"], lc["stride"])
    recs = master_records(series)
    rows = [{**r.as_dict(), "lhs": series.lhs[k], "rhs": series.rhs[k],
             "slack": series.slack[k]} for k, r in enumerate(recs)]
    io.write_csv(os.path.join(out, "records.csv"), rows,
                 DiagnosticsRecord.columns() + ["lhs", "rhs", "slack"], h)
    io.write_manifest(os.path.join(out, "manifest.json"),
                      {"command": "liouville", "config": cfg, "tol": series.tol,
                       "min_slack": float(np.min(series.slack))}, h)
    return out


def cmd_regularize(cfg, kernel=None, epsilon=None, doubling_C=None, grid=None):
    out = _out(cfg, "regularize")
    k = cfg["kernel"]
    label = kernel or k["label"]
    eps = epsilon if epsilon is not None else k["epsilon"]
    if eps is None:
        raise SystemExit("regularize: set --epsilon or kernel.epsilon")
    C = doubling_C if doubling_C is not None else k["doubling_C"]
    n = grid or k["n"]
    h = config_hash(cfg)
    reg = build_regularized(kernel_from_label(label, n, k["dim"]), eps, C)
    ext = "bin" if cfg["run"]["binary"] else "csv"
    export_kernel(reg.kernel, os.path.join(out, f"kernel.{ext}"), cfg["run"]["binary"],
                  {"epsilon": eps, "deltas": reg.deltas, "config_hash": h})
    io.write_manifest(os.path.join(out, "property_report.json"),
                      {"kernel": label, "epsilon": eps, "C": C, "grid": n, "deltas": reg.deltas,
                       "M": reg.M, "M_requested": reg.M_requested, "truncated": reg.truncated,
                       "lift": reg.lift, "report": reg.property_report}, h)
    return out


def cmd_check_kernel(cfg):
    out = _out(cfg, "check-kernel")
    h = config_hash(cfg)
    kernel = _kernel(cfg)
    rep = check_hypotheses(kernel)
    io.write_manifest(os.path.join(out, "hypotheses.json"), rep.to_dict(), h)
    ext = "bin" if cfg["run"]["binary"] else "csv"
    export_kernel(kernel, os.path.join(out, f"kernel.{ext}"), cfg["run"]["binary"])
    return out


def plan_from_config(cfg):
    p, s, k = cfg["particles"], cfg["sweep"], cfg["kernel"]
    return ExperimentPlan(N_list=tuple(s["N_list"]), kernel=k["label"], kernel_n=k["n"],
                          sigma=p["sigma"], beta=p["beta"], dt=p["dt"], T=p["T"], R=s["R"],
                          seed=cfg["run"]["seed"], init=p["init"], grid=s["grid"],
                          dim=k["dim"], distance=s["distance"],
                          allow_capped=p["allow_capped"], r_min=p["r_min"],
                          eta=cfg["diagnostics"]["eta"], delta=cfg["diagnostics"]["delta"])


def write_sweep(out, fit, points, h):
    cols = ["N", "distance", "replicas", "excluded", "cap_events"] + DiagnosticsRecord.columns()
    io.write_csv(os.path.join(out, "points.csv"), [p.row() for p in points], cols, h)
    io.write_csv(os.path.join(out, "fit.csv"), [{k: v for k, v in fit.as_dict().items()
                                                  if k not in ("N", "distance")}], config_hash=h)


def cmd_rate_sweep(cfg):
    out = _out(cfg, "rate-sweep")
    h = config_hash(cfg)
    plan = plan_from_config(cfg)
    fit, points = run_rate_sweep(plan, workers=cfg["run"]["workers"])
    write_sweep(out, fit, points, h)
    io.write_manifest(os.path.join(out, "manifest.json"),
                      {"command": "rate-sweep", "config": cfg, "fit": fit.as_dict()}, h)
    if fit.warning:
        log.warning("rate fit flagged: R^2 = %.3f", fit.r2)
    return out


def cmd_emit_plot_data(cfg, inputs):
    out = _out(cfg, "plot-data")
    for path in inputs:
        h, rows = io.read_csv(path)
        ids = tuple(c for c in ("N", "t", "step", "replica", "particle") if rows and c in rows[0])
        name = os.path.splitext(os.path.basename(path))[0]
        parent = os.path.basename(os.path.dirname(os.path.abspath(path)))
        io.write_csv(os.path.join(out, f"{parent}_{name}_long.csv"),
                     io.long_format(rows, ids), list(ids) + ["variable", "value"], h)
    return out


def cmd_run_all(cfg):
    outs = [cmd_check_kernel(cfg), cmd_simulate(cfg), cmd_diagnose(cfg), cmd_solve_pde(cfg)]
    kernel = _kernel(cfg)
    if kernel.dim == 1 and (not kernel.meta.singular or cfg["liouville"]["allow_singular"]):
        outs.append(cmd_liouville(cfg))
    else:
        log.warning("run-all: skipping liouville (needs d = 1 and a smooth kernel)")
    if cfg["kernel"]["epsilon"] is not None:
        outs.append(cmd_regularize(cfg))
    outs.append(cmd_rate_sweep(cfg))
    return outs


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out-dir", help="override run.out_dir")
    common.add_argument("--workers", type=int, help="override run.workers")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="modfree", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("simulate", "run a particle ensemble"),
            ("solve-pde", "solve the mean-field equation"),
            ("liouville", "solve the joint-law equation and check the free-energy balance"),
            ("check-kernel", "evaluate kernel assumptions on the grid"),
            ("diagnose", "diagnostics for a simulate run"),
            ("rate-sweep", "convergence rate in N"),
            ("run-all", "run every stage with one config"),
            ("print-config", "print the resolved configuration")]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name == "diagnose":
            sp.add_argument("--manifest", help="simulate manifest.json")
    sp = sub.add_parser("regularize", parents=[common], help="build a regularized kernel")
    sp.add_argument("--kernel")
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--doubling-C", type=float)
    sp.add_argument("--grid", type=int)
    sp = sub.add_parser("emit-plot-data", parents=[common], help="CSV to long format")
    sp.add_argument("inputs", nargs="+")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"modfree: {exc}", file=sys.stderr)
        return 2
    for key, val in (("seed", args.seed), ("out_dir", args.out_dir), ("workers", args.workers)):
        if val is not None:
            cfg["run"][key] = val
    cmd = args.command
    try:
        if cmd == "print-config":
            print(dump_config(cfg), end="")
            return 0
        if cmd == "regularize":
            out = cmd_regularize(cfg, args.kernel, args.epsilon, args.doubling_C, args.grid)
        elif cmd == "diagnose":
            out = cmd_diagnose(cfg, args.manifest)
        elif cmd == "emit-plot-data":
            out = cmd_emit_plot_data(cfg, args.inputs)
        else:
            out = {"simulate": cmd_simulate, "solve-pde": cmd_solve_pde,
                   "liouville": cmd_liouville, "check-kernel": cmd_check_kernel,
                   "rate-sweep": cmd_rate_sweep, "run-all": cmd_run_all}[cmd](cfg)
    except (OSError, ValueError) as exc:
        print(f"modfree {cmd}: {exc}", file=sys.stderr)
        return 2
    print(out if isinstance(out, str) else "\n".join(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
