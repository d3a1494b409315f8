"""Command-line entry point.

Subcommands
-----------
design    : plant config JSON -> validated design document
certify   : design document -> consistency certificate (JSON + CSV)
simulate  : design document -> trajectory CSV + metrics JSON
compare   : sweep schemes and steps -> comparison table CSV

Exit codes: 0 success, 1 usage or parse error, 2 domain failure
(infeasibility, validation failure, divergence).  ``HOMCTL_THREADS`` caps
the number of worker threads used by ``compare`` sweeps; outputs are
merged deterministically (sorted by scheme, then step) either way.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import jsonio
from .discretization import certify
from .errors import HomctlError
from .mimo import CascadeDesign
from .simulator import (PerturbationSpec, SimConfig, chattering_index,
                        settling_time, simulate, write_trajectory)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


def _parse_vector(text):
    try:
        return np.array([float(v) for v in text.split(",") if v != ""])
    except ValueError as exc:
        raise HomctlError(f"could not parse vector {text!r}: {exc}") from exc


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _out_dir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_design(args):
    doc = jsonio.load_json(args.config)
    if args.mu is not None:
        doc["mu"] = args.mu
    if args.rho is not None:
        doc["rho"] = args.rho
    design = jsonio.build_from_config(doc)
    if isinstance(design, CascadeDesign):
        payload = jsonio.cascade_to_jsonable(design)
    else:
        payload = jsonio.design_to_jsonable(design)
    out = os.path.join(_out_dir(args), "design.json")
    _write_json(out, payload)
    print(out)
    return EXIT_OK


def cmd_certify(args):
    design = jsonio.load_design(args.design)
    if isinstance(design, CascadeDesign):
        raise HomctlError("certify runs per block: pass a single-input design "
                          "document (cascade blocks are certified one by one)")
    report = certify(design, grid_size=args.grid, k_star=args.kstar,
                     margin=args.margin, r_star=args.rstar)
    out = _out_dir(args)
    json_path = os.path.join(out, "certificate.json")
    csv_path = os.path.join(out, "certificate.csv")
    _write_json(json_path, jsonio.certificate_jsonable(report))
    _write_lines(csv_path, jsonio.certificate_csv_lines(report))
    print(f"{json_path} verdict={'pass' if report.verdict else 'fail'}")
    return EXIT_OK


def _final_norm(traj):
    if not traj.states.size:
        return None
    with np.errstate(over="ignore"):
        return float(np.linalg.norm(traj.states[-1]))


def _run_metrics(design, traj, threshold):
    metrics = {
        "settling_time": settling_time(traj, threshold),
        "chattering_index": chattering_index(traj),
        "final_norm": _final_norm(traj),
        "peak_control": float(np.max(np.abs(traj.controls))) if traj.controls.size else None,
        "diverged": traj.diverged,
        "samples": int(traj.metadata["samples"]),
    }
    if isinstance(design, CascadeDesign) and traj.states.size:
        per_block = []
        for sl in design.block_slices():
            sub = traj.states[:, sl]
            norms = np.linalg.norm(sub, axis=1)
            above = np.nonzero(norms > threshold)[0]
            if traj.diverged:
                per_block.append(None)
            elif above.size == 0:
                per_block.append(0.0)
            elif above[-1] == len(norms) - 1:
                per_block.append(None)
            else:
                per_block.append(float(traj.times[above[-1] + 1]))
        metrics["block_settling_times"] = per_block
    if traj.diverged:
        metrics["note"] = "run aborted by the divergence guard; outputs are a prefix"
    return metrics


def cmd_simulate(args):
    design = jsonio.load_design(args.design)
    cfg = SimConfig(
        scheme_kind=args.scheme, h=jsonio.parse_number(args.h, "h"),
        t_final=jsonio.parse_number(args.T, "T"), x0=_parse_vector(args.x0),
        perturbation=PerturbationSpec(qp_magnitude=args.qp,
                                      qm_magnitude=args.qm, seed=args.seed),
        substeps=args.substeps)
    traj = simulate(design, cfg)
    out = _out_dir(args)
    csv_path = os.path.join(out, "trajectory.csv")
    meta_path = os.path.join(out, "trajectory_meta.json")
    write_trajectory(traj, csv_path, meta_path)
    metrics = _run_metrics(design, traj, args.threshold)
    _write_json(os.path.join(out, "metrics.json"), metrics)
    print(f"{csv_path} samples={metrics['samples']} "
          f"settling={metrics['settling_time']}")
    return EXIT_DOMAIN if traj.diverged else EXIT_OK


def cmd_compare(args):
    design = jsonio.load_design(args.design)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    steps = [jsonio.parse_number(v, "h") for v in args.h.split(",") if v.strip()]
    x0 = _parse_vector(args.x0)

    def run(scheme, h):
        cfg = SimConfig(scheme_kind=scheme, h=h,
                        t_final=jsonio.parse_number(args.T, "T"), x0=x0,
                        perturbation=PerturbationSpec(qp_magnitude=args.qp,
                                                      qm_magnitude=args.qm,
                                                      seed=args.seed),
                        substeps=args.substeps)
        traj = simulate(design, cfg)
        st = settling_time(traj, args.threshold)
        final = _final_norm(traj)
        return {
            "scheme": scheme,
            "h": h,
            "settling_time": st,
            "chattering_index": chattering_index(traj),
            "final_norm": float("nan") if final is None else final,
            "peak_control": float(np.max(np.abs(traj.controls))) if traj.controls.size else float("nan"),
            "diverged": traj.diverged,
        }

    jobs = [(scheme, h) for scheme in schemes for h in steps]
    workers = max(1, int(os.environ.get("HOMCTL_THREADS", "1") or "1"))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda sh: run(*sh), jobs))
    else:
        rows = [run(*sh) for sh in jobs]
    rows.sort(key=lambda r: (r["scheme"], r["h"]))

    lines = ["scheme,h,settling_time,chattering_index,final_norm,peak_control,diverged"]
    for r in rows:
        st = "" if r["settling_time"] is None else repr(float(r["settling_time"]))
        lines.append(
            f"{r['scheme']},{repr(float(r['h']))},{st},"
            f"{repr(float(r['chattering_index']))},{repr(r['final_norm'])},"
            f"{repr(r['peak_control'])},{int(r['diverged'])}")
    out = os.path.join(_out_dir(args), "comparison.csv")
    _write_lines(out, lines)
    print(out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="homctl",
        description="Finite/fixed-time homogeneous controller synthesis and "
                    "chattering-free sampled-data simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="synthesize a controller from a plant config")
    p.add_argument("config", help="plant configuration JSON")
    p.add_argument("--mu", help="override the homogeneity degree")
    p.add_argument("--rho", help="override the decay rate")
    p.add_argument("--out", help="output directory (default: .)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("certify", help="run the consistency certificate")
    p.add_argument("design", help="design document JSON")
    p.add_argument("--grid", type=int, default=1000, help="grid size (default 1000)")
    p.add_argument("--kstar", type=int, default=1, help="contraction horizon k*")
    p.add_argument("--margin", type=float, default=1e-8,
                   help="certificate margin (default 1e-8)")
    p.add_argument("--rstar", type=float, default=None,
                   help="override the grid upper end r*")
    p.add_argument("--out", help="output directory (default: .)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="closed-loop sampled-data run")
    p.add_argument("design", help="design document JSON")
    p.add_argument("--scheme", default="consistent",
                   choices=["consistent", "full_sequence", "explicit", "open_loop"])
    p.add_argument("--h", default="0.05", help="sampling step")
    p.add_argument("--T", default="10.0", help="horizon")
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--qp", type=float, default=0.0, help="disturbance magnitude")
    p.add_argument("--qm", type=float, default=0.0, help="measurement noise magnitude")
    p.add_argument("--substeps", type=int, default=16)
    p.add_argument("--threshold", type=float, default=1e-9,
                   help="settling threshold (default 1e-9)")
    p.add_argument("--out", help="output directory (default: .)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="scheme/step comparison table")
    p.add_argument("design", help="design document JSON")
    p.add_argument("--schemes", default="consistent,explicit",
                   help="comma separated scheme list")
    p.add_argument("--h", default="0.05", help="comma separated step list")
    p.add_argument("--T", default="10.0", help="horizon")
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--qp", type=float, default=0.0)
    p.add_argument("--qm", type=float, default=0.0)
    p.add_argument("--substeps", type=int, default=16)
    p.add_argument("--threshold", type=float, default=1e-9)
    p.add_argument("--out", help="output directory (default: .)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: config parse failure at line {exc.lineno} column "
              f"{exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HomctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
