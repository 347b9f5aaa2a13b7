"""Command-line entry point.

Commands: ``run`` a configured simulation, ``converge`` over an h list,
``energy`` report for a snapshot, ``extract`` the vorticity set of a
snapshot, ``check`` an invariant suite, ``init`` a commented template
config.  Exit codes: 0 success, 1 validation error, 2 runtime or ledger
failure.  ``CODIM2_THREADS`` caps worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .checks import run_suite
from .energy import dirichlet_mollified, e_h, e_h_fourier
from .geometry import extract_vorticity, save_curve
from .harness import (LedgerViolation, SimulationConfig, convergence_study,
                      load_field, run)

TEMPLATE = {
    "_doc": {
        "variant": "one of periodic | neumann | dirichlet | pinning | hmhf",
        "grid": "resolution per axis (even, >= 8) and period per axis",
        "h": "diffusion time per step",
        "steps": "number of steps",
        "sigma": "localization scale; must exceed twice the grid spacing",
        "initial": "circle(r0, center, plane_axis) | straight_pair | dipole(p, q)"
                   " | plane_wave | constant | random_smooth | file(path)",
        "potential": "pinning weight; cosine family 1 + amplitude*cos(2 pi x_axis)",
        "mask": "domain indicator for the bounded variants (slab or ball)",
        "ubar": "exterior data for the dirichlet variant",
        "diagnostics": "ledger per step, gronwall monitor, extraction cadence",
        "seed": "single 64-bit seed for all randomness",
    },
    "variant": "periodic",
    "grid": {"resolution": [64, 64, 64], "period": [1.0, 1.0, 1.0]},
    "h": 4e-4,
    "steps": 25,
    "sigma": 0.08,
    "initial": {"kind": "circle", "r0": 0.25, "center": [0.5, 0.5, 0.5],
                "plane_axis": 2},
    "potential": None,
    "mask": None,
    "ubar": None,
    "diagnostics": {"ledger": True, "gronwall": False, "el_residuals": False,
                    "extraction_cadence": 5},
    "output_dir": "out",
    "seed": 1234,
}


def _set_by_path(tree: dict, dotted: str, raw: str):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ValueError(f"override path {dotted!r} not in the config schema")
        node = node[k]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ValueError(f"override path {dotted!r} not in the config schema")
    try:
        node[leaf] = json.loads(raw)
    except json.JSONDecodeError:
        node[leaf] = raw


def _load_config(path: str, overrides: list[str]) -> SimulationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    data = {k: v for k, v in data.items() if not k.startswith("_")}
    for ov in overrides:
        if "=" not in ov:
            raise ValueError(f"override {ov!r} must look like key=value")
        key, raw = ov.split("=", 1)
        _set_by_path(data, key, raw)
    return SimulationConfig.from_dict(data)


def _summary_block(record) -> str:
    rows = record.rows
    bad = [r["step"] for r in rows[1:] if not r["ledger_ok"]]
    lines = [
        "summary:",
        f"  steps                 {rows[-1]['step']}",
        f"  initial energy        {rows[0]['e_h']:.6e}",
        f"  final energy          {rows[-1]['e_h']:.6e}",
        f"  dissipation (cum)     {rows[-1]['dissipation_cum']:.6e}",
        f"  ledger_ok             {'PASS' if not bad else 'FAIL at steps ' + str(bad)}",
    ]
    if rows[-1]["radius_est"] is not None:
        lines.append(f"  radius_est (final)    {rows[-1]['radius_est']:.6f}")
    if "gronwall_max" in record.extra:
        lines.append(f"  gronwall running max  {record.extra['gronwall_max']:.6e}")
    return "\n".join(lines)


def _cmd_run(args) -> int:
    config = _load_config(args.config, args.set or [])
    if args.out:
        config.output_dir = args.out
    record = run(config)
    print(_summary_block(record))
    if not record.all_ledger_ok:
        return 2
    return 0


def _cmd_converge(args) -> int:
    config = _load_config(args.config, args.set or [])
    if args.h:
        h_list = [float(tok) for tok in args.h.split(",")]
    else:
        h_list = [config.h, config.h / 2, config.h / 4]
    table = convergence_study(config, h_list)
    outdir = args.out or config.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "convergence.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("h,steps,radius_terminal,radius_reference,r2_error,"
                 "kappa_h_ratio,gronwall_max\n")
        for r in table["rows"]:
            fh.write(",".join("" if r[k] is None else repr(r[k]) for k in
                              ("h", "steps", "radius_terminal",
                               "radius_reference", "r2_error",
                               "kappa_h_ratio", "gronwall_max")) + "\n")
    print(f"wrote {path}")
    print(f"error-vs-h trend slope: {table['error_trend_slope']:.3f}")
    for r in table["rows"]:
        print(f"  h={r['h']:.3e} r2_error={r['r2_error']:.5e} "
              f"kappa_h_ratio={r['kappa_h_ratio']}")
    return 0


def _cmd_energy(args) -> int:
    u = load_field(args.field)
    h = args.h_value
    parts = [
        f"e_h            {e_h(u, h):.12e}",
        f"e_h_fourier    {e_h_fourier(u, h):.12e}",
        f"dirichlet      {dirichlet_mollified(u, h):.12e}",
    ]
    sharp = dirichlet_mollified(u, h) <= e_h(u, h) + 1e-11
    parts.append(f"sharp bound    {'PASS' if sharp else 'FAIL'}")
    print("\n".join(parts))
    return 0 if sharp else 2


def _cmd_extract(args) -> int:
    u = load_field(args.field)
    res = extract_vorticity(u)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    if res.curves:
        for i, c in enumerate(res.curves):
            path = os.path.join(outdir, f"curve_{i}.csv")
            save_curve(c, path)
            print(f"curve {i}: {len(c.vertices)} vertices -> {path}")
    else:
        path = os.path.join(outdir, "marks.csv")
        np.savetxt(path, res.points, delimiter=",",
                   header=",".join(f"axis{i}" for i in range(res.points.shape[1]
                                                             if len(res.points) else 0)),
                   comments="")
        print(f"{len(res.points)} raw marks -> {path} ({res.message})")
    return 0 if res.complete else 2


def _cmd_check(args) -> int:
    ok, results = run_suite(args.suite)
    width = max((len(name) for name, _, _ in results), default=10)
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {name:<{width}}  {detail}")
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'} "
          f"({sum(p for _, p, _ in results)}/{len(results)})")
    return 0 if ok else 2


def _cmd_init(args) -> int:
    path = args.out or "config.json"
    if os.path.exists(path) and not args.force:
        print(f"refusing to overwrite existing {path} (use --force)",
              file=sys.stderr)
        return 1
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(TEMPLATE, fh, indent=2)
        fh.write("\n")
    print(f"wrote template config to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codim2",
        description="Diffusion-generated motion of filaments and vortices "
                    "on the torus")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override (repeatable)")
    p_run.add_argument("--out", help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("converge", help="convergence study over an h list")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_conv.add_argument("--h", help="comma-separated decreasing h values")
    p_conv.add_argument("--out")
    p_conv.set_defaults(func=_cmd_converge)

    p_en = sub.add_parser("energy", help="energy report for a field snapshot")
    p_en.add_argument("--field", required=True, help="snapshot path (.json/.bin)")
    p_en.add_argument("--h", dest="h_value", type=float, default=1e-2)
    p_en.set_defaults(func=_cmd_energy)

    p_ex = sub.add_parser("extract", help="extract the vorticity set of a snapshot")
    p_ex.add_argument("--field", required=True)
    p_ex.add_argument("--out")
    p_ex.set_defaults(func=_cmd_extract)

    p_chk = sub.add_parser("check", help="run an invariant check suite")
    p_chk.add_argument("--suite", required=True,
                       choices=["identities", "monotonicity", "el", "variants"])
    p_chk.set_defaults(func=_cmd_check)

    p_init = sub.add_parser("init", help="write a commented template config")
    p_init.add_argument("--out")
    p_init.add_argument("--force", action="store_true")
    p_init.set_defaults(func=_cmd_init)
    return parser


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map to validation exit code 1
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except LedgerViolation as exc:
        print(f"ledger violation: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
