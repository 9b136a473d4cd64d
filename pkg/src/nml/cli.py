"""Command-line interface.

Subcommands: simulate, meanfield {point,scan,hc}, analytic {xi-ea,
xi-renyi2, duality}, propagator {dz,dr,dk}.  Every run writes RFC-4180 CSV
tables (17 significant digits) plus a JSON manifest with the fully resolved
configuration; --plot additionally renders PNG figures next to the CSVs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytic1d, correlators, meanfield, phasescan, protocols
from .errors import NumericalError

CONFIG_ERROR, NUMERICAL_ERROR = 2, 3


def fmt(x):
    """17-significant-digit decimal rendering for CSV/JSON payloads."""
    if isinstance(x, (bool, np.bool_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)  # csv default lineterminator is CRLF per RFC 4180
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return Path(path)


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=fmt, sort_keys=True)
        fh.write("\n")
    return Path(path)


def resolve_workers(value):
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("NML_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def load_config_file(path):
    """Flat key=value file mirroring flag names ('#' comments allowed)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_").lstrip("_")] = val
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nml",
        description="Competing weak-measurement simulator and mean-field phase diagrams",
    )
    parser.add_argument("--version", action="version", version=f"nml {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--out-dir", default="nml-out", help="output directory")
    common.add_argument("--workers", type=int, default=None,
                        help="parallel workers (default: NML_WORKERS or CPU count)")
    common.add_argument("--dry-run", action="store_true",
                        help="print the resolved configuration and exit")
    common.add_argument("--plot", action="store_true",
                        help="render PNG figures next to the CSV output")

    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common],
                         help="run a readout experiment on a 1D chain")
    sim.add_argument("--L", type=int, default=6)
    sim.add_argument("--beta-z", type=float, default=0.1)
    sim.add_argument("--beta-x", type=float, default=0.0)
    sim.add_argument("--mode", choices=protocols.READOUT_MODES, default="complete")
    sim.add_argument("--rounds", type=int, default=60)
    sim.add_argument("--traj", type=int, default=2000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--boundary", choices=protocols.BOUNDARIES, default="open")
    sim.add_argument("--fidelity-stride", type=int, default=1,
                     help="compute the fidelity correlator every N rounds (0 disables)")

    mfp = sub.add_parser("meanfield", parents=[common], help="mean-field evaluations")
    mf_sub = mfp.add_subparsers(dest="subcommand", required=True)
    point = mf_sub.add_parser("point", parents=[common])
    scan = mf_sub.add_parser("scan", parents=[common])
    hc = mf_sub.add_parser("hc", parents=[common])
    for p in (point, scan, hc):
        p.add_argument("--mode", choices=("complete", "none", "partial"), required=True)
        p.add_argument("--d", type=int, default=6)
        p.add_argument("--J", type=float, default=1.0)
    point.add_argument("--h", type=float, required=True)
    point.add_argument("--tf", type=float, required=True)
    scan.add_argument("--h-min", type=float, default=0.0)
    scan.add_argument("--h-max", type=float, default=None, help="default 1.5 h_c")
    scan.add_argument("--n-h", type=int, default=80)
    scan.add_argument("--tf-min", type=float, default=1e-3)
    scan.add_argument("--tf-max", type=float, default=10.0)
    scan.add_argument("--n-tf", type=int, default=80)
    scan.add_argument("--no-refine", action="store_true")
    hc.add_argument("--R", type=int, default=None,
                    help="finite replica count (R >= 2) instead of the replica limit")

    ana = sub.add_parser("analytic", parents=[common], help="closed-form 1D results")
    ana_sub = ana.add_subparsers(dest="subcommand", required=True)
    for name in ("xi-ea", "xi-renyi2"):
        p = ana_sub.add_parser(name, parents=[common])
        p.add_argument("--Jtf", type=float, default=None, help="single strength-time value")
        p.add_argument("--Jtf-min", type=float, default=None)
        p.add_argument("--Jtf-max", type=float, default=None)
        p.add_argument("--n", type=int, default=25)
    ana_sub.add_parser("duality", parents=[common])

    prop = sub.add_parser("propagator", parents=[common], help="temporal coupling curves")
    prop_sub = prop.add_subparsers(dest="subcommand", required=True)
    for name in ("dz", "dr", "dk"):
        p = prop_sub.add_parser(name, parents=[common])
        p.add_argument("--h", type=float, required=True)
        p.add_argument("--tf", type=float, default=0.5)
        p.add_argument("--samples", type=int, default=101)
        if name == "dr":
            p.add_argument("--R", type=int, required=True)
        if name == "dk":
            p.add_argument("--d", type=int, default=6)
            p.add_argument("--J", type=float, default=1.0)

    return parser


def apply_config_file(args):
    if not getattr(args, "config", None):
        return args
    values = load_config_file(args.config)
    for key, raw in values.items():
        if not hasattr(args, key):
            raise ValueError(f"unknown configuration key {key!r}")
        # flags given on the command line keep priority: argparse already
        # stored them; only fill keys still at their parser defaults
        sub = getattr(args, "subcommand", None)
        entry = _PARSER_OPTIONS.get((args.command, sub, key),
                                    _PARSER_OPTIONS.get((args.command, None, key)))
        default, type_fn = entry if entry else (None, None)
        if getattr(args, key) == default:
            if isinstance(default, bool):
                setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
            elif type_fn is not None:
                setattr(args, key, type_fn(raw))
            else:
                setattr(args, key, raw)
    return args


_PARSER_OPTIONS = {}


def _collect_defaults(parser, command=None, subcommand=None):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for name, sp in action.choices.items():
                if command is None:
                    _collect_defaults(sp, command=name)
                else:
                    _collect_defaults(sp, command=command, subcommand=name)
        elif action.dest not in ("help", "command", "subcommand"):
            _PARSER_OPTIONS[(command, subcommand, action.dest)] = (action.default, action.type)


def resolved_config(args):
    skip = {"command", "subcommand", "config", "dry_run"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_manifest(out_dir, args, outputs, elapsed, argv):
    payload = {
        "command": " ".join(
            [args.command] + ([args.subcommand] if getattr(args, "subcommand", None) else [])
        ),
        "argv": list(argv),
        "config": {k: v for k, v in resolved_config(args).items()},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_time_s": elapsed,
        "outputs": [str(p) for p in outputs],
    }
    return write_json(Path(out_dir) / "manifest.json", payload)


# ---------------------------------------------------------------------------
# command implementations

def cmd_simulate(args, out_dir):
    config = protocols.ProtocolConfig(
        L=args.L, beta_z=args.beta_z, beta_x=args.beta_x, rounds=args.rounds,
        readout=args.mode, n_trajectories=args.traj, master_seed=args.seed,
        boundary=args.boundary,
    )
    workers = resolve_workers(args.workers)
    result = protocols.run_ensemble(config, workers=workers,
                                    fidelity_stride=args.fidelity_stride)
    outputs = []

    def correlator_rows(mean, err):
        for t in range(config.rounds):
            for k, dist in enumerate(result.distances):
                yield (t + 1, dist, mean[t, k], err[t, k])

    outputs.append(write_csv(out_dir / "ea_correlators.csv",
                             ("round", "distance", "value", "stderr"),
                             correlator_rows(result.ea_mean, result.ea_stderr)))
    outputs.append(write_csv(out_dir / "fidelity_correlators.csv",
                             ("round", "distance", "value", "stderr"),
                             correlator_rows(result.fid_mean, result.fid_stderr)))

    fit_rows = []
    xi_curves = {}
    for kind in ("EA", "fidelity"):
        rounds, xi, r2 = correlators.xi_vs_round(result, kind)
        xi_curves[kind] = xi
        for t, x, r in zip(rounds, xi, r2):
            if np.isfinite(x):
                fit_rows.append((kind, t, x, r))
    outputs.append(write_csv(out_dir / "xi_fits.csv",
                             ("kind", "round", "xi", "r_squared"), fit_rows))

    if args.plot:
        from . import plotting

        outputs.append(plotting.plot_xi_vs_round(
            result.rounds, xi_curves, out_dir / "xi_vs_round.png",
            title=f"{args.mode} readout, L={args.L}, bz={args.beta_z}, bx={args.beta_x}"))
        picks = sorted({config.rounds // 4, config.rounds // 2, config.rounds})
        outputs.append(plotting.plot_correlator_decay(
            {t: correlators.ensemble_series(result, "EA", t - 1) for t in picks if t >= 1},
            out_dir / "ea_decay.png"))
    return outputs


def cmd_meanfield(args, out_dir):
    outputs = []
    if args.subcommand == "point":
        pt = meanfield.classify_point(args.mode, args.d, args.J, args.h, args.tf)
        payload = {"mode": args.mode, "d": args.d, "J": args.J, "h": pt.h,
                   "t_f": pt.t_f, "q_s": pt.q_s, "r_coeff": pt.r_coeff,
                   "label": pt.label}
        outputs.append(write_json(out_dir / "point.json", payload))
        print(json.dumps(payload, default=fmt))
    elif args.subcommand == "scan":
        h_max = args.h_max
        if h_max is None:
            hc = (meanfield.complete_stationary_hc(args.d, args.J)
                  if args.mode == "complete"
                  else meanfield.partial_stationary_hc(args.d, args.J))
            h_max = 1.5 * hc
        grid = phasescan.ScanGrid(
            mode=args.mode, d=args.d, J=args.J,
            h_values=tuple(np.linspace(args.h_min, h_max, args.n_h)),
            t_f_values=tuple(np.geomspace(args.tf_min, args.tf_max, args.n_tf)),
        )
        result = phasescan.scan(grid, refine=not args.no_refine,
                                workers=resolve_workers(args.workers))
        outputs.append(write_csv(
            out_dir / "phase_points.csv",
            ("mode", "d", "J", "h", "t_f", "q_s", "r_coeff", "label"),
            ((args.mode, args.d, args.J, p.h, p.t_f, p.q_s, p.r_coeff, p.label)
             for p in result.points)))
        outputs.append(write_csv(
            out_dir / "critical_line.csv",
            ("h", "from_label", "to_label", "t_f_low", "t_f_high", "t_f_refined"),
            ((tr.h, tr.from_label, tr.to_label, tr.t_f_low, tr.t_f_high, tr.t_f_refined)
             for trs in result.transitions.values() for tr in trs)))
        if args.plot:
            from . import plotting

            outputs.append(plotting.plot_phase_diagram(result, out_dir / "phase_diagram.png"))
    else:  # hc
        if args.R is not None:
            value = meanfield.r_replica_hc(args.R, args.d, args.J)
            kind = f"replica R={args.R}"
        elif args.mode == "complete":
            value = meanfield.complete_stationary_hc(args.d, args.J)
            kind = "complete readout (replica limit)"
        elif args.mode == "partial":
            value = meanfield.partial_stationary_hc(args.d, args.J)
            kind = "partial readout"
        else:
            raise ValueError("none mode has no stationary X threshold; "
                             "its transition is the critical time 1/(4 d J)")
        payload = {"mode": args.mode, "d": args.d, "J": args.J, "kind": kind,
                   "h_c": value, "h_c_over_dJ": value / (args.d * args.J)}
        outputs.append(write_json(out_dir / "hc.json", payload))
        print(json.dumps(payload, default=fmt))
    return outputs


def cmd_analytic(args, out_dir):
    outputs = []
    if args.subcommand == "duality":
        payload = {
            "h_over_J_critical": analytic1d.duality_critical_point(),
            "regimes": {
                "h/J < 1": analytic1d.finite_time_regime(0.5),
                "h/J = 1": analytic1d.finite_time_regime(1.0),
                "h/J > 1": analytic1d.finite_time_regime(2.0),
            },
        }
        outputs.append(write_json(out_dir / "duality.json", payload))
        print(json.dumps(payload))
        return outputs

    if args.Jtf is not None:
        values = np.array([args.Jtf])
    elif args.Jtf_min is not None and args.Jtf_max is not None:
        values = np.geomspace(args.Jtf_min, args.Jtf_max, args.n)
    else:
        raise ValueError("provide --Jtf or both --Jtf-min and --Jtf-max")

    if args.subcommand == "xi-ea":
        rows = []
        for v in values:
            res = analytic1d.xi_ea_zz_only(v)
            rows.append((v, analytic1d.ea_bond_average(v), res.xi, res.underflow))
        outputs.append(write_csv(out_dir / "xi_ea.csv",
                                 ("j_tf", "bond_average", "xi", "underflow"), rows))
        print(fmt(rows[-1][2]))
        curve = {"xi_ea": [r[2] for r in rows]}
    else:
        rows = [(v, analytic1d.xi_renyi2(v)) for v in values]
        outputs.append(write_csv(out_dir / "xi_renyi2.csv", ("j_tf", "xi"), rows))
        print(fmt(rows[-1][1]))
        curve = {"xi_renyi2": [r[1] for r in rows]}

    if args.plot and len(values) > 1:
        from . import plotting

        outputs.append(plotting.plot_analytic_table(
            values, curve, "J t_f", out_dir / f"{args.subcommand.replace('-', '_')}.png"))
    return outputs


def cmd_propagator(args, out_dir):
    params = {"h": args.h, "t_f": args.tf}
    if args.subcommand == "dr":
        params["R"] = args.R
    if args.subcommand == "dk":
        params.update({"d": args.d, "J": args.J})
    dts = np.linspace(0.0, args.tf, args.samples)
    curve = phasescan.propagator_curve(args.subcommand, params, dts)
    outputs = [write_csv(out_dir / f"{args.subcommand}_curve.csv",
                         curve.columns, curve.rows())]
    if args.plot:
        from . import plotting

        outputs.append(plotting.plot_propagator(curve, out_dir / f"{args.subcommand}_curve.png"))
    return outputs


COMMANDS = {
    "simulate": cmd_simulate,
    "meanfield": cmd_meanfield,
    "analytic": cmd_analytic,
    "propagator": cmd_propagator,
}


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    _PARSER_OPTIONS.clear()
    _collect_defaults(parser)
    args = parser.parse_args(argv)
    try:
        args = apply_config_file(args)
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_ERROR

    if args.dry_run:
        print(json.dumps(resolved_config(args), indent=2, default=fmt, sort_keys=True))
        return 0

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        outputs = COMMANDS[args.command](args, out_dir)
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    elapsed = time.perf_counter() - start
    manifest = write_manifest(out_dir, args, outputs, elapsed, argv)
    print(f"wrote {len(outputs)} output file(s) + {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
