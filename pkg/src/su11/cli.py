"""Command-line interface: ``su11 {run,sweep,optimize,qfi,figure,oracle-check}``.

Exit codes are 0 on success, 2 for usage errors and 3 for domain or physics
errors; every failure writes a one-line JSON object to stderr.
``SU11_THREADS`` caps the worker threads of sweeps and figures (0 = auto).
"""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dsl, figures
from ._validation import DomainError
from .circuit import Observable
from .fisher import NonGaussianObservable, circuit_cfi, circuit_qfi
from .fock_oracle import oracle_check
from .interferometer import (PARAM_NAMES, SWEEP_AXES, InterferometerConfig, Topology,
                             circuit_sensitivity, optimize_operating_point, resolve_threads,
                             sweep)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dump(obj, stream):
    stream.write(json.dumps(_clean(obj), sort_keys=True) + "\n")


def _read(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _pipeline(path):
    return dsl.compile_text(_read(path))


def _config_summary(config):
    if config is None:
        return None
    return {"topology": config.topology.value, "seed_alpha": config.seed_alpha,
            "g1": config.g1, "g2": config.effective_g2, "eta_ai": config.eta_ai,
            "eta_bi": config.eta_bi, "eta_ae": config.eta_ae, "eta_be": config.eta_be,
            "pump_phase": config.pump_phase}


def _config_from_args(args):
    """``(config, observable)`` from ``--circ`` or the individual flags."""
    if args.circ:
        pipe = _pipeline(args.circ)
        if pipe.config is None:
            raise DomainError("circuit is not one of the standard interferometer layouts")
        observable = Observable(args.observable) if args.observable else pipe.observable
        return pipe.config, observable
    if not args.observable:
        raise UsageError("--observable is required without --circ")
    config = InterferometerConfig(
        Topology(args.topology), math.sqrt(args.seed), args.gain, g2=args.g2,
        eta_ai=args.eta_int, eta_bi=args.eta_int, eta_ae=args.eta_ext, eta_be=args.eta_ext,
        phi=args.phi, theta_a=args.theta_a, theta_b=args.theta_b, lambda_weight=args.lam)
    return config, Observable(args.observable)


def _free(text):
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in names if p not in PARAM_NAMES]
    if bad:
        raise UsageError(f"unknown free parameter(s) {bad}; choose from {list(PARAM_NAMES)}")
    return names


# -- subcommands --------------------------------------------------------------

def _cmd_run(args, out):
    pipe = _pipeline(args.file)
    circ = pipe.circuit if args.phi is None else pipe.circuit.with_phi(args.phi)
    report = circuit_sensitivity(circ)
    _dump({"report": report.to_dict(), "config": _config_summary(pipe.config)}, out)


def _cmd_sweep(args, out):
    config, observable = _config_from_args(args)
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.log:
        if args.start <= 0 or args.stop <= 0:
            raise DomainError("--log needs positive bounds")
        grid = np.geomspace(args.start, args.stop, args.points)
    else:
        grid = np.linspace(args.start, args.stop, args.points)
    points = sweep(config, observable, args.axis, grid, _free(args.free), threads=args.threads)
    # operating point columns are prefixed so they never clash with the axis name
    cols = ("delta2_phi",) + tuple(f"at_{k}" for k in PARAM_NAMES)
    lines = [",".join((args.axis,) + cols + ("reason",))]
    for p in points:
        if p.report is None:
            cells = [""] * len(cols)
        else:
            op = p.report.operating_point
            cells = [format(p.report.delta2_phi, ".17g")] + [format(op[k], ".17g") for k in PARAM_NAMES]
        reason = p.reason.replace(",", ";").replace("\n", " ")
        lines.append(",".join([format(p.value, ".17g")] + cells + [reason]))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, newline="\n")
    else:
        out.write(text)


def _cmd_optimize(args, out):
    config, observable = _config_from_args(args)
    report = optimize_operating_point(config, observable, _free(args.free))
    _dump({"report": report.to_dict(), "config": _config_summary(config)}, out)


def _cmd_qfi(args, out):
    pipe = _pipeline(args.file)
    circ = pipe.circuit if args.phi is None else pipe.circuit.with_phi(args.phi)
    qfi = circuit_qfi(circ)
    result = {"qfi": qfi, "qcrb": math.inf if qfi == 0 else 1 / qfi, "cfi": None, "ccrb": None,
              "observable": pipe.observable.value}
    try:
        rep = circuit_cfi(circ)
        result.update(cfi=rep.cfi, ccrb=rep.ccrb, mean_term=rep.mean_term,
                      variance_term=rep.variance_term)
    except NonGaussianObservable as exc:
        result["cfi_note"] = str(exc)
    _dump(result, out)


def _cmd_figure(args, out):
    if args.params:
        try:
            params = json.loads(_read(args.params))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.params}: invalid JSON ({exc.msg})") from None
        if not isinstance(params, dict):
            raise UsageError(f"{args.params}: expected a JSON object")
        if params.get("figure", args.name) != args.name:
            raise UsageError(f"{args.params} describes {params.get('figure')!r}, not {args.name!r}")
        params = {**params, "figure": args.name}
    else:
        params = figures.figure_params(args.name)
    data = figures.build_figure(params, threads=args.threads)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{args.name}.csv"
    json_path = out_dir / f"{args.name}.json"
    csv_path.write_text(figures.to_csv(data), newline="\n")
    json_path.write_text(json.dumps(_clean(figures.sidecar(data)), sort_keys=True, indent=2) + "\n",
                         newline="\n")
    _dump({"csv": str(csv_path), "params": str(json_path), "points": len(data.values)}, out)


def _cmd_oracle(args, out):
    report = oracle_check(cutoff=args.cutoff)
    _dump(report, out)
    return EXIT_OK if report["pass"] else EXIT_DOMAIN


# -- parser -------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--circ", help="take the layout from a .circ file")
    p.add_argument("--topology", default=Topology.CONVENTIONAL_INTENSITY.value,
                   choices=[t.value for t in Topology])
    p.add_argument("--observable", choices=[o.value for o in Observable])
    p.add_argument("--gain", type=float, default=4.0, help="NLO 1 intensity gain")
    p.add_argument("--g2", type=float, default=None, help="NLO 2 gain (default: same as NLO 1)")
    p.add_argument("--seed", type=float, default=0.0, help="mean seed photon number")
    p.add_argument("--eta-int", type=float, default=1.0, help="internal transmission, both arms")
    p.add_argument("--eta-ext", type=float, default=1.0, help="detection transmission, both arms")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--theta-a", type=float, default=math.pi / 2)
    p.add_argument("--theta-b", type=float, default=math.pi / 2)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)


def build_parser():
    parser = _Parser(prog="su11", description="SU(1,1) interferometer sensitivity toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="sensitivity of a .circ circuit")
    p.add_argument("file")
    p.add_argument("--phi", type=float)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="sensitivity along one axis, CSV output")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--log", action="store_true")
    p.add_argument("--free", default="", help="comma-separated parameters optimized per point")
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("optimize", help="optimal operating point")
    _add_config_flags(p)
    p.add_argument("--free", default="phi")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("qfi", help="classical and quantum Fisher information of a .circ circuit")
    p.add_argument("file")
    p.add_argument("--phi", type=float)
    p.set_defaults(func=_cmd_qfi)

    p = sub.add_parser("figure", help="write a figure dataset (CSV plus JSON parameters)")
    p.add_argument("name", choices=sorted(figures.FIGURES, key=lambda n: int(n[3:])))
    p.add_argument("--out-dir", default=".")
    p.add_argument("--params", help="JSON parameter sidecar to use instead of the defaults")
    p.set_defaults(func=_cmd_figure)

    p = sub.add_parser("oracle-check", help="Gaussian engine vs truncated Fock oracle")
    p.add_argument("--cutoff", type=int, default=25)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        args.threads = resolve_threads()
        code = args.func(args, stdout)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        _dump({"error": "usage", "message": str(exc)}, stderr)
        return EXIT_USAGE
    except dsl.CircError as exc:
        _dump(exc.to_dict(), stderr)
        return EXIT_DOMAIN
    except DomainError as exc:
        _dump({"error": exc.__class__.__name__, "message": str(exc)}, stderr)
        return EXIT_DOMAIN
    except (ValueError, OverflowError) as exc:
        _dump({"error": "domain", "message": str(exc)}, stderr)
        return EXIT_DOMAIN


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
