"""Command-line interface: ``circuitdca analyze|simulate|quantize FILE``.

Exit codes: 0 success, 1 input or analysis error, 2 internal invariant violation.
"""

import argparse
import json
import math
import sys

from . import analysis
from .dynamics import energy_drift
from .errors import AnalysisError, InvariantViolation


class FlagError(Exception):
    def to_dict(self):
        return {"type": "FlagError", "message": str(self)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise FlagError(message)


def _split(value):
    return [v.strip() for v in value.split(",") if v.strip()] if value else None


def _positive(name):
    def conv(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not (x > 0 and math.isfinite(x)):
            raise argparse.ArgumentTypeError(f"{name} must be positive and finite, got {text}")
        return x

    return conv


def _assignment(text):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {name} is not a number: {value!r}") from None


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected a,b got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gauge weights must be integers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="circuitdca", description="Constraint analysis and quantization of circuit Lagrangians.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("file", help="model file (.lagr)")
        sp.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")
        sp.add_argument("--keep", metavar="VARS", help="comma-separated variables to keep after elimination")
        sp.add_argument("--gauge", action="append", metavar="EXPR", help="gauge condition, one per first-class constraint")
        sp.add_argument("--scc-choice", metavar="LABELS", help="comma-separated labels of the second-class set")

    common(sub.add_parser("analyze", help="full constraint analysis"))
    common(sub.add_parser("quantize", help="commutator table only"))
    sim = sub.add_parser("simulate", help="integrate the reduced dynamics")
    common(sim)
    sim.add_argument("--dt", type=_positive("--dt"), default=1e-3)
    sim.add_argument("--t-end", type=_positive("--t-end"), default=10.0)
    sim.add_argument("--init", type=_assignment, nargs="*", default=[], metavar="NAME=VALUE")
    sim.add_argument("--every", type=int, default=1, help="record every n-th step")
    sim.add_argument("--csv", metavar="PATH", help="write the trajectory as CSV")
    sim.add_argument("--gauge-compare", type=_pair, nargs=2, metavar="A,B",
                     help="compare two gauges a*u + b*v from the same physical state")
    sim.add_argument("--gauge-basis", metavar="U,V", help="coordinates u,v of the gauge family")
    return p


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise FlagError(f"cannot read {path}: {exc.strerror}") from None


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit_json(path, obj, out):
    if path == "-":
        out.write(_dump(obj))
    elif path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dump(obj))


def _run_analysis(args, quantize=True):
    text = _read(args.file)
    return analysis.analyze(
        text,
        gauges=args.gauge,
        keep=_split(args.keep),
        scc_choice=_split(args.scc_choice),
        quantize=quantize,
    )


def cmd_analyze(args, out):
    a = _run_analysis(args)
    rep = analysis.report(a, args.file)
    _emit_json(args.json, rep, out)
    if args.json != "-":
        out.write(analysis.render_text(rep))
    return rep


def cmd_quantize(args, out):
    a = _run_analysis(args)
    rep = {
        "schema": analysis.SCHEMA,
        "file": args.file,
        "kept": list(a.structure.keep),
        "quantum": analysis.report(a, args.file)["quantum"],
    }
    _emit_json(args.json, rep, out)
    if args.json != "-":
        for line in a.table.lines():
            out.write(line + "\n")
        out.write("canonical form:\n")
        for line in a.rescaling.describe():
            out.write(f"  {line}\n")
    return rep


def cmd_simulate(args, out):
    init = dict(args.init)
    if args.every < 1:
        raise FlagError("--every must be at least 1")
    if args.t_end < args.dt:
        raise FlagError("--t-end must be at least --dt")
    text = _read(args.file)
    if args.gauge_compare:
        summary, (first, _) = analysis.gauge_compare(
            text, args.gauge_compare, init, args.dt, args.t_end, _split(args.gauge_basis)
        )
        rep = {"schema": analysis.SCHEMA, "file": args.file, "gauge_compare": summary}
        _emit_json(args.json, rep, out)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(first.to_csv())
        if args.json != "-":
            out.write(f"gauges: {summary['gauges'][0]} vs {summary['gauges'][1]}\n")
            for k, v in summary["max_relative_deviation"].items():
                out.write(f"  max relative deviation of {k}: {v:.3e}\n")
        return rep
    a = _run_analysis(args, quantize=False)
    traj = analysis.simulate(a, init, args.dt, args.t_end, args.every)
    drift = energy_drift(a.reduced, traj) if a.reduced.evaluate(traj.states[0]) != 0 else None
    rep = {
        "schema": analysis.SCHEMA,
        "file": args.file,
        "evolving": list(a.structure.keep),
        "equations": {k: str(v) for k, v in a.equations().items()},
        "metadata": traj.metadata,
        "final": dict(sorted(traj.final().items())),
        "energy_drift": drift,
        "trajectory": json.loads(traj.to_json()),
    }
    _emit_json(args.json, rep, out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(traj.to_csv())
    if args.json != "-":
        for k, v in rep["equations"].items():
            out.write(f"d/dt {k} = {v}\n")
        out.write(f"t = {traj.times[-1]:g}: " + ", ".join(f"{k} = {v:.10g}" for k, v in rep["final"].items()) + "\n")
        if drift is not None:
            out.write(f"relative energy drift: {drift:.3e}\n")
    return rep


COMMANDS = {"analyze": cmd_analyze, "quantize": cmd_quantize, "simulate": cmd_simulate}


def _error_payload(exc, args):
    payload = {"schema": analysis.SCHEMA, "error": exc.to_dict()}
    if isinstance(exc, AnalysisError) and args is not None and getattr(args, "file", None):
        try:
            payload["diagnostics"] = analysis.diagnose_text(_read(args.file), _split(args.scc_choice)).to_dict()
        except (AnalysisError, FlagError):
            pass
    return payload


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    args = None
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
        return 0
    except (AnalysisError, FlagError, ValueError) as exc:
        if isinstance(exc, ValueError) and not isinstance(exc, AnalysisError):
            exc = FlagError(str(exc))
        payload = _error_payload(exc, args)
        if args is not None and getattr(args, "json", None) and args.json != "-":
            _emit_json(args.json, payload, out)
        err.write(_dump(payload))
        return 1
    except InvariantViolation as exc:
        err.write(_dump({"schema": analysis.SCHEMA, "error": {"type": "InvariantViolation", "message": str(exc)}}))
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
