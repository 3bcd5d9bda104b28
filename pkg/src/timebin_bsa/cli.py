"""Command-line front end.

Exit codes: 0 success, 1 a comparison against published values failed,
2 usage, configuration or I/O error.

A config file holds flat ``key = value`` lines (``#`` starts a comment);
keys are the long flag names with dashes or underscores.  Flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bell import (
    CONCLUSIVE,
    Analyzer,
    AnalyzerMode,
    BellKind,
    all_outcomes,
    average_success,
    bell_state,
    compare_to_reference,
    outcome_distribution,
    classify,
    success_rate,
    table,
)
from .detection import DetectorModel, binomial_sigma, sample_outcomes
from .noise import NoiseModel, noisy_fringe_scan
from .sources import DelayModel, antidip_scan
from .teleportation import ExperimentPhases, fringe_scan, predicted_offsets, visibility_to_fidelity, wrap

log = logging.getLogger("timebin_bsa")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2

SUCCESS_TARGETS = {
    (Analyzer.INTERFEROMETER, AnalyzerMode.IDEAL): {"psi+": 1.0, "psi-": 0.5, "phi+": 0.5, "phi-": 0.0, "average": 0.5},
    (Analyzer.INTERFEROMETER, AnalyzerMode.DEAD_TIME): {"psi+": 0.5, "psi-": 0.25, "phi+": 0.5, "phi-": 0.0, "average": 5 / 16},
    (Analyzer.BEAMSPLITTER, AnalyzerMode.DEAD_TIME): {"average": 0.25},
}


class UsageError(Exception):
    pass


def load_config(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def schema() -> dict:
    return json.loads(resources.files("timebin_bsa").joinpath("schemas/summary.schema.json").read_text())


def validate_summary(summary: dict) -> None:
    import jsonschema

    jsonschema.validate(summary, schema())


def _summary(name: str, args: argparse.Namespace, results: dict, passed, notes=()) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config_file")}
    out = {"experiment": name, "version": __version__, "config": config, "results": results, "passed": passed}
    if notes:
        out["notes"] = list(notes)
    validate_summary(out)
    return out


def _emit(args: argparse.Namespace, summary: dict, header: list[str], rows: list[list]) -> None:
    if args.format == "json":
        text = json.dumps(summary, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
    if args.output in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(args.output).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc}") from exc


# --- commands ------------------------------------------------------------


def cmd_table1(args) -> int:
    matrix = table(args.delta, rotated=True)
    outcomes = all_outcomes()
    bad = compare_to_reference(matrix, tol=args.tolerance)
    results = {
        "delta": args.delta,
        "outcomes": [o.label for o in outcomes],
        "matrix": {k.value: [matrix[k][o] for o in outcomes] for k in BellKind},
        "mismatches": [
            {"state": k.value, "outcome": o.label, "value": p, "reference": str(ref)} for k, o, p, ref in bad
        ],
    }
    rows = [[k.value] + [matrix[k][o] for o in outcomes] for k in BellKind]
    _emit(args, _summary("table1", args, results, not bad), ["state"] + [o.label for o in outcomes], rows)
    for k, o, p, ref in bad:
        log.error("mismatch %s %s: %r vs %s", k.value, o.label, p, ref)
    return EXIT_OK if not bad else EXIT_MISMATCH


def cmd_success(args) -> int:
    modes = [AnalyzerMode(args.mode)] if args.mode != "both" else list(AnalyzerMode)
    entries, rows, ok = [], [], True
    for analyzer in Analyzer:
        for mode in modes:
            per = {k.value: success_rate(k, args.delta, mode, analyzer) for k in BellKind}
            avg = average_success(mode, args.delta, analyzer)
            target = SUCCESS_TARGETS.get((analyzer, mode), {})
            checks = {key: abs((avg if key == "average" else per[key]) - v) <= 1e-12 for key, v in target.items()}
            ok &= all(checks.values())
            entries.append(
                {"analyzer": analyzer.value, "mode": mode.value, "per_state": per, "average": avg,
                 "reference": target, "matches_reference": all(checks.values()) if target else None}
            )
            rows += [[analyzer.value, mode.value, k, r] for k, r in per.items()]
            rows.append([analyzer.value, mode.value, "average", avg])
    summary = _summary("success", args, {"delta": args.delta, "rates": entries}, ok)
    _emit(args, summary, ["analyzer", "mode", "state", "rate"], rows)
    return EXIT_OK if ok else EXIT_MISMATCH


def _phases(args) -> ExperimentPhases:
    return ExperimentPhases(args.alpha, args.beta, args.gamma, args.delta)


def cmd_fringes(args) -> int:
    if args.points < 5:
        raise UsageError("fringe scans need at least 5 points")
    fixed = _phases(args)
    res = fringe_scan(args.scan, fixed=fixed, mode=AnalyzerMode(args.mode), points=args.points)
    pred = predicted_offsets(args.scan, fixed)
    classes = {}
    for c in CONCLUSIVE:
        f = res.fits[c]
        classes[c.value] = {
            "visibility": f.visibility,
            "offset": res.offsets[c],
            "predicted_offset": pred[c],
            "baseline": f.baseline,
            "fit_residual": f.residual,
            "fidelity": visibility_to_fidelity(f.visibility),
            "class_probability": float(res.class_probability[c][0]),
        }
    from .bell import Classification as C

    results = {
        "scan": args.scan,
        "calibration": res.calibration,
        "classes": classes,
        "psi_plus_minus_offset": res.offset_difference(C.PSI_MINUS, C.PSI_PLUS),
        "phi_plus_minus_psi_plus_offset": res.offset_difference(C.PHI_PLUS, C.PSI_PLUS),
        "predicted_phi_shift": wrap(pred[C.PHI_PLUS] - pred[C.PSI_PLUS]),
    }
    ok = all(
        abs(wrap(res.offsets[c] - pred[c])) <= 1e-9 and abs(res.fits[c].visibility - 1) <= 1e-9 for c in CONCLUSIVE
    ) if args.mode == "ideal" else None
    rows = [[x] + [res.rates[c][i] for c in CONCLUSIVE] for i, x in enumerate(res.grid)]
    _emit(args, _summary("fringes", args, results, ok), [args.scan] + [c.value for c in CONCLUSIVE], rows)
    return EXIT_OK if ok in (True, None) else EXIT_MISMATCH


def cmd_antidip(args) -> int:
    if args.points < 2:
        raise UsageError("antidip scans need at least 2 points")
    delays = np.linspace(-args.max_delay, args.max_delay, args.points)
    res = antidip_scan(delays, args.chi, DelayModel(args.coherence), order=args.order, herald=args.herald)
    results = {
        "chi": args.chi,
        "order": args.order,
        "visibility": dict(res.visibility),
        "baseline": dict(res.baseline),
        "ceiling": 1 / 3 if args.order == 2 and not args.herald else None,
    }
    rows = [[d, v, res.rates["00"][i], res.rates["22"][i]] for i, (d, v) in enumerate(zip(res.delays, res.overlaps))]
    _emit(args, _summary("antidip", args, results, None), ["delay", "overlap", "rate_00", "rate_22"], rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.shots < 1:
        raise UsageError("shots must be at least 1")
    mode = AnalyzerMode(args.mode)
    notes = []
    if args.target == "fringes":
        noise = NoiseModel(args.chi, args.overlap, args.order, args.efficiency, args.dark_count, mode)
        res = noisy_fringe_scan(noise, _phases(args), points=args.points, shots=args.shots, seed=args.seed, workers=args.workers)
        results = {
            "target": "fringes", "shots": args.shots, "seed": args.seed,
            "visibility_raw": {c.value: res.raw[c].visibility for c in CONCLUSIVE},
            "visibility_net": {c.value: res.net[c].visibility for c in CONCLUSIVE},
            "mean_visibility_raw": res.mean_raw, "mean_visibility_net": res.mean_net,
            "fidelity_raw": res.fidelity_raw, "fidelity_net": res.fidelity_net,
        }
        notes.append("accidentals are the model rate of events containing a dark count, not an off-window estimate")
        rows = [[x] + [res.counts[c][i] for c in CONCLUSIVE] for i, x in enumerate(res.grid)]
        header = ["alpha"] + [f"counts_{c.value}" for c in CONCLUSIVE]
        _emit(args, _summary("simulate", args, results, None, notes), header, rows)
        return EXIT_OK

    det = DetectorModel(args.efficiency, args.dark_count, mode)
    rows, per_state = [], {}
    for k in BellKind:
        dist = outcome_distribution(bell_state(k, args.delta), args.delta)
        rec = sample_outcomes(dist, det, args.shots, args.seed, args.workers)
        worst_z = 0.0
        for o in all_outcomes():
            n = rec.count(o)
            p = dist[o]
            if p > 0 and det.ideal:
                worst_z = max(worst_z, abs(n / args.shots - p) / binomial_sigma(p, args.shots))
            rows.append([k.value, o.label, n, n / args.shots, p])
        hits = sum(rec.count(o) for o in all_outcomes() if classify(o, mode).kind is k)
        per_state[k.value] = {"success_fraction": hits / args.shots, "exact_success": success_rate(k, args.delta, mode),
                              "max_z": worst_z if det.ideal else None}
    results = {"target": "bsa", "shots": args.shots, "seed": args.seed, "states": per_state}
    _emit(args, _summary("simulate", args, results, None), ["state", "outcome", "count", "frequency", "probability"], rows)
    return EXIT_OK


# --- parser --------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", dest="config_file", help="flat key = value file")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--output", help="write here instead of stdout")
    p.add_argument("--delta", type=float, default=0.0, help="analyzer interferometer phase (rad)")


def _phase_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timebin-bsa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", help="4 x 21 outcome matrix vs the published table")
    _common(p)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("success", help="success rates of both analyzers")
    _common(p)
    p.add_argument("--mode", choices=("ideal", "deadtime", "both"), default="both")
    p.set_defaults(func=cmd_success)

    p = sub.add_parser("fringes", help="teleportation fringe scan")
    _common(p)
    _phase_flags(p)
    p.add_argument("--scan", choices=("alpha", "beta"), default="alpha")
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--mode", choices=("ideal", "deadtime"), default="ideal")
    p.set_defaults(func=cmd_fringes)

    p = sub.add_parser("antidip", help="coincidence increase versus delay")
    _common(p)
    p.add_argument("--chi", type=float, default=0.05)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--max-delay", type=float, default=4.0)
    p.add_argument("--coherence", type=float, default=1.0)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--herald", action="store_true", help="require Bob's twin photon")
    p.set_defaults(func=cmd_antidip)

    p = sub.add_parser("simulate", help="Monte Carlo detection")
    _common(p)
    _phase_flags(p)
    p.add_argument("--target", choices=("bsa", "fringes"), default="bsa")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mode", choices=("ideal", "deadtime"), default="ideal")
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--dark-count", type=float, default=0.0)
    p.add_argument("--chi", type=float, default=0.05)
    p.add_argument("--overlap", type=float, default=0.9)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--points", type=int, default=12)
    p.set_defaults(func=cmd_simulate)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config_file:
        return args
    values = load_config(args.config_file)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config_file"):
            raise UsageError(f"unknown config key '{key}' for {args.command}")
        if action.const is True and action.nargs == 0:
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError as exc:
                raise UsageError(f"bad value for '{key}': {raw}") from exc
            if action.choices and value not in action.choices:
                raise UsageError(f"'{key}' must be one of {sorted(action.choices)}")
        defaults[key] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if not math.isfinite(getattr(args, "delta", 0.0)):
            raise UsageError("phases must be finite")
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"timebin-bsa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
