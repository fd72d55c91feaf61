"""Command-line entry point: ``ingest``, ``analyze``, ``synth`` and ``report``."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigInvalid, DataError, StylizedFactsError
from .pipeline import (
    ANALYSES,
    file_digest,
    flatten_results,
    load_config,
    resolve_config,
    resolve_output_dir,
    run,
    set_field,
)
from .series import ColumnSchema, load_csv, log_returns, write_csv
from .synth import FAMILIES, GeneratorSpec, generate_prices

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    analysis = getattr(exc, "analysis", None)
    if analysis:
        payload["analysis"] = analysis
        payload["error"] = type(exc.error).__name__
    for attr in ("field", "reason", "row", "column"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)
    return code


def _schema_args(p):
    p.add_argument("--timestamp-col", default="timestamp")
    p.add_argument("--close-col", default="close")
    p.add_argument("--volume-col", default=None)
    p.add_argument("--cadence", type=int, default=None, help="bar length in seconds (default: median step)")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_ingest(args):
    schema = ColumnSchema(args.timestamp_col, args.close_col, args.volume_col, args.cadence)
    s = load_csv(args.path, schema)
    r = log_returns(s, 1).values if len(s) > 1 else np.empty(0)
    steps = np.diff(s.timestamps)
    summary = {
        "path": args.path,
        "sha256": file_digest(args.path),
        "n_prices": len(s),
        "first_timestamp": int(s.timestamps[0]),
        "last_timestamp": int(s.timestamps[-1]),
        "cadence": s.cadence,
        "gaps": int(np.sum(steps > s.cadence)) if steps.size else 0,
        "has_volume": s.has_volume,
        "min_price": float(s.prices.min()),
        "max_price": float(s.prices.max()),
        "mean_log_return": float(r.mean()) if r.size else None,
        "std_log_return": float(r.std()) if r.size else None,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args):
    cfg = load_config(args.config) if args.config else resolve_config({})
    if args.input:
        cfg["input"]["path"] = args.input
    for flag, key in (("timestamp_col", "timestamp"), ("close_col", "close"), ("volume_col", "volume"),
                      ("cadence", "cadence")):
        v = getattr(args, flag)
        if v is not None:
            cfg["input"][key] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.analyses:
        cfg["analyses"] = [a.strip() for a in args.analyses.split(",") if a.strip()]
    if args.keep_going:
        cfg["keep_going"] = True
    for item in args.set or []:
        if "=" not in item:
            raise ConfigInvalid(item, "expected block.field=value")
        key, val = item.split("=", 1)
        set_field(cfg, key.strip(), _parse_value(val))
    report = run(cfg, output_dir=args.output_dir)
    out = resolve_output_dir(cfg, args.output_dir)
    print(json.dumps({"report": os.path.join(out, "report.json"), "analyses": sorted(report["results"]),
                      "files": len(report["manifest"])}, sort_keys=True))
    return EXIT_OK


def cmd_synth(args):
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise ConfigInvalid(item, "expected name=value")
        k, v = item.split("=", 1)
        params[k.strip()] = _parse_value(v)
    spec = GeneratorSpec(args.family, args.length, args.seed, params, args.cadence)
    series = generate_prices(spec)
    write_csv(series, args.out, iso=args.iso)
    print(json.dumps({"path": args.out, "family": args.family, "n_prices": len(series),
                      "has_volume": series.has_volume, "seed": args.seed}, sort_keys=True))
    return EXIT_OK


def cmd_report(args):
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid("report", f"file not found: {args.report}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("report", f"invalid JSON: {exc}") from None
    base = os.path.dirname(os.path.abspath(args.report))
    out = args.out or os.path.join(base, "summary.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["analysis", "quantity", "value"])
        w.writerows(flatten_results(report))
    manifest_out = os.path.splitext(out)[0] + "_manifest.csv"
    bad = 0
    with open(manifest_out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["file", "analysis", "sha256", "status"])
        for entry in report.get("manifest", []):
            path = os.path.join(base, entry["file"])
            if not os.path.exists(path):
                status = "missing"
            elif file_digest(path) != entry["sha256"]:
                status = "modified"
            else:
                status = "ok"
            bad += status != "ok"
            w.writerow([entry["file"], entry["analysis"], entry["sha256"], status])
    print(json.dumps({"summary": out, "manifest": manifest_out, "mismatched_files": bad}, sort_keys=True))
    if bad:
        raise DataError(f"{bad} manifest entries do not match the files on disk")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="stylized-facts", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize a price CSV")
    p.add_argument("path")
    _schema_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="run analyses from a JSON config")
    p.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    p.add_argument("--input", help="price CSV (overrides input.path)")
    p.add_argument("--timestamp-col", default=None)
    p.add_argument("--close-col", default=None)
    p.add_argument("--volume-col", default=None)
    p.add_argument("--cadence", type=int, default=None)
    p.add_argument("--seed", type=int, help="seed for stochastic analyses (required for kurtosis, persistence)")
    p.add_argument("--output-dir", help="output directory (overrides config and environment)")
    p.add_argument("--analyses", help=f"comma-separated subset of {','.join(ANALYSES)}")
    p.add_argument("--keep-going", action="store_true", help="record failing analyses and continue")
    p.add_argument("--set", action="append", metavar="BLOCK.FIELD=VALUE", help="override any config field")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write a synthetic oracle series as CSV")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--length", type=int, required=True, help="number of prices")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.add_argument("--cadence", type=int, default=60)
    p.add_argument("--iso", action="store_true", help="write ISO-8601 timestamps")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render a JSON report as CSV summary and manifest")
    p.add_argument("report")
    p.add_argument("--out", help="summary CSV path (default: next to the report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StylizedFactsError as exc:
        return _error(exc, getattr(exc, "exit_code", EXIT_NUMERIC))
    except FileNotFoundError as exc:
        return _error(exc, EXIT_DATA)
    except (ValueError, TypeError) as exc:
        return _error(exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
