"""Command-line entry point: ``autosmote {run,bench,curves,ablation,timeit}``.

Every flag can also come from a JSON file passed with ``--config``; flags
given on the command line win. Failures exit nonzero and print a JSON error
record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import experiment as ex
from .dataset import load_csv
from .metrics import METRIC_NAMES, average_rank

log = logging.getLogger("autosmote")

FORMAT_VERSION = 1


def _int_list(text: str) -> list[int]:
    """``"3"``, ``"2,4,6"`` or an inclusive range ``"2-6"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--data", help="CSV file with a header row")
    p.add_argument("--label-col", dest="label_col")
    p.add_argument("--method", choices=ex.METHODS)
    p.add_argument("--seeds", type=_int_list, help="e.g. 0-9 or 0,3,5")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--k", type=_int_list, help="neighbour counts to search, e.g. 2-6")
    p.add_argument("--groups", type=_int_list, help="cohort group counts to search, e.g. 1-7")
    p.add_argument("--tau", type=float)
    p.add_argument("--ablate", type=lambda s: [x for x in s.split(",") if x],
                   help="criteria to remove, e.g. dc1,dc3")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autosmote", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    _add_common(sub.add_parser("run", help="evaluate one method on one dataset"))
    bench = sub.add_parser("bench", help="method x dataset suite with rank table")
    _add_common(bench)
    bench.add_argument("--methods", type=lambda s: s.split(","))
    _add_common(sub.add_parser("curves", help="per-epoch training error and test F1"))
    abl = sub.add_parser("ablation", help="remove each decision criterion in turn")
    _add_common(abl)
    t = sub.add_parser("timeit", help="training wall-clock per method")
    _add_common(t)
    t.add_argument("--methods", type=lambda s: s.split(","))
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[ex.ExperimentConfig, dict]:
    """Merge file values and flags into an :class:`ExperimentConfig`.

    Returns the config and the raw file dict (``bench`` reads its dataset
    list from it).
    """
    file_values = {}
    if args.config:
        file_values = json.loads(Path(args.config).read_text())
    names = {f.name for f in fields(ex.ExperimentConfig)}
    values = {k: v for k, v in file_values.items() if k in names}
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return ex.ExperimentConfig(**values), file_values


def _out_dir(config) -> Path:
    out = Path(config.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _need_data(config):
    if not config.data or not config.label_col:
        raise ValueError("--data and --label-col are required")


def cmd_run(config, _file) -> dict:
    _need_data(config)
    record = ex.run(config)
    record["format_version"] = FORMAT_VERSION
    out = _out_dir(config)
    _dump(out / "record.json", record)
    _dump(out / "metrics.json", ex.strip_timing({k: record[k] for k in ("config", "best", "search")}))
    s = record["best"]["summary"]
    if s:
        print(f"{config.method} {record['best']['params']}: "
              + "  ".join(f"{m}={100 * s[m]['mean']:.2f} (±{100 * s[m]['std']:.2f})" for m in METRIC_NAMES))
    else:
        print(f"{config.method}: failed ({record['best']['error']})")
    return record


def cmd_bench(config, file_values) -> dict:
    """Datasets come from the config file's ``datasets`` list of
    ``{"name", "data", "label_col", "batch_size"}`` objects, or from
    ``--data``/``--label-col`` for a single one."""
    datasets = file_values.get("datasets") or [
        {"name": Path(config.data).stem, "data": config.data, "label_col": config.label_col}]
    methods = file_values.get("methods") or list(ex.METHODS[1:])
    results, records = {m: {} for m in methods}, {}
    for ds in datasets:
        raw = load_csv(ds["data"], ds["label_col"])
        for method in methods:
            sub = replace(config, method=method, data=ds["data"], label_col=ds["label_col"],
                          batch_size=ds.get("batch_size", config.batch_size))
            rec = ex.run(sub, raw, track_test=False)
            records.setdefault(ds["name"], {})[method] = rec
            s = rec["best"]["summary"]
            results[method][ds["name"]] = None if s is None else {m: s[m]["mean"] for m in METRIC_NAMES}
            log.info("%s / %s done", ds["name"], method)
    ranks = average_rank(results)
    out = _out_dir(config)
    _dump(out / "bench.json", {"results": results, "ranks": ranks, "records": records,
                               "format_version": FORMAT_VERSION})
    _write_csv(out / "ranking.csv", ["method", *METRIC_NAMES, "overall"],
               [[m, *(f"{ranks[m][k]:.2f}" for k in (*METRIC_NAMES, "overall"))] for m in methods])
    rows = []
    for m in methods:
        for ds in datasets:
            cell = results[m][ds["name"]]
            rows.append([ds["name"], m, *(("" if cell is None else f"{cell[k]:.6f}") for k in METRIC_NAMES)])
    _write_csv(out / "results.csv", ["dataset", "method", *METRIC_NAMES], rows)
    for m in sorted(methods, key=lambda m: ranks[m]["overall"]):
        print(f"{m:18s} " + " ".join(f"{ranks[m][k]:5.2f}" for k in (*METRIC_NAMES, "overall")))
    return {"results": results, "ranks": ranks}


CURVE_METHODS = ("autosmote-self", "autosmote-cohort", "mlp-oversampler")


def cmd_curves(config, _file) -> dict:
    _need_data(config)
    raw = load_csv(config.data, config.label_col)
    out = _out_dir(config)
    rows, summary = [], {}
    for method in CURVE_METHODS:
        rec = ex.run(replace(config, method=method), raw)
        curves = rec["best"]["curves"]
        for c in curves:
            for epoch, (loss, err, f1) in enumerate(zip(c["train_loss"], c["train_error"], c["test_f1"])):
                rows.append([method, c["seed"], epoch + 1, f"{loss:.8f}", f"{err:.8f}", f"{f1:.8f}"])
        summary[method] = {
            "params": rec["best"]["params"],
            "final_train_error": [c["train_error"][-1] for c in curves],
            "final_test_f1": [c["test_f1"][-1] for c in curves],
        }
    _write_csv(out / "curves.csv", ["method", "seed", "epoch", "train_loss", "train_error", "test_f1"], rows)
    _dump(out / "curves_summary.json", summary)
    for m, s in summary.items():
        print(f"{m:18s} train_error={sum(s['final_train_error']) / len(s['final_train_error']):.4f} "
              f"test_f1={sum(s['final_test_f1']) / len(s['final_test_f1']):.4f}")
    return summary


def cmd_ablation(config, _file) -> dict:
    _need_data(config)
    variant = config.method if config.method in ("autosmote-self", "autosmote-cohort") else "autosmote-self"
    records = ex.ablation(config, variant)
    out = _out_dir(config)
    _dump(out / "ablation.json", records)
    rows = []
    for name, rec in records.items():
        s = rec["best"]["summary"]
        per_seed = [c["metrics"]["f1"] if c["metrics"] else "" for c in rec["best"]["seeds"]]
        rows.append([name, f"{s['f1']['mean']:.6f}", f"{s['f1']['std']:.6f}", *per_seed])
        print(f"{name:12s} F1={100 * s['f1']['mean']:.2f} (±{100 * s['f1']['std']:.2f})")
    _write_csv(out / "ablation.csv",
               ["variant", "f1_mean", "f1_std", *(f"seed_{s}" for s in config.seeds)], rows)
    return records


def cmd_timeit(config, file_values) -> list:
    _need_data(config)
    methods = file_values.get("methods") or list(ex.METHODS)
    rows = ex.timeit(config, methods)
    out = _out_dir(config)
    _write_csv(out / "timing.csv", ["method", "mean_seconds_per_seed", "total_seconds", "skip_reason"],
               [[r["method"], "" if r["seconds"] is None else f"{r['seconds']:.4f}",
                 "" if r["seconds"] is None else f"{r['total_seconds']:.4f}", r["skip"] or ""]
                for r in rows])
    for r in rows:
        print(f"{r['method']:18s} " + (f"{r['seconds']:.3f}s/seed" if r["seconds"] is not None
                                       else f"skipped: {r['skip']}"))
    return rows


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "curves": cmd_curves,
            "ablation": cmd_ablation, "timeit": cmd_timeit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config, file_values = resolve_config(args)
        if getattr(args, "methods", None):
            file_values["methods"] = args.methods
        COMMANDS[args.verb](config, file_values)
    except Exception as exc:  # noqa: BLE001 - converted to an error record
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "verb": args.verb}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
