"""Command-line entry point covering the full experiment lifecycle.

Subcommands: generate, train, evaluate, fit-decision, sei, report.  Every
artifact-producing command writes a ``*.manifest.json`` next to its outputs
recording the fully resolved configuration, seeds, paths, tool version and
wall-clock duration.  All outputs are written atomically, and reruns with
identical inputs and seeds produce byte-identical artifacts (manifests
differ only in their timestamp fields).

Exit codes: 0 success, 2 configuration error, 3 I/O or file-format error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .dataset import (Dataset, DatasetSpec, EvalGrid, build_dataset,
                      build_eval_grid, load_dataset, save_dataset)
from .decision import build_decision_model, fit_gaussian
from .errors import (ConfigurationError, DataFormatError, NumericError,
                     RfseiError)
from .evaluation import (evaluate_on_grid, snr_sweep, write_bias_curve_csv,
                         write_report_json, write_scatter_csv,
                         write_snr_sweep_csv)
from .network import (NetworkConfig, TrainConfig, init_model, load_checkpoint,
                      predict, save_checkpoint, train)
from .pipeline import (EmitterProfile, run_scenario, write_accuracy_csv)
from .signal_model import ModulationScheme
from .utils import atomic_write_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _limit_threads(n: int) -> None:
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc


def _write_manifest(out_dir_or_path, command, resolved, inputs, outputs,
                    started, duration):
    base = out_dir_or_path
    if os.path.isdir(base):
        path = os.path.join(base, "manifest.json")
    else:
        path = str(base) + ".manifest.json"
    doc = {"command": command,
           "tool_version": __version__,
           "resolved_config": resolved,
           "inputs": [str(p) for p in inputs],
           "outputs": [str(p) for p in outputs],
           "started_utc": started,
           "duration_s": round(duration, 3)}
    atomic_write_text(path, json.dumps(doc, indent=2))
    return path


def _grid_from_dict(d) -> EvalGrid:
    if "grid_values" in d:
        return EvalGrid(target=d["target"],
                        grid_values=tuple(d["grid_values"]),
                        frames_per_value=int(d["frames_per_value"]))
    return EvalGrid.evenly_spaced(d["target"], float(d["start"]),
                                  float(d["stop"]), float(d["step"]),
                                  int(d["frames_per_value"]))


def cmd_generate(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    doc = _read_json(args.spec)
    grid = None
    if "grid" in doc:
        grid = _grid_from_dict(doc["grid"])
        spec = DatasetSpec.from_dict(doc["spec"])
        ds = build_eval_grid(spec, grid)
    else:
        spec = DatasetSpec.from_dict(doc.get("spec", doc))
        ds = build_dataset(spec)
    save_dataset(ds, args.out)
    resolved = {"spec": spec.to_dict(),
                "grid": None if grid is None else {
                    "target": grid.target,
                    "grid_values": list(grid.grid_values),
                    "frames_per_value": grid.frames_per_value}}
    _write_manifest(args.out, "generate", resolved, [args.spec],
                    [args.out, str(args.out) + ".json"], started,
                    time.monotonic() - t0)
    print(f"wrote {len(ds)} frames to {args.out}")
    return EXIT_OK


def _network_config_from_file(path, frame_len):
    doc = _read_json(path)
    if "preset" in doc:
        return NetworkConfig.default(int(doc.get("frame_len", frame_len)),
                                     sei_variant=doc["preset"] == "sei")
    return NetworkConfig.from_dict(doc)


def cmd_train(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    ds = load_dataset(args.dataset)
    hyper = TrainConfig.from_dict(_read_json(args.train)) if args.train \
        else TrainConfig()
    if args.resume:
        model = load_checkpoint(args.resume)
    else:
        config = _network_config_from_file(args.network, ds.spec.frame_len) \
            if args.network else NetworkConfig.default(ds.spec.frame_len)
        model = init_model(config, seed=args.init_seed)

    def log(epoch, train_loss, val_loss, seconds):
        print(f"epoch {epoch:3d}  train {train_loss:.6e}  "
              f"val {val_loss:.6e}  ({seconds:.1f}s)", flush=True)

    result = train(model, ds, hyper, on_epoch=log if args.verbose else None)
    save_checkpoint(model, args.out)
    outputs = [args.out]
    loss_csv = args.loss_csv or str(args.out) + ".loss.csv"
    lines = ["epoch,train_loss,val_loss"]
    lines += [f"{e},{t:.10g},{v:.10g}" for e, t, v in
              zip(result.history["epoch"], result.history["train_loss"],
                  result.history["val_loss"])]
    atomic_write_text(loss_csv, "\n".join(lines) + "\n")
    outputs.append(loss_csv)
    resolved = {"train": hyper.to_dict(), "network": model.config.to_dict(),
                "init_seed": args.init_seed, "resume": args.resume}
    _write_manifest(args.out, "train", resolved,
                    [args.dataset] + [p for p in (args.network, args.train,
                                                  args.resume) if p],
                    outputs, started, time.monotonic() - t0)
    print(f"best val loss {result.best_val_loss:.6e} "
          f"(epoch {result.best_epoch}); checkpoint at {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    model = load_checkpoint(args.checkpoint)
    grid_ds = load_dataset(args.grid)
    sweep = None
    if args.snr_list:
        snrs = [float(s) for s in args.snr_list.split(",")]
        sweep = snr_sweep(model, grid_ds.spec, snrs,
                          frames_per_snr=args.sweep_frames,
                          seed=args.sweep_seed)
    report = evaluate_on_grid(model, grid_ds, sweep)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []
    for name, writer in (("bias_curve.csv",
                          lambda p: write_bias_curve_csv(p, report.curve)),
                         ("scatter.csv",
                          lambda p: write_scatter_csv(
                              p, np.repeat(report.curve.truths,
                                           grid_ds.grid.frames_per_value),
                              report.curve.estimates)),
                         ("summary.json",
                          lambda p: write_report_json(p, report))):
        path = os.path.join(args.outdir, name)
        writer(path)
        outputs.append(path)
    if sweep is not None:
        path = os.path.join(args.outdir, "snr_sweep.csv")
        write_snr_sweep_csv(path, sweep)
        outputs.append(path)
    _write_manifest(args.outdir, "evaluate",
                    {"snr_list": args.snr_list,
                     "sweep_frames": args.sweep_frames,
                     "sweep_seed": args.sweep_seed},
                    [args.checkpoint, args.grid], outputs, started,
                    time.monotonic() - t0)
    print(f"pearson r = {report.pearson_r:.4f}; reports in {args.outdir}")
    return EXIT_OK


def cmd_fit_decision(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    model = load_checkpoint(args.checkpoint)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []
    summary_rows = []
    for grid_path in args.grid:
        ds = load_dataset(grid_path)
        if ds.grid is None:
            raise ConfigurationError(f"{grid_path} is not an evaluation grid")
        reps = ds.grid.frames_per_value
        estimates = predict(model, ds.frames).reshape(-1, reps)
        fits, degenerate = [], 0
        for value, row in zip(ds.grid.grid_values, estimates):
            try:
                fits.append(fit_gaussian(row, offset=value))
            except NumericError:
                degenerate += 1
        lo, hi = ds.spec.snr_db_range
        snr_tag = f"{lo:g}" if lo == hi else f"{lo:g}-{hi:g}"
        dm = build_decision_model(fits, significance=args.significance)
        out = os.path.join(args.outdir, f"decision_snr{snr_tag}.json")
        dm.save(out)
        outputs.append(out)
        p_values = [f.gof_p_value for f in fits]
        avg_p = float(np.mean(p_values))
        summary_rows.append((snr_tag, ds.spec.family, len(fits), degenerate,
                             avg_p, "accepted" if avg_p >= args.significance
                             else "rejected"))
    lines = ["snr_db,family,n_fits,n_degenerate,avg_p_value,verdict"]
    lines += [",".join(str(v) for v in row) for row in summary_rows]
    gof_path = os.path.join(args.outdir, "gof_summary.csv")
    atomic_write_text(gof_path, "\n".join(lines) + "\n")
    outputs.append(gof_path)
    _write_manifest(args.outdir, "fit-decision",
                    {"significance": args.significance},
                    [args.checkpoint] + list(args.grid), outputs, started,
                    time.monotonic() - t0)
    for row in summary_rows:
        print(f"snr={row[0]} avg_p={row[4]:.3f} {row[5]}")
    return EXIT_OK


def cmd_sei(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    doc = _read_json(args.scenario)
    scheme = ModulationScheme(doc["modulation"]["family"],
                              int(doc["modulation"]["order"]))
    emitters = [EmitterProfile(emitter_id=e.get("id", f"emitter{i + 1}"),
                               alpha=float(e["alpha"]),
                               theta_deg=float(e["theta_deg"]), scheme=scheme)
                for i, e in enumerate(doc["emitters"])]
    estimator_paths = dict(doc["estimators"])
    if args.estimator:
        for pair in args.estimator:
            arm, _, path = pair.partition("=")
            estimator_paths[arm] = path
    models = {arm: load_checkpoint(path)
              for arm, path in estimator_paths.items()}
    k_values = [int(k) for k in args.k.split(",")] if args.k \
        else [int(k) for k in doc.get("k_values", (1, 10))]
    points = run_scenario(models, emitters, doc["snr_list"],
                          k_values=k_values,
                          n_trials=int(doc.get("n_trials", 2000)),
                          frame_len=int(doc.get("frame_len", 1024)),
                          fit_frames=int(doc.get("fit_frames", 400)),
                          seed=int(doc.get("seed", 0)),
                          sps=float(doc.get("sps", 2.0)),
                          freq_offset=float(doc.get("freq_offset", 0.0)))
    os.makedirs(args.outdir, exist_ok=True)
    out = os.path.join(args.outdir, "accuracy_vs_snr.csv")
    write_accuracy_csv(out, points)
    _write_manifest(args.outdir, "sei",
                    {"scenario": doc, "k_values": k_values,
                     "estimators": estimator_paths},
                    [args.scenario] + list(estimator_paths.values()), [out],
                    started, time.monotonic() - t0)
    for p in points:
        print(f"{p.arm} snr={p.snr_db:g} K={p.k_captures}: "
              f"accuracy={p.accuracy:.3f}")
    return EXIT_OK


def cmd_report(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    sections = []
    for root in args.inputs:
        for dirpath, _dirnames, filenames in os.walk(root):
            for name in sorted(filenames):
                path = os.path.join(dirpath, name)
                if name.endswith("manifest.json"):
                    doc = _read_json(path)
                    sections.append(
                        f"## {doc.get('command', '?')} ({path})\n\n"
                        f"- started: {doc.get('started_utc')}\n"
                        f"- duration: {doc.get('duration_s')} s\n"
                        f"- outputs: {', '.join(doc.get('outputs', []))}\n")
                elif name.endswith(".csv"):
                    with open(path, "r", encoding="utf-8") as fh:
                        rows = fh.read().strip().splitlines()
                    body = "\n".join(rows[:12])
                    more = f"\n... ({len(rows) - 12} more rows)" \
                        if len(rows) > 12 else ""
                    sections.append(f"## {path}\n\n```\n{body}{more}\n```\n")
    text = "# rfsei run report\n\n" + "\n".join(sections) + "\n"
    atomic_write_text(args.out, text)
    _write_manifest(args.out, "report", {"inputs": list(args.inputs)},
                    list(args.inputs), [args.out], started,
                    time.monotonic() - t0)
    print(f"report written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfsei",
        description="Emitter identification via IQ-imbalance estimators")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap numeric worker threads")
    parser.add_argument("--deterministic", action="store_true",
                        help="force single-threaded numerics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a dataset or eval grid")
    p.add_argument("--spec", required=True, help="JSON dataset spec")
    p.add_argument("--out", required=True, help="output .rfpd path")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train an estimator")
    p.add_argument("--dataset", required=True)
    p.add_argument("--network", help="JSON network config (default preset)")
    p.add_argument("--train", help="JSON train config")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .rfpm checkpoint")
    p.add_argument("--loss-csv", help="loss history CSV path")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="bias/variance/scatter reports")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", required=True, help="evaluation-grid .rfpd")
    p.add_argument("--outdir", required=True)
    p.add_argument("--snr-list", help="comma-separated SNRs for the sweep")
    p.add_argument("--sweep-frames", type=int, default=1000)
    p.add_argument("--sweep-seed", type=int, default=0)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("fit-decision",
                       help="Gaussian fits, GoF table, decision model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", action="append", required=True,
                   help="evaluation-grid .rfpd (repeatable, one per SNR)")
    p.add_argument("--significance", type=float, default=0.05)
    p.add_argument("--outdir", required=True)
    p.set_defaults(fn=cmd_fit_decision)

    p = sub.add_parser("sei", help="run an emitter-identification scenario")
    p.add_argument("--scenario", required=True, help="JSON scenario file")
    p.add_argument("--outdir", required=True)
    p.add_argument("--k", help="comma-separated capture counts")
    p.add_argument("--estimator", action="append",
                   help="arm=checkpoint override (repeatable)")
    p.set_defaults(fn=cmd_sei)

    p = sub.add_parser("report", help="aggregate manifests and CSVs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.deterministic:
        _limit_threads(1)
    elif args.threads:
        _limit_threads(args.threads)
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RfseiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
