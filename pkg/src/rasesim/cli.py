"""
Command-line front end.

Subcommands::

    rasesim curves   [--config PATH] [--out DIR]
    rasesim simulate [--config PATH] [--seed N] [--shots N] [--out DIR]
    rasesim analyze  DUMP [--config PATH] [--out DIR] [--window-us F] [--bootstrap]
    rasesim fit      TABLE [--out DIR]

Exit codes: 0 success, 2 usage/config error, 3 data-format error,
4 numerical failure, 1 I/O error. The default output root comes from
``$RASESIM_OUT`` when ``--out`` is not given, else from the config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from rasesim import __version__
from rasesim.analysis import (
    EFFICIENCY_COLUMNS,
    INSEP_COLUMNS,
    MODEL_UNDEFINED,
    NEGATIVE_MODEL,
    UNTRUSTED_ALPHA,
    build_efficiency_curve,
    efficiency_rows,
    estimate_inseparability,
    fit_loss_detailed,
    invert_ase_for_alpha,
    min_estimate,
    overlay_model,
    summarize_records,
    write_table,
)
from rasesim.config import ExperimentConfig
from rasesim.errors import (
    ConfigError,
    DataFormatError,
    DomainError,
    FitError,
    FormatVersionError,
    InvalidArgument,
    LowConfidencePhase,
    NoGainError,
    PairingError,
    UndefinedEfficiency,
)
from rasesim.estimators import variance_of, write_quadrature_table, write_variance_summary
from rasesim.model import (
    EFFICIENCY_NEGATIVE_BELOW,
    PROBE_SATURATION_ALPHA,
    ase_variance,
    insep_curve,
    rase_efficiency,
)
from rasesim.records import configs_from_header, read_dump, write_dump
from rasesim.synth import effective_gain, synthesize_run

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 1, 2, 3, 4
OUT_ENV = "RASESIM_OUT"


class UsageError(Exception):
    pass


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    root = args.out or os.environ.get(OUT_ENV) or cfg.output_dir
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.defaults()
    seq = {}
    if getattr(args, "seed", None) is not None:
        seq["rng_seed"] = args.seed
    if getattr(args, "shots", None) is not None:
        seq["n_shots"] = args.shots
    if seq:
        cfg = cfg.with_overrides(**seq)
    ana = {}
    if getattr(args, "window_us", None) is not None:
        ana["window_us"] = args.window_us
    if getattr(args, "bootstrap", False):
        ana["bootstrap"] = True
    if ana:
        cfg = replace(cfg, analysis=replace(cfg.analysis, **ana))
    return cfg


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- commands -----------------------------------------------------------------

def cmd_curves(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Write the three model tables: ASE variance, efficiency, inseparability."""
    g = cfg.gain
    var_rows, eff_rows = [], []
    for a in cfg.analysis.alpha_grid:
        a = float(a)
        var_rows.append({"alpha_l": a, "value": ase_variance(replace(g, alpha_l=a))})
        if a > 0:
            flags = (NEGATIVE_MODEL,) if a < EFFICIENCY_NEGATIVE_BELOW else ()
            eff_rows.append({"alpha_l": a, "value": rase_efficiency(a), "flags": flags})
        else:
            eff_rows.append({"alpha_l": a, "value": math.nan, "flags": (MODEL_UNDEFINED,)})
    insep_rows = [{"b": p.b, "value": p.total_variance} for p in insep_curve(g, cfg.analysis.b_grid)]
    paths = [out / "ase_variance.csv", out / "efficiency.csv", out / "inseparability_model.csv"]
    write_table(paths[0], ("alpha_l", "value"), var_rows)
    write_table(paths[1], ("alpha_l", "value", "flags"), eff_rows)
    write_table(paths[2], ("b", "value"), insep_rows)
    return paths


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> Path:
    """Synthesize a run, write ``records.bin`` and ``manifest.json``; returns the dump path."""
    dump = out / "records.bin"
    records = synthesize_run(cfg.sequence, cfg.noise, workers=cfg.analysis.workers)
    try:
        n = write_dump(dump, cfg.sequence, cfg.noise, records)
    except OSError as exc:
        raise OSError(f"writing {dump}: {exc}") from exc
    cfg.save(out / "config.ini")
    manifest = {
        "package_version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.sequence.rng_seed,
        "n_shots": n,
        "kind": cfg.sequence.kind,
        "dump": dump.name,
        "dump_sha256": _sha256(dump),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return dump


def cmd_analyze(dump_path: str | Path, cfg: ExperimentConfig, out: Path) -> dict:
    """Estimate quadratures, variances, efficiency and inseparability from a dump."""
    header, records = read_dump(dump_path)
    seq, noise = configs_from_header(header)
    opts = cfg.analysis
    run, tables = summarize_records(records, seq, noise, opts.window_us, opts.empirical_vacuum)
    if opts.bootstrap:
        run = replace(
            run,
            ase=variance_of(tables["ASE"], bootstrap=True, seed=seq.rng_seed),
            rase=variance_of(tables["RASE"], bootstrap=True, seed=seq.rng_seed),
        )
    write_quadrature_table(out / "quadratures.csv", tables["ASE"] + tables["RASE"])
    write_variance_summary(out / "variance_summary.csv", {"ASE": run.ase, "RASE": run.rase})

    summary: dict = {
        "kind": seq.kind,
        "alpha_l": seq.alpha_l,
        "ase_variance": run.ase.mean_var,
        "ase_se": run.ase.se,
        "rase_variance": run.rase.mean_var,
        "rase_se": run.rase.se,
        "model_ase_variance": ase_variance(seq.gain),
    }
    if run.ase.mean_var > 1:
        summary["alpha_from_ase"] = invert_ase_for_alpha(run.ase.mean_var, seq.transmission_l)
    try:
        points = build_efficiency_curve([run], cfg.decay)
    except UndefinedEfficiency as exc:
        points = []
        summary["efficiency_error"] = str(exc)
    write_table(out / "efficiency.csv", EFFICIENCY_COLUMNS, efficiency_rows(points))

    est = estimate_inseparability(tables["ASE"], tables["RASE"], opts.b_grid)
    rows = overlay_model(est, effective_gain(seq, noise))
    write_table(out / "inseparability.csv", INSEP_COLUMNS, rows)
    best = min_estimate(est)
    summary.update(
        min_b=best.b,
        min_total_variance=best.total_variance,
        min_se=best.se,
        sigma_violation=best.sigma_violation,
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def read_variance_table(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"alpha_l", "value"} <= set(reader.fieldnames):
            raise UsageError(f"{path}: table needs 'alpha_l' and 'value' columns")
        rows = []
        for i, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "alpha_l": float(row["alpha_l"]),
                        "value": float(row["value"]),
                        "se": float(row["se"]) if row.get("se") not in (None, "") else None,
                    }
                )
            except ValueError as exc:
                raise DataFormatError(f"{path}:{i}: {exc}") from exc
    if not rows:
        raise UsageError(f"{path}: table is empty")
    return rows


def cmd_fit(table: str | Path, out: Path) -> dict:
    """Fit the detection transmission to an (alpha_l, ASE variance[, se]) table."""
    rows = read_variance_table(table)
    have_se = all(r["se"] is not None for r in rows)
    fit = fit_loss_detailed(
        [r["alpha_l"] for r in rows],
        [r["value"] for r in rows],
        [r["se"] for r in rows] if have_se else None,
    )
    write_table(
        out / "fit.csv",
        ("l", "l_se", "chi2", "dof", "n"),
        [{"l": fit.l, "l_se": fit.l_se, "chi2": fit.chi2, "dof": fit.dof, "n": len(rows)}],
    )
    point_rows = []
    for r, res in zip(rows, fit.residuals):
        flags: tuple[str, ...] = ()
        try:
            alpha_ase = invert_ase_for_alpha(r["value"], fit.l) if fit.l > 0 else math.nan
        except NoGainError:
            alpha_ase, flags = math.nan, ("no_gain",)
        if r["alpha_l"] >= PROBE_SATURATION_ALPHA:
            flags += (UNTRUSTED_ALPHA,)
        point_rows.append(
            {
                "alpha_l": r["alpha_l"],
                "value": r["value"],
                "se": r["se"] if r["se"] is not None else "",
                "alpha_from_ase": alpha_ase,
                "residual": res,
                "flags": flags,
            }
        )
    write_table(out / "fit_points.csv", ("alpha_l", "value", "se", "alpha_from_ase", "residual", "flags"), point_rows)
    return {"l": fit.l, "l_se": fit.l_se, "chi2": fit.chi2, "dof": fit.dof}


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rasesim", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"rasesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI or JSON experiment config (default: shipped defaults)")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or config [output] dir)")

    p = sub.add_parser("curves", help="write model curves")
    common(p)

    p = sub.add_parser("simulate", help="synthesize shot records")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)

    p = sub.add_parser("analyze", help="analyze a record dump")
    common(p)
    p.add_argument("dump")
    p.add_argument("--window-us", type=float, dest="window_us")
    p.add_argument("--bootstrap", action="store_true")

    p = sub.add_parser("fit", help="fit the detection loss to an ASE-variance table")
    common(p)
    p.add_argument("table")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args)
        out = _out_dir(args, cfg)
        if args.command == "curves":
            for path in cmd_curves(cfg, out):
                print(path)
        elif args.command == "simulate":
            print(cmd_simulate(cfg, out))
        elif args.command == "analyze":
            print(json.dumps(cmd_analyze(args.dump, cfg, out), indent=2, sort_keys=True))
        elif args.command == "fit":
            print(json.dumps(cmd_fit(args.table, out), indent=2, sort_keys=True))
    except (UsageError, ConfigError, InvalidArgument) as exc:
        print(f"rasesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FormatVersionError, PairingError) as exc:
        print(f"rasesim: data error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (FitError, DomainError, UndefinedEfficiency, LowConfidencePhase, NoGainError) as exc:
        print(f"rasesim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"rasesim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
