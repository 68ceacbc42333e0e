"""Command-line interface.

Subcommands:

    samplab run CONFIG        run a configured study, write artifacts
    samplab run demo          run the small packaged demonstration config
    samplab validate CONFIG   check a config and print derived quantities
    samplab synth-stemmap     generate a synthetic tree census + rasters
    samplab variogram CSV     residual variogram diagnostics for a population

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical
error.  ``validate`` always exits 0 and carries problems in its report.

Every run writes a ``manifest.json`` recording the tool version, master
seed, config hash, and a content hash per artifact file; the manifest says
``incomplete`` until the run finishes, so interrupted output directories
are recognizable.  With a fixed seed, CSV artifacts are byte-identical
across runs and worker counts, and figures carry no timestamps.
"""

import argparse
import copy
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import (DEFAULTS, apply_overrides, build_base_spec,
                     build_frame, build_plot_design, build_region,
                     build_study_config, build_synthesis_spec, canonical_yaml,
                     config_hash, demo_config, derived_report,
                     ladder_esr_bounds, load_config_file, validate_config)
from .errors import (CapacityError, ConfigError, GeometryError,
                     IngestionError, LayoutError, SamplabError)
from .estimators import (ESTIMATOR_MODELS, TRANSFORM_IDENTITY, design_matrix,
                         ols_fit)
from .frame import cell_centers
from .gaussfield import PopulationTask, ladder_specs, ladder_tasks
from .montecarlo import (ladder_study, replicates_to_csv, smoothed_to_csv,
                         summaries_to_csv)
from .stemmap import (run_hf_study, synthesize_stemmap, write_covariate_raster,
                      write_stemmap)
from .variogram import empirical_semivariogram, fit_exponential, variogram_to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_CONFIG_FAILURES = (ConfigError, LayoutError, CapacityError, GeometryError,
                    IngestionError, FileNotFoundError, yaml.YAMLError)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(outdir: Path, cfg: dict, status: str, files) -> Path:
    manifest = {
        "tool": "samplab",
        "version": __version__,
        "mode": cfg.get("mode"),
        "master_seed": cfg.get("master_seed"),
        "workers": cfg.get("workers"),
        "config_sha256": config_hash(cfg),
        "status": status,
        "files": {Path(f).name: _sha256_file(Path(f)) for f in sorted(map(str, files))},
    }
    path = outdir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_cfg(args) -> dict:
    config_arg = getattr(args, "config", None)
    if config_arg == "demo" and not Path("demo").exists():
        cfg = demo_config()
    elif config_arg is not None:
        cfg = load_config_file(config_arg)
    else:
        cfg = copy.deepcopy(DEFAULTS)
    cfg = apply_overrides(cfg, args.set or [])
    if getattr(args, "output_dir", None):
        cfg["output_dir"] = args.output_dir
    if getattr(args, "workers", None):
        cfg["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        cfg["master_seed"] = args.seed
    return cfg


def _figures_module():
    # deferred so CSV-only paths never pay the matplotlib import
    from . import figures
    return figures


def _run_ladder(cfg: dict, outdir: Path) -> list:
    frame = build_frame(cfg)
    base_spec = build_base_spec(cfg)
    esr_lo, esr_hi = ladder_esr_bounds(cfg, frame)
    count = int(cfg["ladder"]["count"])
    seed = int(cfg["master_seed"])
    study_cfg = build_study_config(cfg)
    tasks = ladder_tasks(frame, base_spec, esr_lo, esr_hi, count, seed)
    result = ladder_study(tasks, study_cfg, n_workers=int(cfg["workers"]))

    files = []
    summaries_to_csv(result.summaries, outdir / "summaries.csv")
    files.append(outdir / "summaries.csv")
    smoothed_to_csv(result.smoothed, outdir / "smoothed.csv")
    files.append(outdir / "smoothed.csv")
    if study_cfg.keep_replicates:
        replicates_to_csv(result.records, outdir / "replicates.csv")
        files.append(outdir / "replicates.csv")

    if cfg["figures"]["enabled"]:
        figures = _figures_module()
        pick = cfg["figures"]["population_index"]
        pick = count // 2 if pick is None else int(pick)
        if not 0 <= pick < count:
            raise ConfigError(f"figures.population_index {pick} outside ladder "
                              f"of {count} populations")
        spec = ladder_specs(base_spec, esr_lo, esr_hi, count)[pick]
        population = PopulationTask(frame, spec, seed, pick).build()
        files.append(figures.population_map(population,
                                            outdir / "population_map.svg"))
        for dspec in study_cfg.designs:
            n = dspec.sample_size(frame)
            rows = [r for r in result.smoothed
                    if r.design == dspec.kind and r.n == n]
            name = f"variance_{dspec.kind.lower()}_n{n}.svg"
            files.append(figures.variance_panels(
                rows, f"{dspec.kind}, n = {n}: variance across the ladder",
                outdir / name))
        files.append(figures.bias_panels(result.smoothed, outdir / "bias.svg"))
        if cfg["figures"]["variogram"]:
            files.append(_residual_variogram_figure(
                population, tuple(cfg["estimators"]), outdir, figures))
    return files


def _residual_variogram_figure(population, tags, outdir: Path, figures) -> Path:
    locations = cell_centers(population.frame)
    entries = []
    for tag in tags:
        model = ESTIMATOR_MODELS[tag]
        if model.transform != TRANSFORM_IDENTITY:
            continue
        X = design_matrix(model, population.covariate_columns(),
                          population.frame.n_cells)
        beta = ols_fit(X, population.y)
        resid = population.y - X @ beta
        label = "y" if model.p == 1 else f"{tag} residuals"
        vario = empirical_semivariogram(locations, resid)
        entries.append((label, vario, fit_exponential(vario)))
    path = outdir / "variogram.svg"
    figures.variogram_panel(entries, path, title="residual semivariograms")
    return path


_TABLE_COLUMNS = ["estimator", "mean_estimate", "empirical_variance",
                  "mean_estimated_variance", "percent_bias"]


def _write_estimator_table(summaries, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_TABLE_COLUMNS)
        for s in summaries:
            writer.writerow([s.estimator, repr(s.mean_of_mu_hat),
                             repr(s.empirical_variance),
                             repr(s.mean_estimated_variance),
                             repr(s.percent_bias)])
    return path


def _run_stemmap(cfg: dict, outdir: Path) -> list:
    region = build_region(cfg)
    synth = build_synthesis_spec(cfg)
    design = build_plot_design(cfg)
    seed = int(cfg["master_seed"])
    stemmap, raster = synthesize_stemmap(region, synth, seed)
    files = []
    if cfg["stemmap"]["write_census"]:
        write_stemmap(stemmap, outdir / "stemmap.csv")
        files += [outdir / "stemmap.csv", outdir / "stemmap.csv.meta.json"]
        write_covariate_raster(raster, outdir / "covariates.csv")
        files += [outdir / "covariates.csv", outdir / "covariates.csv.meta.json"]
    study_cfg = build_study_config(
        cfg, designs=(), estimators=cfg["stemmap"]["estimators"],
        replications=cfg["stemmap"]["replicates"])
    summaries, records = run_hf_study(stemmap, raster, design, study_cfg)
    summaries_to_csv(summaries, outdir / "summaries.csv")
    files.append(outdir / "summaries.csv")
    files.append(_write_estimator_table(summaries, outdir / "estimator_table.csv"))
    if study_cfg.keep_replicates and records:
        replicates_to_csv(records, outdir / "replicates.csv")
        files.append(outdir / "replicates.csv")
    if cfg["figures"]["enabled"]:
        figures = _figures_module()
        files.append(figures.stemmap_map(stemmap, raster,
                                         outdir / "stemmap_map.svg"))
        files.append(figures.estimator_table(summaries,
                                             outdir / "estimator_table.svg"))
    return files


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    violations = validate_config(cfg)
    if violations:
        print("configuration problems:", file=sys.stderr)
        for v in violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    _write_manifest(outdir, cfg, "incomplete", [])
    mode = cfg["mode"]
    files = _run_stemmap(cfg, outdir) if mode == "stemmap" else \
        _run_ladder(cfg, outdir)
    with open(outdir / "config.yaml", "w") as fh:
        fh.write(canonical_yaml(cfg))
    files.append(outdir / "config.yaml")
    _write_manifest(outdir, cfg, "complete", files)
    print(f"wrote {len(files)} artifacts to {outdir}")
    for name in sorted(Path(f).name for f in files):
        print(f"  {name}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = _load_cfg(args)
    except _CONFIG_FAILURES as err:
        print("configuration problems:")
        print(f"  - cannot load config: {err}")
        return EXIT_OK
    violations = validate_config(cfg)
    if violations:
        print("configuration problems:")
        for v in violations:
            print(f"  - {v}")
    else:
        print("configuration is valid")
    lines = derived_report(cfg)
    if lines:
        print("derived quantities:")
        for line in lines:
            print(f"  {line}")
    return EXIT_OK


def cmd_synth_stemmap(args) -> int:
    cfg = _load_cfg(args)
    region = build_region(cfg)
    synth = build_synthesis_spec(cfg)
    seed = int(cfg["master_seed"])
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    _write_manifest(outdir, cfg, "incomplete", [])
    stemmap, raster = synthesize_stemmap(region, synth, seed)
    write_stemmap(stemmap, outdir / "stemmap.csv")
    write_covariate_raster(raster, outdir / "covariates.csv")
    files = [outdir / "stemmap.csv", outdir / "stemmap.csv.meta.json",
             outdir / "covariates.csv", outdir / "covariates.csv.meta.json"]
    if cfg["figures"]["enabled"]:
        figures = _figures_module()
        files.append(figures.stemmap_map(stemmap, raster,
                                         outdir / "stemmap_map.svg"))
    _write_manifest(outdir, cfg, "complete", files)
    print(f"synthesized {stemmap.n_trees} trees over "
          f"{raster.frame.n_cols} x {raster.frame.n_rows} cells -> {outdir}")
    return EXIT_OK


def _read_population_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path} is empty")
        needed = {"row", "col", "y"}
        if not needed <= set(reader.fieldnames):
            raise IngestionError(
                f"{path} must have columns row, col, y; found {reader.fieldnames}")
        covariate_names = [name for name in reader.fieldnames
                           if name not in ("cell_index", "row", "col", "y")]
        rows, cols, ys = [], [], []
        covs = {name: [] for name in covariate_names}
        for rownum, rec in enumerate(reader, start=1):
            try:
                rows.append(int(rec["row"]))
                cols.append(int(rec["col"]))
                ys.append(float(rec["y"]))
                for name in covariate_names:
                    covs[name].append(float(rec[name]))
            except (TypeError, ValueError):
                raise IngestionError(f"{path}: row {rownum}: malformed "
                                     f"record {rec!r}") from None
    return (np.array(rows), np.array(cols), np.array(ys),
            {name: np.array(v) for name, v in covs.items()})


def cmd_variogram(args) -> int:
    rows, cols, y, covs = _read_population_csv(args.input)
    cell = float(args.cell_side)
    locations = np.column_stack([(cols + 0.5) * cell, (rows + 0.5) * cell])
    tags = [t.strip() for t in args.estimators.split(",") if t.strip()]
    unknown = [t for t in tags if t not in ESTIMATOR_MODELS]
    if unknown:
        raise ConfigError(f"unknown estimator tags {unknown}; valid: "
                          f"{', '.join(ESTIMATOR_MODELS)}")
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for tag in tags:
        model = ESTIMATOR_MODELS[tag]
        if model.transform != TRANSFORM_IDENTITY:
            raise ConfigError(f"estimator {tag} uses a transformed fit; "
                              f"variogram diagnostics support HT, GREG1, GREG2")
        X = design_matrix(model, covs, len(y))
        beta = ols_fit(X, y)
        resid = y - X @ beta
        vario = empirical_semivariogram(locations, resid,
                                        num_bins=args.num_bins,
                                        max_lag=args.max_lag)
        fit = fit_exponential(vario)
        label = "y" if model.p == 1 else f"{tag} residuals"
        variogram_to_csv(vario, outdir / f"variogram_{tag.lower()}.csv", fit)
        entries.append((label, vario, fit))
        print(f"{tag}: nugget = {fit.nugget:.6g}, partial sill = "
              f"{fit.partial_sill:.6g}, esr = {fit.esr:.6g}")
    figures = _figures_module()
    figures.variogram_panel(entries, outdir / "variogram.svg",
                            title="residual semivariograms")
    print(f"wrote variogram diagnostics to {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samplab",
        description="Simulation laboratory for design-based variance "
                    "estimation on spatial populations.")
    parser.add_argument("--version", action="version",
                        version=f"samplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (YAML-parsed value); "
                             "repeatable, e.g. --set replication.replicates=50")
    common.add_argument("--output-dir", help="artifact directory override")
    common.add_argument("--seed", type=int, help="master seed override")

    p_run = sub.add_parser("run", parents=[common],
                           help="run a configured study end to end")
    p_run.add_argument("config", help="config file path, or 'demo'")
    p_run.add_argument("--workers", type=int,
                       help="worker process count (default from config)")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", parents=[common],
                           help="validate a config and report derived "
                                "quantities (never fails hard)")
    p_val.add_argument("config", help="config file path, or 'demo'")
    p_val.add_argument("--workers", type=int, help=argparse.SUPPRESS)
    p_val.set_defaults(func=cmd_validate)

    p_synth = sub.add_parser("synth-stemmap", parents=[common],
                             help="generate a synthetic tree census with "
                                  "covariate rasters")
    p_synth.add_argument("--config", default=None,
                         help="optional config supplying the stemmap section")
    p_synth.set_defaults(func=cmd_synth_stemmap)

    p_vario = sub.add_parser("variogram",
                             help="empirical variograms and exponential fits "
                                  "of population residuals")
    p_vario.add_argument("input", help="population CSV (cell_index,row,col,"
                                       "covariates...,y)")
    p_vario.add_argument("--estimators", default="HT,GREG1,GREG2",
                         help="comma-separated tags (default HT,GREG1,GREG2)")
    p_vario.add_argument("--cell-side", type=float, default=1.0,
                         help="cell side length for lag distances (default 1)")
    p_vario.add_argument("--num-bins", type=int, default=15)
    p_vario.add_argument("--max-lag", type=float, default=None)
    p_vario.add_argument("--output-dir", default="samplab-variogram")
    p_vario.set_defaults(func=cmd_variogram)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_FAILURES as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SamplabError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except MemoryError:
        print("runtime error: out of memory", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as err:  # numerical failures from libraries, etc.
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
