"""Command-line interface.

Subcommands::

    imputekit impute --input data.csv --output-dir out --method mice-cart
    imputekit score --input data.csv --output-dir out --methods mice-cart,knn
    imputekit bench gaussian|uniform-quantile|coverage --output-dir out

Every run is fully determined by its configuration (flags override config
file entries, which override the ``--fast`` presets and the built-in
defaults); reruns with the same seed give byte-identical CSV output, and
``--jobs`` only changes scheduling, never results.  Exit codes: 0 success,
1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from functools import partial
from pathlib import Path

import numpy as np

from . import benchmarks as bm
from . import svgplot
from .dataset import read_csv, write_csv
from .engines import CLI_METHODS, MiceConfig, make_imputer, mice_impute
from .errors import ConfigError, ImputekitError
from .rng import seed_tree
from .scoring import iscore, rank_methods, select_test_cells, write_score_csv
from .uncertainty import coverage_experiment, quantile_estimator, write_coverage_csv

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "m": 5,
    "max_iter": 10,
    "k": 5,
    "n_trees": 10,
    "L": 30,
    "B": 200,
    "reps": None,  # per-experiment default
    "n": None,
    "d": 5,
    "alpha": 0.1,
    "ci_level": 0.05,
    "mask_fraction": 0.2,
    "N": 20,
    "miss_prob": 0.5,
    "copula_rho": 0.95,
    "methods": None,
    "method": None,
    "input": None,
    "output_dir": "out",
}

FAST_PRESETS = {"reps": 10, "B": 25, "L": 15}

EXPERIMENT_DEFAULTS = {
    "gaussian": {"n": 5000, "reps": 10},
    "uniform-quantile": {"n": 5000, "reps": 50, "methods": "mice-cart,mice-rf,knn,missforest"},
    "coverage": {"n": 2000, "methods": "mice-cart,mice-rf,knn"},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imputekit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--output-dir", dest="output_dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--fast", action="store_true", default=False,
                       help="desk-scale presets (reps=10, B=25, L=15)")

    p_imp = sub.add_parser("impute", help="impute a CSV file")
    add_common(p_imp)
    p_imp.add_argument("--input", default=None)
    p_imp.add_argument("--method", default=None, choices=CLI_METHODS)
    p_imp.add_argument("--m", type=int, default=None)
    p_imp.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_imp.add_argument("--k", type=int, default=None)
    p_imp.add_argument("--trees", dest="n_trees", type=int, default=None)

    p_sc = sub.add_parser("score", help="rank imputation methods on a CSV file")
    add_common(p_sc)
    p_sc.add_argument("--input", default=None)
    p_sc.add_argument("--methods", default=None, help="comma-separated method names")
    p_sc.add_argument("--N", dest="N", type=int, default=None, help="imputations per method")
    p_sc.add_argument("--mask-fraction", dest="mask_fraction", type=float, default=None)
    p_sc.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_sc.add_argument("--k", type=int, default=None)
    p_sc.add_argument("--trees", dest="n_trees", type=int, default=None)

    p_be = sub.add_parser("bench", help="run a benchmark experiment")
    p_be.add_argument("experiment", choices=("gaussian", "uniform-quantile", "coverage"))
    add_common(p_be)
    p_be.add_argument("--n", type=int, default=None)
    p_be.add_argument("--d", type=int, default=None)
    p_be.add_argument("--reps", type=int, default=None)
    p_be.add_argument("--B", dest="B", type=int, default=None)
    p_be.add_argument("--L", dest="L", type=int, default=None)
    p_be.add_argument("--alpha", type=float, default=None)
    p_be.add_argument("--m", type=int, default=None)
    p_be.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_be.add_argument("--k", type=int, default=None)
    p_be.add_argument("--trees", dest="n_trees", type=int, default=None)
    p_be.add_argument("--methods", default=None)
    return parser


def _parse_value(raw: str):
    raw = raw.strip()
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw


def _read_config_file(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for ln, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
        out[key] = _parse_value(raw)
    return out


def _merge_config(args: argparse.Namespace, experiment: str | None = None) -> dict:
    cfg = dict(DEFAULTS)
    if experiment:
        cfg.update(EXPERIMENT_DEFAULTS[experiment])
    if args.fast:
        cfg.update({k: v for k, v in FAST_PRESETS.items() if k in cfg})
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config))
    for key in cfg:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            cfg[key] = flag_val
    return cfg


def _method_list(cfg: dict) -> list[str]:
    raw = cfg.get("methods")
    if not raw:
        raise ConfigError("no methods given")
    return [tok.strip() for tok in str(raw).split(",") if tok.strip()]


def _imputer_from(cfg: dict, name: str):
    return make_imputer(
        name, max_iter=cfg["max_iter"], k=cfg["k"], n_trees=cfg["n_trees"]
    )


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_input(cfg: dict) -> Path:
    if not cfg.get("input"):
        raise ConfigError("--input is required")
    path = Path(cfg["input"])
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    return path


def cmd_impute(args) -> int:
    cfg = _merge_config(args)
    if not cfg.get("method"):
        raise ConfigError("--method is required")
    ds = read_csv(_require_input(cfg))
    out = _out_dir(cfg)
    imputer = _imputer_from(cfg, cfg["method"])
    written: list[Path] = []
    try:
        chains = None
        if cfg["method"].startswith("mice-"):
            mi = mice_impute(
                ds,
                MiceConfig(
                    method=cfg["method"].removeprefix("mice-").replace("-", "_"),
                    m=cfg["m"], max_iter=cfg["max_iter"], seed=cfg["seed"],
                    model_params={"n_trees": cfg["n_trees"]},
                ),
            )
            completions = mi.completions
            chains = mi.chain_means
        else:
            completions = imputer.impute(ds, seed_tree(cfg["seed"]), m=cfg["m"])
        for i in range(cfg["m"]):
            path = out / f"imp_{i + 1}.csv"
            write_csv(completions[min(i, len(completions) - 1)], path)
            written.append(path)
        mask_path = out / "mask.csv"
        with open(mask_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(ds.column_names)
            for row in ds.mask.astype(int):
                writer.writerow(list(row))
        written.append(mask_path)
        chains_path = out / "chains.csv"
        with open(chains_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain", "iteration", "column", "mean_imputed"])
            if chains is not None:
                for c in range(chains.shape[0]):
                    for it in range(chains.shape[1]):
                        for j, name in enumerate(ds.column_names):
                            v = chains[c, it, j]
                            if np.isfinite(v):
                                writer.writerow([c + 1, it + 1, name, repr(float(v))])
        written.append(chains_path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return 0


def cmd_score(args) -> int:
    cfg = _merge_config(args)
    ds = read_csv(_require_input(cfg))
    out = _out_dir(cfg)
    names = _method_list(cfg)
    imputers = [_imputer_from(cfg, nm) for nm in names]
    cells = select_test_cells(ds, cfg["mask_fraction"], seed_tree(cfg["seed"], (0,)))
    entries = []
    for mi, imputer in enumerate(imputers):
        entries.append(
            iscore(
                ds, imputer, rng=seed_tree(cfg["seed"], (1, mi)),
                n_imputations=cfg["N"], mask_fraction=cfg["mask_fraction"],
                jobs=cfg["jobs"], cells=cells,
            )
        )
    report = rank_methods(entries)
    write_score_csv(report, out / "score_report.csv")
    print("rank  method                overall_score")
    for pos, name in enumerate(report.ranking, start=1):
        entry = next(e for e in report.entries if e.method == name)
        print(f"{pos:<5d} {name:<21s} {entry.overall:.6f}")
    if report.tied:
        print("note: ties broken alphabetically")
    return 0


def _color_by(flags, on, off):
    return [on if f else off for f in flags]


def cmd_bench_gaussian(cfg: dict) -> int:
    out = _out_dir(cfg)
    gcfg = bm.GaussianExampleConfig(n=cfg["n"], miss_prob=cfg["miss_prob"])
    table = bm.run_gaussian_bench(
        gcfg, seed_tree(cfg["seed"], (0,)), reps=cfg["reps"], m=cfg["m"],
        max_iter=cfg["max_iter"], jobs=cfg["jobs"],
    )
    bm.write_gaussian_csv(table, out / "gaussian_rows.csv", out / "gaussian_summary.csv")

    full, masked = bm.sample_gaussian_example(gcfg, seed_tree(cfg["seed"], (1,)))
    miss = masked.mask[:, 0]
    pred = mice_impute(masked, MiceConfig(method="norm_predict", m=1, max_iter=cfg["max_iter"]),
                       rng=seed_tree(cfg["seed"], (2,))).completions[0]
    stoch = mice_impute(masked, MiceConfig(method="norm_nob", m=1, max_iter=cfg["max_iter"]),
                        rng=seed_tree(cfg["seed"], (3,))).completions[0]
    panels = [
        svgplot.ScatterPanel(
            "full data", full.values,
            _color_by(miss, svgplot.ORANGE, svgplot.BLUE),
        ),
        svgplot.ScatterPanel(
            "prediction imputation", pred.values,
            _color_by(pred.imputed_mask[:, 0], svgplot.GREEN, svgplot.BLUE),
        ),
        svgplot.ScatterPanel(
            "stochastic imputation", stoch.values,
            _color_by(stoch.imputed_mask[:, 0], svgplot.GREEN, svgplot.BLUE),
        ),
    ]
    svgplot.scatter_panels(panels, out / "gaussian.svg")
    print(f"full-data slope      {table.mean_full:.4f}")
    print(f"prediction slope     {table.mean_predict:.4f}")
    print(f"stochastic slope     {table.mean_stochastic:.4f}")
    return 0


def cmd_bench_uniform(cfg: dict) -> int:
    out = _out_dir(cfg)
    ucfg = bm.UniformExampleConfig(n=cfg["n"], d=cfg["d"], copula_rho=cfg["copula_rho"])
    imputers = [_imputer_from(cfg, nm) for nm in _method_list(cfg)]
    if cfg["alpha"] == 0.1 and cfg["copula_rho"] == 0.95:
        cc = bm.UNIFORM_CC_QUANTILE_01
    else:
        cc = bm.complete_case_oracle(ucfg, alpha=cfg["alpha"], n_oracle=2_000_000)
    table = bm.run_quantile_bench(
        imputers, ucfg, seed_tree(cfg["seed"], (0,)), reps=cfg["reps"],
        alpha=cfg["alpha"], m=cfg["m"], jobs=cfg["jobs"], cc_reference=cc,
    )
    bm.write_quantile_csv(table, out / "quantile_rows.csv", out / "quantile_summary.csv")
    order = [s.method for s in table.summaries]
    groups = [
        (name, np.array([r.estimate for r in table.rows if r.method == name]))
        for name in order
    ]
    svgplot.strip_plot(
        groups, out / "quantile.svg",
        vlines=[(cfg["alpha"], svgplot.BLUE, "true"), (cc, svgplot.RED, "complete-case")],
        title="quantile estimates by method",
    )
    print("method               mean       |bias|")
    for s in table.summaries:
        print(f"{s.method:<20s} {s.mean:.5f}  {s.abs_bias:.5f}")
    return 0


def cmd_bench_coverage(cfg: dict) -> int:
    out = _out_dir(cfg)
    ucfg = bm.UniformExampleConfig(n=cfg["n"], d=cfg["d"], copula_rho=cfg["copula_rho"])
    imputers = [_imputer_from(cfg, nm) for nm in _method_list(cfg)]
    generate = partial(_masked_uniform, ucfg)
    table = coverage_experiment(
        generate, true_value=cfg["alpha"], imputers=imputers,
        estimator=quantile_estimator("X1", cfg["alpha"]),
        rng=seed_tree(cfg["seed"], (0,)), n_sims=cfg["B"], n_boot=cfg["L"],
        alpha=cfg["ci_level"], m=cfg["m"], jobs=cfg["jobs"],
    )
    write_coverage_csv(table, out / "coverage_rows.csv", out / "coverage_summary.csv")
    by_method = [
        (im.name, [(r.lower, r.upper, r.covered) for r in table.rows if r.method == im.name])
        for im in imputers
    ]
    svgplot.interval_panels(by_method, cfg["alpha"], out / "coverage.svg")
    print("method               coverage   mean_width")
    for s in table.summaries:
        print(f"{s.method:<20s} {s.coverage:.3f}      {s.mean_width:.5f}")
    return 0


def _masked_uniform(ucfg, rng):
    return bm.sample_uniform_example(ucfg, rng)[1]


def cmd_bench(args) -> int:
    cfg = _merge_config(args, experiment=args.experiment)
    if args.experiment == "gaussian":
        return cmd_bench_gaussian(cfg)
    if args.experiment == "uniform-quantile":
        return cmd_bench_uniform(cfg)
    return cmd_bench_coverage(cfg)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "impute":
            return cmd_impute(args)
        if args.command == "score":
            return cmd_score(args)
        return cmd_bench(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ImputekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
