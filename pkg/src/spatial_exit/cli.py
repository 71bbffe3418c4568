"""
Command line front end.

    spatial-exit summarize --input panel.csv --out tables/
    spatial-exit simulate  --input skeleton.csv --year 2017 --level group \\
                           --rho 0.3 --beta ... --seed 1 --out sim.csv
    spatial-exit fit       --input panel.csv --year 2017 --level group \\
                           --estimator lgmm --out fit.json
    spatial-exit validate  --input panel.csv --year 2017 --level group \\
                           --seed 1 --out check.json

Exit codes: 0 success, 1 validation threshold failed, 2 input or
configuration error, 3 estimation failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .data import (DESIGN_COLUMNS, BlockLevel, build_design, exit_table,
                   file_digest, load_panel, summarize, summary_csvs,
                   write_panel, write_rejects, _atomic_write_text)
from .errors import (EstimationError, OracleScaleLimit, PanelError,
                     SpatialExitError)
from .gibbs import GibbsConfig, compare_estimators, gibbs_fit
from .model import linearized_gmm_fit, nl2sls_fit
from .report import TOOL, fit_report, gibbs_report, write_json
from .weights import D_MIN_KM, build_weights

EXIT_OK, EXIT_THRESHOLD, EXIT_INPUT, EXIT_ESTIMATION = 0, 1, 2, 3
GIBBS_MAX_N = 2000
ESTIMATORS = ("lgmm", "nl2sls", "gibbs")
FILTER_LEVELS = ("section", "division", "group", "class")

DEFAULTS = {
    "level": ["group"],
    "estimator": "lgmm",
    "dmin_km": D_MIN_KM,
    "seed": 0,
    "threshold": 0.05,
    "n_burn": 1000,
    "n_keep": 5000,
    "filter_level": None,
    "filter_prefix": "",
}


class UsageError(SpatialExitError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="spatial-exit",
                                description="Spatial lag probit of firm exit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--input")
        sp.add_argument("--out")
        sp.add_argument("--config", help="JSON file with the same keys as the flags")

    def cell(sp, multi=False):
        nargs = "+" if multi else None
        sp.add_argument("--year", type=int, nargs=nargs)
        sp.add_argument("--level", choices=[b.value for b in BlockLevel],
                        nargs=nargs)
        sp.add_argument("--dmin-km", type=float, dest="dmin_km")
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("summarize", help="exit table and summary statistics")
    common(s)
    s.add_argument("--filter-level", choices=FILTER_LEVELS, dest="filter_level")
    s.add_argument("--filter-prefix", dest="filter_prefix")
    s.add_argument("--year", type=int, help="base year for the firm tables")

    s = sub.add_parser("simulate", help="plant exits in a panel skeleton")
    common(s)
    cell(s)
    s.add_argument("--rho", type=float)
    s.add_argument("--beta", help="comma separated, one per design column")

    s = sub.add_parser("fit", help="estimate one or more (year, level) cells")
    common(s)
    cell(s, multi=True)
    s.add_argument("--estimator", choices=ESTIMATORS)
    s.add_argument("--n-burn", type=int, dest="n_burn")
    s.add_argument("--n-keep", type=int, dest="n_keep")

    s = sub.add_parser("validate", help="linearized GMM against the Gibbs oracle")
    common(s)
    cell(s)
    s.add_argument("--threshold", type=float)
    s.add_argument("--n-burn", type=int, dest="n_burn")
    s.add_argument("--n-keep", type=int, dest="n_keep")
    return p


def _resolve(args):
    """Merge defaults < config file < flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            cfg.update({k.replace("-", "_"): v for k, v in json.load(fh).items()})
    cfg.update({k: v for k, v in vars(args).items() if v is not None})
    cfg.pop("config", None)
    for key in ("year", "level"):
        if args.command == "fit" and key in cfg and not isinstance(cfg[key], list):
            cfg[key] = [cfg[key]]
        if args.command in ("simulate", "validate") and isinstance(cfg.get(key), list):
            cfg[key] = cfg[key][0]
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))


def _provenance(cfg):
    return {"tool": TOOL, "config": cfg, "input_sha256": file_digest(cfg["input"]),
            "seed": cfg.get("seed")}


def _load(cfg):
    if not os.path.exists(cfg["input"]):
        raise UsageError(f"input not found: {cfg['input']}")
    panel = load_panel(cfg["input"])
    if panel.rejects:
        path = write_rejects(panel)
        raise PanelError(f"{len(panel.rejects)} rejected row(s), see {path}")
    return panel


def _check_year(panel, year):
    if not panel.panel_start <= year < panel.panel_end:
        raise UsageError(f"year {year} outside panel range "
                         f"[{panel.panel_start}, {panel.panel_end - 1}]")
    return year


def _stamp(cfg):
    prov = _provenance(cfg)
    cfg_text = json.dumps(prov["config"], sort_keys=True)
    return (f"# {TOOL['name']} {TOOL['version']}\n"
            f"# input_sha256 {prov['input_sha256']}\n"
            f"# config {cfg_text}\n")


# -- commands ---------------------------------------------------------------

def cmd_summarize(cfg):
    _require(cfg, "input", "out")
    panel = _load(cfg)
    level, prefix = cfg.get("filter_level"), cfg.get("filter_prefix") or ""
    if prefix and not level:
        raise UsageError("--filter-prefix needs --filter-level")
    table = exit_table(panel, level, prefix)
    sub = panel.filter(level, prefix) if level else panel
    cat, num = summary_csvs(summarize(sub, cfg.get("year")))
    os.makedirs(cfg["out"], exist_ok=True)
    stamp = _stamp(cfg)
    for name, text in (("exit_table.csv", table.to_csv()),
                       ("summary_categorical.csv", cat),
                       ("summary_numerical.csv", num)):
        _atomic_write_text(os.path.join(cfg["out"], name), stamp + text)
    return EXIT_OK


def _parse_beta(text):
    try:
        beta = [float(b) for b in str(text).split(",")]
    except ValueError:
        raise UsageError(f"--beta is not a list of numbers: {text!r}") from None
    if len(beta) != len(DESIGN_COLUMNS):
        raise UsageError(f"--beta needs {len(DESIGN_COLUMNS)} values "
                         f"({', '.join(DESIGN_COLUMNS)}), got {len(beta)}")
    return np.array(beta)


def cmd_simulate(cfg):
    from .synthetic import simulate_exits

    _require(cfg, "input", "out", "year", "rho", "beta")
    rho = float(cfg["rho"])
    if not abs(rho) < 1:
        raise UsageError(f"--rho must satisfy |rho| < 1, got {rho}")
    beta = _parse_beta(cfg["beta"] if not isinstance(cfg["beta"], list)
                       else ",".join(map(str, cfg["beta"])))
    level = cfg.get("level") or "group"
    panel = _load(cfg)
    year = int(cfg["year"])
    if year < panel.panel_start:
        raise UsageError(f"year {year} precedes the skeleton ({panel.panel_start})")
    records, sample, design, W = simulate_exits(
        panel.records, int(cfg["year"]), level, rho, beta,
        seed=cfg["seed"], d_min_km=cfg["dmin_km"])
    write_panel(records, cfg["out"])
    meta = {**_provenance(cfg), "rho": rho, "beta": dict(zip(DESIGN_COLUMNS, beta)),
            "year": int(cfg["year"]), "block_level": level,
            "weights": W.metadata(), "design_sha256": design.digest(),
            "n_active": design.n, "n_exits": int(sample.y.sum())}
    write_json(cfg["out"] + ".meta.json", meta)
    return EXIT_OK


def _gibbs_config(cfg):
    return GibbsConfig(n_burn=int(cfg["n_burn"]), n_keep=int(cfg["n_keep"]),
                       seed=cfg["seed"])


def _fit_cell(panel, cfg, year, level):
    design, active = build_design(panel, year, level)
    W = build_weights(active, level, cfg["dmin_km"])
    est = cfg["estimator"]
    if est == "gibbs":
        if design.n > GIBBS_MAX_N:
            raise OracleScaleLimit(
                f"Gibbs oracle refuses n={design.n} > {GIBBS_MAX_N}")
        return gibbs_report(gibbs_fit(design.X, design.y, W, _gibbs_config(cfg)),
                            design, W)
    fitter = linearized_gmm_fit if est == "lgmm" else nl2sls_fit
    return fit_report(fitter(design.X, design.y, W), design, W)


def _error_report(prov, year, level, exc):
    return {**prov, "cell": {"year": year, "block_level": level},
            "status": "error",
            "error": {"type": type(exc).__name__, "message": str(exc)}}


def cmd_fit(cfg):
    _require(cfg, "input", "out", "year")
    if cfg["estimator"] not in ESTIMATORS:
        raise UsageError(f"unknown estimator {cfg['estimator']!r}")
    panel = _load(cfg)
    cells = [(_check_year(panel, int(y)), BlockLevel.coerce(lv).value)
             for y in cfg["year"] for lv in cfg["level"]]
    prov = _provenance(cfg)

    def run(cell):
        year, level = cell
        try:
            body = _fit_cell(panel, cfg, year, level)
        except (OracleScaleLimit, PanelError) as exc:
            return EXIT_INPUT, _error_report(prov, year, level, exc)
        except EstimationError as exc:
            return EXIT_ESTIMATION, _error_report(prov, year, level, exc)
        return EXIT_OK, {**prov, **body, "status": "ok"}

    workers = max(1, int(os.environ.get("SPATIAL_EXIT_THREADS", "1")))
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(min(workers, len(cells))) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    if len(cells) == 1:
        write_json(cfg["out"], results[0][1])
    else:
        os.makedirs(cfg["out"], exist_ok=True)
        for (year, level), (_, report) in zip(cells, results):
            write_json(os.path.join(cfg["out"], f"fit_{year}_{level}.json"), report)
    for code, report in results:
        if code != EXIT_OK:
            print(f"error: {report['error']['type']}: {report['error']['message']}",
                  file=sys.stderr)
    return max(code for code, _ in results)


def cmd_validate(cfg):
    _require(cfg, "input", "out", "year")
    panel = _load(cfg)
    level = cfg.get("level") or "group"
    design, active = build_design(panel, _check_year(panel, int(cfg["year"])),
                                  level)
    if design.n > GIBBS_MAX_N:
        raise OracleScaleLimit(f"Gibbs oracle refuses n={design.n} > {GIBBS_MAX_N}")
    W = build_weights(active, level, cfg["dmin_km"])
    try:
        comparison = compare_estimators(design.X, design.y, W, _gibbs_config(cfg),
                                        threshold=float(cfg["threshold"]))
    except EstimationError as exc:
        write_json(cfg["out"], {**_provenance(cfg), "status": "error",
                                "error": {"type": type(exc).__name__,
                                          "message": str(exc)}})
        raise
    report = {**_provenance(cfg), **comparison,
              "cell": {"year": design.year, "block_level": design.block_level.value,
                       "n": design.n, "design_sha256": design.digest()},
              "weights": W.metadata(), "columns": list(design.columns)}
    write_json(cfg["out"], report)
    print(f"rho comparison: {comparison['status']}")
    return EXIT_THRESHOLD if comparison["status"] == "FAIL" else EXIT_OK


COMMANDS = {"summarize": cmd_summarize, "simulate": cmd_simulate,
            "fit": cmd_fit, "validate": cmd_validate}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, PanelError, OracleScaleLimit, OSError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EstimationError as exc:
        print(f"estimation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
