"""Command line interface: ``ellout <subcommand> --config C [--seed S] [--out O] [--workers W]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dyson
from .ensemble import export_matrix, sample_matrix
from .harness import (ConfigError, ExperimentConfig, export, perturbation_from_config,
                      resolve_workers, run, validate)
from .outliers import outlier_report
from .products import product_trial
from .spectral import eigenvalues, write_spectrum_csv

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output path or directory")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $ELLOUT_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ellout",
                                 description="Outliers of inhomogeneous elliptic random matrices")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("generate", help="sample one matrix to a binary file")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p = sub.add_parser("spectrum", help="eigenvalues of sampled matrices as CSV")
    _common(p)
    p.add_argument("--trials", type=int, default=None)
    p = sub.add_parser("dyson", help="Dyson-equation sweep over a grid as CSV")
    _common(p)
    p = sub.add_parser("outliers", help="outlier report for one perturbed sample")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p = sub.add_parser("product", help="product outlier report for one trial")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    ex = sub.add_parser("experiment", help="Monte Carlo experiments")
    exs = ex.add_subparsers(dest="action", required=True)
    p = exs.add_parser("run", help="run all trials, persist, summarize")
    _common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--no-resume", action="store_true")
    p = exs.add_parser("export", help="write plot CSVs and SVG for a finished run")
    _common(p, config_required=False)
    return ap


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_overrides(seed=args.seed, trials=getattr(args, "trials", None))


def _out(args, cfg: ExperimentConfig, default: str) -> Path:
    return Path(args.out or cfg.output or default)


def cmd_generate(args) -> int:
    cfg = _load(args)
    s = sample_matrix(cfg.ensemble_spec, seed=cfg.seed, trial_index=args.trial)
    path = _out(args, cfg, "matrix.bin")
    if path.suffix == "" or path.is_dir():
        path = path / f"matrix_{args.trial}.bin"
    b, side = export_matrix(s, path)
    print(f"wrote {b} and {side}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    spec = cfg.ensemble_spec
    spectra = {t: eigenvalues(sample_matrix(spec, seed=cfg.seed, trial_index=t).entries)
               for t in range(cfg.trials)}
    path = _out(args, cfg, "spectrum.csv")
    if path.suffix != ".csv":
        path = path / "spectrum.csv"
    write_spectrum_csv(spectra, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_dyson(args) -> int:
    cfg = _load(args)
    rho = cfg.region_rho
    m = int(cfg.tol("dyson_grid"))
    xs = np.linspace(-3, 3, m)
    z = (xs[None, :] + 1j * xs[:, None]).ravel()
    res = dyson.sweep(z, rho, eta=float(cfg.tol("dyson_eta")))
    path = _out(args, cfg, "dyson.csv")
    if path.suffix != ".csv":
        path = path / "dyson.csv"
    dyson.write_sweep_csv(res, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_outliers(args) -> int:
    cfg = _load(args)
    if cfg.kind != "perturbed":
        raise ConfigError("the outliers command needs a 'perturbed' config")
    validate(cfg)
    X = sample_matrix(cfg.ensemble_spec, seed=cfg.seed, trial_index=args.trial).entries
    pert = perturbation_from_config(cfg.perturbation, X.shape[0])
    cap = cfg.tol("cap_distance")
    rep = outlier_report(X, pert, cfg.region_rho, cfg.epsilon, cap_distance=cap)
    path = _out(args, cfg, "report.json")
    if path.suffix != ".json":
        path = path / "report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rep.to_dict(), sort_keys=True, indent=2))
    print(f"wrote {path}: {rep.counts}")
    return EXIT_OK if rep.success else EXIT_FAILED


def cmd_product(args) -> int:
    cfg = _load(args)
    if cfg.kind != "product":
        raise ConfigError("the product command needs a 'product' config")
    validate(cfg)
    pt = product_trial(cfg.product_spec(), cfg.seed, args.trial,
                       cap_distance=float(cfg.tol("product_cap")))
    path = _out(args, cfg, "product_report.json")
    if path.suffix != ".json":
        path = path / "product_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"spectral_radius": pt.spectral_radius, "report": pt.report.to_dict()}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2))
    print(f"wrote {path}: radius {pt.spectral_radius:.4f}, {pt.report.counts}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.action == "run":
        cfg = _load(args)
        out = _out(args, cfg, "out")
        summary = run(cfg, out, workers=resolve_workers(args.workers),
                      resume=not args.no_resume)
        print(f"{summary['kind']}: {summary['successes']}/{summary['trials']} successes, "
              f"Wilson 95% {summary['wilson_95']}; acceptance "
              f"{'passed' if summary['passed'] else 'FAILED'}")
        for a in summary["acceptance"]:
            print(f"  {a['metric']} {a['op']} {a['value']}: observed {a['observed']} "
                  f"-> {'pass' if a['passed'] else 'FAIL'}")
        return EXIT_OK if summary["passed"] else EXIT_FAILED
    out = Path(args.out) if args.out else (Path(ExperimentConfig.load(args.config).output or "out")
                                           if args.config else Path("out"))
    files = export(out)
    for k, v in files.items():
        print(f"{k}: {v}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "spectrum": cmd_spectrum, "dyson": cmd_dyson,
            "outliers": cmd_outliers, "product": cmd_product, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
