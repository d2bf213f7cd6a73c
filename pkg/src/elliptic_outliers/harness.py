"""Configuration-driven Monte Carlo runner with seeded parallel trials and persistence.

Output layout::

    out/config.json
    out/trials/trial_{k}.json     per-trial metrics and outlier report
    out/trials/trial_{k}.csv      per-trial eigenvalues (trial, re, im)
    out/summary.json              deterministic summary (no wall-clock data)
    out/timings.json              wall-clock seconds per trial
    out/plots/*.svg, *.csv        export products
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import binomtest
from threadpoolctl import threadpool_limits

from . import dyson
from .ensemble import EnsembleSpec, build_graph, diagnostics, sample_matrix
from .geometry import EllipticRegion, write_boundary_csv
from .outliers import (Perturbation, admissible_locations, default_cap, factor, from_factors,
                       outlier_report, predict)
from .products import ProductSpec, product_predictions, product_trial
from .spectral import (NearSingularError, eigenvalues, exterior_grid, isotropic_deviations,
                       sort_eigenvalues)
from ._rng import stream

log = logging.getLogger(__name__)

KINDS = ("no-outliers", "perturbed", "isotropic", "dyson-sweep", "product", "diagnostics")
WORKERS_ENV = "ELLOUT_WORKERS"
DEFAULT_TOLERANCES = {
    "deviation": 0.15,
    "radius_bound": 1.15,
    "product_cap": 0.3,
    "grid_points": 20,
    "grid_epsilon": 0.2,
    "dyson_grid": 40,
    "dyson_eta": 1e-6,
    "dyson_band": 0.05,
}
ORTHO_STREAM = 7


class ConfigError(ValueError):
    """The configuration is invalid or violates a hypothesis check."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def perturbation_from_config(d: Optional[dict], n: int) -> Optional[Perturbation]:
    """{"diagonal": [...]}, {"dense": [re, im]} or {"factors": {"a": [re, im], "b": [re, im]}}."""
    if not d:
        return None
    if "diagonal" in d:
        C = np.zeros((n, n), dtype=complex)
        vals = d["diagonal"]
        for i, v in enumerate(vals):
            C[i, i] = complex(*v) if isinstance(v, (list, tuple)) else complex(v)
        return factor(C)
    if "dense" in d:
        re, im = d["dense"]
        return factor(np.asarray(re, float) + 1j * np.asarray(im, float))
    if "factors" in d:
        a, b = d["factors"]["a"], d["factors"]["b"]
        return from_factors(np.asarray(a[0]) + 1j * np.asarray(a[1]),
                            np.asarray(b[0]) + 1j * np.asarray(b[1]))
    raise ConfigError(f"unknown perturbation format: keys {sorted(d)}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    trials: int = 1
    seed: int = 0
    epsilon: float = 0.1
    ensemble: Optional[dict] = None
    factors: Optional[list] = None
    perturbation: Optional[dict] = None
    factor_perturbations: Optional[list] = None
    rho: Optional[list] = None
    n: Optional[int] = None
    tolerances: dict = field(default_factory=dict)
    acceptance: list = field(default_factory=list)
    output: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        if self.kind in ("no-outliers", "perturbed", "isotropic", "product") and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive for outlier experiments")
        if self.kind == "product":
            if not self.factors or len(self.factors) < 2:
                raise ConfigError("product experiments need at least two factor specs")
        elif self.kind != "dyson-sweep" and self.ensemble is None:
            raise ConfigError(f"{self.kind} experiments need an ensemble spec")
        n = self.dimension
        if n is not None and n < 4:
            raise ConfigError("n must be >= 4")
        if self.n is not None and n != self.n:
            raise ConfigError(f"n={self.n} disagrees with the graph size {n}")
        for a in self.acceptance:
            if a.get("op") not in (">=", "<=", "==") or "metric" not in a or "value" not in a:
                raise ConfigError(f"malformed acceptance assertion {a}")

    # -- derived ----------------------------------------------------------
    @property
    def dimension(self) -> Optional[int]:
        if self.ensemble is not None:
            return int(self.ensemble["graph"]["n"])
        if self.factors:
            return int(self.factors[0]["graph"]["n"])
        return self.n

    @property
    def ensemble_spec(self) -> EnsembleSpec:
        return EnsembleSpec.from_dict(self.ensemble)

    @property
    def region_rho(self) -> complex:
        if self.rho is not None:
            r = self.rho
            return complex(*r) if isinstance(r, (list, tuple)) else complex(r)
        if self.ensemble is not None:
            return complex(self.ensemble_spec.entries.rho)
        return 0j

    def tol(self, key: str):
        return self.tolerances.get(key, DEFAULT_TOLERANCES.get(key))

    def product_spec(self) -> ProductSpec:
        pert = None
        if self.factor_perturbations:
            n = self.dimension
            pert = [perturbation_from_config(p, n).dense() if p else np.zeros((n, n))
                    for p in self.factor_perturbations]
        return ProductSpec(m=len(self.factors),
                           factor_specs=tuple(EnsembleSpec.from_dict(f) for f in self.factors),
                           perturbations=pert, epsilon=self.epsilon)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"kind": self.kind, "trials": int(self.trials), "seed": int(self.seed),
               "epsilon": float(self.epsilon), "tolerances": dict(self.tolerances),
               "acceptance": list(self.acceptance)}
        for k in ("ensemble", "factors", "perturbation", "factor_perturbations", "rho", "n",
                  "output"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"kind", "trials", "seed", "epsilon", "ensemble", "factors", "perturbation",
                 "factor_perturbations", "rho", "n", "tolerances", "acceptance", "output"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def with_overrides(self, seed=None, trials=None, output=None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = int(seed)
        if trials is not None:
            d["trials"] = int(trials)
        if output is not None:
            d["output"] = str(output)
        return ExperimentConfig.from_dict(d)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def validate(config: ExperimentConfig) -> None:
    """Hypothesis checks that must pass before any sampling."""
    try:
        if config.ensemble is not None:
            spec = config.ensemble_spec
            build_graph(spec.graph)
            if spec.entries.rho != 0 and spec.graph.directed:
                raise ConfigError("a nonzero rho needs an undirected graph")
        if config.kind == "perturbed":
            pert = perturbation_from_config(config.perturbation, config.dimension)
            if pert is None:
                raise ConfigError("perturbed experiments need a perturbation")
            predict(pert, config.region_rho, config.epsilon)
        if config.kind == "product":
            product_predictions(config.product_spec())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------

def _c(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _trial_no_outliers(cfg: ExperimentConfig, t: int) -> dict:
    spec = cfg.ensemble_spec
    X = sample_matrix(spec, seed=cfg.seed, trial_index=t).entries
    ev = eigenvalues(X).eigenvalues
    rho = cfg.region_rho
    outside = ev[~EllipticRegion(rho, cfg.epsilon).contains(ev)]
    dist = EllipticRegion(rho).distance(ev)
    return {"success": bool(outside.size == 0), "eigenvalues": ev,
            "metrics": {"outliers_outside_region": int(outside.size),
                        "max_distance": float(dist.max()),
                        "spectral_radius": float(np.abs(ev).max())},
            "outside": [_c(z) for z in outside]}


def _trial_perturbed(cfg: ExperimentConfig, t: int) -> dict:
    spec = cfg.ensemble_spec
    X = sample_matrix(spec, seed=cfg.seed, trial_index=t).entries
    pert = perturbation_from_config(cfg.perturbation, X.shape[0])
    ev = eigenvalues(X + pert.dense()).eigenvalues
    cap = cfg.tol("cap_distance")
    rep = outlier_report(X, pert, cfg.region_rho, cfg.epsilon,
                         cap_distance=cap if cap is not None else default_cap(X.shape[0]), eig=ev)
    dists = [m[2] for m in rep.matches]
    return {"success": bool(rep.success), "eigenvalues": ev, "report": rep.to_dict(),
            "metrics": {"n_observed": len(rep.observed), "n_predicted": len(rep.predictions),
                        "n_matched": len(rep.matches),
                        "max_match_distance": float(rep.max_match_distance),
                        "mean_match_distance": float(np.mean(dists)) if dists else None}}


def _orthogonal_pair(n: int, seed: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(seed, t, ORTHO_STREAM)
    Q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    return Q[:, 0].astype(complex), Q[:, 1].astype(complex)


def _trial_isotropic(cfg: ExperimentConfig, t: int) -> dict:
    spec = cfg.ensemble_spec
    X = sample_matrix(spec, seed=cfg.seed, trial_index=t).entries
    n = X.shape[0]
    rho = cfg.region_rho
    grid = exterior_grid(rho, float(cfg.tol("grid_epsilon")), int(cfg.tol("grid_points")))
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    u, w = _orthogonal_pair(n, cfg.seed, t)
    d_same, d_orth = isotropic_deviations(X, rho, grid, [(e1, e1), (u, w)])
    tol = float(cfg.tol("deviation"))
    return {"success": bool(d_same <= tol and d_orth <= tol),
            "metrics": {"deviation_e1": d_same, "deviation_orthogonal": d_orth}}


def _trial_dyson(cfg: ExperimentConfig, t: int) -> dict:
    rho = cfg.region_rho
    m = int(cfg.tol("dyson_grid"))
    xs = np.linspace(-3, 3, m)
    z = (xs[None, :] + 1j * xs[:, None]).ravel()
    res = dyson.sweep(z, rho, eta=float(cfg.tol("dyson_eta")))
    region = EllipticRegion(rho)
    band = region.boundary_distance(z) <= float(cfg.tol("dyson_band"))
    expect = np.where(region.contains(z), "inside", "outside")
    agree = (res["verdict"] == expect) | band
    outside = ~region.fattened(0.1).contains(z)
    if outside.any():
        gap = float(np.abs(dyson.solve_batch(z[outside], 1j * float(cfg.tol("dyson_eta")), rho)["b_bar"]
                           - dyson.limit_b(z[outside], rho)).max())
    else:
        gap = 0.0
    return {"success": bool(agree.all() and gap <= 1e-3),
            "metrics": {"grid_points": int(z.size), "disagreements": int((~agree).sum()),
                        "max_residual": float(res["residual"].max()),
                        "max_limit_gap": gap},
            "sweep": res}


def _trial_product(cfg: ExperimentConfig, t: int) -> dict:
    spec = cfg.product_spec()
    pt = product_trial(spec, cfg.seed, t, cap_distance=float(cfg.tol("product_cap")))
    bound = float(cfg.tol("radius_bound"))
    rep = pt.report
    return {"success": bool(pt.spectral_radius <= bound and rep.success),
            "eigenvalues": pt.eigenvalues_D1, "report": rep.to_dict(),
            "metrics": {"spectral_radius": pt.spectral_radius,
                        "radius_ok": bool(pt.spectral_radius <= bound),
                        "outliers_ok": bool(rep.success),
                        "max_match_distance": float(rep.max_match_distance)}}


def _trial_diagnostics(cfg: ExperimentConfig, t: int) -> dict:
    spec = cfg.ensemble_spec
    s = sample_matrix(spec, seed=cfg.seed, trial_index=t)
    X = s.entries
    rows = (np.abs(X) ** 2).sum(axis=1)
    cols = (np.abs(X) ** 2).sum(axis=0)
    diag = diagnostics(spec).to_dict()
    checks = [v for v in diag["checks"].values() if v is not None]
    return {"success": bool(all(checks)),
            "metrics": {"max_row_sum_dev": float(np.abs(rows - 1).max()),
                        "max_col_sum_dev": float(np.abs(cols - 1).max()),
                        "checks_passed": int(sum(checks)), "checks_total": len(checks)},
            "diagnostics": diag}


_TRIALS = {"no-outliers": _trial_no_outliers, "perturbed": _trial_perturbed,
           "isotropic": _trial_isotropic, "dyson-sweep": _trial_dyson,
           "product": _trial_product, "diagnostics": _trial_diagnostics}

NUMERIC_ERRORS = (ArithmeticError, RuntimeError, np.linalg.LinAlgError, NearSingularError)


def run_trial(cfg: ExperimentConfig, t: int) -> dict:
    """Run one trial single-threaded; numeric failures become recorded data."""
    with threadpool_limits(1):
        try:
            res = _TRIALS[cfg.kind](cfg, t)
        except NUMERIC_ERRORS as exc:
            res = {"success": False, "metrics": {}, "error": f"{type(exc).__name__}: {exc}"}
    res["trial"] = t
    return res


def _trial_paths(out: Path, t: int) -> tuple[Path, Path]:
    return out / "trials" / f"trial_{t}.json", out / "trials" / f"trial_{t}.csv"


def _persist_trial(out: Path, res: dict, digest: str) -> None:
    jpath, cpath = _trial_paths(out, res["trial"])
    jpath.parent.mkdir(parents=True, exist_ok=True)
    ev = res.pop("eigenvalues", None)
    sweep = res.pop("sweep", None)
    if ev is not None:
        ev = sort_eigenvalues(ev)
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "re", "im"])
            for z in ev:
                w.writerow([res["trial"], repr(float(z.real)), repr(float(z.imag))])
    if sweep is not None:
        dyson.write_sweep_csv(sweep, cpath)
    doc = dict(res)
    doc["config_digest"] = digest
    tmp = jpath.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=2))
    os.replace(tmp, jpath)  # the json appears only once the trial is complete


def _worker(args) -> tuple[int, float]:
    cfg_dict, t, out = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    t0 = time.perf_counter()
    res = run_trial(cfg, t)
    _persist_trial(Path(out), res, cfg.digest())
    return t, time.perf_counter() - t0


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit argument, else $ELLOUT_WORKERS, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return workers


def completed_trials(out: Path, cfg: ExperimentConfig) -> set:
    done = set()
    digest = cfg.digest()
    for t in range(cfg.trials):
        jpath, _ = _trial_paths(out, t)
        if jpath.exists():
            try:
                if json.loads(jpath.read_text()).get("config_digest") == digest:
                    done.add(t)
            except json.JSONDecodeError:
                pass
    return done


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> list:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return [float(ci.low), float(ci.high)]


def _aggregate(values: list) -> dict:
    nums = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)
            and v is not None and math.isfinite(v)]
    if not nums:
        return {}
    return {"mean": float(np.mean(nums)), "max": float(np.max(nums)),
            "min": float(np.min(nums))}


def summarize(cfg: ExperimentConfig, results: list) -> dict:
    """Deterministic summary of trial results ordered by trial index."""
    results = sorted(results, key=lambda r: r["trial"])
    k = sum(bool(r["success"]) for r in results)
    T = len(results)
    keys = sorted({key for r in results for key in r.get("metrics", {})})
    metrics = {"successes": k, "trials": T, "success_rate": k / T if T else 0.0}
    per_metric = {}
    for key in keys:
        vals = [r["metrics"].get(key) for r in results]
        if all(isinstance(v, bool) for v in vals if v is not None):
            metrics[f"{key}_count"] = sum(bool(v) for v in vals)
        else:
            agg = _aggregate(vals)
            if agg:
                per_metric[key] = agg
    acceptance = []
    flat = dict(metrics)
    for key, agg in per_metric.items():
        for stat, v in agg.items():
            flat[f"{key}.{stat}"] = v
    for a in cfg.acceptance:
        obs = flat.get(a["metric"])
        if obs is None:
            ok = False
        elif a["op"] == ">=":
            ok = obs >= a["value"]
        elif a["op"] == "<=":
            ok = obs <= a["value"]
        else:
            ok = obs == a["value"]
        acceptance.append({"metric": a["metric"], "op": a["op"], "value": a["value"],
                           "observed": obs, "passed": bool(ok)})
    return {
        "schema_version": 1,
        "kind": cfg.kind,
        "config_digest": cfg.digest(),
        "seed": int(cfg.seed),
        "trials": T,
        "successes": k,
        "success_rate": metrics["success_rate"],
        "wilson_95": wilson_interval(k, T) if T else [0.0, 1.0],
        "metrics": metrics,
        "aggregates": per_metric,
        "per_trial": [{"trial": r["trial"], "success": bool(r["success"]),
                       "error": r.get("error")} for r in results],
        "failures": [r["trial"] for r in results if r.get("error")],
        "acceptance": acceptance,
        "passed": bool(all(a["passed"] for a in acceptance)) and not
        any(r.get("error") for r in results),
    }


def run(config: ExperimentConfig, out_dir=None, workers: Optional[int] = None,
        resume: bool = True) -> dict:
    """Execute all trials (persisting each), then summarize and write summary.json."""
    out = Path(out_dir or config.output or "out")
    validate(config)
    workers = resolve_workers(workers)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json())
    done = completed_trials(out, config) if resume else set()
    todo = [t for t in range(config.trials) if t not in done]
    log.info("running %d of %d trials with %d workers", len(todo), config.trials, workers)
    timings: dict = {}
    tpath = out / "timings.json"
    if tpath.exists():
        try:
            timings = {int(k): v for k, v in json.loads(tpath.read_text()).items()}
        except (json.JSONDecodeError, ValueError):
            timings = {}
    args = [(config.to_dict(), t, str(out)) for t in todo]
    if workers == 1 or len(todo) <= 1:
        for a in args:
            t, dt = _worker(a)
            timings[t] = dt
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for t, dt in pool.map(_worker, args):
                timings[t] = dt
    tpath.write_text(json.dumps({str(k): timings[k] for k in sorted(timings)}, indent=2))
    results = [json.loads(_trial_paths(out, t)[0].read_text()) for t in range(config.trials)]
    summary = summarize(config, results)
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2))
    return summary


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def read_trial_eigenvalues(out: Path, trials: int) -> dict:
    res = {}
    for t in range(trials):
        _, cpath = _trial_paths(out, t)
        if not cpath.exists():
            continue
        with cpath.open() as fh:
            rows = list(csv.DictReader(fh))
        if rows and "re" in rows[0]:
            res[t] = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return res


def _predictions_for(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.kind == "perturbed":
        pert = perturbation_from_config(cfg.perturbation, cfg.dimension)
        return admissible_locations(predict(pert, cfg.region_rho, cfg.epsilon))
    if cfg.kind == "product":
        return product_predictions(cfg.product_spec())
    return np.zeros(0, dtype=complex)


def svg_scatter(eigs: dict, boundary: np.ndarray, predictions: np.ndarray,
                size: int = 600) -> str:
    """Standalone SVG: one <circle> per eigenvalue, boundary polyline, prediction crosses."""
    pts = [z for ev in eigs.values() for z in ev]
    allz = np.array(pts + list(boundary) + list(predictions), dtype=complex)
    R = float(np.abs(allz).max()) * 1.1 if allz.size else 1.0
    s = size / (2 * R)
    X = lambda z: (z.real + R) * s
    Y = lambda z: (R - z.imag) * s
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    poly = " ".join(f"{X(z):.3f},{Y(z):.3f}" for z in list(boundary) + list(boundary[:1]))
    out.append(f'<polyline class="boundary" points="{poly}" fill="none" stroke="blue" '
               'stroke-width="1"/>')
    for z in pts:
        out.append(f'<circle class="eig" cx="{X(z):.3f}" cy="{Y(z):.3f}" r="1.2" fill="black"/>')
    for z in predictions:
        x, y = X(z), Y(z)
        out.append(f'<path class="prediction" d="M{x - 5:.3f},{y - 5:.3f}L{x + 5:.3f},{y + 5:.3f}'
                   f'M{x - 5:.3f},{y + 5:.3f}L{x + 5:.3f},{y - 5:.3f}" stroke="red" '
                   'stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export(out_dir, boundary_points: int = 512) -> dict:
    """Write plot data (CSV) and the combined SVG scatter for a completed run."""
    out = Path(out_dir)
    cpath = out / "config.json"
    if not cpath.exists():
        raise FileNotFoundError(f"{cpath} not found; run the experiment first")
    cfg = ExperimentConfig.load(cpath)
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    eigs = read_trial_eigenvalues(out, cfg.trials)
    files = {}
    with (plots / "eigenvalues.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "re", "im"])
        for t in sorted(eigs):
            for z in eigs[t]:
                w.writerow([t, repr(float(z.real)), repr(float(z.imag))])
    files["eigenvalues"] = plots / "eigenvalues.csv"
    if cfg.kind == "product":
        region = EllipticRegion(0.0, cfg.epsilon)
    else:
        region = EllipticRegion(cfg.region_rho, cfg.epsilon if cfg.kind != "dyson-sweep" else 0.0)
    files["boundary"] = write_boundary_csv(region, plots / "boundary.csv", boundary_points)
    bnd = region.boundary_points(boundary_points)
    preds = _predictions_for(cfg)
    with (plots / "predictions.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in preds:
            w.writerow([repr(float(z.real)), repr(float(z.imag))])
    files["predictions"] = plots / "predictions.csv"
    (plots / "scatter.svg").write_text(svg_scatter(eigs, bnd, preds))
    files["svg"] = plots / "scatter.svg"
    return files


def load_summary_schema() -> dict:
    from importlib import resources
    return json.loads(resources.files("elliptic_outliers").joinpath(
        "schemas/summary.schema.json").read_text())
