"""Products of independent elliptic/band ensembles and their block-cyclic linearization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import EnsembleSpec, sample_matrix
from .outliers import ForbiddenAnnulusError, OutlierReport, factor, match
from .spectral import eigenvalues


@dataclass(frozen=True)
class ProductSpec:
    """m independent factors, optional low-rank perturbations A^1..A^m, and epsilon."""
    m: int
    factor_specs: tuple
    perturbations: Optional[tuple] = None
    epsilon: float = 0.1

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("products need m >= 2 factors")
        specs = tuple(self.factor_specs)
        if len(specs) != self.m:
            raise ValueError(f"expected {self.m} factor specs, got {len(specs)}")
        ns = {s.graph.n for s in specs}
        if len(ns) != 1:
            raise ValueError(f"all factors must have the same dimension; got {sorted(ns)}")
        object.__setattr__(self, "factor_specs", specs)
        if self.perturbations is not None:
            pert = tuple(np.asarray(A, dtype=complex) for A in self.perturbations)
            if len(pert) != self.m:
                raise ValueError(f"expected {self.m} perturbations, got {len(pert)}")
            n = self.n
            for k, A in enumerate(pert):
                if A.shape != (n, n):
                    raise ValueError(f"perturbation {k} has shape {A.shape}, expected {(n, n)}")
                factor(A)  # enforces the bounded-rank regime
            object.__setattr__(self, "perturbations", pert)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def n(self) -> int:
        return int(self.factor_specs[0].graph.n)

    def a_product(self) -> np.ndarray:
        if self.perturbations is None:
            return np.zeros((self.n, self.n), dtype=complex)
        P = self.perturbations[0]
        for A in self.perturbations[1:]:
            P = P @ A
        return P

    def to_dict(self) -> dict:
        out = {"m": self.m, "epsilon": self.epsilon,
               "factor_specs": [s.to_dict() for s in self.factor_specs]}
        if self.perturbations is not None:
            out["perturbations"] = [[A.real.tolist(), A.imag.tolist()] for A in self.perturbations]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ProductSpec":
        pert = d.get("perturbations")
        if pert is not None:
            pert = [np.asarray(p[0]) + 1j * np.asarray(p[1]) for p in pert]
        return cls(m=int(d["m"]), factor_specs=tuple(EnsembleSpec.from_dict(s) for s in d["factor_specs"]),
                   perturbations=pert, epsilon=float(d.get("epsilon", 0.1)))


def linearize(factors: Sequence[np.ndarray], perturbations: Optional[Sequence[np.ndarray]] = None):
    """Block-cyclic matrices with factor k in block row k, block column k+1 (mod m).

    (curly_X + curly_A)^m is block diagonal with the cyclic products of
    (X^k + A^k) on the diagonal; its (0, 0) block is the perturbed product.
    """
    m = len(factors)
    if m < 2:
        raise ValueError("linearization needs m >= 2 factors")
    mats = [np.asarray(getattr(X, "entries", X), dtype=complex) for X in factors]
    n = mats[0].shape[0]
    if any(M.shape != (n, n) for M in mats):
        raise ValueError("all factors must be n x n with the same n")
    if perturbations is not None:
        if len(perturbations) != m:
            raise ValueError(f"expected {m} perturbations")
        pert = [np.asarray(A, dtype=complex) for A in perturbations]
        if any(A.shape != (n, n) for A in pert):
            raise ValueError("perturbations must match the factor dimension")
    else:
        pert = [np.zeros((n, n), dtype=complex)] * m
    X = np.zeros((m * n, m * n), dtype=complex)
    A = np.zeros((m * n, m * n), dtype=complex)
    for k in range(m):
        j = (k + 1) % m
        X[k * n:(k + 1) * n, j * n:(j + 1) * n] = mats[k]
        A[k * n:(k + 1) * n, j * n:(j + 1) * n] = pert[k]
    return X, A


@dataclass(frozen=True, eq=False)
class ProductSample:
    D: np.ndarray
    D1: np.ndarray
    A_product: np.ndarray
    factors: tuple
    trial_index: int


def sample_factors(spec: ProductSpec, seed: int, trial_index: int = 0) -> list:
    """Factor k is drawn from stream (seed, trial_index, k)."""
    return [sample_matrix(s, seed=seed, trial_index=trial_index, stream_id=k)
            for k, s in enumerate(spec.factor_specs)]


def sample_product(spec: ProductSpec, seed: int, trial_index: int = 0) -> ProductSample:
    facs = sample_factors(spec, seed, trial_index)
    mats = [f.entries for f in facs]
    pert = spec.perturbations
    D = mats[0]
    for M in mats[1:]:
        D = D @ M
    if pert is None:
        D1 = D.copy()
    else:
        D1 = mats[0] + pert[0]
        for M, A in zip(mats[1:], pert[1:]):
            D1 = D1 @ (M + A)
    return ProductSample(D=D, D1=D1, A_product=spec.a_product(), factors=tuple(mats),
                         trial_index=trial_index)


def product_predictions(spec: ProductSpec) -> np.ndarray:
    """Eigenvalues of prod A^k outside (1+3eps)D; rejects eigenvalues in the annulus."""
    eps = spec.epsilon
    if spec.perturbations is None:
        return np.zeros(0, dtype=complex)
    ev = np.linalg.eigvals(spec.a_product()) if spec.n <= 400 else \
        factor(spec.a_product()).eigenvalues_C
    mod = np.abs(ev)
    bad = ev[(mod >= 1 + eps) & (mod <= 1 + 3 * eps)]
    if bad.size:
        raise ForbiddenAnnulusError(
            f"eigenvalue {bad[0]} of the perturbation product lies in the annulus "
            f"1+eps <= |z| <= 1+3eps", list(bad))
    return ev[mod > 1 + 3 * eps]


@dataclass
class ProductTrial:
    trial_index: int
    spectral_radius: float
    report: OutlierReport
    eigenvalues_D1: np.ndarray = field(repr=False, default=None)


@dataclass
class ProductExperimentResult:
    trials: list
    radius_bound: float
    cap_distance: float

    @property
    def radius_successes(self) -> int:
        return sum(t.spectral_radius <= self.radius_bound for t in self.trials)

    @property
    def outlier_successes(self) -> int:
        return sum(t.report.success for t in self.trials)

    def to_dict(self) -> dict:
        return {"radius_bound": self.radius_bound, "cap_distance": self.cap_distance,
                "radius_successes": self.radius_successes,
                "outlier_successes": self.outlier_successes,
                "trials": [{"trial": t.trial_index, "spectral_radius": t.spectral_radius,
                            "report": t.report.to_dict()} for t in self.trials]}


def product_trial(spec: ProductSpec, seed: int, trial_index: int,
                  cap_distance: float = 0.3) -> ProductTrial:
    preds = product_predictions(spec)
    s = sample_product(spec, seed, trial_index)
    rad = eigenvalues(s.D).spectral_radius
    ev1 = eigenvalues(s.D1).eigenvalues if spec.perturbations is not None else None
    if ev1 is None:
        ev1 = eigenvalues(s.D).eigenvalues
    obs = ev1[np.abs(ev1) > 1 + 2 * spec.epsilon]
    rep = match(obs, preds, cap_distance)
    rep.meta = {"epsilon": spec.epsilon, "m": spec.m}
    return ProductTrial(trial_index=trial_index, spectral_radius=rad, report=rep,
                        eigenvalues_D1=ev1)


def product_outlier_experiment(spec: ProductSpec, trials: int, seed: int = 0,
                               cap_distance: float = 0.3,
                               radius_bound: float = 1.15) -> ProductExperimentResult:
    """Observed outliers of D^1 outside (1+2eps)D against eigenvalues of prod A^k.

    Validates the annulus hypothesis before sampling anything.
    """
    product_predictions(spec)
    out = [product_trial(spec, seed, t, cap_distance) for t in range(trials)]
    return ProductExperimentResult(trials=out, radius_bound=radius_bound,
                                   cap_distance=cap_distance)


def linearization_check(spec: ProductSpec, seed: int, trial_index: int = 0) -> float:
    """max over eig(X+A) of the distance from lambda^m to the nearest eigenvalue of D^1."""
    s = sample_product(spec, seed, trial_index)
    X, A = linearize(s.factors, spec.perturbations)
    lam = np.linalg.eigvals(X + A) ** spec.m
    ev = np.linalg.eigvals(s.D1)
    return float(np.abs(lam[:, None] - ev[None, :]).min(axis=1).max())
