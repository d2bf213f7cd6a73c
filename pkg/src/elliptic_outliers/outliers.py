"""Outlier prediction, the low-rank determinant criterion, contour root finding and matching."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from ._validation import check_rho, check_square_matrix
from .dyson import limit_b
from .geometry import EllipticRegion, boundary_curve, normal_coordinates
from .spectral import NearSingularError, eigenvalues, sigma_min

RANK_CAP = 16
RANK_RTOL = 1e-10


class RankError(ValueError):
    """Perturbation rank exceeds the configured O(1) cap."""


class ForbiddenAnnulusError(ValueError):
    """Some lambda + rho/lambda falls in E_{rho,3eps} minus E_{rho,eps}."""

    def __init__(self, message, offending):
        super().__init__(message)
        self.offending = offending


class ContourError(RuntimeError):
    """The contour passes (numerically) through a zero or pole."""


# --------------------------------------------------------------------------
# perturbations
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Perturbation:
    """C = a_factor @ b_factor with a_factor n x k and b_factor k x n."""
    a_factor: np.ndarray
    b_factor: np.ndarray
    eigenvalues_C: np.ndarray
    rank_k: int

    @property
    def n(self) -> int:
        return int(self.a_factor.shape[0])

    def dense(self) -> np.ndarray:
        return self.a_factor @ self.b_factor

    @property
    def nonzero_eigenvalues(self) -> np.ndarray:
        ev = self.eigenvalues_C
        scale = max(1.0, float(np.abs(ev).max()) if ev.size else 1.0)
        return ev[np.abs(ev) > 1e-10 * scale]

    def to_dict(self) -> dict:
        return {"n": self.n, "rank_k": self.rank_k,
                "a_factor": _cplx_to_list(self.a_factor),
                "b_factor": _cplx_to_list(self.b_factor)}

    @classmethod
    def from_dict(cls, d: dict) -> "Perturbation":
        return from_factors(_list_to_cplx(d["a_factor"]), _list_to_cplx(d["b_factor"]))


def _cplx_to_list(M):
    M = np.asarray(M, dtype=complex)
    return [M.real.tolist(), M.imag.tolist()]


def _list_to_cplx(v):
    return np.asarray(v[0], dtype=float) + 1j * np.asarray(v[1], dtype=float)


def _sorted_ev(ev):
    ev = np.asarray(ev, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


def from_factors(A, B, rank_cap: int = RANK_CAP) -> Perturbation:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if A.shape[1] != B.shape[0] or A.shape[0] != B.shape[1]:
        raise ValueError(f"factor shapes {A.shape} and {B.shape} are incompatible")
    k = A.shape[1]
    if k > rank_cap:
        raise RankError(f"rank {k} exceeds the cap {rank_cap}")
    ev = np.linalg.eigvals(B @ A) if k else np.zeros(0, complex)
    return Perturbation(a_factor=A, b_factor=B, eigenvalues_C=_sorted_ev(ev), rank_k=k)


def factor(C, rank_cap: int = RANK_CAP, rtol: float = RANK_RTOL) -> Perturbation:
    """Balanced thin factorization C = (U S^1/2)(S^1/2 V^*).

    Only the rows and columns carrying nonzero entries enter the singular
    value decomposition, so sparse perturbations of large matrices are cheap.
    Singular values below rtol * ||C|| are dropped.
    """
    C = check_square_matrix(C, "C")
    n = C.shape[0]
    nz = C != 0
    rows = np.nonzero(nz.any(axis=1))[0]
    cols = np.nonzero(nz.any(axis=0))[0]
    if rows.size == 0:
        return from_factors(np.zeros((n, 0)), np.zeros((0, n)), rank_cap)
    sub = C[np.ix_(rows, cols)]
    U, s, Vh = sla.svd(sub, full_matrices=False)
    k = int(np.sum(s > rtol * s[0]))
    if k > rank_cap:
        raise RankError(f"numerical rank {k} of C exceeds the cap {rank_cap} "
                        "(outside the bounded-rank regime)")
    root = np.sqrt(s[:k])
    A = np.zeros((n, k), dtype=complex)
    B = np.zeros((k, n), dtype=complex)
    A[rows] = U[:, :k] * root
    B[:, cols] = root[:, None] * Vh[:k]
    return from_factors(A, B, rank_cap)


def rank_one(n: int, theta: complex, u=None) -> Perturbation:
    """theta * u u^* (u = e_1 by default)."""
    if u is None:
        u = np.zeros(n, dtype=complex)
        u[0] = 1.0
    u = np.asarray(u, dtype=complex).reshape(n, 1)
    return from_factors(complex(theta) * u, u.conj().T)


def diagonal(n: int, values: Sequence[complex]) -> Perturbation:
    """diag(values, 0, ..., 0)."""
    C = np.zeros((n, n), dtype=complex)
    v = np.asarray(values, dtype=complex)
    C[np.arange(v.size), np.arange(v.size)] = v
    return factor(C)


# --------------------------------------------------------------------------
# predictions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OutlierPrediction:
    source_lambda: complex
    predicted: complex
    admissible: bool

    def to_dict(self) -> dict:
        p = self.predicted
        return {"source_lambda": [self.source_lambda.real, self.source_lambda.imag],
                "predicted": None if p != p else [p.real, p.imag],
                "admissible": self.admissible}


def predicted_location(lam: complex, rho: complex) -> complex:
    return lam + rho / lam


def predict(perturbation: Perturbation | Iterable[complex], rho: complex, epsilon: float,
            check_annulus: bool = True) -> list[OutlierPrediction]:
    """One prediction per eigenvalue of C.

    lambda + rho/lambda is recorded when |lambda| >= 1 (NaN otherwise); a
    prediction is admissible when additionally it lies outside E_{rho,eps}.
    An eigenvalue with |lambda| > 1 whose prediction falls in
    E_{rho,3eps} minus E_{rho,eps} violates the hypotheses and raises
    ForbiddenAnnulusError.
    """
    rho = check_rho(rho)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ev = perturbation.eigenvalues_C if isinstance(perturbation, Perturbation) \
        else np.asarray(list(perturbation), dtype=complex)
    inner = EllipticRegion(rho, epsilon)
    outer = EllipticRegion(rho, 3 * epsilon)
    out, bad = [], []
    for lam in ev:
        lam = complex(lam)
        if abs(lam) >= 1:
            p = predicted_location(lam, rho)
            adm = not inner.contains(p)
            if abs(lam) > 1 and adm and outer.contains(p):
                bad.append(lam)
        else:
            p, adm = complex(np.nan, np.nan), False
        out.append(OutlierPrediction(source_lambda=lam, predicted=p, admissible=adm))
    if bad and check_annulus:
        raise ForbiddenAnnulusError(
            f"eigenvalue {bad[0]} of C predicts an outlier in the forbidden annulus "
            f"E_(rho,{3 * epsilon}) minus E_(rho,{epsilon})", bad)
    return out


def admissible_locations(predictions: Sequence[OutlierPrediction]) -> np.ndarray:
    return np.array([p.predicted for p in predictions if p.admissible], dtype=complex)


def merge_seeds(points: Sequence[complex], tol: float = 1e-9) -> list[tuple[complex, int]]:
    """Collapse coincident points into (seed, multiplicity)."""
    seeds: list[list] = []
    for z in points:
        for s in seeds:
            if abs(s[0] - z) <= tol:
                s[1] += 1
                break
        else:
            seeds.append([complex(z), 1])
    return [(s, m) for s, m in seeds]


# --------------------------------------------------------------------------
# determinant criterion
# --------------------------------------------------------------------------

class DeterminantCriterion:
    """f(z) = det(I_k + B (X - z)^{-1} A), an immutable closure over (X, A, B).

    The default arrangement 'k' reduces X once to complex Schur form
    X = Q T Q^*, after which every evaluation costs two triangular solves.
    `arrangement='n'` evaluates det(I_n + (X - z)^{-1} A B) through a fresh
    LU factorization instead; the two agree by det(1 + PQ) = det(1 + QP).
    """

    def __init__(self, X, perturbation: Perturbation, arrangement: str = "k",
                 singular_tol: float = 1e-10):
        X = check_square_matrix(X)
        if X.shape[0] != perturbation.n:
            raise ValueError("X and the perturbation have different dimensions")
        if arrangement not in ("k", "n"):
            raise ValueError("arrangement must be 'k' or 'n'")
        self._X = X
        self._X.setflags(write=False)
        self.perturbation = perturbation
        self.arrangement = arrangement
        self.singular_tol = singular_tol
        self._schur = None
        self._last = None

    def _reduced(self):
        if self._schur is None:
            T, Q = sla.schur(self._X.astype(complex), output="complex")
            A, B = self.perturbation.a_factor, self.perturbation.b_factor
            self._schur = (T, Q.conj().T @ A, B @ Q)
        return self._schur

    def _check_singular(self, diag, z):
        d = np.abs(diag)
        if d.min() <= self.singular_tol * max(d.max(), 1.0):
            s = sigma_min(self._X, z)
            if s <= self.singular_tol:
                raise NearSingularError(f"z={z} is numerically an eigenvalue of X "
                                        f"(sigma_min={s:.3e})", s)

    def _solve(self, z: complex):
        """(T - z)^{-1} Q^* A and the k x k matrix I + B R A, cached per z."""
        if self._last is not None and self._last[0] == z:
            return self._last[1]
        T, QA, BQ = self._reduced()
        Tz = T.copy()
        Tz.flat[::T.shape[0] + 1] -= z
        self._check_singular(np.diag(Tz), z)
        Y = sla.solve_triangular(Tz, QA, check_finite=False)
        M = np.eye(QA.shape[1]) + BQ @ Y
        self._last = (z, (Tz, Y, M))
        return Tz, Y, M

    def __call__(self, z: complex) -> complex:
        z = complex(z)
        if self.arrangement == "k":
            return complex(np.linalg.det(self._solve(z)[2]))
        n = self._X.shape[0]
        lu, piv = sla.lu_factor(self._X - z * np.eye(n), check_finite=False)
        self._check_singular(np.diag(lu), z)
        A, B = self.perturbation.a_factor, self.perturbation.b_factor
        Y = sla.lu_solve((lu, piv), A @ B, check_finite=False)
        return complex(np.linalg.det(np.eye(n) + Y))

    def log_derivative(self, z: complex) -> complex:
        """f'(z)/f(z) = tr((I + B R A)^{-1} B R^2 A) with R = (X - z)^{-1}."""
        z = complex(z)
        Tz, Y, M = self._solve(z)
        _, _, BQ = self._reduced()
        Y2 = sla.solve_triangular(Tz, Y, check_finite=False)
        return complex(np.trace(np.linalg.solve(M, BQ @ Y2)))


def det_f(z: complex, X, perturbation: Perturbation, arrangement: str = "k") -> complex:
    return DeterminantCriterion(X, perturbation, arrangement)(z)


class LimitDeterminant:
    """g(z) = det(I_k + b(z) B A) with b the exterior limit of the Dyson solution."""

    def __init__(self, perturbation: Perturbation, rho: complex):
        self.rho = check_rho(rho)
        self.BA = perturbation.b_factor @ perturbation.a_factor
        self.region = EllipticRegion(self.rho, 1e-9)

    def __call__(self, z: complex) -> complex:
        z = complex(z)
        if self.region.contains(z):
            raise ValueError(f"g is only defined outside E_rho; z={z}")
        b = limit_b(z, self.rho, check=False)
        return complex(np.linalg.det(np.eye(self.BA.shape[0]) + b * self.BA))


def det_g(z: complex, perturbation: Perturbation, rho: complex) -> complex:
    return LimitDeterminant(perturbation, rho)(z)


# --------------------------------------------------------------------------
# contour root finding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RootCluster:
    seed: complex
    radius: float
    winding: int
    roots: tuple
    expected: int | None = None

    @property
    def consistent(self) -> bool:
        return self.expected is None or self.expected == self.winding


def _derivative(f, z, h_rel=1e-6):
    h = h_rel * (1 + abs(z))
    return (f(z + h) - f(z - h)) / (2 * h)


def newton_polish(f, z0: complex, multiplicity: int = 1, tol: float = 1e-10,
                  max_iter: int = 60) -> complex:
    """Newton's method with a central-difference derivative; z -= m f/f'."""
    z = complex(z0)
    for _ in range(max_iter):
        try:
            fz = f(z)
        except NearSingularError:
            return complex(z0)
        if fz == 0:
            return z
        d = _derivative(f, z)
        if d == 0 or not np.isfinite(d):
            break
        step = multiplicity * fz / d
        z = z - step
        if abs(step) <= tol * (1 + abs(z)):
            break
    return z


def _circle_samples(f, seed, radius, K):
    theta = 2 * np.pi * np.arange(K) / K
    zs = seed + radius * np.exp(1j * theta)
    vals = np.array([f(z) for z in zs])
    return zs, vals


def _winding_from(vals):
    ang = np.angle(np.concatenate([vals, vals[:1]]))
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d, float(d.sum() / (2 * np.pi))


def winding_number(f, seed: complex, radius: float, K: int = 64,
                   near_tol: float = 1e-8) -> tuple[int, int]:
    """Winding of f around the circle |z - seed| = radius by phase tracking.

    Returns (winding, points used).  Resolution is sufficient when no phase
    increment exceeds pi/2; otherwise the sampling doubles once.  A sample
    with |f| < near_tol (relative to the contour maximum) signals a root on
    the contour and raises ContourError.
    """
    for attempt in range(2):
        zs, vals = _circle_samples(f, seed, radius, K)
        mx = np.abs(vals).max()
        if not np.all(np.isfinite(vals)) or np.abs(vals).min() <= near_tol * max(mx, 1.0):
            raise ContourError(f"contour |z-{seed}|={radius} passes within tolerance of a root")
        d, w = _winding_from(vals)
        if np.abs(d).max() < np.pi / 2:
            return int(round(w)), K
        K *= 2
    raise ContourError(f"phase increments too large on |z-{seed}|={radius} even with {K // 2} points")


def _power_sums(f, seed, radius, K, count):
    """s_p = (1/2 pi i) contour integral of (z-seed)^p f'(z)/f(z) dz, p = 1..count."""
    theta = 2 * np.pi * np.arange(K) / K
    e = np.exp(1j * theta)
    zs = seed + radius * e
    vals = np.array([f(z) for z in zs])
    der = np.array([_derivative(f, z) for z in zs])
    ld = der / vals
    w = radius * e
    # dz = i w dtheta, so (1/2 pi i) * sum(...) * i * 2pi/K = mean(...)
    return np.array([np.mean(w ** p * ld * w) for p in range(1, count + 1)])


def _roots_from_power_sums(s):
    """Newton identities: power sums -> monic polynomial -> roots."""
    m = len(s)
    e = [1.0 + 0j]
    for k in range(1, m + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * s[i - 1]
        e.append(acc / k)
    coeffs = [(-1) ** k * e[k] for k in range(m + 1)]
    return np.roots(coeffs) if m else np.zeros(0, complex)


def find_roots(f: Callable[[complex], complex], seeds, region: EllipticRegion | None = None,
               radius: float = 0.1, K: int = 64, tol: float = 1e-10,
               poles: Sequence[complex] = ()) -> list[RootCluster]:
    """Argument-principle root search on disks around each seed.

    `seeds` is a sequence of complex points or (point, expected multiplicity)
    pairs.  For each disk the winding number of f is computed; the enclosed
    zeros (winding plus any supplied `poles` inside the disk) are located
    from contour power sums and then polished by Newton's method.  If the
    contour hits a root the radius is perturbed once by 10%.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    out = []
    for item in seeds:
        seed, expected = (item if isinstance(item, tuple) else (item, None))
        seed = complex(seed)
        if region is not None and region.contains(seed):
            raise ValueError(f"seed {seed} lies inside the excluded region")
        r = radius
        try:
            w, Kused = winding_number(f, seed, r, K)
        except ContourError:
            r = radius * 1.1
            w, Kused = winding_number(f, seed, r, K)
        inside_poles = [complex(p) for p in poles if abs(complex(p) - seed) < r]
        nz = w + len(inside_poles)
        roots: tuple = ()
        if nz > 0:
            s = _power_sums(f, seed, r, Kused, nz)
            for p in inside_poles:
                s = s + np.array([(p - seed) ** q for q in range(1, nz + 1)])
            est = _roots_from_power_sums(s) + seed
            clusters = merge_seeds(est, tol=1e-4 * r)
            polished = []
            for z0, mult in clusters:
                z = newton_polish(f, z0, multiplicity=mult, tol=tol)
                polished.extend([z] * mult)
            roots = tuple(sorted(polished, key=lambda z: (z.real, z.imag)))
        out.append(RootCluster(seed=seed, radius=r, winding=w, roots=roots, expected=expected))
    return out


class _CurveTracker:
    """Adaptive argument tracking of f along a parametrised closed curve.

    The parameter interval [0, 1] is bisected until every piece changes
    arg f by less than pi/4 (and at least `min_pieces` pieces are used).
    When `logder` (f'/f) is given, a piece is also split until
    |f'/f| * |dz| < pi/4 at both ends, so that a fast full turn of arg f
    near a zero or pole cannot hide between two samples.  The leaf
    intervals are kept for quadrature.
    """

    def __init__(self, f, gamma, min_pieces: int = 64, max_depth: int = 24,
                 max_step: float = np.pi / 4, near_tol: float = 1e-14, logder=None):
        self.f = f
        self.gamma = gamma
        self.logder = logder
        self.max_depth = max_depth
        self.max_step = max_step
        self.near_tol = near_tol
        self.leaves: list = []
        ts = np.linspace(0.0, 1.0, min_pieces + 1)
        zs = np.asarray(gamma(ts), dtype=complex)
        vals = [self._val(t, z) for t, z in zip(ts[:-1], zs[:-1])]
        vals.append(vals[0])
        self.phase = sum(self._seg(ts[i], ts[i + 1], vals[i], vals[i + 1], 0)
                         for i in range(min_pieces))

    def _val(self, t, z=None):
        z = complex(self.gamma(t)) if z is None else complex(z)
        v = self.f(z)
        if not np.isfinite(v) or abs(v) <= self.near_tol:
            raise ContourError(f"contour passes through a zero or pole near {z}")
        rate = abs(self.logder(z)) if self.logder is not None else 0.0
        return v, rate, z

    def _seg(self, a, b, fa, fb, depth):
        d = float(np.angle(fb[0] / fa[0]))
        step = max(fa[1], fb[1]) * abs(fb[2] - fa[2])
        if abs(d) < self.max_step and step < self.max_step:
            self.leaves.append((a, b))
            return d
        if depth >= self.max_depth:
            raise ContourError(f"phase tracking unresolved near {self.gamma((a + b) / 2)}")
        m = (a + b) / 2
        fm = self._val(m)
        return self._seg(a, m, fa, fm, depth + 1) + self._seg(m, b, fm, fb, depth + 1)

    @property
    def winding(self) -> float:
        return self.phase / (2 * np.pi)

    def power_sums(self, logder, count, centre=0j, nodes=8):
        """(1/2 pi i) integral of (z-centre)^p f'/f dz for p = 0..count."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        acc = np.zeros(count + 1, dtype=complex)
        hd = 1e-7
        for a, b in self.leaves:
            t = (a + b) / 2 + x * (b - a) / 2
            z = self.gamma(t)
            dz = (self.gamma(t + hd) - self.gamma(t - hd)) / (2 * hd)
            ld = np.array([logder(complex(q)) for q in z])
            base = ld * dz * w * (b - a) / 2
            q = z - centre
            for p in range(count + 1):
                acc[p] += np.sum(base * q ** p)
        return acc / (2j * np.pi)


def _logder_of(f):
    ld = getattr(f, "log_derivative", None)
    if ld is not None:
        return ld
    return lambda z: _derivative(f, z) / f(z)


def spectral_bound(X, perturbation: Perturbation) -> float:
    """||X||_2 + ||A||_2 ||B||_2, an upper bound on the spectral radius of X + C."""
    X = check_square_matrix(X)
    A, B = perturbation.a_factor, perturbation.b_factor
    nb = np.linalg.norm(A, 2) * np.linalg.norm(B, 2) if perturbation.rank_k else 0.0
    return float(np.linalg.norm(X, 2) + nb)


def _cell_curve(region: EllipticRegion, psi0, psi1, t0, t1):
    """Closed, positively oriented curve around {psi0 < psi < psi1, t0 < t < t1}.

    The cell lives in normal coordinates: z = (point of E_rho with outward
    normal angle psi) + t * (unit normal).
    """
    base = EllipticRegion(region.rho, 0.0)

    def point(psi, t):
        return boundary_curve(EllipticRegion(base.rho, 0.0), psi) + \
            t * base.rotation * np.exp(1j * psi)

    def scalar(s):
        s = (1.0 - float(s)) * 4.0
        k = min(max(int(s), 0), 3)
        u = s - k
        if k == 0:
            return point(psi0, t1 - u * (t1 - t0))
        if k == 1:
            return point(psi0 + u * (psi1 - psi0), t0)
        if k == 2:
            return point(psi1, t0 + u * (t1 - t0))
        return point(psi1 - u * (psi1 - psi0), t1)

    def gamma(s):
        if np.ndim(s) == 0:
            return scalar(s)
        # the pieces below run clockwise; reversing the parameter fixes that
        s = (1.0 - np.asarray(s, dtype=float)) * 4.0
        k = np.clip(np.floor(s), 0, 3)
        u = s - k
        psi = np.select([k == 0, k == 1, k == 2, k == 3],
                        [np.full_like(u, psi0), psi0 + u * (psi1 - psi0),
                         np.full_like(u, psi1), psi1 - u * (psi1 - psi0)])
        t = np.select([k == 0, k == 1, k == 2, k == 3],
                      [t1 - u * (t1 - t0), np.full_like(u, t0),
                       t0 + u * (t1 - t0), np.full_like(u, t1)])
        return point(psi, t)
    return gamma


def locate_roots(f, region: EllipticRegion, t_max: float, poles: Sequence[complex] = (),
                 tol: float = 1e-10, max_cell: float = 0.5, max_depth: int = 40) -> np.ndarray:
    """All zeros of a meromorphic f with epsilon < dist(z, E_rho) < t_max.

    The band around the region is described in normal coordinates (psi, t)
    (outward normal angle, distance to E_rho).  Each curvilinear cell gets
    its zero count from the argument principle (adaptive phase tracking)
    plus the known `poles` inside it.  Cells are split until each holds a
    single zero and is smaller than `max_cell`; that zero is estimated from
    the contour power sum and polished by Newton's method, and the cell is
    split further if the polished root leaves it.  Unseparable clusters
    (multiple roots) fall back to power sums of all orders with Newton
    identities.  Since 0 lies in E_rho,
    t_max = r bounds every zero with |z| < r.  `f` may expose
    `log_derivative(z)`; otherwise f'/f uses central differences.
    """
    eps = max(region.epsilon, 0.0)
    if not t_max > eps:
        raise ValueError("t_max must exceed the region's epsilon")
    if abs(region.rho) >= 1 - 1e-6:
        # continuous parametrisation of the stadium through a thin ellipse
        rho = (1 - 1e-6) * region.rho / abs(region.rho)
        region = EllipticRegion(rho, eps)
    poles = np.atleast_1d(np.asarray(list(poles), dtype=complex))
    if poles.size:
        ppsi, pt = normal_coordinates(region, poles)
        keep = (pt > eps) & (pt < t_max) & ~EllipticRegion(region.rho).contains(poles)
        ppsi, pt, pz = ppsi[keep], pt[keep], poles[keep]
    else:
        ppsi = pt = np.zeros(0)
        pz = poles
    ld = _logder_of(f)
    found: list[complex] = []
    # offset the angular cuts from the symmetry axes, where real problems put their roots
    off = 0.1234567
    cells = [(off + 2 * np.pi * k / 8, off + 2 * np.pi * (k + 1) / 8, eps, t_max, 0)
             for k in range(8)]
    while cells:
        psi0, psi1, t0, t1, depth = cells.pop()
        gamma = _cell_curve(region, psi0, psi1, t0, t1)
        tracker = _CurveTracker(f, gamma, min_pieces=32, max_depth=40, logder=ld)
        w = tracker.winding
        wi = int(round(w))
        if abs(w - wi) > 0.05:
            raise ContourError(f"non-integer zero count {w:.3f} on a cell")
        dpsi = np.mod(ppsi - psi0, 2 * np.pi)
        inside = (dpsi < psi1 - psi0) & (pt >= t0) & (pt < t1)
        pin = pz[inside]
        count = wi + pin.size
        if count < 0:
            raise ContourError("negative zero count: the supplied poles are incomplete")
        if count == 0:
            continue
        corners = gamma(np.array([0.0, 0.25, 0.5, 0.75]))
        diam = float(max(abs(corners[0] - corners[2]), abs(corners[1] - corners[3])))
        centre = complex(np.mean(corners))
        pm, tm = (psi0 + psi1) / 2, (t0 + t1) / 2
        children = [(psi0, pm, t0, tm, depth + 1), (pm, psi1, t0, tm, depth + 1),
                    (psi0, pm, tm, t1, depth + 1), (pm, psi1, tm, t1, depth + 1)]
        if depth < max_depth and (count > 1 or diam > max_cell):
            cells += children
            continue
        sums = tracker.power_sums(ld, count, centre)[1:]
        sums = sums + np.array([np.sum((pin - centre) ** p) for p in range(1, count + 1)])
        est = _roots_from_power_sums(sums) + centre
        if count == 1:
            z = newton_polish(f, est[0], tol=tol)
            zpsi, zt = normal_coordinates(region, z)
            in_cell = (np.mod(zpsi[0] - psi0, 2 * np.pi) <= psi1 - psi0 + 1e-9
                       and t0 - 1e-9 <= zt[0] <= t1 + 1e-9)
            if not in_cell and depth < max_depth:
                cells += children
                continue
            found.append(z if in_cell else complex(est[0]))
            continue
        for z0, mult in merge_seeds(est, tol=1e-6):
            z = newton_polish(f, z0, multiplicity=mult, tol=tol)
            if abs(z - z0) > diam:
                z = z0
            found.extend([z] * mult)
    return _sorted_ev(np.array(found, dtype=complex))


def criterion_roots(X, perturbation: Perturbation, region: EllipticRegion,
                    tol: float = 1e-10) -> np.ndarray:
    """Zeros of det(1 + B (X - z)^{-1} A) outside `region`.

    The poles of the criterion are eigenvalues of X, supplied exactly so
    that every cell's zero count is exact; the search band ends beyond
    ||X|| + ||A|| ||B||, which bounds all eigenvalues of X + C.
    """
    f = DeterminantCriterion(X, perturbation)
    poles = np.linalg.eigvals(check_square_matrix(X))
    return locate_roots(f, region, spectral_bound(X, perturbation) + 0.1, poles=poles, tol=tol)


# --------------------------------------------------------------------------
# matching and reports
# --------------------------------------------------------------------------

def default_cap(n: int) -> float:
    """10 (log log n)^{-1/2}, mirroring the convergence rate."""
    return 10.0 / math.sqrt(math.log(math.log(max(n, 16))))


@dataclass
class OutlierReport:
    observed: list
    predictions: list
    matches: list
    unmatched_predictions: list
    unmatched_observed: list
    cap_distance: float
    meta: dict = field(default_factory=dict)

    @property
    def counts(self) -> dict:
        return {"n_observed": len(self.observed), "n_predicted": len(self.predictions),
                "n_matched": len(self.matches),
                "n_unmatched_predictions": len(self.unmatched_predictions),
                "n_unmatched_observed": len(self.unmatched_observed)}

    @property
    def max_match_distance(self) -> float:
        return max((m[2] for m in self.matches), default=0.0)

    @property
    def success(self) -> bool:
        """Exactly one observed outlier per admissible prediction, all matched."""
        return not self.unmatched_predictions and not self.unmatched_observed

    def to_dict(self) -> dict:
        c = lambda z: [float(z.real), float(z.imag)]
        return {"observed": [c(z) for z in self.observed],
                "predictions": [c(z) for z in self.predictions],
                "matches": [{"prediction": c(p), "observed": c(o), "distance": float(d)}
                            for p, o, d in self.matches],
                "unmatched_predictions": [c(z) for z in self.unmatched_predictions],
                "unmatched_observed": [c(z) for z in self.unmatched_observed],
                "cap_distance": float(self.cap_distance),
                "counts": self.counts, "max_match_distance": float(self.max_match_distance),
                "success": self.success, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "OutlierReport":
        z = lambda v: complex(v[0], v[1])
        return cls(observed=[z(v) for v in d["observed"]],
                   predictions=[z(v) for v in d["predictions"]],
                   matches=[(z(m["prediction"]), z(m["observed"]), m["distance"])
                            for m in d["matches"]],
                   unmatched_predictions=[z(v) for v in d["unmatched_predictions"]],
                   unmatched_observed=[z(v) for v in d["unmatched_observed"]],
                   cap_distance=d["cap_distance"], meta=d.get("meta", {}))

    def csv_row(self, trial: int) -> list:
        c = self.counts
        return [trial, c["n_observed"], c["n_predicted"], repr(self.max_match_distance),
                c["n_unmatched_predictions"], c["n_unmatched_observed"]]


CSV_HEADER = ["trial", "n_observed", "n_predicted", "max_match_distance",
              "unmatched_predictions", "unmatched_observed"]


def write_reports_csv(reports: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for t in sorted(reports):
            w.writerow(reports[t].csv_row(t))
    return path


def match(observed, predictions, cap_distance: float) -> OutlierReport:
    """Greedy globally-nearest one-to-one matching under cap_distance."""
    obs = [complex(z) for z in observed]
    pred = [complex(p.predicted) if isinstance(p, OutlierPrediction) else complex(p)
            for p in predictions]
    pairs = sorted(((abs(p - o), i, j) for i, p in enumerate(pred)
                    for j, o in enumerate(obs) if abs(p - o) <= cap_distance))
    used_p, used_o, matches = set(), set(), []
    for d, i, j in pairs:
        if i in used_p or j in used_o:
            continue
        used_p.add(i)
        used_o.add(j)
        matches.append((pred[i], obs[j], float(d)))
    return OutlierReport(
        observed=obs, predictions=pred, matches=matches,
        unmatched_predictions=[p for i, p in enumerate(pred) if i not in used_p],
        unmatched_observed=[o for j, o in enumerate(obs) if j not in used_o],
        cap_distance=float(cap_distance))


def outlier_report(X, perturbation: Perturbation, rho: complex, epsilon: float,
                   cap_distance: float | None = None, eig=None) -> OutlierReport:
    """Observed eigenvalues of X + C outside E_{rho,2eps} matched to admissible predictions."""
    X = check_square_matrix(X)
    preds = predict(perturbation, rho, epsilon)
    if eig is None:
        eig = eigenvalues(X + perturbation.dense()).eigenvalues
    obs = eig[~EllipticRegion(rho, 2 * epsilon).contains(eig)]
    cap = default_cap(X.shape[0]) if cap_distance is None else cap_distance
    rep = match(obs, admissible_locations(preds), cap)
    rep.meta = {"rho": [complex(rho).real, complex(rho).imag], "epsilon": epsilon}
    return rep
