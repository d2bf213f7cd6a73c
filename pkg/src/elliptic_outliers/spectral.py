"""Hermitization, eigenvalues, minimal singular values and resolvent bilinear forms."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ._validation import check_square_matrix, check_vector
from .dyson import limit_b
from .geometry import EllipticRegion

SINGULAR_TOL = 1e-10
SVD_CUTOFF = 512


class EigenvalueError(RuntimeError):
    """The dense eigensolver failed; carries the matrix condition estimate."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NearSingularError(ValueError):
    """The shift z is (numerically) an eigenvalue of X."""

    def __init__(self, message, sigma_min):
        super().__init__(message)
        self.sigma_min = sigma_min


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    n: int
    backend_tolerance: float
    trace_defect: float = 0.0
    max_residual: float | None = None

    def __post_init__(self):
        if self.eigenvalues.shape != (self.n,):
            raise ValueError("a spectrum needs exactly n eigenvalues")

    def outside(self, region: EllipticRegion) -> np.ndarray:
        return self.eigenvalues[~region.contains(self.eigenvalues)]

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if self.n else 0.0

    def to_rows(self, trial: int = 0):
        return [(trial, float(l.real), float(l.imag)) for l in self.eigenvalues]


def sort_eigenvalues(ev: np.ndarray) -> np.ndarray:
    """Canonical order (by real part, then imaginary part) for reproducible output."""
    ev = np.asarray(ev, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


def hermitize(X, z: complex, v: complex = 0.0) -> np.ndarray:
    """[[-v I, X - z], [(X - z)^*, -v I]]."""
    A = check_square_matrix(X)
    n = A.shape[0]
    Y = np.zeros((2 * n, 2 * n), dtype=complex)
    B = A - complex(z) * np.eye(n)
    Y[:n, n:] = B
    Y[n:, :n] = B.conj().T
    idx = np.arange(2 * n)
    Y[idx, idx] = -complex(v)
    return Y


def eigenvalues(M, check_residual: bool = False, sort: bool = True) -> Spectrum:
    """All eigenvalues of a dense matrix (LAPACK geev) with trace bookkeeping.

    With `check_residual` the eigenvectors are also computed and the largest
    ||Mv - lambda v|| / ||M|| is recorded; the contract is <= 1e-8.
    """
    A = check_square_matrix(M, "M")
    n = A.shape[0]
    try:
        if check_residual:
            ev, vecs = np.linalg.eig(A)
        else:
            ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(A)) if n else None
        raise EigenvalueError(f"eigendecomposition failed (cond ~ {cond:.3e}): {exc}", cond) from exc
    scale = float(np.linalg.norm(A, 2)) if n else 0.0
    tol = 1e-8 * max(scale, 1.0)
    res = None
    if check_residual and n:
        r = A @ vecs - vecs * ev[None, :]
        res = float((np.linalg.norm(r, axis=0) / np.linalg.norm(vecs, axis=0)).max()) / max(scale, 1e-300)
    defect = float(abs(ev.sum() - np.trace(A)))
    if sort:
        ev = sort_eigenvalues(ev)
    return Spectrum(eigenvalues=ev, n=n, backend_tolerance=tol, trace_defect=defect,
                    max_residual=res)


def sigma_min(X, z: complex = 0.0, method: str = "auto") -> float:
    """Smallest singular value of X - z.

    method 'svd' uses a dense singular value decomposition, 'hermitization'
    the eigenvalue of the 2n x 2n Hermitization closest to 0 (a subset
    symmetric eigensolve); 'auto' picks svd for n <= 512.
    """
    A = check_square_matrix(X)
    n = A.shape[0]
    B = A - complex(z) * np.eye(n)
    if method == "auto":
        method = "svd" if n <= SVD_CUTOFF else "hermitization"
    if method == "svd":
        return float(sla.svdvals(B, check_finite=False).min())
    if method == "hermitization":
        H = np.zeros((2 * n, 2 * n), dtype=complex)
        H[:n, n:] = B
        H[n:, :n] = B.conj().T
        # eigenvalues come in +-sigma pairs: index n is the smallest nonnegative one
        w = sla.eigh(H, eigvals_only=True, subset_by_index=[n - 1, n], check_finite=False,
                     driver="evr")
        return float(np.abs(w).min())
    raise ValueError(f"unknown method {method!r}")


class ShiftedSolver:
    """LU factorization of X - z reused across right-hand sides."""

    def __init__(self, X, z: complex, check: bool = True):
        A = check_square_matrix(X)
        self.n = A.shape[0]
        self.z = complex(z)
        self.B = A - self.z * np.eye(self.n)
        self.lu = sla.lu_factor(self.B, check_finite=False)
        if check:
            piv = np.abs(np.diag(self.lu[0]))
            rcond = piv.min() / max(piv.max(), 1e-300)
            if not np.all(np.isfinite(self.lu[0])) or rcond < 1e-13:
                s = sigma_min(A, self.z)
                if s <= SINGULAR_TOL:
                    raise NearSingularError(
                        f"z={self.z} is numerically an eigenvalue (sigma_min={s:.3e})", s)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs, check_finite=False)

    def residual(self, x: np.ndarray, rhs: np.ndarray) -> float:
        return float(np.abs(self.B @ x - rhs).max())


def resolvent_bilinear(X, z: complex, u, w, check_singular: bool = True) -> complex:
    """<u, (X - z)^{-1} w> (conjugate-linear in u) via one LU solve."""
    A = check_square_matrix(X)
    n = A.shape[0]
    u = check_vector(u, n, "u", unit=False)
    w = check_vector(w, n, "w", unit=False)
    if check_singular:
        s = sigma_min(A, z) if n <= SVD_CUTOFF else None
        if s is not None and s <= SINGULAR_TOL:
            raise NearSingularError(f"z={z} is numerically an eigenvalue (sigma_min={s:.3e})", s)
    solver = ShiftedSolver(A, z, check=check_singular)
    x = solver.solve(w)
    rel = solver.residual(x, w) / max(np.abs(w).max(), 1e-300)
    if rel > 1e-10:
        raise NearSingularError(f"linear solve at z={z} has residual {rel:.3e}",
                                sigma_min(A, z))
    return complex(np.vdot(u, x))


def isotropic_deviations(X, rho: complex, z_grid, pairs, epsilon: float = 0.0) -> list[float]:
    """isotropic_deviation for several (u, w) pairs, one LU factorization per z."""
    A = check_square_matrix(X)
    n = A.shape[0]
    pairs = [(check_vector(u, n, "u", unit=False), check_vector(w, n, "w", unit=False))
             for u, w in pairs]
    zs = np.atleast_1d(np.asarray(z_grid, dtype=complex))
    region = EllipticRegion(rho, max(epsilon, 1e-9))
    bad = region.contains(zs)
    if bad.any():
        raise ValueError(f"grid point {zs[bad][0]} lies inside E_(rho,eps)")
    lb = limit_b(zs, rho)
    W = np.stack([w for _, w in pairs], axis=1)
    dev = np.zeros(len(pairs))
    for z, b in zip(zs, np.atleast_1d(lb)):
        solver = ShiftedSolver(A, z, check=False)
        Xs = solver.solve(W)
        for k, (u, w) in enumerate(pairs):
            dev[k] = max(dev[k], abs(np.vdot(u, Xs[:, k]) - b * np.vdot(u, w)))
    return [float(d) for d in dev]


def isotropic_deviation(X, rho: complex, z_grid, u, w, epsilon: float = 0.0) -> float:
    """max_z |<u,(X-z)^{-1}w> - limit_b(z, rho) <u,w>| over z_grid.

    The grid must avoid E_{rho, epsilon} (and E_rho itself when epsilon is 0).
    """
    return isotropic_deviations(X, rho, z_grid, [(u, w)], epsilon)[0]


def exterior_grid(rho: complex, epsilon: float, m: int = 20, radius_step: float = 0.3):
    """m points on the two contours at distance epsilon and epsilon + radius_step."""
    if m < 6:
        raise ValueError("the exterior grid needs m >= 6 (three points per contour)")
    half = m // 2
    inner = EllipticRegion(rho, epsilon + 1e-6).boundary_points(half)
    outer = EllipticRegion(rho, epsilon + radius_step).boundary_points(m - half)
    return np.concatenate([inner, outer])


def write_spectrum_csv(spectra, path) -> Path:
    """Rows (trial, re, im); `spectra` maps trial index -> eigenvalue array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    items = spectra.items() if isinstance(spectra, dict) else enumerate(spectra)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["trial", "re", "im"])
        for t, ev in items:
            if isinstance(ev, Spectrum):
                ev = ev.eigenvalues
            for l in ev:
                wr.writerow([int(t), repr(float(l.real)), repr(float(l.imag))])
    return path


def read_spectrum_csv(path) -> dict:
    out: dict = {}
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["trial"]), []).append(complex(float(row["re"]), float(row["im"])))
    return {k: np.array(v) for k, v in out.items()}
