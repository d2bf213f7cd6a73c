"""Input validation helpers shared by the estimators and functional API."""
from __future__ import annotations

import numbers

import numpy as np


def check_square_matrix(M, name: str = "X") -> np.ndarray:
    """Return `M` as a finite complex square 2D array or raise ValueError."""
    if hasattr(M, "entries") and not isinstance(M, np.ndarray):
        M = M.entries
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square 2D array; got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A.astype(complex, copy=False)


def check_rho(rho) -> complex:
    if not isinstance(rho, numbers.Number):
        raise TypeError(f"rho must be a number; got {type(rho).__name__}")
    r = complex(rho)
    if abs(r) > 1 + 1e-12:
        raise ValueError(f"|rho| must be <= 1; got {abs(r)}")
    return r


def check_vector(u, n: int, name: str = "u", unit: bool = True) -> np.ndarray:
    v = np.asarray(u, dtype=complex).ravel()
    if v.shape != (n,):
        raise ValueError(f"{name} must have length {n}; got {v.shape}")
    if unit and not np.isclose(np.linalg.norm(v), 1.0, atol=1e-10):
        raise ValueError(f"{name} must be a unit vector")
    return v


def as_complex_array(z) -> tuple[np.ndarray, bool]:
    """Return (1D complex array, was_scalar)."""
    arr = np.asarray(z, dtype=complex)
    return np.atleast_1d(arr).ravel(), arr.ndim == 0
