r"""Two-by-two matrix Dyson equation of the Hermitized elliptic model.

For a spectral location ``z`` and a Hermitized spectral parameter ``v`` with
``Im v > 0`` the block Stieltjes transform ``G = [[a, b], [b_bar, c]]``
solves

.. math::

    S[G] + G^{-1} + \begin{pmatrix} v & z \\ \bar z & v \end{pmatrix} = 0,
    \qquad S[G] = \begin{pmatrix} G_{22} & \rho_0 G_{21} \\
                                  \bar\rho_0 G_{12} & G_{11} \end{pmatrix},

with ``Im G`` positive definite.  The four entries are kept independent so
the same code handles ``v = E + i eta`` with ``E != 0``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import EllipticRegion

RHO_ZERO = 1e-12


class DysonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DysonParams:
    z: complex
    v: complex
    rho0: complex

    def __post_init__(self):
        if not complex(self.v).imag > 0:
            raise ValueError("Im v must be strictly positive")
        if abs(complex(self.rho0)) > 1 + 1e-12:
            raise ValueError("|rho0| must be <= 1")


@dataclass(frozen=True)
class DysonSolution:
    """Solution entries; `b_bar` is the (2,1) entry, the exterior limit conj(b)."""
    a: complex
    b: complex
    b_bar: complex
    c: complex
    residual: float
    iterations: int
    converged: bool

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b_bar, self.c]])

    @property
    def V(self) -> float:
        return float(self.a.imag)

    def imag_eigenvalues(self) -> np.ndarray:
        G = self.matrix
        return np.linalg.eigvalsh((G - G.conj().T) / 2j)


# --------------------------------------------------------------------------
# batched kernels; G has shape (m, 2, 2)
# --------------------------------------------------------------------------

def _inv2(G):
    det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
    out = np.empty_like(G)
    out[:, 0, 0] = G[:, 1, 1]
    out[:, 1, 1] = G[:, 0, 0]
    out[:, 0, 1] = -G[:, 0, 1]
    out[:, 1, 0] = -G[:, 1, 0]
    return out / det[:, None, None]


def _S(G, rho0):
    out = np.empty_like(G)
    out[:, 0, 0] = G[:, 1, 1]
    out[:, 1, 1] = G[:, 0, 0]
    out[:, 0, 1] = rho0 * G[:, 1, 0]
    out[:, 1, 0] = np.conj(rho0) * G[:, 0, 1]
    return out


def _shift(z, v):
    Z = np.empty((z.size, 2, 2), dtype=complex)
    Z[:, 0, 0] = v
    Z[:, 1, 1] = v
    Z[:, 0, 1] = z
    Z[:, 1, 0] = np.conj(z)
    return Z


def _defect(G, Z, rho0):
    F = _inv2(G) + _S(G, rho0) + Z
    return F, np.abs(F).reshape(F.shape[0], -1).max(axis=1)


def _term_scale(G, rho0) -> np.ndarray:
    """max(1, |G^{-1}|, |S[G]|), the size of the terms summed in the defect.

    Rounding alone leaves a defect of order eps * scale * cond(J), so the
    tolerance is applied relative to this scale.  It equals 1 wherever the
    solution has entries of modulus at most 1.
    """
    a = np.abs(_inv2(G)).reshape(G.shape[0], -1).max(axis=1)
    b = np.abs(_S(G, rho0)).reshape(G.shape[0], -1).max(axis=1)
    return np.maximum(1.0, np.maximum(a, b))


def _accepted(G, res, rho0, tol) -> np.ndarray:
    return (res <= tol * _term_scale(G, rho0)) & _imag_pd(G)


def _newton_step(G, F, rho0):
    """Solve J dG = -F with J(H) = -G^{-1} H G^{-1} + S[H]."""
    m = G.shape[0]
    Gi = _inv2(G)
    J = np.zeros((m, 4, 4), dtype=complex)
    for col, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        J[:, :, col] = -(Gi[:, :, i][:, :, None] * Gi[:, j, :][:, None, :]).reshape(m, 4)
    rc = np.conj(rho0)
    J[:, 3, 0] += 1.0
    J[:, 2, 1] += rc
    J[:, 1, 2] += rho0
    J[:, 0, 3] += 1.0
    rhs = -F.reshape(m, 4)
    try:
        d = np.linalg.solve(J, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        d = np.stack([np.linalg.lstsq(J[k], rhs[k], rcond=None)[0] for k in range(m)])
    return d.reshape(m, 2, 2)


def _imag_pd(G) -> np.ndarray:
    H = (G - np.conj(np.swapaxes(G, 1, 2))) / 2j
    h11 = H[:, 0, 0].real
    h22 = H[:, 1, 1].real
    off = np.abs(H[:, 0, 1])
    tr = h11 + h22
    det = h11 * h22 - off ** 2
    return (tr > 0) & (det > 0)


def _newton(G, Z, rho0, tol, steps):
    F, res = _defect(G, Z, rho0)
    it = np.zeros(G.shape[0], dtype=int)
    for _ in range(steps):
        act = res > tol
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        d = _newton_step(G[idx], F[idx], rho0)
        t = np.ones(idx.size)
        for _ in range(30):
            Gn = G[idx] + t[:, None, None] * d
            Fn, rn = _defect(Gn, Z[idx], rho0)
            ok = (rn < res[idx]) | ~np.isfinite(res[idx])
            ok &= np.isfinite(rn)
            if ok.all():
                break
            t = np.where(ok, t, t / 2)
        G[idx] = Gn
        F[idx] = Fn
        res[idx] = rn
        it[idx] += 1
    return G, res, it


def solve_batch(z, v, rho0: complex, tol: float = 1e-12, max_iter: int = 20000,
                fixed_point_iter: int = 300, theta: float = 0.5):
    """Solve the Dyson equation for arrays of z and v (broadcast together).

    Stage 1 is the damped fixed-point iteration
    G <- (1-t) G + t (-Z - S[G])^{-1} from G = iI, with t halved whenever
    the defect grows.  Stage 2 polishes with Newton's method.  Points still
    unresolved (slow fixed-point contraction at small Im v) are re-solved
    by Newton continuation in Im v from 1 down to the target, which tracks
    the branch with positive imaginary part.  Points where continuation
    stalls at a fold of the eta-path get a long damped fixed-point run
    followed by Newton.

    A point is converged when Im G is positive definite and the defect is at
    most tol * max(1, |G^{-1}|, |S[G]|) (entrywise maxima).  The scale is 1
    unless the solution is large, as it is near folds at |rho0| = 1, where
    rounding alone leaves a defect slightly above an absolute 1e-12.

    Returns a dict of arrays: a, b, b_bar, c, residual, iterations,
    converged.
    """
    zb, vb = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(v, dtype=complex))
    shape = zb.shape
    zf = zb.ravel().copy()
    vf = vb.ravel().copy()
    if not np.all(vf.imag > 0):
        raise ValueError("Im v must be strictly positive")
    rho0 = complex(rho0)
    m = zf.size
    Z = _shift(zf, vf)
    G = np.zeros((m, 2, 2), dtype=complex)
    G[:, 0, 0] = 1j
    G[:, 1, 1] = 1j
    th = np.full(m, theta)
    F, res = _defect(G, Z, rho0)
    iters = np.zeros(m, dtype=int)
    n_fp = min(fixed_point_iter, max_iter)
    switch = 1e-6
    for _ in range(n_fp):
        act = res > switch
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        target = _inv2(-(Z[idx] + _S(G[idx], rho0)))
        Gn = (1 - th[idx, None, None]) * G[idx] + th[idx, None, None] * target
        Fn, rn = _defect(Gn, Z[idx], rho0)
        worse = rn > res[idx]
        th[idx] = np.where(worse, np.maximum(th[idx] / 2, 1e-3), th[idx])
        G[idx] = Gn
        F[idx] = Fn
        res[idx] = rn
        iters[idx] += 1
    near = res <= 1e-2
    if near.any():
        idx = np.nonzero(near)[0]
        Gs, rs, it = _newton(G[idx].copy(), Z[idx], rho0, tol, 60)
        good = _accepted(Gs, rs, rho0, tol)
        G[idx[good]] = Gs[good]
        res[idx[good]] = rs[good]
        iters[idx] += it
    pending = ~_accepted(G, res, rho0, tol)
    if pending.any():
        idx = np.nonzero(pending)[0]
        Gc, rc, ic = _continuation(zf[idx], vf[idx], rho0, tol, max_iter)
        G[idx] = Gc
        res[idx] = rc
        iters[idx] += ic
    pending = ~_accepted(G, res, rho0, tol) & (iters < max_iter)
    if pending.any():
        # continuation can stall at a fold of the eta-path; a long damped
        # fixed-point run lands in the basin of the physical solution instead
        idx = np.nonzero(pending)[0]
        Gf, rf, itf = _long_fixed_point(Z[idx], rho0, tol, 3000)
        ok = _accepted(Gf, rf, rho0, tol)
        G[idx[ok]] = Gf[ok]
        res[idx[ok]] = rf[ok]
        iters[idx] += itf
    conv = _accepted(G, res, rho0, tol) & (iters <= max_iter)
    return {
        "a": G[:, 0, 0].reshape(shape), "b": G[:, 0, 1].reshape(shape),
        "b_bar": G[:, 1, 0].reshape(shape), "c": G[:, 1, 1].reshape(shape),
        "residual": res.reshape(shape), "iterations": iters.reshape(shape),
        "converged": conv.reshape(shape),
    }


def _long_fixed_point(Z, rho0, tol, n_iter, newton_steps: int = 800):
    """Damped fixed point from G = i I followed by a long Newton run."""
    m = Z.shape[0]
    G = np.zeros((m, 2, 2), dtype=complex)
    G[:, 0, 0] = 1j
    G[:, 1, 1] = 1j
    th = np.full(m, 0.5)
    _, res = _defect(G, Z, rho0)
    for _ in range(n_iter):
        Gn = (1 - th[:, None, None]) * G + th[:, None, None] * _inv2(-(Z + _S(G, rho0)))
        _, rn = _defect(Gn, Z, rho0)
        th = np.where(rn > res, np.maximum(th / 2, 1e-3), th)
        G, res = Gn, rn
    G, res, it = _newton(G, Z, rho0, tol, newton_steps)
    return G, res, it + n_iter


def _continuation(z, v, rho0, tol, max_iter, max_levels: int = 400):
    """Newton continuation in Im v from max(1, Im v) down to the target.

    Each point carries its own step ratio.  A level is accepted when Newton
    reaches the tolerance with Im G positive definite; otherwise the point
    retreats to its last accepted iterate and retries with a shorter step
    (ratio r -> sqrt(r)).  This keeps the iterate on the physical branch
    near the edge of the support, where the solution turns sharply in eta.
    """
    m = z.size
    eta_t = v.imag
    eta = np.maximum(1.0, eta_t)
    G = np.zeros((m, 2, 2), dtype=complex)
    G[:, 0, 0] = 1j
    G[:, 1, 1] = 1j
    iters = np.zeros(m, dtype=int)
    # at Im v >= 1 the fixed-point map is a strong contraction
    Z = _shift(z, v.real + 1j * eta)
    for _ in range(200):
        G = _inv2(-(Z + _S(G, rho0)))
        iters += 1
    G, res, it = _newton(G, Z, rho0, max(tol, 1e-10), 40)
    iters += it
    ratio = np.full(m, 0.5)
    done = eta <= eta_t
    for _ in range(max_levels):
        act = ~done & (ratio < 0.999) & (iters < max_iter)
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        trial = np.maximum(eta[idx] * ratio[idx], eta_t[idx])
        last = trial <= eta_t[idx]
        Zt = _shift(z[idx], v.real[idx] + 1j * trial)
        Gt, rt, it = _newton(G[idx].copy(), Zt, rho0, tol, 40)
        iters[idx] += it
        ok = _accepted(Gt, rt, rho0, np.where(last, tol, max(tol, 1e-10)))
        acc, rej = idx[ok], idx[~ok]
        G[acc] = Gt[ok]
        res[acc] = rt[ok]
        eta[acc] = trial[ok]
        done[acc] = last[ok]
        ratio[acc] = np.minimum(ratio[acc] ** 2, 0.5)
        ratio[rej] = np.sqrt(ratio[rej])
        res[rej] = np.maximum(res[rej], rt[~ok])
    # points that never reached the target keep the last accepted iterate;
    # their residual is measured at the requested v so they report failure
    short = ~done
    if short.any():
        _, res_short = _defect(G[short], _shift(z[short], v[short]), rho0)
        res[short] = res_short
    return G, res, iters


def solve(params: DysonParams | None = None, *, z=None, v=None, rho0=None,
          tol: float = 1e-12, max_iter: int = 20000, raise_on_failure: bool = True
          ) -> DysonSolution:
    """Solve at a single (z, v, rho0); raises DysonConvergenceError on failure."""
    if params is None:
        params = DysonParams(z=complex(z), v=complex(v), rho0=complex(rho0))
    if tol <= 0:
        raise ValueError("tol must be positive")
    out = solve_batch(params.z, params.v, params.rho0, tol=tol, max_iter=max_iter)
    sol = DysonSolution(a=complex(out["a"]), b=complex(out["b"]),
                        b_bar=complex(out["b_bar"]), c=complex(out["c"]),
                        residual=float(out["residual"]), iterations=int(out["iterations"]),
                        converged=bool(out["converged"]))
    if raise_on_failure and not sol.converged:
        raise DysonConvergenceError(
            f"Dyson solver did not converge at z={params.z}, v={params.v}: "
            f"residual {sol.residual:.3e}", sol.residual)
    return sol


def defect(a, b, b_bar, c, z, v, rho0) -> float:
    """Max-entry defect of the Dyson equation at the given entries."""
    G = np.array([[[a, b], [b_bar, c]]], dtype=complex)
    _, r = _defect(G, _shift(np.array([complex(z)]), complex(v)), complex(rho0))
    return float(r[0])


# --------------------------------------------------------------------------
# closed form outside the region
# --------------------------------------------------------------------------

def _sqrt_exterior(z: np.ndarray, rho0: complex) -> np.ndarray:
    """sqrt(z^2 - 4 rho0), cut on [-2 sqrt(rho0), 2 sqrt(rho0)], ~ z at infinity."""
    s = np.sqrt(rho0 + 0j)
    u = z / s
    return s * np.sqrt(u - 2) * np.sqrt(u + 2)


def limit_b(z, rho0: complex, check: bool = True):
    """Limit of the (2,1) entry as eta -> 0 outside E_{rho0}.

    Equals (-z + sqrt(z^2 - 4 rho0)) / (2 rho0), evaluated as the
    cancellation-free -2 / (z + sqrt(z^2 - 4 rho0)); -1/z when rho0 = 0.
    """
    rho0 = complex(rho0)
    za = np.asarray(z, dtype=complex)
    if check:
        inside = np.atleast_1d(EllipticRegion(rho0, 1e-9).contains(za))
        if inside.any():
            bad = np.atleast_1d(za).ravel()[inside.ravel()][0]
            raise ValueError(f"z={bad} lies in the elliptic region; the limit formula "
                             "only holds outside")
    if abs(rho0) < RHO_ZERO:
        out = -1.0 / za
    else:
        out = -2.0 / (za + _sqrt_exterior(za, rho0))
    return complex(out) if za.ndim == 0 else out


# --------------------------------------------------------------------------
# support classification and gap
# --------------------------------------------------------------------------

DEFAULT_ETAS = (1e-2, 1e-3, 1e-4)


def classify_support(z, rho0: complex, eta_schedule=DEFAULT_ETAS):
    """'inside', 'outside' or 'boundary' for each z.

    V(z, eta) = Im a is Theta(1) inside the support and O(eta) outside.  A
    point is outside when V < 10 eta at the smallest eta, or when V scales
    linearly in eta over the last two schedule points (log-slope >= 0.75);
    inside when V >= 10 eta and the log-slope is <= 0.25; boundary
    otherwise.
    """
    za = np.asarray(z, dtype=complex)
    zf = np.atleast_1d(za).ravel()
    etas = sorted(eta_schedule, reverse=True)
    if len(etas) < 2:
        raise ValueError("eta_schedule needs at least two values")
    Vs = []
    for eta in etas:
        out = solve_batch(zf, 1j * eta, rho0)
        a = out["a"]
        Vs.append(np.where(out["converged"], a.imag, np.nan))
    V1, V2 = Vs[-2], Vs[-1]
    e1, e2 = etas[-2], etas[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.log(V1 / V2) / math.log(e1 / e2)
    small = V2 < 10 * e2
    outside = small | (slope >= 0.75)
    inside = ~small & (slope <= 0.25)
    verdict = np.where(outside, "outside", np.where(inside, "inside", "boundary"))
    verdict = np.where(np.isnan(V2), "boundary", verdict)
    return str(verdict[0]) if za.ndim == 0 else verdict.reshape(za.shape)


def support_V(z, rho0: complex, eta: float):
    out = solve_batch(z, 1j * eta, rho0)
    return out["a"].imag


def gap_estimate(z: complex, rho0: complex, eta: float = 1e-6, threshold: float = 1e-4,
                 xtol: float = 1e-9) -> float:
    """Half-width of the spectral gap of the free Hermitization around 0.

    Equals sigma_min of the shifted free elliptic element.  Scans E >= 0 for
    the first point where Im a(z, E + i eta) exceeds `threshold` and refines
    the edge by bisection; returns 0 when z lies in E_{rho0}.
    """
    z = complex(z)
    rho0 = complex(rho0)
    if EllipticRegion(rho0, 0.0).contains(z):
        return 0.0
    upper = abs(z) + 3.0
    grid = np.linspace(0.0, upper, 301)
    dens = solve_batch(np.full(grid.size, z), grid + 1j * eta, rho0)["a"].imag
    hit = np.nonzero(dens > threshold)[0]
    if not hit.size or hit[0] == 0:
        raise DysonConvergenceError(
            f"gap bracket failed at z={z}: density above threshold at E=0 or nowhere "
            f"on [0, {upper}]", float(dens[0]))
    lo, hi = grid[hit[0] - 1], grid[hit[0]]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        d = solve_batch(z, mid + 1j * eta, rho0)["a"].imag
        if float(d) > threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def sweep(z_grid, rho0: complex, eta: float = 1e-6, eta_schedule=DEFAULT_ETAS) -> dict:
    """Solve and classify on a grid; returns flat arrays for CSV export."""
    zf = np.atleast_1d(np.asarray(z_grid, dtype=complex)).ravel()
    out = solve_batch(zf, 1j * eta, rho0)
    verdict = classify_support(zf, rho0, eta_schedule)
    return {"z": zf, "V": out["a"].imag, "b": out["b"], "verdict": np.atleast_1d(verdict),
            "residual": out["residual"]}


def write_sweep_csv(result: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_re", "z_im", "V", "b_re", "b_im", "verdict"])
        for z, V, b, ver in zip(result["z"], result["V"], result["b"], result["verdict"]):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(V)),
                        repr(float(b.real)), repr(float(b.imag)), str(ver)])
    return path
