"""The elliptic region {x + rho*conj(x) : |x| <= 1} and its epsilon-fattening."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEGENERATE = 1e-12
_GRID = 4096
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EllipticRegion:
    """E_{rho, eps}: points within distance `epsilon` of E_rho.

    For real rho this is the ellipse with semi-axes 1 + rho (real) and
    1 - rho (imaginary); complex rho rotates E_|rho| by arg(rho)/2; and
    |rho| = 1 collapses it to a segment of length 4.
    """
    rho: complex = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        rho = complex(self.rho)
        if abs(rho) > 1 + 1e-12:
            raise ValueError(f"|rho| must be <= 1; got {abs(rho)}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "rho", rho)

    @property
    def degenerate(self) -> bool:
        return abs(self.rho) >= 1 - DEGENERATE

    @property
    def rotation(self) -> complex:
        """e^{i arg(rho)/2} (1 for rho = 0)."""
        return np.exp(0.5j * np.angle(self.rho)) if self.rho != 0 else 1.0 + 0j

    def fattened(self, epsilon: float) -> "EllipticRegion":
        return EllipticRegion(self.rho, epsilon)

    def preimage(self, z):
        """Solve z = x + rho*conj(x) for x (requires |rho| < 1)."""
        z = np.asarray(z, dtype=complex)
        return (z - self.rho * np.conj(z)) / (1.0 - abs(self.rho) ** 2)

    def contains(self, z):
        return contains(self, z)

    def distance(self, z):
        return distance(self, z)

    def boundary_distance(self, z):
        return boundary_distance(self, z)

    def boundary_points(self, m: int) -> np.ndarray:
        return boundary_points(self, m)


def _curve(rho: complex, phi):
    e = np.exp(1j * phi)
    return e + rho * np.conj(e)


def _segment_distance(region: EllipticRegion, z: np.ndarray) -> np.ndarray:
    # segment [-2, 2] rotated by arg(rho)/2
    w = z * np.conj(region.rotation)
    t = np.clip(w.real, -2.0, 2.0)
    return np.abs(w - t)


def _inside(region: EllipticRegion, z: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if region.degenerate:
        return _segment_distance(region, z) <= tol
    return np.abs(region.preimage(z)) <= 1.0 + tol


def _nearest_phi(region: EllipticRegion, zf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi, distance) of the boundary point e^{i phi} + rho e^{-i phi} nearest to each z."""
    phis = 2 * np.pi * np.arange(_GRID) / _GRID
    pts = _curve(region.rho, phis)
    dist = np.empty(zf.size)
    best = np.empty(zf.size)
    h = 2 * np.pi / _GRID
    chunk = max(1, 2 ** 22 // _GRID)
    for lo in range(0, zf.size, chunk):
        zc = zf[lo:lo + chunk]
        k = np.argmin(np.abs(zc[:, None] - pts[None, :]), axis=1)
        a = phis[k] - h
        b = phis[k] + h
        f = lambda p: np.abs(zc - _curve(region.rho, p))
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(40):
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
            fc, fd = f(c), f(d)
        cand = np.stack([c, d, phis[k]])
        vals = np.stack([fc, fd, np.abs(zc - pts[k])])
        j = np.argmin(vals, axis=0)
        idx = np.arange(zc.size)
        dist[lo:lo + chunk] = vals[j, idx]
        best[lo:lo + chunk] = cand[j, idx]
    return best, dist


def boundary_distance(region: EllipticRegion, z) -> np.ndarray | float:
    """Distance from z to the boundary curve of E_rho (unsigned, both sides).

    Minimises |z - (e^{i phi} + rho e^{-i phi})| on a 4096-point grid in phi,
    then refines each minimum by golden-section search on its grid cell.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    if region.degenerate:
        out = _segment_distance(region, zf)
    else:
        out = _nearest_phi(region, zf)[1]
    return float(out[0]) if scalar else out.reshape(z.shape)


def normal_coordinates(region: EllipticRegion, z) -> tuple[np.ndarray, np.ndarray]:
    """(psi, t) with z = nearest point of E_rho + t e^{i psi} rotation, for z outside E_rho.

    Inverse of `boundary_curve` with epsilon = t: psi is the outward normal
    angle in the unrotated frame and t = dist(z, E_rho).
    """
    zf = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    rot = region.rotation
    if region.degenerate:
        w = zf * np.conj(rot)
        near = np.clip(w.real, -2.0, 2.0)
        diff = w - near
    else:
        phi, _ = _nearest_phi(EllipticRegion(abs(region.rho)), zf * np.conj(rot))
        diff = zf * np.conj(rot) - _curve(abs(region.rho), phi)
    return np.mod(np.angle(diff), 2 * np.pi), np.abs(diff)


def distance(region: EllipticRegion, z):
    """Euclidean distance from z to E_rho (0 inside); ignores epsilon."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    out = np.zeros(zf.size)
    inside = _inside(region, zf)
    if (~inside).any():
        out[~inside] = boundary_distance(region, zf[~inside])
    return float(out[0]) if scalar else out.reshape(z.shape)


def contains(region: EllipticRegion, z):
    """True where dist(z, E_rho) <= epsilon."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    res = _inside(region, zf)
    if region.epsilon > 0 and (~res).any():
        res[~res] = boundary_distance(region, zf[~res]) <= region.epsilon
    return bool(res[0]) if scalar else res.reshape(z.shape)


def boundary_points(region: EllipticRegion, m: int) -> np.ndarray:
    """m points e^{i phi_k} + rho e^{-i phi_k}, pushed out by epsilon."""
    if m < 3:
        raise ValueError("m must be >= 3")
    phi = 2 * np.pi * np.arange(m) / m
    pts = _curve(region.rho, phi)
    if region.epsilon > 0:
        e = np.exp(1j * phi)
        tangent = 1j * e - 1j * region.rho * np.conj(e)
        normal = -1j * tangent
        mag = np.abs(normal)
        flat = mag < 1e-12
        normal = np.where(flat, pts, normal)
        mag = np.where(flat, np.abs(pts), mag)
        pts = pts + region.epsilon * normal / mag
    return pts


def boundary_curve(region: EllipticRegion, psi):
    """Boundary of E_{rho,eps} parametrised by the outward normal angle psi.

    For E_|rho| the support point with normal e^{i psi} is x + |rho| conj(x)
    with x = e^{i phi}, phi = atan2((1-|rho|) sin psi, (1+|rho|) cos psi);
    the fattening adds eps e^{i psi} and the result is rotated by
    e^{i arg(rho)/2}.  Continuous also for |rho| = 1 (a stadium when eps > 0).
    """
    psi = np.asarray(psi, dtype=float)
    r = abs(region.rho)
    phi = np.arctan2((1 - r) * np.sin(psi), (1 + r) * np.cos(psi))
    pts = _curve(r, phi) + region.epsilon * np.exp(1j * psi)
    return region.rotation * pts


def write_boundary_csv(region: EllipticRegion, path, m: int = 512) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for p in boundary_points(region, m):
            w.writerow([repr(float(p.real)), repr(float(p.imag))])
    return path
