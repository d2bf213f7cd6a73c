"""Random matrices supported on regular graphs.

A sample is ``X = d**-0.5 * X_N`` where ``X_N`` carries one random entry per
edge of a ``d``-regular graph.  Entries are either independent (directed
model) or paired across the transpose with ``E[g_xy g_yx] = rho`` (elliptic
model on an undirected graph).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from . import _rng

GRAPH_KINDS = ("circulant-band", "block", "complete", "shift-union", "explicit")
FAMILIES = ("gaussian-real", "gaussian-complex", "bounded-symmetric", "heavy-p",
            "bernoulli-sparse")
REAL_FAMILIES = ("gaussian-real", "bounded-symmetric", "heavy-p", "bernoulli-sparse")
SQRT3 = math.sqrt(3.0)


class GraphError(ValueError):
    """Raised when a graph description violates regularity or loop rules."""


class TruncationWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# graphs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: int
    w: Optional[int] = None
    s: Optional[int] = None
    shifts: Optional[tuple] = None
    edges: Optional[tuple] = None
    self_loops: str = "all"
    directed: bool = True

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise GraphError(f"unknown graph kind {self.kind!r}")
        if self.self_loops not in ("all", "none"):
            raise GraphError("self_loops must be 'all' or 'none'")
        if self.shifts is not None:
            object.__setattr__(self, "shifts", tuple(int(k) for k in self.shifts))
        if self.edges is not None:
            object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "self_loops": self.self_loops,
               "directed": self.directed}
        if self.w is not None:
            out["w"] = self.w
        if self.s is not None:
            out["s"] = self.s
        if self.shifts is not None:
            out["shifts"] = list(self.shifts)
        if self.edges is not None:
            out["edges"] = [list(e) for e in self.edges]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        return cls(kind=d["kind"], n=int(d["n"]), w=d.get("w"), s=d.get("s"),
                   shifts=d.get("shifts"), edges=d.get("edges"),
                   self_loops=d.get("self_loops", "all"),
                   directed=bool(d.get("directed", True)))


@dataclass(frozen=True, eq=False)
class Graph:
    """Edge set of a regular graph, edges sorted row-major."""
    n: int
    degree: int
    rows: np.ndarray
    cols: np.ndarray
    self_loops: bool
    symmetric: bool

    @property
    def n_edges(self) -> int:
        return int(self.rows.size)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        A[self.rows, self.cols] = True
        return A


def _raw_edges(spec: GraphSpec) -> tuple[np.ndarray, np.ndarray]:
    n = spec.n
    loops = spec.self_loops == "all"
    x = np.arange(n)
    if spec.kind == "circulant-band":
        w = spec.w
        if w is None or w < 0 or 2 * w + 1 > n:
            raise GraphError(f"circulant-band needs 0 <= w and 2w+1 <= n; got w={w}, n={n}")
        offs = [k for k in range(-w, w + 1) if loops or k != 0]
    elif spec.kind == "shift-union":
        if not spec.shifts:
            raise GraphError("shift-union needs a non-empty list of shifts")
        offs = sorted({k % n for k in spec.shifts})
        if len(offs) != len(spec.shifts):
            raise GraphError("shift-union shifts must be distinct modulo n (no multiple edges)")
        if 0 in offs and not loops:
            raise GraphError("shift 0 creates self loops but self_loops='none'")
        if loops and 0 not in offs:
            offs = [0] + offs
    elif spec.kind == "block":
        s = spec.s
        if s is None or s < 1 or n % s:
            raise GraphError(f"block size must divide n; got s={s}, n={n}")
        bx, by = np.divmod(np.arange(n), s)
        r, c = np.nonzero(bx[:, None] == bx[None, :])
        keep = loops | (r != c)
        return r[keep], c[keep]
    elif spec.kind == "complete":
        r, c = np.divmod(np.arange(n * n), n)
        keep = loops | (r != c)
        return r[keep], c[keep]
    else:
        if spec.edges is None:
            raise GraphError("explicit graph needs an edge list")
        e = np.asarray(spec.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("explicit edge endpoint out of range")
        return e[:, 0], e[:, 1]
    r = np.repeat(x, len(offs))
    c = (r + np.tile(np.asarray(offs, dtype=np.int64), n)) % n
    return r, c


def build_graph(spec: GraphSpec) -> Graph:
    """Construct and validate the edge set described by `spec`.

    Raises GraphError naming the offending vertex when the edge set is not
    regular, mixes loop and loop-free vertices, or (for undirected specs)
    is not symmetric.
    """
    n = spec.n
    if n < 1:
        raise GraphError("n must be positive")
    r, c = _raw_edges(spec)
    r = np.asarray(r, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    key = r * n + c
    order = np.argsort(key, kind="stable")
    r, c, key = r[order], c[order], key[order]
    dup = np.nonzero(np.diff(key) == 0)[0]
    if dup.size:
        raise GraphError(f"multiple edge ({r[dup[0]]}, {c[dup[0]]}) at vertex {r[dup[0]]}")
    out_deg = np.bincount(r, minlength=n)
    in_deg = np.bincount(c, minlength=n)
    d = int(out_deg[0]) if n else 0
    bad = np.nonzero((out_deg != d) | (in_deg != d))[0]
    if bad.size:
        v = int(bad[0])
        raise GraphError(f"graph is not regular: vertex {v} has out-degree {out_deg[v]} "
                         f"and in-degree {in_deg[v]}, expected {d}")
    if d == 0:
        raise GraphError("graph has no edges")
    has_loop = np.zeros(n, dtype=bool)
    has_loop[r[r == c]] = True
    if has_loop.any() and not has_loop.all():
        v = int(np.nonzero(~has_loop)[0][0])
        raise GraphError(f"mixed self-loop pattern: vertex {v} has no self loop "
                         "while others do")
    loops = bool(has_loop.all())
    if loops != (spec.self_loops == "all"):
        raise GraphError(f"self_loops={spec.self_loops!r} does not match the edge set")
    sym_key = np.sort(c * n + r)
    symmetric = bool(np.array_equal(sym_key, key))
    if not spec.directed and not symmetric:
        missing = np.setdiff1d(sym_key, key)
        v = int(missing[0] // n)
        raise GraphError(f"undirected graph is not symmetric at vertex {v}")
    return Graph(n=n, degree=d, rows=r, cols=c, self_loops=loops, symmetric=symmetric)


# --------------------------------------------------------------------------
# entry laws
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EntryModel:
    """Entry distribution plus transpose correlation.

    `diag_D` defaults to 1 for real families and 0 for the complex Gaussian.
    `bounded_law` selects uniform on [-sqrt3, sqrt3] or Rademacher signs.
    `p` is the guaranteed finite moment of the heavy-tailed law, whose tail
    index is p + 1.
    """
    family: str = "gaussian-real"
    rho: complex = 0.0
    diag_D: Optional[complex] = None
    bounded_law: str = "uniform"
    p: float = 5.0
    sparse_k: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown entry family {self.family!r}")
        rho = complex(self.rho)
        if abs(rho) > 1 + 1e-12:
            raise ValueError(f"|rho| must be <= 1; got {abs(rho)}")
        object.__setattr__(self, "rho", rho)
        if self.bounded_law not in ("uniform", "rademacher"):
            raise ValueError("bounded_law must be 'uniform' or 'rademacher'")
        if self.family == "heavy-p" and not self.p > 4:
            raise ValueError("heavy-p needs p > 4")
        if self.family == "bernoulli-sparse" and not (self.sparse_k and self.sparse_k > 0):
            raise ValueError("bernoulli-sparse needs sparse_k > 0")
        if self.real:
            if rho.imag != 0:
                raise ValueError(f"family {self.family} has real entries; rho must be real")
            if self.diag_D is not None and complex(self.diag_D) != 1:
                raise ValueError(f"family {self.family} has real entries, so E[g^2] = 1 "
                                 "on the diagonal; diag_D must be 1")
            object.__setattr__(self, "diag_D", 1.0 + 0j)
        else:
            D = 0j if self.diag_D is None else complex(self.diag_D)
            if abs(D) > 1 + 1e-12:
                raise ValueError("|diag_D| must be <= 1")
            object.__setattr__(self, "diag_D", D)

    @property
    def real(self) -> bool:
        return self.family in REAL_FAMILIES

    @property
    def bound(self) -> float:
        """Almost-sure bound on an unscaled entry (inf when unbounded)."""
        if self.family == "bounded-symmetric":
            return 1.0 if self.bounded_law == "rademacher" else SQRT3
        return math.inf

    def to_dict(self) -> dict:
        b = self.bound if self.family == "bounded-symmetric" else None
        return {"family": self.family, "rho": [self.rho.real, self.rho.imag],
                "diag_D": [self.diag_D.real, self.diag_D.imag], "bound": b,
                "p": self.p, "sparse_k": self.sparse_k}

    @classmethod
    def from_dict(cls, d: dict) -> "EntryModel":
        rho = d.get("rho", 0.0)
        rho = complex(*rho) if isinstance(rho, (list, tuple)) else complex(rho)
        D = d.get("diag_D")
        if isinstance(D, (list, tuple)):
            D = complex(*D)
        law = "uniform"
        if d.get("bound") is not None and d.get("family") == "bounded-symmetric":
            b = float(d["bound"])
            if math.isclose(b, 1.0):
                law = "rademacher"
            elif not math.isclose(b, SQRT3):
                raise ValueError("bounded-symmetric supports bound 1 (Rademacher) "
                                 "or sqrt(3) (uniform)")
        law = d.get("bounded_law", law)
        return cls(family=d.get("family", "gaussian-real"), rho=rho, diag_D=D,
                   bounded_law=law, p=float(d.get("p", 5.0)), sparse_k=d.get("sparse_k"))


def _heavy_scale(p: float) -> tuple[float, float]:
    alpha = p + 1.0
    # Lomax(alpha) has E[Y^2] = 2 / ((alpha-1)(alpha-2))
    return alpha, math.sqrt((alpha - 1.0) * (alpha - 2.0) / 2.0)


def _bounded(model: EntryModel, rng: np.random.Generator, size) -> np.ndarray:
    if model.bounded_law == "rademacher":
        return rng.integers(0, 2, size=size) * 2.0 - 1.0
    return rng.uniform(-SQRT3, SQRT3, size=size)


def _real_base(model: EntryModel, rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance symmetric real draws (before any sparsity mask)."""
    if model.family == "gaussian-real":
        return rng.standard_normal(size)
    if model.family in ("bounded-symmetric", "bernoulli-sparse"):
        return _bounded(model, rng, size)
    if model.family == "heavy-p":
        alpha, s = _heavy_scale(model.p)
        u = rng.random(size)
        sign = rng.integers(0, 2, size=size) * 2.0 - 1.0
        return sign * s * ((1.0 - u) ** (-1.0 / alpha) - 1.0)
    raise ValueError(f"{model.family} has no real base law")


def _std_complex(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def _sparse_mask(model: EntryModel, n: Optional[int], rng, size) -> np.ndarray:
    if n is None:
        raise ValueError("bernoulli-sparse sampling needs the dimension n")
    q = model.sparse_k / n
    if not 0 < q <= 1:
        raise ValueError(f"sparse_k/n must lie in (0, 1]; got {q}")
    return (rng.random(size) < q) / math.sqrt(q)


def sample_single(model: EntryModel, rng: np.random.Generator, size, n=None) -> np.ndarray:
    """Independent off-diagonal entries (mean 0, E|g|^2 = 1)."""
    if model.family == "gaussian-complex":
        return _std_complex(rng, size)
    g = _real_base(model, rng, size)
    if model.family == "bernoulli-sparse":
        g = g * _sparse_mask(model, n, rng, size)
    return g.astype(complex)


def sample_pair(model: EntryModel, rng: np.random.Generator, size=None, n=None):
    """Draw transpose pairs with E[g1] = E[g2] = 0, E|g|^2 = 1, E[g1 g2] = rho.

    Real families: g2 = rho*g1 + sqrt(1-rho^2)*g1'.  Complex Gaussian:
    g1 = a, g2 = rho*conj(a) + sqrt(1-|rho|^2)*b with standard complex a, b.
    The sparse family shares one Bernoulli mask per pair.
    """
    rho = model.rho
    scalar = size is None
    shape = () if scalar else size
    if model.family == "gaussian-complex":
        a = _std_complex(rng, shape)
        b = _std_complex(rng, shape)
        g1 = a
        g2 = rho * np.conj(a) + math.sqrt(max(0.0, 1.0 - abs(rho) ** 2)) * b
    else:
        if rho.imag != 0:
            raise ValueError(f"family {model.family} is real; rho must be real")
        r = rho.real
        g1 = _real_base(model, rng, shape)
        g1p = _real_base(model, rng, shape)
        g2 = r * g1 + math.sqrt(max(0.0, 1.0 - r * r)) * g1p
        if model.family == "bernoulli-sparse":
            m = _sparse_mask(model, n, rng, shape)
            g1, g2 = g1 * m, g2 * m
        g1 = np.asarray(g1, dtype=complex)
        g2 = np.asarray(g2, dtype=complex)
    if scalar:
        return complex(g1), complex(g2)
    return g1, g2


def sample_diagonal(model: EntryModel, rng: np.random.Generator, size, n=None) -> np.ndarray:
    """Self-loop entries with E|g|^2 = 1 and E[g^2] = diag_D."""
    if model.real:
        return sample_single(model, rng, size, n=n)
    D = model.diag_D
    phase = np.exp(0.5j * np.angle(D)) if D != 0 else 1.0
    a = math.sqrt((1 + abs(D)) / 2)
    b = math.sqrt((1 - abs(D)) / 2)
    return phase * (a * rng.standard_normal(size) + 1j * b * rng.standard_normal(size))


# --------------------------------------------------------------------------
# ensembles and samples
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    graph: GraphSpec
    entries: EntryModel = field(default_factory=EntryModel)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"graph": self.graph.to_dict(), "entries": self.entries.to_dict(),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        return cls(graph=GraphSpec.from_dict(d["graph"]),
                   entries=EntryModel.from_dict(d.get("entries", {})),
                   seed=int(d.get("seed", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleSpec":
        return cls.from_dict(json.loads(text))

    @property
    def elliptic(self) -> bool:
        return not self.graph.directed


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """One realisation, already scaled by d**-0.5.

    After truncation `variance_scale` holds V_n and the matrix to analyse is
    `working_entries` = entries / sqrt(V_n).
    """
    n: int
    entries: np.ndarray
    seed: int
    trial_index: int
    spec: EnsembleSpec
    degree: int
    variance_scale: float = 1.0
    truncated: bool = False

    @property
    def working_entries(self) -> np.ndarray:
        if self.variance_scale == 1.0:
            return self.entries
        return self.entries / math.sqrt(self.variance_scale)

    def provenance(self) -> dict:
        return {"n": self.n, "seed": self.seed, "trial_index": self.trial_index,
                "degree": self.degree, "variance_scale": self.variance_scale,
                "truncated": self.truncated, "spec": self.spec.to_dict()}


def effective_rho(spec: EnsembleSpec) -> complex:
    """Exact diagonal of E[X^2] (rho plus the self-loop offset D_N)."""
    g = build_graph(spec.graph)
    return spec.entries.rho + diag_offset(spec, g)


def diag_offset(spec: EnsembleSpec, graph: Graph | None = None) -> complex:
    """D_N in E[X^2] = (rho + D_N) I.

    With self loops one of the d summands of (X^2)_xx is g_xx^2 instead of a
    transpose pair, so D_N = (D - rho)/d; without loops D_N = 0.
    """
    g = graph or build_graph(spec.graph)
    if not g.self_loops:
        return 0j
    m = spec.entries
    return (m.diag_D - m.rho) / g.degree


def sample_matrix(spec: EnsembleSpec, seed: Optional[int] = None, trial_index: int = 0,
                  stream_id: int = 0, graph: Graph | None = None) -> MatrixSample:
    """Draw X = d**-0.5 X_N for one (seed, trial_index, stream_id) key."""
    seed = spec.seed if seed is None else seed
    g = graph or build_graph(spec.graph)
    m = spec.entries
    if m.rho != 0 and spec.graph.directed:
        raise ValueError("a nonzero rho needs an undirected graph (directed=False)")
    rng = _rng.stream(seed, trial_index, stream_id)
    n, d = g.n, g.degree
    X = np.zeros((n, n), dtype=complex)
    diag = g.rows == g.cols
    if g.self_loops:
        dv = g.rows[diag]
        X[dv, dv] = sample_diagonal(m, rng, dv.size, n=n)
    if spec.graph.directed:
        r, c = g.rows[~diag], g.cols[~diag]
        X[r, c] = sample_single(m, rng, r.size, n=n)
    else:
        up = g.rows < g.cols
        r, c = g.rows[up], g.cols[up]
        g1, g2 = sample_pair(m, rng, r.size, n=n)
        X[r, c] = g1
        X[c, r] = g2
    X /= math.sqrt(d)
    return MatrixSample(n=n, entries=X, seed=int(seed), trial_index=int(trial_index),
                        spec=spec, degree=d)


# --------------------------------------------------------------------------
# truncation
# --------------------------------------------------------------------------

def truncated_second_moment(model: EntryModel, t: float, n: Optional[int] = None) -> float:
    """E[|g|^2 1{|g| <= t}] for one off-diagonal entry of `model`."""
    if t <= 0:
        return 0.0
    fam = model.family
    if fam == "bernoulli-sparse":
        q = model.sparse_k / n
        base = replace(model, family="bounded-symmetric", sparse_k=None)
        return truncated_second_moment(base, t * math.sqrt(q))
    if fam == "gaussian-real":
        return float(1.0 - 2.0 * (t * stats.norm.pdf(t) + stats.norm.sf(t)))
    if fam == "gaussian-complex":
        return float(1.0 - (1.0 + t * t) * math.exp(-t * t))
    if fam == "bounded-symmetric":
        if model.bounded_law == "rademacher":
            return 1.0 if t >= 1.0 else 0.0
        return min(t, SQRT3) ** 3 / (3.0 * SQRT3)
    alpha, s = _heavy_scale(model.p)
    y0 = t / s
    tail, _ = integrate.quad(lambda y: y * y * alpha * (1.0 + y) ** (-alpha - 1.0),
                             y0, np.inf, epsabs=1e-14, epsrel=1e-12)
    return float(1.0 - s * s * tail)


@dataclass(frozen=True)
class TruncationResult:
    sample: MatrixSample
    V_n: float
    threshold: float
    n_truncated: int
    fraction: float
    regime_invalid: bool


def truncate(sample: MatrixSample, a_n: float) -> TruncationResult:
    """Zero entries whose unscaled size exceeds a_n * sqrt(d) / (log n)^2.

    Entries stay scaled by d**-0.5; the renormaliser V_n is attached to the
    returned sample so that `working_entries` is (d V_n)**-0.5 times the
    truncated matrix.  Applying the same threshold twice is a no-op.
    """
    if not a_n > 0:
        raise ValueError("a_n must be positive")
    n, d = sample.n, sample.degree
    t = a_n * math.sqrt(d) / math.log(n) ** 2
    unscaled = np.abs(sample.entries) * math.sqrt(d)
    cut = unscaled > t
    k = int(cut.sum())
    entries = sample.entries.copy() if k else sample.entries
    if k:
        entries[cut] = 0
    g = build_graph(sample.spec.graph)
    frac = k / g.n_edges
    invalid = frac > 0.1
    if invalid:
        warnings.warn(f"truncation removed {frac:.1%} of entries; a_n is too small",
                      TruncationWarning, stacklevel=2)
    V = truncated_second_moment(sample.spec.entries, t, n)
    out = replace(sample, entries=entries, variance_scale=V, truncated=True)
    return TruncationResult(sample=out, V_n=V, threshold=t, n_truncated=k,
                            fraction=frac, regime_invalid=invalid)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelDiagnostics:
    n: int
    degree: int
    v: float
    sigma: float
    sigma_star: float
    v_tilde: float
    r_bound: float
    pair_slack: float
    diag_offset: complex
    thresholds: dict
    checks: dict

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("n", "degree", "v", "sigma", "sigma_star",
                                             "v_tilde", "pair_slack")}
        out["r_bound"] = None if math.isinf(self.r_bound) else self.r_bound
        out["diag_offset"] = [self.diag_offset.real, self.diag_offset.imag]
        out["thresholds"] = dict(self.thresholds)
        out["checks"] = dict(self.checks)
        return out


def diagnostics(spec: EnsembleSpec) -> ModelDiagnostics:
    """Analytic hypothesis parameters of the scaled matrix.

    Uses the doubly stochastic profile: every entry has variance 1/d and
    every row and column holds d entries.  For correlated pairs the values
    are those of independent summands; `pair_slack` = sqrt(1 + |c|) with
    c = E[g_xy conj(g_yx)] bounds the factor by which v and sigma_star can
    grow (at most sqrt(2)).
    """
    g = build_graph(spec.graph)
    m = spec.entries
    n, d = g.n, g.degree
    v = d ** -0.5
    sigma = 1.0
    sigma_star = d ** -0.5
    v_tilde = math.sqrt(v * sigma)
    if m.family == "bernoulli-sparse":
        entry_bound = SQRT3 if m.bounded_law == "uniform" else 1.0
        entry_bound *= math.sqrt(n / m.sparse_k)
    else:
        entry_bound = m.bound
    r_bound = entry_bound / math.sqrt(d)
    c = abs(m.rho) if (spec.elliptic and m.real) else 0.0
    slack = math.sqrt(1.0 + c)
    D_N = diag_offset(spec, g)
    L = math.log(n)
    thresholds = {"v_tilde": L ** -1.0, "sigma_star": L ** -1.5, "r_bar": L ** -2.0}
    gaussian = m.family in ("gaussian-real", "gaussian-complex")
    checks = {
        "v_tilde": bool(v_tilde * math.sqrt(slack) <= thresholds["v_tilde"]),
        "sigma_star": bool(sigma_star * slack <= thresholds["sigma_star"]),
        "r_bar": None if gaussian else bool(r_bound < thresholds["r_bar"]),
        "diag_offset": bool(L * abs(D_N) <= 0.1),
    }
    return ModelDiagnostics(n=n, degree=d, v=v, sigma=sigma, sigma_star=sigma_star,
                            v_tilde=v_tilde, r_bound=r_bound, pair_slack=slack,
                            diag_offset=D_N, thresholds=thresholds, checks=checks)


@dataclass
class ProfileReport:
    passed: bool
    batch: int
    tolerance: float
    expected_square: complex
    max_dev_XXs: float
    max_dev_XsX: float
    max_dev_X2: float
    worst: list

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["expected_square"] = [self.expected_square.real, self.expected_square.imag]
        return d


def validate_variance_profile(samples: Sequence, degree: Optional[int] = None,
                              expected_square: Optional[complex] = None,
                              n_worst: int = 5) -> ProfileReport:
    """Compare batch averages of XX*, X*X, X^2 with their law-level values.

    Tolerance is 5/sqrt(batch * d) in max-entry norm.  `degree` and
    `expected_square` are read from MatrixSample inputs when not given.
    """
    samples = list(samples)
    B = len(samples)
    if B < 100:
        raise ValueError(f"need at least 100 samples; got {B}")
    first = samples[0]
    if isinstance(first, MatrixSample):
        degree = degree or first.degree
        if expected_square is None:
            expected_square = effective_rho(first.spec)
    if degree is None or expected_square is None:
        raise ValueError("degree and expected_square are required for raw arrays")
    mats = [np.asarray(getattr(s, "entries", s), dtype=complex) for s in samples]
    n = mats[0].shape[0]
    XXs = np.zeros((n, n), complex)
    XsX = np.zeros((n, n), complex)
    X2 = np.zeros((n, n), complex)
    for X in mats:
        XXs += X @ X.conj().T
        XsX += X.conj().T @ X
        X2 += X @ X
    XXs /= B
    XsX /= B
    X2 /= B
    eye = np.eye(n)
    dev1 = np.abs(XXs - eye)
    dev2 = np.abs(XsX - eye)
    dev3 = np.abs(X2 - complex(expected_square) * eye)
    tol = 5.0 / math.sqrt(B * degree)
    worst = []
    for name, dev in (("XX*", dev1), ("X*X", dev2), ("X^2", dev3)):
        flat = np.argsort(dev, axis=None)[::-1][:n_worst]
        for idx in flat:
            i, j = divmod(int(idx), n)
            if dev[i, j] > tol:
                worst.append({"moment": name, "entry": [i, j], "deviation": float(dev[i, j])})
    passed = max(dev1.max(), dev2.max(), dev3.max()) <= tol
    return ProfileReport(passed=bool(passed), batch=B, tolerance=tol,
                         expected_square=complex(expected_square),
                         max_dev_XXs=float(dev1.max()), max_dev_XsX=float(dev2.max()),
                         max_dev_X2=float(dev3.max()), worst=worst)


# --------------------------------------------------------------------------
# binary export
# --------------------------------------------------------------------------

def export_matrix(sample: MatrixSample, path) -> tuple[Path, Path]:
    """Write little-endian f64 (re, im) row-major plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(sample.entries, dtype="<c16").view("<f8")
    path.write_bytes(data.tobytes())
    meta = sample.provenance()
    meta.update({"dtype": "<f8", "layout": "row-major, interleaved (re, im)",
                 "shape": [sample.n, sample.n]})
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, sort_keys=True, indent=2))
    return path, side


def load_matrix(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    n = int(meta["n"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    return raw.view("<c16").reshape(n, n).astype(complex), meta


def sample_batch(spec: EnsembleSpec, trials: Iterable[int], seed: Optional[int] = None):
    g = build_graph(spec.graph)
    return [sample_matrix(spec, seed=seed, trial_index=t, graph=g) for t in trials]
