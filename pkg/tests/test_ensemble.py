"""Graphs, entry laws, sampling, truncation and hypothesis diagnostics."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from elliptic_outliers._rng import stream
from elliptic_outliers.ensemble import (
    EnsembleSpec, EntryModel, GraphError, GraphSpec, TruncationWarning, _heavy_scale,
    build_graph, diagnostics, effective_rho, export_matrix, load_matrix, sample_batch,
    sample_matrix, sample_pair, truncate, truncated_second_moment, validate_variance_profile,
)


def spec(kind="circulant-band", n=40, w=3, rho=0.0, family="gaussian-real", loops="all",
         directed=None, **kw):
    directed = (rho == 0) if directed is None else directed
    g = GraphSpec(kind, n, w=w if kind == "circulant-band" else None,
                  s=kw.pop("s", None), self_loops=loops, directed=directed)
    return EnsembleSpec(graph=g, entries=EntryModel(family, rho=rho, **kw), seed=11)


# ---------------------------------------------------------------- graphs

def test_band_degree_counts_itself_and_two_neighbours():
    g = build_graph(GraphSpec("circulant-band", 5, w=1, self_loops="all"))
    assert g.degree == 3
    A = g.adjacency()
    assert (A.sum(axis=0) == 3).all() and (A.sum(axis=1) == 3).all()
    assert A[0, 4] and A[0, 1] and A[0, 0]


def test_block_graph_is_two_disjoint_complete_blocks():
    g = build_graph(GraphSpec("block", 6, s=3, self_loops="all"))
    assert g.degree == 3
    A = g.adjacency()
    assert A[:3, :3].all() and A[3:, 3:].all() and not A[:3, 3:].any()


def test_complete_graph_recovers_dense_model():
    g = build_graph(GraphSpec("complete", 10, self_loops="all"))
    assert g.degree == 10 and g.adjacency().all()


def test_irregular_explicit_graph_names_vertex():
    with pytest.raises(GraphError, match="vertex 0"):
        build_graph(GraphSpec("explicit", 3, edges=((0, 1), (1, 2), (2, 0), (0, 2))))


def test_mixed_self_loops_rejected():
    with pytest.raises(GraphError, match="mixed self-loop"):
        build_graph(GraphSpec("explicit", 3, edges=((0, 0), (1, 2), (2, 1))))


def test_inconsistent_parameters_rejected():
    with pytest.raises(GraphError):
        build_graph(GraphSpec("block", 7, s=3))
    with pytest.raises(GraphError):
        build_graph(GraphSpec("circulant-band", 5, w=3))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(5, 40), w=st.integers(0, 6), loops=st.sampled_from(["all", "none"]),
       directed=st.booleans())
def test_band_graph_invariants(n, w, loops, directed):
    if 2 * w + 1 > n or (w == 0 and loops == "none"):
        return
    g = build_graph(GraphSpec("circulant-band", n, w=w, self_loops=loops, directed=directed))
    A = g.adjacency()
    d = g.degree
    assert (A.sum(axis=0) == d).all() and (A.sum(axis=1) == d).all()
    assert np.diag(A).all() if loops == "all" else not np.diag(A).any()
    assert (A == A.T).all()
    assert g.n_edges == len(set(zip(g.rows.tolist(), g.cols.tolist())))


# ---------------------------------------------------------------- entry laws

def test_rho_one_real_pairs_coincide():
    g1, g2 = sample_pair(EntryModel("gaussian-real", rho=1.0), stream(1), 1000)
    assert np.array_equal(g1, g2)


def test_rho_zero_pairs_uncorrelated():
    g1, g2 = sample_pair(EntryModel("gaussian-real", rho=0.0), stream(2), 100_000)
    assert abs(np.corrcoef(g1.real, g2.real)[0, 1]) < 0.01


def test_complex_rho_pair_moment():
    rho = 0.5 + 0.5j
    g1, g2 = sample_pair(EntryModel("gaussian-complex", rho=rho), stream(3), 100_000)
    assert abs(np.mean(g1 * g2) - rho) < 0.02
    assert abs(np.mean(np.abs(g1) ** 2) - 1) < 0.02
    assert abs(np.mean(np.abs(g2) ** 2) - 1) < 0.02


def test_real_family_rejects_complex_rho():
    with pytest.raises(ValueError, match="rho must be real"):
        EntryModel("gaussian-real", rho=0.5j)


@pytest.mark.parametrize("family,kw", [
    ("gaussian-real", {}), ("gaussian-complex", {}), ("bounded-symmetric", {}),
    ("bounded-symmetric", {"bounded_law": "rademacher"}), ("heavy-p", {"p": 6.0}),
])
def test_off_diagonal_moments_within_three_sigma(family, kw):
    m = EntryModel(family, **kw)
    g1, _ = sample_pair(m, stream(5), 200_000)
    N = g1.size
    sd_mean = math.sqrt(1.0 / N)
    sd_var = math.sqrt(max(np.var(np.abs(g1) ** 2), 1e-12) / N)
    assert abs(g1.mean()) <= 3 * sd_mean * math.sqrt(2)
    assert abs(np.mean(np.abs(g1) ** 2) - 1) <= 3 * sd_var


@settings(max_examples=15, deadline=None)
@given(r=st.floats(-1, 1))
def test_real_pair_correlation_matches_rho(r):
    g1, g2 = sample_pair(EntryModel("gaussian-real", rho=r), stream(7), 50_000)
    assert abs(np.mean(g1 * g2) - r) < 5 * math.sqrt(2 / 50_000)


# ---------------------------------------------------------------- sampling

def test_complete_graph_row_sums_near_one():
    s = sample_matrix(spec("complete", n=1000, w=None), seed=1)
    rows = (np.abs(s.entries) ** 2).sum(axis=1)
    assert np.abs(rows - 1).max() <= 0.15


def test_band_support_has_five_zeros_per_row():
    for family in ("gaussian-real", "gaussian-complex", "bounded-symmetric"):
        s = sample_matrix(spec(n=8, w=1, family=family), seed=2)
        assert ((s.entries == 0).sum(axis=1) == 5).all()


def test_rho_one_sample_is_symmetric():
    s = sample_matrix(spec(n=30, w=4, rho=1.0), seed=3)
    assert np.array_equal(s.entries, s.entries.T)


def test_rho_minus_one_is_antisymmetric_off_diagonal():
    X = sample_matrix(spec(n=30, w=4, rho=-1.0), seed=3).entries
    off = X - np.diag(np.diag(X))
    assert np.array_equal(off, -off.T)


def test_nonzero_rho_needs_undirected_graph():
    with pytest.raises(ValueError, match="undirected"):
        sample_matrix(spec(rho=0.5, directed=True), seed=0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), t=st.integers(0, 1000),
       family=st.sampled_from(["gaussian-real", "gaussian-complex", "bounded-symmetric"]))
def test_sampling_is_bit_reproducible_and_supported(seed, t, family):
    sp = spec(n=16, w=2, family=family)
    a = sample_matrix(sp, seed=seed, trial_index=t).entries
    b = sample_matrix(sp, seed=seed, trial_index=t).entries
    assert np.array_equal(a, b)
    A = build_graph(sp.graph).adjacency()
    assert (a[~A] == 0).all()


def test_distinct_trials_differ():
    sp = spec(n=16, w=2)
    assert not np.array_equal(sample_matrix(sp, seed=1, trial_index=0).entries,
                              sample_matrix(sp, seed=1, trial_index=1).entries)


def test_spec_json_round_trip():
    sp = spec(n=16, w=2, rho=0.3 + 0.2j, family="gaussian-complex", diag_D=0.1j)
    assert EnsembleSpec.from_json(sp.to_json()) == sp


def test_binary_export_round_trip(tmp_path):
    s = sample_matrix(spec(n=12, w=2, family="gaussian-complex"), seed=9)
    path, side = export_matrix(s, tmp_path / "m.bin")
    assert path.stat().st_size == 12 * 12 * 16
    M, meta = load_matrix(path)
    assert np.array_equal(M, s.entries) and meta["seed"] == 9
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    assert raw[0] == s.entries[0, 0].real and raw[1] == s.entries[0, 0].imag


# ---------------------------------------------------------------- truncation

def test_truncation_noop_when_all_entries_small():
    s = sample_matrix(spec("block", n=64, w=None, s=32, family="bounded-symmetric"), seed=1)
    r = truncate(s, a_n=1e3)
    assert np.array_equal(r.sample.entries, s.entries) and r.n_truncated == 0
    assert r.V_n == pytest.approx(1.0, abs=1e-15)


def test_truncation_zeroes_single_large_entry():
    s = sample_matrix(spec("block", n=64, w=None, s=32, family="bounded-symmetric"), seed=1)
    X = s.entries.copy()
    X[3, 5] = 50.0
    from dataclasses import replace
    s2 = replace(s, entries=X)
    r = truncate(s2, a_n=10.0)  # threshold 3.27 exceeds the bound sqrt(3)
    expect = X.copy()
    expect[3, 5] = 0
    assert np.array_equal(r.sample.entries, expect) and r.n_truncated == 1


def test_truncation_is_idempotent():
    s = sample_matrix(spec(n=64, w=8, family="heavy-p", p=5.0), seed=4)
    once = truncate(s, a_n=10.0).sample
    twice = truncate(once, a_n=10.0).sample
    assert np.array_equal(once.entries, twice.entries)


def test_truncation_too_aggressive_warns():
    s = sample_matrix(spec(n=64, w=8), seed=4)
    with pytest.warns(TruncationWarning):
        r = truncate(s, a_n=1e-3)
    assert r.regime_invalid


def _heavy_oracle(p, t):
    """E[g^2 1{|g|<=t}] by direct quadrature of the symmetric Lomax density of |g|."""
    alpha, s = _heavy_scale(p)
    dens = lambda x: (alpha / s) * (1 + x / s) ** (-alpha - 1)
    val, _ = integrate.quad(lambda x: x * x * dens(x), 0, t, limit=200, epsabs=1e-14)
    return val


def test_heavy_truncated_variance_within_markov_bound():
    # n = 10^4, d = n^(2/3); the threshold is chosen so that the Markov bound
    # E[g^2 1{|g|>t}] <= t^(2-p) E|g|^p equals 10/n (the moment of the law is 316)
    p, n = 5.0, 10_000
    d = n ** (2 / 3)
    alpha, s = _heavy_scale(p)
    moment = s ** p * math.gamma(p + 1) * math.gamma(alpha - p) / math.gamma(alpha)
    t = (moment * n / 10) ** (1 / (p - 2))
    a_n = t * math.log(n) ** 2 / math.sqrt(d)
    V = truncated_second_moment(EntryModel("heavy-p", p=p), a_n * math.sqrt(d) / math.log(n) ** 2)
    assert 1 - 10 / n <= V <= 1
    assert V == pytest.approx(_heavy_oracle(p, t), abs=1e-10)


@pytest.mark.parametrize("family", ["gaussian-real", "gaussian-complex", "bounded-symmetric"])
def test_truncated_moment_matches_monte_carlo(family):
    m = EntryModel(family)
    g, _ = sample_pair(m, stream(13), 400_000)
    t = 1.3
    mc = np.mean(np.abs(g) ** 2 * (np.abs(g) <= t))
    assert truncated_second_moment(m, t) == pytest.approx(mc, abs=5e-3)


# ---------------------------------------------------------------- diagnostics

def _brute_force_diagnostics(X_law_var):
    """v^2 = ||Cov|| with diagonal Cov, sigma^2 = ||E[X*X]||, sigma_*^2 = max variance."""
    v2 = X_law_var.max()
    sigma2 = np.linalg.norm(np.diag(X_law_var.sum(axis=0)), 2)
    return math.sqrt(v2), math.sqrt(sigma2), math.sqrt(X_law_var.max())


def test_complete_graph_diagnostics_match_definitions():
    n = 8
    D = diagnostics(spec("complete", n=n, w=None))
    var = np.full((n, n), 1.0 / n)
    v, sigma, sstar = _brute_force_diagnostics(var)
    assert D.v == pytest.approx(v) == pytest.approx(n ** -0.5)
    assert D.sigma == pytest.approx(sigma) == pytest.approx(1.0)
    assert D.sigma_star == pytest.approx(sstar)
    assert D.v_tilde == pytest.approx(n ** -0.25)


def test_band_diagnostics_v_tilde():
    D = diagnostics(spec(n=4096, w=128, loops="none"))
    assert D.degree == 256 and D.v_tilde == pytest.approx(0.25)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(8, 200), family=st.sampled_from(
    ["gaussian-real", "bounded-symmetric", "heavy-p"]))
def test_diagnostics_invariants(n, family):
    D = diagnostics(spec("complete", n=n, w=None, family=family))
    assert D.v_tilde ** 2 == pytest.approx(D.v * D.sigma, rel=1e-14)
    assert min(D.v, D.sigma, D.sigma_star, D.v_tilde, D.r_bound) >= 0
    assert math.isinf(D.r_bound) == (family != "bounded-symmetric")


def test_self_loop_offset_reported():
    sp = spec(n=64, w=8, rho=0.3, family="gaussian-complex", diag_D=0.8, directed=False)
    D = diagnostics(sp)
    assert D.degree == 17
    assert D.diag_offset == pytest.approx((0.8 - 0.3) / 17)
    assert effective_rho(sp) == pytest.approx(0.3 + (0.8 - 0.3) / 17)


# ---------------------------------------------------------------- variance profile

def test_profile_complete_graph_passes():
    rep = validate_variance_profile(sample_batch(spec("complete", n=12, w=None), range(200)))
    assert rep.passed


def test_profile_elliptic_band_square_moment():
    sp = spec(n=12, w=3, rho=0.7, directed=False)
    batch = sample_batch(sp, range(400))
    rep = validate_variance_profile(batch)
    assert rep.passed
    X2 = np.mean([b.entries @ b.entries for b in batch], axis=0)
    assert np.abs(np.diag(X2) - effective_rho(sp)).max() <= rep.tolerance


def test_profile_zero_matrix_fails_exactly():
    rep = validate_variance_profile([np.zeros((5, 5))] * 100, degree=3, expected_square=0.0)
    assert not rep.passed
    assert rep.max_dev_XXs == 1.0 and rep.worst


def test_profile_needs_100_samples():
    with pytest.raises(ValueError):
        validate_variance_profile([np.zeros((3, 3))] * 5, degree=1, expected_square=0)
