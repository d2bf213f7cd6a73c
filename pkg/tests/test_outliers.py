"""Perturbations, predictions, determinant criteria, root finding and matching."""
import cmath
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elliptic_outliers.ensemble import EnsembleSpec, EntryModel, GraphSpec, sample_matrix
from elliptic_outliers.geometry import EllipticRegion
from elliptic_outliers.outliers import (
    CSV_HEADER, ContourError, DeterminantCriterion, ForbiddenAnnulusError, LimitDeterminant,
    OutlierReport, Perturbation, RankError, _CurveTracker, criterion_roots, default_cap, det_f,
    det_g, diagonal, factor, find_roots, from_factors, locate_roots, match, merge_seeds,
    outlier_report, predict, rank_one, winding_number, write_reports_csv,
)
from elliptic_outliers.spectral import NearSingularError


def random_low_rank(rng, n, k, lo=1.2, hi=3.0):
    """U diag(lam) U^* with orthonormal U and |lam| in [lo, hi]."""
    U, _ = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
    lam = rng.uniform(lo, hi, k) * np.exp(2j * np.pi * rng.uniform(size=k))
    return from_factors(U * lam, U.conj().T), lam


def multiset_difference(a, b, tol=1e-8):
    """Elements of a left after removing one close element of b per match."""
    left = list(a)
    for z in b:
        if left:
            j = int(np.argmin(np.abs(np.array(left) - z)))
            if abs(left[j] - z) <= tol:
                left.pop(j)
    return np.array(left, dtype=complex)


def sample(n, rho, seed, t):
    spec = EnsembleSpec(GraphSpec("complete", n, directed=(rho == 0)),
                        EntryModel("gaussian-real", rho=rho), seed)
    return sample_matrix(spec, trial_index=t).entries


# ---------------------------------------------------------------- factor

def test_factor_rank_one():
    u = np.ones(6) / np.sqrt(6)
    P = factor(2.5 * np.outer(u, u.conj()))
    assert P.rank_k == 1
    np.testing.assert_allclose(P.eigenvalues_C, [2.5], atol=1e-12)


def test_factor_diagonal():
    P = factor(np.diag([2.0, 0.5, 0, 0, 0]))
    assert P.rank_k == 2
    np.testing.assert_allclose(P.eigenvalues_C, [0.5, 2.0], atol=1e-12)


def test_factor_nilpotent():
    C = np.zeros((4, 4))
    C[0, 1] = 1.0
    P = factor(C)
    assert P.rank_k == 1
    np.testing.assert_allclose(P.eigenvalues_C, [0.0], atol=1e-12)
    assert P.nonzero_eigenvalues.size == 0


def test_factor_rank_cap():
    with pytest.raises(RankError):
        factor(np.eye(20))
    assert factor(np.eye(20), rank_cap=20).rank_k == 20


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 30), k=st.integers(1, 3))
def test_factor_reconstructs_and_transfers_eigenvalues(seed, n, k):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    C = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) @ \
        (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    P = factor(C)
    assert np.abs(P.dense() - C).max() <= 1e-10 * max(1.0, np.abs(C).max())
    full = np.linalg.eigvals(C)
    full = full[np.abs(full) > 1e-8 * np.abs(full).max()]
    np.testing.assert_allclose(np.sort_complex(P.nonzero_eigenvalues), np.sort_complex(full),
                               atol=1e-8 * max(1.0, np.abs(full).max()))
    na, nb = np.linalg.norm(P.a_factor, 2), np.linalg.norm(P.b_factor, 2)
    assert na == pytest.approx(nb, rel=1e-8)


def test_perturbation_round_trip():
    P = diagonal(5, [2, 1j])
    Q = Perturbation.from_dict(json.loads(json.dumps(P.to_dict())))
    np.testing.assert_allclose(Q.dense(), P.dense())


def test_rank_one_default_vector():
    P = rank_one(4, 3.0)
    assert P.dense()[0, 0] == 3.0 and np.count_nonzero(P.dense()) == 1


# ---------------------------------------------------------------- predictions

def test_predict_filters_small_eigenvalues():
    preds = predict([2, 0.5], 0.0, 0.1)
    assert [p.admissible for p in preds] == [True, False]
    assert preds[0].predicted == 2
    assert np.isnan(preds[1].predicted)


def test_predict_wigner_and_elliptic_values():
    assert predict([2], 1.0, 0.1)[0].predicted == pytest.approx(2.5)
    assert predict([2], 0.5, 0.1)[0].predicted == pytest.approx(2.25)


def test_predict_forbidden_annulus():
    with pytest.raises(ForbiddenAnnulusError) as info:
        predict([1.2], 0.0, 0.1)
    assert info.value.offending == [1.2]
    assert predict([1.2], 0.0, 0.1, check_annulus=False)[0].admissible


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.1, 4), th=st.floats(-np.pi, np.pi), rho_r=st.floats(0, 1),
       rho_t=st.floats(-np.pi, np.pi), eps=st.floats(0.01, 0.5))
def test_prediction_invariants(r, th, rho_r, rho_t, eps):
    lam = r * cmath.exp(1j * th)
    rho = rho_r * cmath.exp(1j * rho_t)
    try:
        p = predict([lam], rho, eps)[0]
    except ForbiddenAnnulusError:
        return
    if abs(lam) >= 1:
        assert p.predicted == lam + rho / lam
        assert p.admissible == (not EllipticRegion(rho, eps).contains(p.predicted))
    else:
        assert not p.admissible


def test_merge_seeds():
    assert merge_seeds([2.0, 2.0 + 1e-12, 3.0]) == [(2.0, 2), (3.0, 1)]


# ---------------------------------------------------------------- determinant criterion

def test_det_f_zero_matrix_rank_one():
    P = rank_one(5, 2.0)
    for z in (3.0, -1 + 1j, 0.5j):
        assert det_f(z, np.zeros((5, 5)), P) == pytest.approx(1 - 2 / z, abs=1e-14)
    assert abs(det_f(2.0 + 1e-13, np.zeros((5, 5)), P)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), x=st.floats(-3, 3), y=st.floats(-3, 3))
def test_det_f_arrangements_agree(seed, x, y):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 12)) / np.sqrt(12)
    P, _ = random_low_rank(rng, 12, 3)
    z = complex(x, y)
    try:
        a = det_f(z, X, P, "k")
    except NearSingularError:
        return
    assert a == pytest.approx(det_f(z, X, P, "n"), abs=1e-10 * max(1, abs(a)))


def test_det_f_rejects_eigenvalue_of_X():
    X = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(NearSingularError):
        det_f(2.0, X, rank_one(3, 2.0))


def test_log_derivative_matches_finite_difference():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((10, 10)) / np.sqrt(10)
    f = DeterminantCriterion(X, random_low_rank(rng, 10, 2)[0])
    z, h = 2.1 + 0.4j, 1e-6
    fd = (f(z + h) - f(z - h)) / (2 * h) / f(z)
    assert f.log_derivative(z) == pytest.approx(fd, abs=1e-6)


def test_criterion_roots_rank_one_example():
    X = sample(60, 0.0, 8, 0)
    P = rank_one(60, 2.0)
    R = EllipticRegion(0.0, 0.1)
    got = criterion_roots(X, P, R)
    ev = np.linalg.eigvals(X + P.dense())
    want = multiset_difference(ev[~R.contains(ev)], np.linalg.eigvals(X))
    rep = match(got, want, 1e-6)
    assert rep.success and len(got) == len(want) >= 1


@pytest.mark.parametrize("trial", range(6))
def test_criterion_exactness_against_brute_force(trial):
    rng = np.random.default_rng(100 + trial)
    n, rho = 50, [0.0, 0.5][trial % 2]
    X = sample(n, rho, 9, trial)
    k = int(rng.integers(1, 4))
    # general factors: some eigenvalues of X + C can coincide with eigenvalues of X
    P = from_factors(rng.standard_normal((n, k)) * 2 / np.sqrt(n), rng.standard_normal((k, n)))
    R = EllipticRegion(rho, 0.1)
    ev = np.linalg.eigvals(X + P.dense())
    evX = np.linalg.eigvals(X)
    want = multiset_difference(ev[~R.contains(ev)], evX[~R.contains(evX)])
    got = criterion_roots(X, P, R)
    rep = match(got, want, 1e-6)
    assert rep.success, rep.counts


# ---------------------------------------------------------------- limit determinant

def test_det_g_examples():
    assert det_g(3.0, rank_one(4, 2.0), 0.0) == pytest.approx(1 / 3)
    assert abs(det_g(2.0, rank_one(4, 2.0), 0.0)) < 1e-15
    assert abs(det_g(2.25, diagonal(4, [2.0]), 0.5)) < 1e-14


def test_det_g_rejects_inside():
    with pytest.raises(ValueError):
        det_g(0.1, rank_one(4, 2.0), 0.5)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 3), rho=st.sampled_from([0.0, 0.5, -0.5, 0.9]))
def test_g_roots_are_predicted_locations(seed, k, rho):
    rng = np.random.default_rng(seed)
    P, lam = random_low_rank(rng, 8, k)
    g = LimitDeterminant(P, rho)
    want = lam + rho / lam
    roots = locate_roots(g, EllipticRegion(rho, 0.02), 5.0)
    rep = match(roots, want, 1e-8)
    assert rep.success, (roots, want)
    clusters = find_roots(g, merge_seeds(want, 1e-6), radius=0.01)
    got = np.concatenate([np.array(c.roots) for c in clusters])
    assert all(c.consistent for c in clusters)
    assert match(got, want, 1e-8).success


# ---------------------------------------------------------------- contour tools

def test_find_roots_simple_pole_zero():
    (c,) = find_roots(lambda z: 1 - 2 / z, [2.0], radius=0.5)
    assert c.winding == 1 and c.roots[0] == pytest.approx(2.0, abs=1e-10)


def test_find_roots_constant_function():
    (c,) = find_roots(lambda z: 1.0 + 0j, [1.7], radius=0.3)
    assert c.winding == 0 and c.roots == ()


def test_find_roots_double_root():
    (c,) = find_roots(lambda z: (1 - 2 / z) ** 2, [(2.0, 2)], radius=0.5)
    assert c.winding == 2 and c.consistent
    np.testing.assert_allclose(c.roots, [2, 2], atol=1e-6)


def test_find_roots_perturbs_radius_when_contour_hits_root():
    (c,) = find_roots(lambda z: 1 - 2 / z, [2.5], radius=0.5)
    assert c.radius == pytest.approx(0.55) and c.winding == 1


def test_find_roots_rejects_inside_seed():
    with pytest.raises(ValueError):
        find_roots(lambda z: 1.0, [0.2], region=EllipticRegion(0.0, 0.1))


def test_winding_number_raises_on_contour_root():
    with pytest.raises(ContourError):
        winding_number(lambda z: z - 1.0, 0.0, 1.0)


def _rect(x0, x1, y0, y1):
    c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]

    def gamma(s):
        s = np.asarray(s, dtype=float) * 4
        k = np.clip(np.floor(s), 0, 3).astype(int)
        u = s - k
        a = np.array(c)[k]
        b = np.array(c)[(k + 1) % 4]
        return a + u * (b - a)
    return gamma


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), theta=st.floats(1.2, 3), cx=st.floats(-0.3, 0.3),
       cy=st.floats(-0.3, 0.3))
def test_winding_additivity(seed, theta, cx, cy):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((6, 6)) / np.sqrt(6)
    f = DeterminantCriterion(X, rank_one(6, theta, np.eye(6)[int(rng.integers(6))]))
    x0, x1, y0, y1 = -3.1, 3.3, -2.9, 3.2
    try:
        total = _CurveTracker(f, _rect(x0, x1, y0, y1)).winding
        parts = sum(_CurveTracker(f, _rect(*r)).winding for r in
                    [(x0, cx, y0, cy), (cx, x1, y0, cy), (x0, cx, cy, y1), (cx, x1, cy, y1)])
    except (ContourError, NearSingularError):
        return
    assert round(total) == round(parts)
    assert abs(total - round(total)) < 1e-6


# ---------------------------------------------------------------- matching

def test_match_single():
    rep = match([2.01], [2.0], 0.1)
    assert len(rep.matches) == 1 and rep.matches[0][2] == pytest.approx(0.01)
    assert rep.success


def test_match_unmatched_prediction():
    rep = match([], [2.25], 0.1)
    assert rep.unmatched_predictions == [2.25] and not rep.success


def test_match_no_crossover():
    rep = match([2.01, -1.99], [2, -2], 0.1)
    pairs = {(p, o) for p, o, _ in rep.matches}
    assert pairs == {(2, 2.01), (-2, -1.99)}
    d = [m[2] for m in rep.matches]
    assert d == sorted(d)


@settings(max_examples=40, deadline=None)
@given(obs=st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False), max_size=6),
       pred=st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False), max_size=6),
       cap=st.floats(0.01, 3))
def test_match_is_a_partial_bijection(obs, pred, cap):
    rep = match(obs, pred, cap)
    assert len(rep.matches) + len(rep.unmatched_observed) == len(obs)
    assert len(rep.matches) + len(rep.unmatched_predictions) == len(pred)
    assert all(d <= cap for _, _, d in rep.matches)
    d = [m[2] for m in rep.matches]
    assert d == sorted(d)


def test_report_serialization(tmp_path):
    rep = match([2.01, 3j], [2.0], 0.1)
    back = OutlierReport.from_dict(json.loads(rep.to_json()))
    assert back.to_dict() == rep.to_dict()
    assert rep.csv_row(4)[:3] == [4, 2, 1]
    path = write_reports_csv({0: rep}, tmp_path / "r.csv")
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_default_cap_mirrors_rate():
    assert default_cap(1000) == pytest.approx(10 / np.sqrt(np.log(np.log(1000))))


def test_outlier_report_single_spike():
    n = 400
    spec = EnsembleSpec(GraphSpec("complete", n), EntryModel("gaussian-real"), 4)
    X = sample_matrix(spec).entries
    rep = outlier_report(X, diagonal(n, [2.0]), 0.0, 0.15, cap_distance=0.3)
    assert rep.success and len(rep.observed) == 1
