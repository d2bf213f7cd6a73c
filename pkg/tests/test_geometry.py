"""Membership, distance and boundary sampling for the elliptic regions."""
import cmath
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elliptic_outliers.geometry import (EllipticRegion, boundary_curve, normal_coordinates,
                                        write_boundary_csv)

finite = st.floats(-4, 4, allow_nan=False)
rhos = st.builds(lambda r, t: r * cmath.exp(1j * t), st.floats(0, 0.99), st.floats(-math.pi, math.pi))


def test_unit_disk():
    R = EllipticRegion(0.0)
    assert R.contains(0.99) and R.contains(1.0) and not R.contains(1.5)


def test_real_rho_vertex():
    R = EllipticRegion(0.5)
    assert R.contains(1.5) and not R.contains(1.51)


def test_rho_i_is_rotated_segment():
    R = EllipticRegion(1j)
    assert R.degenerate
    assert R.contains(cmath.exp(1j * math.pi / 4))
    assert R.contains(2 * cmath.exp(1j * math.pi / 4))
    assert not R.contains(1.0)


def test_distance_examples():
    assert EllipticRegion(0.0).distance(2.0) == pytest.approx(1.0, abs=1e-12)
    for rho in (-0.9, -0.5, 0.3, 0.9):
        assert EllipticRegion(rho).distance(1 + rho + 0.7) == pytest.approx(0.7, abs=1e-12)
    assert EllipticRegion(0.5).distance(2j) == pytest.approx(1.5, abs=1e-12)
    assert EllipticRegion(0.5).distance(0.2 + 0.1j) == 0.0


def test_boundary_points_examples():
    np.testing.assert_allclose(EllipticRegion(0.0).boundary_points(4), [1, 1j, -1, -1j], atol=1e-15)
    np.testing.assert_allclose(EllipticRegion(1.0).boundary_points(4), [2, 0, -2, 0], atol=1e-15)
    np.testing.assert_allclose(EllipticRegion(0.5).boundary_points(4),
                               [1.5, 0.5j, -1.5, -0.5j], atol=1e-15)


def test_boundary_points_need_three():
    with pytest.raises(ValueError):
        EllipticRegion(0.0).boundary_points(2)


def test_fattened_boundary_is_at_distance_epsilon():
    for rho in (0.0, 0.5, -0.9, 0.5j, 1.0):
        pts = EllipticRegion(rho, 0.2).boundary_points(64)
        np.testing.assert_allclose(EllipticRegion(rho).distance(pts), 0.2, atol=1e-9)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        EllipticRegion(1.5)
    with pytest.raises(ValueError):
        EllipticRegion(0.3, -0.1)


@pytest.mark.parametrize("rho", [-0.9, -0.5, 0.0, 0.5, 0.9])
def test_real_rho_matches_ellipse_inequality(rho):
    xs = np.linspace(-2.2, 2.2, 200)
    Z = (xs[None, :] + 1j * xs[:, None]).ravel()
    q = Z.real ** 2 / (1 + rho) ** 2 + Z.imag ** 2 / (1 - rho) ** 2
    got = EllipticRegion(rho).contains(Z)
    bad = got != (q <= 1)
    assert np.all(EllipticRegion(rho).boundary_distance(Z[bad]) <= 1e-9)


@settings(max_examples=60, deadline=None)
@given(rho=rhos, x=finite, y=finite)
def test_rotation_equivariance(rho, x, y):
    z = complex(x, y)
    rot = cmath.exp(-1j * cmath.phase(rho) / 2) if rho != 0 else 1.0
    a = EllipticRegion(rho)
    b = EllipticRegion(abs(rho))
    if a.boundary_distance(z) > 1e-9:
        assert a.contains(z) == b.contains(rot * z)
    assert a.distance(z) == pytest.approx(b.distance(rot * z), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(rho=rhos, x=finite, y=finite, e1=st.floats(0, 1), e2=st.floats(0, 1))
def test_monotone_in_epsilon(rho, x, y, e1, e2):
    lo, hi = sorted((e1, e2))
    z = complex(x, y)
    if EllipticRegion(rho, lo).contains(z):
        assert EllipticRegion(rho, hi).contains(z)


@settings(max_examples=60, deadline=None)
@given(rho=rhos, x=finite, y=finite)
def test_distance_zero_iff_contained(rho, x, y):
    R = EllipticRegion(rho)
    z = complex(x, y)
    d = R.distance(z)
    assert d >= 0
    if R.boundary_distance(z) > 1e-9:
        assert (d == 0) == bool(R.contains(z))


def test_distance_against_dense_boundary_oracle():
    rng = np.random.default_rng(0)
    for rho in (0.0, 0.5, -0.7, 0.4 + 0.4j, 1.0, -1j):
        z = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-3, 3, 50)
        phi = np.linspace(0, 2 * np.pi, 200_001)
        curve = np.exp(1j * phi) + rho * np.exp(-1j * phi)
        oracle = np.abs(z[:, None] - curve[None, :]).min(axis=1)
        R = EllipticRegion(rho)
        got = R.distance(z)
        inside = R.contains(z)
        np.testing.assert_allclose(got[~inside], oracle[~inside], atol=1e-6)


def test_normal_coordinates_round_trip():
    R = EllipticRegion(0.5 + 0.3j)
    z = np.array([3.0, -2j, 1 + 2j, -2.5 - 0.5j])
    psi, t = normal_coordinates(R, z)
    back = [complex(boundary_curve(EllipticRegion(R.rho, float(ti)), pi)) for pi, ti in zip(psi, t)]
    np.testing.assert_allclose(back, z, atol=1e-9)
    np.testing.assert_allclose(t, R.distance(z), atol=1e-9)


def test_boundary_csv_unit_circle(tmp_path):
    path = write_boundary_csv(EllipticRegion(0.0), tmp_path / "b.csv")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 512 and set(rows[0]) == {"re", "im"}
    z = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    np.testing.assert_allclose(np.abs(z), 1.0, atol=1e-15)
