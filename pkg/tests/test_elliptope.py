import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synccorr.elliptope import (
    completed_matrix,
    elliptope_from_s2,
    elliptope_membership,
    elliptope_project,
    elliptope_support,
    members_batch,
    realize_s2,
    s2_from_elliptope,
    sample_elliptope,
    sample_s2,
    sample_s2_batch,
    support_batch,
    sylvester_determinant,
    sylvester_test,
)
from synccorr.matcore import rng_stream, trace_triple


def _grid_members(step=0.05):
    g = np.arange(-1.0, 1.0 + 1e-9, step)
    pts = np.array(list(itertools.product(g, g, g)))
    return pts[members_batch(pts, 0.0)]


def test_membership_examples():
    assert elliptope_membership((0, 0, 0)).member
    m = elliptope_membership((1, 1, 1))
    assert m.member and abs(m.min_eigenvalue) < 1e-12
    m = elliptope_membership((1, 1, -1))
    assert not m.member and not m.sylvester
    assert sylvester_determinant((1, 1, -1)) == pytest.approx(-4.0)


def test_sylvester_agrees_with_eigenvalues():
    q = rng_stream(1).uniform(-1.2, 1.2, (100_000, 3))
    x, y, z = q.T
    lam = np.linalg.eigvalsh(np.stack([completed_matrix(v) for v in q[:20_000]]))[:, 0]
    syl = members_batch(q[:20_000], 0.0)
    decisive = np.abs(lam) > 1e-9
    assert np.array_equal(syl[decisive], lam[decisive] >= 0)
    det = 1 + 2 * x * y * z - x * x - y * y - z * z
    assert np.array_equal(members_batch(q, 0.0), np.all(np.abs(q) <= 1, axis=1) & (det >= 0))


def test_project_examples():
    assert np.allclose(elliptope_project((0, 0, 0)), 0)
    assert np.allclose(elliptope_project((2, 2, 2)), (1, 1, 1), atol=1e-8)
    p = elliptope_project((1, 1, -1))
    assert abs(sylvester_determinant(p)) <= 1e-8
    assert elliptope_membership(p).member


def test_project_matches_grid_search():
    grid = _grid_members(0.04)
    for v in [(2, 2, 2), (1, 1, -1), (0.9, -0.9, 0.9), (-1.5, 0.2, 0.3)]:
        p = elliptope_project(v)
        best = np.min(np.linalg.norm(grid - np.asarray(v), axis=1))
        assert np.linalg.norm(p - v) <= best + 1e-9


def test_project_optimality_and_idempotence():
    rng = rng_stream(2)
    members = sample_elliptope(1000, rng)
    for v in rng.uniform(-2, 2, (20, 3)):
        p = elliptope_project(v)
        assert elliptope_membership(p).member
        assert np.max((members - p) @ (v - p)) <= 1e-7
        assert np.allclose(elliptope_project(p), p, atol=1e-9)
    for q in members[:50]:
        assert np.allclose(elliptope_project(q), q, atol=1e-9)


def test_support_examples():
    val, q = elliptope_support((0, 0, 1))
    assert val == pytest.approx(1.0) and q[2] == pytest.approx(1.0)
    val, q = elliptope_support((1, 1, 1))
    assert val == pytest.approx(3.0) and np.allclose(q, 1)
    # frustrated triangle: (1,1,-1) . q <= 3/2 with equality at (1/2, 1/2, -1/2)
    val, q = elliptope_support((1, 1, -1))
    assert val == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(q, (0.5, 0.5, -0.5), atol=1e-9)
    assert elliptope_support((0, 0, 0))[0] == 0.0


def test_support_matches_grid_and_ascent():
    grid = _grid_members(0.05)
    dirs = rng_stream(3).standard_normal((100, 3))
    vals, qs = support_batch(dirs)
    assert np.all(members_batch(qs, 1e-12))
    assert np.allclose(np.einsum("ij,ij->i", dirs, qs), vals, atol=1e-14)
    assert np.all(grid @ dirs.T <= vals + 1e-12)
    # grid resolution bounds how far below the optimum its best point can be
    assert np.all(vals - np.max(grid @ dirs.T, axis=0) <= 0.2 * np.linalg.norm(dirs, axis=1))
    for c, v in zip(dirs[:30], vals[:30]):
        assert elliptope_support(c, method="bca")[0] == pytest.approx(v, abs=1e-9)


def test_support_dominates_members():
    rng = rng_stream(4)
    members = sample_elliptope(1000, rng)
    dirs = rng.standard_normal((100, 3))
    vals, _ = support_batch(dirs)
    assert np.all(members @ dirs.T <= vals + 1e-12)


def test_support_near_vertices_stays_on_boundary():
    rng = rng_stream(5)
    for scale in (1e-3, 1e-7, 1e-11):
        c = np.array([1.0, 1.0, 1.0]) + scale * rng.standard_normal((50, 3))
        _, q = support_batch(c)
        assert np.all(members_batch(q, 1e-14))


def test_bca_needs_restarts():
    with pytest.raises(ValueError):
        elliptope_support((1, 0, 0), method="bca", restarts=3)


def test_affine_maps():
    assert np.allclose(s2_from_elliptope((0, 0, 0)), (0.25, 0.25, 0.25))
    assert np.allclose(s2_from_elliptope((1, 1, 1)), (0.5, 0.5, 0.5))
    q, ok = elliptope_from_s2((0.5, 0, 0))
    assert ok and np.allclose(q, (1, -1, -1))
    _, ok = elliptope_from_s2((0, 0, 0))
    assert not ok
    pts = rng_stream(6).uniform(-1, 1, (10_000, 3))
    worst = max(np.abs(elliptope_from_s2(s2_from_elliptope(v))[0] - v).max() for v in pts)
    assert worst <= 1e-15


def test_realize_s2_examples():
    e = np.eye(3)
    assert np.allclose(trace_triple(*realize_s2(vectors=[e[0], e[0], e[0]])), 0.5)
    assert np.allclose(trace_triple(*realize_s2(vectors=[e[0], e[0], -e[0]])), (0.5, 0, 0))
    assert np.allclose(trace_triple(*realize_s2(vectors=e)), 0.25)
    with pytest.raises(ValueError):
        realize_s2(q=(1, 1, -1))
    with pytest.raises(ValueError):
        realize_s2(vectors=2 * e)


def test_realize_s2_round_trip():
    rng = rng_stream(7)
    for q in sample_elliptope(10_000, rng)[::10]:
        ps = realize_s2(q)
        assert all(p.rank == 1 for p in ps)
        assert np.abs(trace_triple(*ps) - s2_from_elliptope(q)).max() <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**40))
def test_sample_s2_is_member(seed):
    _, ok = elliptope_from_s2(sample_s2(seed), tol=1e-10)
    assert ok


def test_sample_s2_batch_extremes():
    p = sample_s2_batch(100_000, 9)
    q = 4 * p - 1
    assert np.all(members_batch(q, 1e-10))
    assert p[:, 0].max() == pytest.approx(0.5, abs=0.01)
    assert sylvester_test(q[0], 1e-10)
