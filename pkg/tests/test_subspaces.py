import numpy as np
import pytest
from hypothesis import given, strategies as st

from mwcomplete.errors import DegenerateAngleError, DegenerateWeightError
from mwcomplete.linalg import principal_angles
from mwcomplete.subspaces import (
    assemble_l, assembled_blocks, block_norms, build_aligned_bases, build_block_factor,
    build_joint_bases, build_prior_model, build_q, canonical_pair, identity_q, measured_angles,
    o_factor, proj_tangent, proj_tangent_perp, q_bar,
)

seeds = st.integers(0, 2 ** 32 - 1)
angle = st.floats(0.0, np.pi / 2)
weight = st.floats(0.01, 1.0)


def _direct_norms(bf):
    blocks = assembled_blocks(bf)
    out = {k: np.linalg.norm(v, 2) for k, v in blocks.items() if k != "l_prime"}
    out["l_prime_sq"] = np.linalg.norm(blocks["l_prime"], 2) ** 2
    return out


@given(st.lists(angle, min_size=1, max_size=5), st.data())
def test_block_norms_match_direct(theta, data):
    r = len(theta)
    lam = data.draw(st.lists(weight, min_size=r, max_size=r))
    lam2 = data.draw(st.lists(weight, min_size=0, max_size=4))
    bf = build_block_factor(theta, lam, lam2)
    closed = block_norms(bf)
    direct = _direct_norms(bf)
    for key, val in direct.items():
        assert closed[key] == pytest.approx(val, abs=1e-10), key


@given(seeds, st.integers(1, 4), st.integers(0, 4))
def test_q_identities(seed, r, extra):
    rng = np.random.default_rng(seed)
    n = 2 * r + extra + 3
    theta = rng.uniform(0, np.pi / 2, r)
    u, up = build_aligned_bases(theta, r + extra, n, rng)
    w = rng.uniform(0.05, 1.0, r + extra)
    q = build_q(up, w)
    assert np.linalg.norm(q.q, 2) == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.norm(q.q @ q.q_inv - np.eye(n), 2) <= 1e-10
    assert np.allclose(q.q, q.q.T)


def test_q_is_identity_for_unit_weights(rng):
    u, up = build_aligned_bases(rng.uniform(0, 1.5, 3), 6, 12, rng)
    q = build_q(up, np.ones(6))
    assert np.array_equal(q.q, np.eye(12))
    assert np.array_equal(identity_q(5).q, np.eye(5))


def test_q_rejects_bad_weights(rng):
    up = np.linalg.qr(rng.standard_normal((6, 2)))[0]
    for bad in ([0.0, 1.0], [1.2, 0.5], [0.5]):
        with pytest.raises((DegenerateWeightError, ValueError)):
            build_q(up, bad)


@given(seeds)
def test_q_factorisation(seed):
    rng = np.random.default_rng(seed)
    n, r, rp = 14, 3, 6
    theta = rng.uniform(0.05, np.pi / 2, r)
    u, up = build_aligned_bases(theta, rp, n, rng)
    lam1 = rng.uniform(0.05, 1, r)
    lam2 = rng.uniform(0.05, 1, rp - r)
    jb = build_joint_bases(u, up)
    b = jb.b
    assert np.allclose(b.T @ b, np.eye(n), atol=1e-10)
    q = build_q(jb.u_prior, np.concatenate([lam1, lam2]))
    qb = q_bar(jb.theta, lam1, lam2, n)
    assert np.allclose(b.T @ q.q @ b, qb, atol=1e-10)
    bf = build_block_factor(jb.theta, lam1, lam2)
    o = o_factor(bf, n)
    assert np.allclose(o.T @ o, np.eye(n), atol=1e-10)
    assert np.allclose(b @ o @ assemble_l(bf, n) @ b.T, q.q, atol=1e-10)


@given(seeds, st.lists(angle, min_size=1, max_size=4))
def test_aligned_bases_realise_angles(seed, theta):
    r = len(theta)
    u, up = build_aligned_bases(theta, r + 2, 2 * r + 4, seed)
    got = principal_angles(u, up)
    assert np.allclose(got, np.sort(theta)[::-1], atol=1e-7)


def test_prior_model_far_preset_angles():
    tu = np.radians([40.87, 49.63, 50.55, 69.39])
    tv = np.radians([28.76, 37.83, 40.52, 63.65])
    model = build_prior_model(tu, tv, 8, 20, 5)
    mu, mv = measured_angles(model)
    assert np.allclose(mu, np.sort(tu)[::-1], atol=1e-8)
    assert np.allclose(mv, np.sort(tv)[::-1], atol=1e-8)


@given(seeds)
def test_canonical_pair_diagonalises(seed):
    rng = np.random.default_rng(seed)
    n, r, rp = 12, 3, 5
    u = np.linalg.qr(rng.standard_normal((n, r)))[0]
    up = np.linalg.qr(rng.standard_normal((n, rp)))[0]
    uc, upc, theta = canonical_pair(u, up)
    cross = uc.T @ upc
    expect = np.zeros((r, rp))
    expect[:, :r] = np.diag(np.cos(theta))
    assert np.allclose(cross, expect, atol=1e-10)
    assert np.all(np.diff(theta) <= 1e-12)
    # same subspaces, only rotated
    assert np.allclose(uc @ uc.T, u @ u.T, atol=1e-10)
    assert np.allclose(upc @ upc.T, up @ up.T, atol=1e-10)


def test_joint_basis_degenerate_angle(rng):
    theta = np.array([0.3, 0.0])
    u, up = build_aligned_bases(theta, 3, 8, rng)
    jb = build_joint_bases(u, up)
    assert jb.degenerate.tolist() == [False, True]
    assert np.allclose(jb.b.T @ jb.b, np.eye(8), atol=1e-10)
    with pytest.raises(DegenerateAngleError):
        build_joint_bases(u, up, on_degenerate="raise")


def test_block_factor_singular():
    with pytest.raises(DegenerateWeightError):
        build_block_factor([0.0], [1e-300 ** 2], [])


@st.composite
def tangent_case(draw):
    seed = draw(seeds)
    rng = np.random.default_rng(seed)
    n = draw(st.integers(3, 12))
    r = draw(st.integers(1, n - 1))
    u = np.linalg.qr(rng.standard_normal((n, r)))[0]
    v = np.linalg.qr(rng.standard_normal((n, r)))[0]
    z = rng.standard_normal((n, n))
    w = rng.standard_normal((n, n))
    return u, v, z, w


@given(tangent_case())
def test_projector_algebra(case):
    u, v, z, w = case
    pt = proj_tangent(z, u, v)
    pp = proj_tangent_perp(z, u, v)
    assert np.allclose(proj_tangent(pt, u, v), pt, atol=1e-10)
    assert np.allclose(proj_tangent_perp(pp, u, v), pp, atol=1e-10)
    assert np.allclose(pt + pp, z, atol=1e-10)
    assert abs(np.sum(pt * proj_tangent_perp(w, u, v))) <= 1e-10 * np.linalg.norm(z) * np.linalg.norm(w)
    assert np.allclose(proj_tangent(pp, u, v), 0.0, atol=1e-10)
    # self-adjoint
    assert np.isclose(np.sum(pt * w), np.sum(z * proj_tangent(w, u, v)), atol=1e-10)
