import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mwcomplete.errors import DegenerateWeightError
from mwcomplete.linalg import (
    as_matrix, check_orthonormal, coherence_profile, nuclear_norm, principal_angles,
    singular_values, spectral_norm, subspace_coherence, svd, truncated_svd, weighted_inf_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def matrices(draw, max_side=8):
    m = draw(st.integers(1, max_side))
    n = draw(st.integers(1, max_side))
    return draw(arrays(np.float64, (m, n), elements=finite))


def _orth(rng, n, k):
    return np.linalg.qr(rng.standard_normal((n, k)))[0]


@given(matrices())
def test_svd_matches_lapack(a):
    res = svd(a)
    ref = np.linalg.svd(a, compute_uv=False)
    scale = max(ref[0], 1.0)
    assert np.allclose(res.s, ref, atol=1e-10 * scale)
    assert np.allclose(res.reconstruct(), a, atol=1e-9 * scale)
    k = res.s.size
    assert np.allclose(res.u.T @ res.u, np.eye(k), atol=1e-9)
    assert np.allclose(res.v.T @ res.v, np.eye(k), atol=1e-9)
    assert np.all(np.diff(res.s) <= 1e-12 * scale)


def test_svd_backends_agree(backend, rng):
    a = rng.standard_normal((20, 13))
    res = svd(a)
    assert np.allclose(res.s, np.linalg.svd(a, compute_uv=False), atol=1e-12)
    assert np.allclose(res.reconstruct(), a, atol=1e-12)


def test_svd_rank_deficient(backend, rng):
    a = rng.standard_normal((15, 3)) @ rng.standard_normal((3, 15))
    res = svd(a)
    assert np.allclose(res.s[3:], 0.0, atol=1e-12)
    assert np.allclose(res.u.T @ res.u, np.eye(15), atol=1e-10)
    assert np.allclose(res.reconstruct(), a, atol=1e-11)


def test_svd_zero_matrix():
    res = svd(np.zeros((4, 3)))
    assert np.all(res.s == 0)
    assert np.allclose(res.u.T @ res.u, np.eye(3))


def test_svd_warm_start(rng):
    a = rng.standard_normal((10, 10))
    cold = svd(a)
    warm = svd(a + 1e-6 * rng.standard_normal((10, 10)), v0=cold.v)
    assert warm.sweeps <= cold.sweeps


def test_truncated_svd_residual(rng):
    a = rng.standard_normal((12, 9))
    head, resid = truncated_svd(a, 3)
    s = np.linalg.svd(a, compute_uv=False)
    assert np.isclose(np.linalg.norm(resid, 2), s[3])
    with pytest.raises(ValueError):
        truncated_svd(a, 10)


def test_norms_on_complex(rng):
    a = rng.standard_normal((6, 5)) + 1j * rng.standard_normal((6, 5))
    s = np.linalg.svd(a, compute_uv=False)
    assert np.allclose(singular_values(a), s)
    assert np.isclose(nuclear_norm(a), s.sum())
    assert np.isclose(spectral_norm(a), s[0])


@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 10_000))
def test_principal_angles_match_scipy(n, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    a = _orth(rng, n, k)
    b = _orth(rng, n, max(1, n - k))
    ours = principal_angles(a, b)
    ref = np.sort(scipy.linalg.subspace_angles(a, b))[::-1]
    assert np.allclose(ours, ref, atol=1e-7)
    assert np.all(np.diff(ours) <= 1e-12)
    assert np.all((ours >= 0) & (ours <= np.pi / 2 + 1e-12))


def test_principal_angles_identical_and_orthogonal():
    e = np.eye(6)
    assert np.allclose(principal_angles(e[:, :2], e[:, :2]), 0.0)
    assert np.allclose(principal_angles(e[:, :2], e[:, 2:4]), np.pi / 2)


def test_input_validation():
    with pytest.raises(ValueError):
        as_matrix(np.array([1.0, np.nan])[None, :])
    with pytest.raises(ValueError):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        check_orthonormal(np.ones((3, 2)))
    with pytest.raises(ValueError):
        principal_angles(np.eye(3)[:, :1], np.eye(4)[:, :1])


def test_coherence_extremes(rng):
    n, r = 16, 4
    spiky = np.eye(n)[:, :r]
    assert np.isclose(subspace_coherence(spiky).max(), n / r)
    flat = scipy.linalg.hadamard(n)[:, :r] / np.sqrt(n)
    assert np.allclose(subspace_coherence(flat), 1.0)
    u = _orth(rng, n, r)
    prof = coherence_profile(u, _orth(rng, n, r))
    assert np.isclose(prof.mu.mean(), 1.0)
    assert 1.0 <= prof.eta <= n / r


def test_weighted_inf_norm_rejects_zero_coherence():
    prof = coherence_profile(np.eye(4)[:, :1], np.eye(4)[:, :1])
    with pytest.raises(DegenerateWeightError):
        weighted_inf_norm(np.ones((4, 4)), prof, 1)


@pytest.mark.parametrize("shape", [(4, 7), (7, 4), (5, 5)])
def test_svd_leaves_inputs_untouched(shape, rng):
    a = rng.standard_normal(shape)
    a_copy = a.copy()
    first = svd(a)
    # wide input is factored through its transpose, so the warm start is u
    v0 = first.u if shape[0] < shape[1] else first.v
    v0_copy = v0.copy()
    svd(a + 0.1, v0=v0)
    assert np.array_equal(a, a_copy)
    assert np.array_equal(v0, v0_copy)
