import json

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mwcomplete.errors import DegenerateWeightError
from mwcomplete.sampling import apply_r_omega, draw_mask, full_mask
from mwcomplete.solver import (
    SolveOptions, nre, solve_single_weight, solve_standard, solve_weighted, svt,
)
from mwcomplete.subspaces import build_prior_model, build_q, identity_q

seeds = st.integers(0, 2 ** 32 - 1)


def _low_rank(rng, n, r):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, n))


def _prox_objective(x, m, tau):
    return 0.5 * np.sum((x - m) ** 2) + tau * np.sum(np.linalg.svd(x, compute_uv=False))


@given(seeds, st.floats(0.0, 5.0))
def test_svt_is_the_prox(seed, tau):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((6, 5))
    x = svt(m, tau)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    assert np.allclose(x, (u * np.maximum(s - tau, 0)) @ vt, atol=1e-10)
    # no random perturbation improves the prox objective
    base = _prox_objective(x, m, tau)
    for _ in range(5):
        y = x + 1e-3 * rng.standard_normal(x.shape)
        assert _prox_objective(y, m, tau) >= base - 1e-12


def test_svt_matches_convex_solver(rng):
    m = rng.standard_normal((5, 5))
    x = cp.Variable((5, 5))
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(x - m) + 0.7 * cp.normNuc(x))).solve(solver=cp.SCS, eps=1e-10)
    assert np.allclose(svt(m, 0.7), x.value, atol=1e-5)
    with pytest.raises(ValueError):
        svt(m, -1.0)


def test_nre():
    x = np.ones((3, 3))
    assert nre(x, x) == 0.0
    assert nre(2 * x, x) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        nre(x, np.zeros((3, 3)))


def test_full_observation_recovery(backend, rng):
    x = _low_rank(rng, 20, 4)
    rep = solve_standard(x, full_mask(20))
    assert nre(rep.x_hat, x) <= 1e-6
    assert rep.converged


def test_backends_agree(rng, monkeypatch):
    x = _low_rank(rng, 15, 2)
    mask = draw_mask(15, 0.6, 4)
    y = apply_r_omega(x, mask)
    out = {}
    for flag in ("0", "1"):
        monkeypatch.setenv("MWCOMPLETE_DISABLE_NUMBA", flag)
        out[flag] = solve_standard(y, mask)
    assert out["0"].iters == out["1"].iters
    assert np.allclose(out["0"].x_hat, out["1"].x_hat, atol=1e-8)


def _weighted_problem(seed, p=0.5, n=12):
    rng = np.random.default_rng(seed)
    model = build_prior_model(np.radians([20.0, 5.0]), np.radians([15.0, 3.0]), 4, n, seed)
    x = model.u_true @ rng.standard_normal((2, 2)) @ model.v_true.T
    qu = build_q(model.u_prior, [0.3, 0.5, 0.8, 0.9])
    qv = build_q(model.v_prior, [0.4, 0.6, 0.7, 1.0])
    mask = draw_mask(n, p, seed + 1)
    return x, qu, qv, mask


def _cvx_reference(y, mask, qu, qv, e):
    n = mask.n
    z = cp.Variable((n, n))
    obs = mask.eps.astype(float)
    resid = cp.multiply(obs / mask.prob, z) - y * obs
    cons = [resid == 0] if e == 0 else [cp.norm(resid, "fro") <= e]
    prob = cp.Problem(cp.Minimize(cp.normNuc(qu.q @ z @ qv.q)), cons)
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=100_000)
    return prob.value, z.value


@pytest.mark.parametrize("noise", [0.0, 0.3])
def test_weighted_matches_convex_solver(backend, noise):
    x, qu, qv, mask = _weighted_problem(8, p=0.7)
    y = apply_r_omega(x, mask)
    opts = SolveOptions(noise_bound=noise, mode="ball" if noise else "equality", tol_rel=1e-9, max_iters=20_000)
    rep = solve_weighted(y, mask, qu, qv, opts)
    ref_val, ref_z = _cvx_reference(y, mask, qu, qv, noise)
    assert rep.converged
    assert rep.objective == pytest.approx(ref_val, rel=1e-5)
    assert np.linalg.norm(rep.x_hat - ref_z) <= 1e-3 * np.linalg.norm(ref_z)
    assert rep.constraint_residual <= noise + 1e-6 * np.linalg.norm(y)


@given(seeds, st.floats(0.3, 1.0))
def test_equality_constraint_holds(seed, p):
    x, qu, qv, mask = _weighted_problem(seed, p=p)
    y = apply_r_omega(x, mask)
    rep = solve_weighted(y, mask, qu, qv, SolveOptions(max_iters=300))
    # feasibility is exact at every iterate, converged or not
    assert rep.constraint_residual <= 1e-8 * max(np.linalg.norm(y), 1.0)


def test_convergence_reports_tolerance(rng):
    x = _low_rank(rng, 20, 3)
    mask = draw_mask(20, 0.7, 2)
    opts = SolveOptions(tol_rel=1e-8)
    rep = solve_standard(apply_r_omega(x, mask), mask, opts)
    assert rep.converged
    assert rep.primal_residual <= 1e-8 and rep.dual_residual <= 1e-8
    assert rep.merit.size == rep.iters
    doc = json.loads(rep.to_json(include_matrix=False))
    assert doc["converged"] is True and "x_hat" not in doc


def test_iteration_cap_not_fatal(rng):
    x = _low_rank(rng, 12, 2)
    mask = draw_mask(12, 0.5, 1)
    rep = solve_standard(apply_r_omega(x, mask), mask, SolveOptions(max_iters=3))
    assert rep.iters == 3 and not rep.converged


def test_unit_single_weight_equals_standard(rng):
    x, qu, qv, mask = _weighted_problem(3, p=0.6)
    model = build_prior_model(np.radians([20.0, 5.0]), np.radians([15.0, 3.0]), 4, 12, 3)
    y = apply_r_omega(x, mask)
    a = solve_single_weight(y, mask, model.u_prior, model.v_prior, 1.0, 1.0)
    b = solve_standard(y, mask)
    assert np.allclose(a.x_hat, b.x_hat)


def test_empty_mask_and_errors():
    mask = draw_mask(6, 1e-9, 0)
    rep = solve_standard(np.zeros((6, 6)), mask)
    assert rep.iters == 0 and np.all(rep.x_hat == 0)
    full = full_mask(6)
    with pytest.raises(TypeError):
        solve_weighted(np.zeros((6, 6)), full.eps, identity_q(6), identity_q(6))
    with pytest.raises(ValueError):
        solve_weighted(np.zeros((5, 5)), full, identity_q(6), identity_q(6))
    with pytest.raises(ValueError):
        SolveOptions(noise_bound=0.1)
    with pytest.raises(ValueError):
        SolveOptions(mode="l1")
    q = identity_q(6)
    bad = type(q)(q.q, q.q_inv, np.eye(6)[:, :1], np.array([0.0]))
    with pytest.raises(DegenerateWeightError):
        solve_weighted(np.zeros((6, 6)), full, bad, q)
