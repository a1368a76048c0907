"""Prior-subspace geometry: aligned bases, joint bases, Q matrices, L blocks.

Conventions
-----------
All angles are radians.  For one side (column or row space) the objects are

* ``u_true`` (n x r): orthonormal basis of the ground-truth subspace,
* ``u_prior`` (n x r'): orthonormal basis of the prior subspace, r <= r',
* ``theta`` (r,): principal angles between the two.

The joint basis ``B_L = [U_r, U'_1, U'_2, U'']`` puts the prior in the
canonical form ``B_L^T U_prior = [[cos θ, 0], [-sin θ, 0], [0, -I], [0, 0]]``.
In those coordinates the weight matrix factors as ``Q = B_L O_L L B_L^T``
with ``O_L`` orthogonal and ``L`` block upper-triangular.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngleError, DegenerateWeightError
from .linalg import check_orthonormal, principal_angles, svd
from .weights import WeightSpec, f1, f2  # noqa: F401 (re-export)

ANGLE_FLOOR = 1e-9


@dataclass(frozen=True)
class PriorModel:
    u_true: np.ndarray
    v_true: np.ndarray
    u_prior: np.ndarray
    v_prior: np.ndarray
    theta_u: np.ndarray
    theta_v: np.ndarray

    @property
    def n(self):
        return self.u_true.shape[0]

    @property
    def r(self):
        return self.u_true.shape[1]

    @property
    def r_prime(self):
        return self.u_prior.shape[1]


@dataclass(frozen=True)
class QMatrix:
    q: np.ndarray
    q_inv: np.ndarray
    basis: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class BlockFactor:
    theta: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    delta: np.ndarray
    l12_diag: np.ndarray
    l22_diag: np.ndarray


@dataclass(frozen=True)
class JointBasis:
    b: np.ndarray
    u_true: np.ndarray
    u_prior: np.ndarray
    theta: np.ndarray
    degenerate: np.ndarray


def random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def build_aligned_bases(theta, r_prime, n, seed):
    """One side of a prior model with prescribed principal angles.

    A seeded random orthogonal frame ``F`` supplies ``U_r = F[:, :r]`` and
    the prior is placed analytically as
    ``[U_r cos θ - F[:, r:2r] sin θ, -F[:, 2r:r+r']]``.

    Returns ``(u_true, u_prior)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    r = theta.size
    if r < 1 or r_prime < r or r + r_prime > n:
        raise ValueError(f"need 1 <= r <= r' and r + r' <= n (r={r}, r'={r_prime}, n={n})")
    if np.any(theta < 0.0) or np.any(theta > np.pi / 2 + 1e-12):
        raise ValueError("angles must lie in [0, pi/2]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    frame = random_orthogonal(n, rng)
    u = frame[:, :r]
    first = u * np.cos(theta) - frame[:, r:2 * r] * np.sin(theta)
    rest = -frame[:, 2 * r:r + r_prime]
    return u, np.hstack([first, rest])


def build_prior_model(theta_u, theta_v, r_prime, n, seed):
    rng = np.random.default_rng(seed)
    u, up = build_aligned_bases(theta_u, r_prime, n, rng)
    v, vp = build_aligned_bases(theta_v, r_prime, n, rng)
    return PriorModel(u, v, up, vp, np.sort(theta_u)[::-1], np.sort(theta_v)[::-1])


def _orth_complement(k, count):
    n = k.shape[0]
    q, _ = np.linalg.qr(np.hstack([k, np.eye(n)]))
    return q[:, k.shape[1]:k.shape[1] + count]


def canonical_pair(u_true, u_prior):
    """Rotate both bases so that ``u_true^T u_prior = [diag(cos θ), 0]``.

    Angles come out non-increasing.  Returns ``(u, up, theta)``.
    """
    u = check_orthonormal(u_true, name="u_true")
    up = check_orthonormal(u_prior, name="u_prior")
    r, rp = u.shape[1], up.shape[1]
    if rp < r:
        raise ValueError("prior dimension must be at least the true dimension")
    # SVD of the wide r x r' cross-Gram: left factor r x r, right factor r' x r'
    c = u.T @ up
    res = svd(c.T)
    right = res.u  # r' x r
    left = res.v  # r x r
    cos = np.clip(res.s, 0.0, 1.0)
    full_right = np.hstack([right, _orth_complement(right, rp - r)]) if rp > r else right
    u_c = u @ left[:, ::-1]
    first = up @ full_right[:, :r][:, ::-1]
    up_c = np.hstack([first, up @ full_right[:, r:]])
    # sine of each pair from the residual (accurate where arccos is not)
    sin = np.linalg.norm(first - u_c * np.sum(u_c * first, axis=0), axis=0)
    theta = np.arctan2(sin, cos[::-1])
    return u_c, up_c, theta


def build_joint_bases(u_true, u_prior, on_degenerate="complete"):
    """Orthogonal ``B_L = [U_r, U'_1, U'_2, U'']`` for one side.

    ``U'_1 = -P_{U perp} Ũ_1 / sin θ``; columns with ``θ < ANGLE_FLOOR`` are
    treated as exactly aligned and replaced by orthonormal completion vectors
    (or rejected when ``on_degenerate="raise"``).
    """
    u, up, theta = canonical_pair(u_true, u_prior)
    n, r = u.shape
    rp = up.shape[1]
    if r + rp > n:
        raise ValueError("joint basis needs r + r' <= n")
    degenerate = theta < ANGLE_FLOOR
    if degenerate.any() and on_degenerate == "raise":
        raise DegenerateAngleError(f"angles below {ANGLE_FLOOR:g} rad: {theta[degenerate]}")
    proj_perp = np.eye(n) - u @ u.T
    u1 = np.zeros((n, r))
    ok = ~degenerate
    u1[:, ok] = -(proj_perp @ up[:, :r][:, ok]) / np.sin(theta[ok])
    u2 = -(proj_perp @ up[:, r:])
    if degenerate.any():
        known = np.hstack([u, u1[:, ok], u2])
        u1[:, degenerate] = _orth_complement(known, int(degenerate.sum()))
    known = np.hstack([u, u1, u2])
    rest = _orth_complement(known, n - r - rp)
    b = np.hstack([known, rest])
    return JointBasis(b=b, u_true=u, u_prior=up, theta=theta, degenerate=degenerate)


def build_q(u_prior, weights):
    """``Q = Ũ diag(w) Ũ^T + P_{Ũ perp}`` and its inverse."""
    up = check_orthonormal(u_prior, name="u_prior")
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.size != up.shape[1]:
        raise ValueError(f"{w.size} weights for a {up.shape[1]}-dimensional prior")
    if np.any(w <= 0.0) or np.any(w > 1.0):
        raise DegenerateWeightError("weights must lie in (0, 1]; zero makes Q singular")
    n = up.shape[0]
    q = np.eye(n) + (up * (w - 1.0)) @ up.T
    q_inv = np.eye(n) + (up * (1.0 / w - 1.0)) @ up.T
    q = 0.5 * (q + q.T)
    q_inv = 0.5 * (q_inv + q_inv.T)
    return QMatrix(q=q, q_inv=q_inv, basis=up, weights=w)


def identity_q(n):
    return QMatrix(q=np.eye(n), q_inv=np.eye(n), basis=np.zeros((n, 0)), weights=np.zeros(0))


def build_block_factor(theta, lambda1, lambda2):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lam = np.atleast_1d(np.asarray(lambda1, dtype=float))
    lam2 = np.atleast_1d(np.asarray(lambda2, dtype=float))
    if lam.shape != theta.shape:
        raise ValueError("lambda1 and theta must have the same length")
    for w in (lam, lam2):
        if np.any(w <= 0.0) or np.any(w > 1.0):
            raise DegenerateWeightError("weights must lie in (0, 1]")
    delta = f2(lam, theta)
    if np.any(delta == 0.0):
        raise DegenerateWeightError("Delta_L is singular (zero weight at zero angle)")
    sc = np.sin(theta) * np.cos(theta)
    return BlockFactor(
        theta=theta,
        lambda1=lam,
        lambda2=lam2,
        delta=delta,
        l12_diag=(1.0 - lam ** 2) * sc / delta,
        l22_diag=lam / delta,
    )


def assemble_l(bf, n):
    """Full n x n block upper-triangular L in joint-basis coordinates."""
    r = bf.delta.size
    k = bf.lambda2.size
    if 2 * r + k > n:
        raise ValueError("n too small for the block layout")
    out = np.eye(n)
    idx = np.arange(r)
    out[idx, idx] = bf.delta
    out[idx, r + idx] = bf.l12_diag
    out[r + idx, r + idx] = bf.l22_diag
    out[2 * r + np.arange(k), 2 * r + np.arange(k)] = bf.lambda2
    return out


def q_bar(theta, lambda1, lambda2, n):
    """``B_L^T Q B_L`` written out from the angle/weight algebra."""
    r = theta.size
    c, s = np.cos(theta), np.sin(theta)
    out = np.eye(n)
    idx = np.arange(r)
    out[idx, idx] = lambda1 * c ** 2 + s ** 2
    out[idx, r + idx] = out[r + idx, idx] = (1.0 - lambda1) * s * c
    out[r + idx, r + idx] = lambda1 * s ** 2 + c ** 2
    k = np.asarray(lambda2).size
    out[2 * r + np.arange(k), 2 * r + np.arange(k)] = lambda2
    return out


def o_factor(bf, n):
    """Orthogonal ``O_L = Q_bar L^{-1}`` completing ``Q = B_L O_L L B_L^T``."""
    l_full = assemble_l(bf, n)
    qb = q_bar(bf.theta, bf.lambda1, bf.lambda2, n)
    return np.linalg.solve(l_full.T, qb.T).T


def block_norms(bf):
    """Closed-form operator norms of the L sub-blocks.

    Keys: ``l11``, ``l12``, ``i_minus_l22``, ``l11_l12``, ``l_prime_sq``,
    ``complement_diag``.  ``l_prime_sq`` is the squared norm of
    ``blkdiag([[0, L12], [0, L22 - I]], Λ2 - I)``; ``complement_diag`` the norm
    of ``blkdiag(I - L22, I - Λ2)``.
    """
    lam, theta = bf.lambda1, bf.theta
    g2 = f2(lam, theta)
    ratio = lam / g2
    d1 = np.max((ratio - 1.0) ** 2 + bf.l12_diag ** 2)
    d2 = np.max((bf.lambda2 - 1.0) ** 2) if bf.lambda2.size else 0.0
    comp = np.max(1.0 - ratio)
    if bf.lambda2.size:
        comp = max(comp, np.max(1.0 - bf.lambda2))
    return {
        "l11": float(np.max(g2)),
        "l12": float(np.max(np.abs(bf.l12_diag))),
        "i_minus_l22": float(np.max(np.abs((lam - g2) / g2))),
        "l11_l12": float(np.max(f1(lam, theta) / g2)),
        "l_prime_sq": float(max(d1, d2)),
        "complement_diag": float(comp),
    }


def assembled_blocks(bf):
    """The explicit matrices whose spectral norms ``block_norms`` predicts."""
    r = bf.delta.size
    k = bf.lambda2.size
    l11 = np.diag(bf.delta)
    l12 = np.diag(bf.l12_diag)
    l22 = np.diag(bf.l22_diag)
    eye = np.eye(r)
    top = np.hstack([np.zeros((r, r)), l12])
    mid = np.hstack([np.zeros((r, r)), l22 - eye])
    lp = np.zeros((2 * r + k, 2 * r + k))
    lp[:r, :] = np.hstack([top, np.zeros((r, k))])
    lp[r:2 * r, :] = np.hstack([mid, np.zeros((r, k))])
    lp[2 * r:, 2 * r:] = np.diag(bf.lambda2 - 1.0)
    comp = np.zeros((r + k, r + k))
    comp[:r, :r] = eye - l22
    comp[r:, r:] = np.eye(k) - np.diag(bf.lambda2)
    return {
        "l11": l11,
        "l12": l12,
        "i_minus_l22": eye - l22,
        "l11_l12": np.hstack([l11, l12]),
        "l_prime": lp,
        "complement_diag": comp,
    }


def projector(basis):
    b = np.asarray(basis, dtype=float)
    return b @ b.T


def proj_tangent(z, u_true, v_true):
    """``P_T(Z) = P_U Z + Z P_V - P_U Z P_V``."""
    z = np.asarray(z, dtype=float)
    pu = projector(u_true)
    pv = projector(v_true)
    puz = pu @ z
    return puz + z @ pv - puz @ pv


def proj_tangent_perp(z, u_true, v_true):
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    pu = np.eye(n) - projector(u_true)
    pv = np.eye(z.shape[1]) - projector(v_true)
    return pu @ z @ pv


def measured_angles(model):
    """Principal angles actually realised by a prior model (u side, v side)."""
    return principal_angles(model.u_true, model.u_prior), principal_angles(model.v_true, model.v_prior)
