"""Dense linear algebra: SVD, norms, principal angles, coherence."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateWeightError, NumericalFailure

SVD_TOL = 1e-12


def as_matrix(m, name="matrix"):
    """Validate a finite 2-D array and return it as a float/complex ndarray."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_orthonormal(basis, tol=1e-10, name="basis"):
    b = as_matrix(basis, name)
    n, k = b.shape
    if k > n:
        raise ValueError(f"{name} has more columns ({k}) than rows ({n})")
    err = np.linalg.norm(b.conj().T @ b - np.eye(k), 2)
    if err > tol:
        raise ValueError(f"{name} is not orthonormal (|B^H B - I| = {err:.2e})")
    return b


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    sweeps: int = 0

    def reconstruct(self):
        return (self.u * self.s) @ self.v.T


def _complete_columns(u, good):
    """Replace the columns of ``u`` flagged bad by an orthonormal completion."""
    m, k = u.shape
    keep = u[:, good]
    q, _ = np.linalg.qr(np.hstack([keep, np.eye(m)]))
    extra = q[:, keep.shape[1]:k]
    out = u.copy()
    out[:, ~good] = extra[:, : (~good).sum()]
    return out


def svd(m, v0=None, tol=SVD_TOL, max_sweeps=None):
    """Thin SVD of a real matrix by one-sided Jacobi.

    Parameters
    ----------
    m : array_like, (rows, cols)
    v0 : array_like, optional
        Orthogonal warm start for the right factor (cols x cols, or rows x rows
        for wide input).  Successive SVDs of slowly varying matrices converge in
        one or two sweeps when seeded with the previous right factor.

    Returns
    -------
    SvdResult
        ``s`` is non-increasing; the first nonzero entry of every column of
        ``u`` is non-negative.
    """
    a = as_matrix(m)
    if np.iscomplexobj(a):
        raise TypeError("svd is real-only; use singular_values for complex input")
    wide = a.shape[0] < a.shape[1]
    if wide:
        a = a.T
    rows, cols = a.shape
    if max_sweeps is None:
        max_sweeps = 100 * max(rows, cols)
    if v0 is None:
        vt = np.eye(cols)
        # the kernel works in place; never hand it the caller's buffer
        at = np.array(a.T, order="C", copy=True)
    else:
        vt = np.array(np.asarray(v0, dtype=float).T, order="C", copy=True)
        at = np.ascontiguousarray(vt @ a.T)
    sweeps = _kernels.jacobi_sweeps(at, vt, tol, max_sweeps)
    if sweeps < 0:
        raise NumericalFailure(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    s = np.sqrt(np.einsum("ij,ij->i", at, at))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    u = at[order].T
    v = vt[order].T
    floor = s[0] * rows * np.finfo(float).eps if s.size and s[0] > 0 else 0.0
    good = s > floor
    u = u.copy()
    u[:, good] /= s[good]
    if not good.all():
        s = np.where(good, s, 0.0)
        u = _complete_columns(u, good)

    idx = np.argmax(np.abs(u) > 1e-14, axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1
    v[:, flip] *= -1
    if wide:
        u, v = v, u
    return SvdResult(u=u, s=s, v=v, sweeps=sweeps)


def singular_values(m):
    """Singular values, non-increasing; complex input goes through the real embedding."""
    a = as_matrix(m)
    if np.iscomplexobj(a):
        re, im = a.real, a.imag
        big = np.block([[re, -im], [im, re]])
        # each singular value of a appears twice in the embedding
        return svd(big).s[::2].copy()
    return svd(a).s


def truncated_svd(m, r):
    """Rank-r factors of ``m`` and the residual ``m - X_r``."""
    a = as_matrix(m)
    if not 1 <= r <= min(a.shape):
        raise ValueError(f"rank r={r} outside [1, {min(a.shape)}]")
    full = svd(a)
    head = SvdResult(u=full.u[:, :r], s=full.s[:r], v=full.v[:, :r], sweeps=full.sweeps)
    return head, a - head.reconstruct()


def nuclear_norm(m):
    return float(np.sum(singular_values(m)))


def spectral_norm(m):
    return float(singular_values(m)[0])


def frobenius_norm(m):
    return float(np.sqrt(np.sum(np.abs(as_matrix(m)) ** 2)))


def principal_angles(a, b):
    """Principal angles between span(a) and span(b), in radians, non-increasing.

    Both inputs must have orthonormal columns.  ``min(dim a, dim b)`` angles are
    returned.
    """
    a = check_orthonormal(a, name="a")
    b = check_orthonormal(b, name="b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[1] > b.shape[1]:
        a, b = b, a
    cosines = np.clip(singular_values(a.conj().T @ b), 0.0, 1.0)
    # arccos is ill-conditioned near 1, so small angles come from the sines
    # sin θ_i = σ((I - P_b) a), smallest first
    resid = a - b @ (b.conj().T @ a)
    sines = np.clip(singular_values(resid)[::-1], 0.0, 1.0)
    # both lists are ordered by increasing angle
    ang = np.where(cosines > np.sqrt(0.5), np.arcsin(sines), np.arccos(cosines))
    return ang[::-1]


@dataclass(frozen=True)
class CoherenceProfile:
    mu: np.ndarray
    nu: np.ndarray
    eta: float
    r: int


def subspace_coherence(u):
    """Row coherences mu_i = (n/r) * ||P_U e_i||^2 of an orthonormal basis."""
    u = check_orthonormal(u, name="u")
    n, r = u.shape
    return (n / r) * np.sum(np.abs(u) ** 2, axis=1)


def coherence_profile(u, v):
    mu = subspace_coherence(u)
    nu = subspace_coherence(v)
    if u.shape[0] != v.shape[0]:
        raise ValueError("u and v must share the ambient dimension")
    return CoherenceProfile(mu=mu, nu=nu, eta=float(max(mu.max(), nu.max())), r=u.shape[1])


def _row_col_scales(z, profile, r):
    z = as_matrix(z)
    n = z.shape[0]
    mu = np.asarray(profile.mu, dtype=float)
    nu = np.asarray(profile.nu, dtype=float)
    nz = np.abs(z) > 0
    if np.any((mu <= 0)[:, None] & nz) or np.any((nu <= 0)[None, :] & nz):
        raise DegenerateWeightError("zero coherence entry meets a nonzero matrix entry")
    with np.errstate(divide="ignore"):
        rs = np.where(mu > 0, np.sqrt(n / (mu * r)), 0.0)
        cs = np.where(nu > 0, np.sqrt(n / (nu * r)), 0.0)
    return z, rs, cs


def weighted_inf_norm(z, profile, r):
    z, rs, cs = _row_col_scales(z, profile, r)
    return float(np.max(np.abs(rs[:, None] * z * cs[None, :])))


def weighted_inf2_norm(z, profile, r):
    z, rs, cs = _row_col_scales(z, profile, r)
    rows = rs * np.linalg.norm(z, axis=1)
    cols = cs * np.linalg.norm(z, axis=0)
    return float(max(rows.max(), cols.max()))
