"""Bernoulli observation masks and the sampling operators R_Omega, P_Omega.

Masks are drawn from a counter-based stream: entry (i, l) is observed iff
``u(seed, i*n + l) < p_il``.  Two consequences worth knowing:

* the same seed with a larger probability gives a superset mask, so a sweep
  over p with a fixed seed is nested;
* draws are independent of call order, so trial farms can draw in parallel.

Audit format (``save_mask_csv``): a header line ``# n=<n> seed=<seed>``
followed by ``i,l,p`` rows (0-based indices) for every observed entry.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class SampleMask:
    eps: np.ndarray
    prob: np.ndarray
    seed: int

    @property
    def n(self):
        return self.eps.shape[0]

    @property
    def count(self):
        return int(self.eps.sum())

    def observed(self):
        """Row and column indices of observed entries, row-major order."""
        return np.nonzero(self.eps)


def _prob_matrix(n, prob):
    p = np.asarray(prob, dtype=float)
    if p.ndim == 0:
        p = np.full((n, n), float(p))
    if p.shape != (n, n):
        raise ValueError(f"probability matrix must be {n}x{n}, got {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0.0) or np.any(p > 1.0):
        raise ValueError("observation probabilities must lie in (0, 1]")
    return p


def draw_mask(n, prob, seed):
    """Draw eps_il ~ Bernoulli(p_il) independently from the seeded stream."""
    if n < 1:
        raise ValueError("n must be positive")
    p = _prob_matrix(n, prob)
    u = _kernels.counter_uniform(seed, n * n).reshape(n, n)
    eps = (u < p).astype(np.int8)
    return SampleMask(eps=eps, prob=p, seed=int(seed))


def full_mask(n):
    return SampleMask(eps=np.ones((n, n), dtype=np.int8), prob=np.ones((n, n)), seed=0)


def _check(z, mask):
    z = np.asarray(z, dtype=float)
    if z.shape != mask.eps.shape:
        raise ValueError(f"shape {z.shape} does not match mask {mask.eps.shape}")
    return z


def apply_r_omega(z, mask):
    """Inverse-probability-scaled sampling: (eps_il / p_il) * Z_il."""
    z = _check(z, mask)
    return np.where(mask.eps == 1, z / mask.prob, 0.0)


def apply_p_omega(z, mask):
    z = _check(z, mask)
    return np.where(mask.eps == 1, z, 0.0)


def self_adjointness_check(mask, pairs=3, seed=0, tol=1e-10):
    """Compare <A, R(B)> with <R(A), B> on random pairs.

    Returns a dict with the largest relative gap and a pass flag.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        a = rng.standard_normal(mask.eps.shape)
        b = rng.standard_normal(mask.eps.shape)
        lhs = float(np.sum(a * apply_r_omega(b, mask)))
        rhs = float(np.sum(apply_r_omega(a, mask) * b))
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    return {"max_gap": worst, "ok": worst <= tol}


def r_omega_operator_norm(mask, iters=100, seed=0):
    """Power iteration for ||R_Omega||_{F->F} (a diagonal operator)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(mask.eps.shape)
    z /= np.linalg.norm(z)
    est = 0.0
    for _ in range(iters):
        w = apply_r_omega(z, mask)
        est = np.linalg.norm(w)
        if est == 0.0:
            return 0.0
        z = w / est
    return float(est)


def save_mask_csv(mask, path):
    rows, cols = mask.observed()
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={mask.n} seed={mask.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "l", "p"])
        for i, l in zip(rows, cols):
            writer.writerow([int(i), int(l), repr(float(mask.prob[i, l]))])


def load_mask_csv(path, default_prob=1.0):
    """Read a mask written by ``save_mask_csv``.

    Unobserved entries get ``default_prob`` as their probability since the
    audit file only lists observed triplets.
    """
    with open(path, newline="") as fh:
        header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=") for item in header)
        n = int(meta["n"])
        eps = np.zeros((n, n), dtype=np.int8)
        prob = np.full((n, n), float(default_prob))
        reader = csv.DictReader(fh)
        for row in reader:
            i, l = int(row["i"]), int(row["l"])
            eps[i, l] = 1
            prob[i, l] = float(row["p"])
    return SampleMask(eps=eps, prob=prob, seed=int(meta["seed"]))
