"""Time-varying FDD massive-MIMO channels and velocity-driven subspace priors.

Channel of user k at time t, with s(t) scattering paths::

    h_k(t) = 1/sqrt(N s(t)) * sum_i exp(j(2π f_i^k t + β_i)) a(θ_i^k),
    f_i^k  = ν_k cos(φ_i^k) / λ_c,
    a(θ)_m = exp(j 2π d cos(η - θ) m / λ_c),  m = 0..N-1.

AoA φ and AoD θ are drawn per user and path, the path phase β_i per path.
Sharing β_i across users is what makes distinct users correlated; with
independent phases every cross-user correlation would vanish.  The first
``min(s(t1), s(t2))`` paths are common to both snapshots.

The closed-form correlation ``correlation_entry`` is ``N`` times the
expectation ``E[h_k(t1)_p conj(h_l(t2)_q)]`` under this model (the 1/N of
the channel normalisation is not carried by the closed form).
"""

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for |x| < 14, Hankel asymptotic expansion beyond.  Accepts
    scalars or arrays; returns a float for scalar input.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_j0 needs finite input")
    out = _kernels.j0(arr)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class ChannelConfig:
    n_antennas: int = 20
    n_users: int = 4
    velocities: tuple = (1.0, 1.0, 1.0, 1.0)
    wavelength: float = 0.1
    spacing: float = 0.05
    orientation: float = 0.0
    t1: float = 1e-3
    t2: float = 0.0
    scatterers: tuple = (10, 10)
    seed: int = 0

    def __post_init__(self):
        vel = tuple(float(v) for v in np.atleast_1d(self.velocities))
        if len(vel) == 1 and self.n_users > 1:
            vel = vel * self.n_users
        object.__setattr__(self, "velocities", vel)
        scat = tuple(int(s) for s in np.atleast_1d(self.scatterers))
        if len(scat) == 1:
            scat = scat * 2
        object.__setattr__(self, "scatterers", scat)
        if self.n_antennas < 1 or self.n_users < 1:
            raise ConfigError("need at least one antenna and one user")
        if len(vel) != self.n_users:
            raise ConfigError(f"{len(vel)} velocities for {self.n_users} users")
        if any(v < 0 for v in vel):
            raise ConfigError("velocities must be non-negative")
        if not (self.wavelength > 0 and self.spacing > 0):
            raise ConfigError("wavelength and spacing must be positive")
        if len(scat) != 2 or min(scat) < 1:
            raise ConfigError("scatterers must be two counts >= 1 (at t1 and t2)")
        if self.t2 > self.t1:
            raise ConfigError("t2 (previous time) must not exceed t1")

    @property
    def alpha_prime(self):
        s1, s2 = self.scatterers
        return min(s1, s2) / np.sqrt(s1 * s2)

    def with_velocity(self, v):
        return replace(self, velocities=(float(v),) * self.n_users)

    def to_dict(self):
        out = asdict(self)
        out["velocities"] = list(self.velocities)
        out["scatterers"] = list(self.scatterers)
        return out

    @classmethod
    def from_dict(cls, doc):
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown channel config fields: {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid channel config JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError("channel config must be a JSON object")
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            text = fh.read()
        return cls.from_json(text)


def array_response(theta, cfg):
    """ULA response ``a(θ)``; accepts scalar or array θ (extra axis last)."""
    m = np.arange(cfg.n_antennas)
    phase = 2.0 * np.pi * cfg.spacing * np.cos(cfg.orientation - np.asarray(theta, dtype=float)) / cfg.wavelength
    return np.exp(1j * np.multiply.outer(phase, m))


@dataclass(frozen=True)
class Scatterers:
    aoa: np.ndarray  # (K, S)
    aod: np.ndarray  # (K, S)
    phase: np.ndarray  # (S,)


def draw_scatterers(cfg, rng):
    s = max(cfg.scatterers)
    k = cfg.n_users
    return Scatterers(
        aoa=rng.uniform(-np.pi, np.pi, (k, s)),
        aod=rng.uniform(-np.pi, np.pi, (k, s)),
        phase=rng.uniform(-np.pi, np.pi, s),
    )


@dataclass(frozen=True)
class ChannelSnapshot:
    h: np.ndarray  # (N, K) complex
    t: float
    paths: int
    scatterers: Scatterers = field(repr=False)


def _paths_at(cfg, t):
    return cfg.scatterers[1] if t == cfg.t2 and t != cfg.t1 else cfg.scatterers[0]


def draw_channel(cfg, t, scatterers=None, seed=None, paths=None):
    """One channel snapshot ``H(t)`` (N x K).

    Pass the same ``scatterers`` to two calls to get correlated snapshots at
    different times; otherwise a fresh draw is made from ``seed`` (default
    ``cfg.seed``).  The path count defaults to s(t1) or s(t2) by matching
    ``t`` against the config times.
    """
    if scatterers is None:
        scatterers = draw_scatterers(cfg, np.random.default_rng(cfg.seed if seed is None else seed))
    s = _paths_at(cfg, t) if paths is None else int(paths)
    vel = np.asarray(cfg.velocities)[:, None]
    doppler = vel * np.cos(scatterers.aoa[:, :s]) / cfg.wavelength
    coef = np.exp(1j * (2.0 * np.pi * doppler * t + scatterers.phase[None, :s]))  # (K, s)
    resp = array_response(scatterers.aod[:, :s], cfg)  # (K, s, N)
    h = np.einsum("ks,ksn->nk", coef, resp) / np.sqrt(cfg.n_antennas * s)
    return ChannelSnapshot(h=h, t=float(t), paths=s, scatterers=scatterers)


def correlation_entry(cfg, k, l, p, q, t1=None, t2=None):
    """Closed-form ``P_(p,q)(t1, t2)`` between users k and l (0-based)."""
    t1 = cfg.t1 if t1 is None else t1
    t2 = cfg.t2 if t2 is None else t2
    for idx, top in ((k, cfg.n_users), (l, cfg.n_users), (p, cfg.n_antennas), (q, cfg.n_antennas)):
        if not 0 <= idx < top:
            raise IndexError(f"index {idx} out of range [0, {top})")
    c = 2.0 * np.pi / cfg.wavelength
    nu = cfg.velocities
    if k == l:
        val = bessel_j0(c * nu[k] * (t1 - t2)) * bessel_j0(c * cfg.spacing * (p - q))
    else:
        val = (bessel_j0(c * nu[k] * t1) * bessel_j0(c * nu[l] * t2)
               * bessel_j0(c * cfg.spacing * p) * bessel_j0(c * cfg.spacing * q))
    return complex(cfg.alpha_prime * val)


def correlation_matrix(cfg, k, l, t1=None, t2=None):
    """All N x N entries of ``P(t1, t2)`` for the user pair (k, l)."""
    n = cfg.n_antennas
    return np.array([[correlation_entry(cfg, k, l, p, q, t1, t2) for q in range(n)] for p in range(n)])


def _correlation_blocks(cfg, ta, tb):
    n, kk = cfg.n_antennas, cfg.n_users
    c = 2.0 * np.pi / cfg.wavelength
    idx = np.arange(n)
    nu = np.asarray(cfg.velocities)
    spatial_diff = bessel_j0(c * cfg.spacing * np.subtract.outer(idx, idx))
    spatial_abs = bessel_j0(c * cfg.spacing * idx)
    temporal_same = bessel_j0(c * nu * (ta - tb))
    ja = bessel_j0(c * nu * ta)
    jb = bessel_j0(c * nu * tb)
    blocks = np.empty((kk, kk, n, n))
    for k in range(kk):
        for l in range(kk):
            if k == l:
                blocks[k, l] = temporal_same[k] * spatial_diff
            else:
                blocks[k, l] = ja[k] * jb[l] * np.outer(spatial_abs, spatial_abs)
    return cfg.alpha_prime * blocks


def expected_grams(cfg, ta=None, tb=None):
    """``(E[H^H H~], E[H H~^H])`` from the closed-form correlations.

    ``H = H(ta)`` and ``H~ = H(tb)`` (defaults t1, t2).  Both grams are the
    true expectations, i.e. the closed forms divided by N.
    """
    ta = cfg.t1 if ta is None else ta
    tb = cfg.t2 if tb is None else tb
    blocks = _correlation_blocks(cfg, ta, tb) / cfg.n_antennas
    # E[h_k^H h_l] = trace(E[h_l h_k^H]) = conj(trace P^{kl}); all entries are real here
    gram_col = np.einsum("klpp->kl", blocks).astype(complex)
    gram_row = np.einsum("kkpq->pq", blocks).astype(complex)
    return gram_col, gram_row


def _inv_sqrt(g, rel_tol=1e-10):
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    keep = w > rel_tol * max(w.max(), 0.0)
    return (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].conj().T


def _angles_from(cross, left=None, right=None, r=None):
    if left is not None:
        cross = _inv_sqrt(left) @ cross @ _inv_sqrt(right)
    s = np.linalg.svd(cross, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    if r is not None:
        s = s[:r]
    # cosines are non-increasing, so angles come out non-decreasing; flip
    return np.arccos(s)[::-1]


def prior_angles_from_velocity(cfg, r=None, whiten=True):
    """Principal-angle priors ``(theta_u, theta_v)`` in radians, non-increasing.

    With ``whiten=True`` the cross-gram is normalised by the auto-grams,
    ``G11^{-1/2} G12 G22^{-1/2}``, whose singular values are the cosines of
    the principal angles between the two channel spans in the expected
    (population) sense.  ``whiten=False`` takes the singular values of the
    raw cross-gram, clamped to [0, 1].  ``r`` defaults to K.
    """
    r = cfg.n_users if r is None else int(r)
    if not 1 <= r <= min(cfg.n_users, cfg.n_antennas):
        raise ConfigError(f"r={r} outside [1, min(K, N)]")
    col12, row12 = expected_grams(cfg, cfg.t1, cfg.t2)
    if whiten:
        col11, row11 = expected_grams(cfg, cfg.t1, cfg.t1)
        col22, row22 = expected_grams(cfg, cfg.t2, cfg.t2)
        return (_angles_from(col12, col11, col22, r), _angles_from(row12, row11, row22, r))
    return _angles_from(col12, r=r), _angles_from(row12, r=r)


def monte_carlo_correlation(cfg, k, l, draws=100_000, seed=0, chunk=10_000):
    """Sample mean and standard error of ``N h_k(t1) h_l(t2)^H`` (N x N).

    The scaling by N puts the estimate on the same footing as
    ``correlation_entry``.
    """
    rng = np.random.default_rng(seed)
    n = cfg.n_antennas
    s1, s2 = cfg.scatterers
    s = max(s1, s2)
    c = 2.0 * np.pi / cfg.wavelength
    idx = np.arange(n)
    total = np.zeros((n, n), dtype=complex)
    total_sq = np.zeros((n, n))
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        phase = rng.uniform(-np.pi, np.pi, (m, s))
        aoa_k = rng.uniform(-np.pi, np.pi, (m, s))
        aod_k = rng.uniform(-np.pi, np.pi, (m, s))
        if l == k:
            aoa_l, aod_l = aoa_k, aod_k
        else:
            aoa_l = rng.uniform(-np.pi, np.pi, (m, s))
            aod_l = rng.uniform(-np.pi, np.pi, (m, s))

        def channel(aoa, aod, nu, t, paths):
            coef = np.exp(1j * (c * nu * np.cos(aoa[:, :paths]) * t + phase[:, :paths]))
            resp = np.exp(1j * c * cfg.spacing * np.cos(cfg.orientation - aod[:, :paths])[..., None] * idx)
            return np.einsum("ms,msn->mn", coef, resp) / np.sqrt(n * paths)

        hk = channel(aoa_k, aod_k, cfg.velocities[k], cfg.t1, s1)
        hl = channel(aoa_l, aod_l, cfg.velocities[l], cfg.t2, s2)
        prod = n * hk[:, :, None] * hl.conj()[:, None, :]
        total += prod.sum(axis=0)
        total_sq += (np.abs(prod) ** 2).sum(axis=0)
        done += m
    mean = total / draws
    var = (total_sq / draws - np.abs(mean) ** 2) * draws / (draws - 1)
    return mean, np.sqrt(np.maximum(var, 0.0) / draws)


def angles_json(theta_u, theta_v):
    return json.dumps({
        "theta_u_rad": np.asarray(theta_u).tolist(),
        "theta_v_rad": np.asarray(theta_v).tolist(),
        "theta_u_deg": np.degrees(theta_u).tolist(),
        "theta_v_deg": np.degrees(theta_v).tolist(),
    }, indent=2)
