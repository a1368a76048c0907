"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public wrappers at the bottom pick the backend at call time via
:func:`mwcomplete._accel.numba_enabled`, so tests and the benchmark can flip
``MWCOMPLETE_DISABLE_NUMBA`` without re-importing anything.
"""

import math

import numpy as np

from ._accel import njit, numba_enabled

# ---------------------------------------------------------------------------
# One-sided (Hestenes) Jacobi SVD
# ---------------------------------------------------------------------------
#
# Both kernels work on ``at``, the *transpose* of the matrix being
# orthogonalised, so that each column of the original is a contiguous row.
# ``vt`` accumulates the right rotations the same way.  On return the rows of
# ``at`` are mutually orthogonal and ``at = vt @ a.T``.  The return value is
# the number of sweeps used, or -1 when the sweep cap was hit.
#
# Rows whose squared norm is below NEGLIGIBLE times the squared Frobenius
# norm are left alone: rotating rounding noise against a real column never
# settles the relative test and the sweep would cycle.

NEGLIGIBLE = 1e-30


@njit
def _jacobi_sweeps_nb(at, vt, tol, max_sweeps):
    n, m = at.shape
    total = 0.0
    for i in range(n):
        for k in range(m):
            total += at[i, k] * at[i, k]
    floor = NEGLIGIBLE * total
    for sweep in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    x = at[i, k]
                    y = at[j, k]
                    alpha += x * x
                    beta += y * y
                    gamma += x * y
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                if alpha <= floor or beta <= floor:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    x = at[i, k]
                    y = at[j, k]
                    at[i, k] = c * x - s * y
                    at[j, k] = s * x + c * y
                for k in range(n):
                    x = vt[i, k]
                    y = vt[j, k]
                    vt[i, k] = c * x - s * y
                    vt[j, k] = s * x + c * y
        if not rotated:
            return sweep + 1
    return -1


def _round_robin(n):
    """Pairings for a parallel Jacobi sweep: n-1 rounds of disjoint pairs."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        left = np.array(players[: size // 2])
        right = np.array(players[size // 2:][::-1])
        keep = (left < n) & (right < n)
        rounds.append((left[keep], right[keep]))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_sweeps_np(at, vt, tol, max_sweeps):
    n = at.shape[0]
    rounds = _round_robin(n)
    floor = NEGLIGIBLE * float(np.sum(at * at))
    for sweep in range(max_sweeps):
        rotated = False
        for left, right in rounds:
            if left.size == 0:
                continue
            xi = at[left]
            xj = at[right]
            alpha = np.einsum("ij,ij->i", xi, xi)
            beta = np.einsum("ij,ij->i", xj, xj)
            gamma = np.einsum("ij,ij->i", xi, xj)
            active = (gamma != 0.0) & (np.abs(gamma) > tol * np.sqrt(alpha * beta))
            active &= (alpha > floor) & (beta > floor)
            if not active.any():
                continue
            rotated = True
            left = left[active]
            right = right[active]
            xi = xi[active]
            xj = xj[active]
            zeta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            at[left] = c * xi - s * xj
            at[right] = s * xi + c * xj
            vi = vt[left]
            vj = vt[right]
            vt[left] = c * vi - s * vj
            vt[right] = s * vi + c * vj
        if not rotated:
            return sweep + 1
    return -1


def jacobi_sweeps(at, vt, tol, max_sweeps):
    """Orthogonalise the rows of ``at`` in place; see module notes."""
    if numba_enabled():
        return int(_jacobi_sweeps_nb(at, vt, tol, max_sweeps))
    return _jacobi_sweeps_np(at, vt, tol, max_sweeps)


# ---------------------------------------------------------------------------
# Bessel J0: power series below the switch point, Hankel asymptotics above
# ---------------------------------------------------------------------------

J0_SWITCH = 14.0


@njit
def _j0_scalar_nb(x):
    x = abs(x)
    if x < 14.0:
        q = 0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while True:
            term *= -q / (k * k)
            total += term
            if abs(term) < 1e-17 * max(abs(total), 1e-300):
                break
            k += 1
        return total
    p_sum = 0.0
    q_sum = 0.0
    term = 1.0
    prev = math.inf
    k = 0
    while k < 60:
        if abs(term) > prev or abs(term) < 1e-17:
            break
        if k % 2 == 0:
            p_sum += term if (k // 2) % 2 == 0 else -term
        else:
            q_sum += term if ((k - 1) // 2) % 2 == 0 else -term
        prev = abs(term)
        k += 1
        term *= -((2.0 * k - 1.0) ** 2) / (k * 8.0 * x)
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p_sum * math.cos(chi) - q_sum * math.sin(chi))


@njit
def _j0_nb(x):
    out = np.empty(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        out[i] = _j0_scalar_nb(flat[i])
    return out


def _j0_np(x):
    x = np.abs(np.asarray(x, dtype=float)).ravel()
    out = np.empty_like(x)
    small = x < J0_SWITCH
    xs = x[small]
    if xs.size:
        q = 0.25 * xs * xs
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for k in range(1, 200):
            term = term * (-q / (k * k))
            total = total + term
            if np.all(np.abs(term) < 1e-17 * np.maximum(np.abs(total), 1e-300)):
                break
        out[small] = total
    xl = x[~small]
    if xl.size:
        p_sum = np.zeros_like(xl)
        q_sum = np.zeros_like(xl)
        term = np.ones_like(xl)
        prev = np.full_like(xl, np.inf)
        live = np.ones(xl.shape, dtype=bool)
        for k in range(60):
            live &= (np.abs(term) <= prev) & (np.abs(term) >= 1e-17)
            if not live.any():
                break
            add = np.where(live, term, 0.0)
            if k % 2 == 0:
                p_sum += add if (k // 2) % 2 == 0 else -add
            else:
                q_sum += add if ((k - 1) // 2) % 2 == 0 else -add
            prev = np.where(live, np.abs(term), prev)
            term = term * (-((2.0 * (k + 1) - 1.0) ** 2) / ((k + 1) * 8.0 * xl))
        chi = xl - 0.25 * np.pi
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (p_sum * np.cos(chi) - q_sum * np.sin(chi))
    return out


def j0(x):
    arr = np.asarray(x, dtype=float)
    if numba_enabled():
        out = _j0_nb(np.ascontiguousarray(arr))
    else:
        out = _j0_np(arr)
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Counter-based uniforms: u(seed, index) = mix(mix(seed) + index * golden)
# ---------------------------------------------------------------------------

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1


@njit
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@njit
def _counter_uniform_nb(seed, count):
    out = np.empty(count)
    g = np.uint64(_GOLDEN)
    # hash the seed first; offsetting the counter by the raw seed would make
    # neighbouring seeds shifted copies of one stream
    key = _mix64_nb(np.uint64(seed) * g + g)
    for idx in range(count):
        z = _mix64_nb(key + np.uint64(idx + 1) * g)
        out[idx] = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return out


def _mix64_np(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _counter_uniform_np(seed, count):
    g = np.uint64(_GOLDEN)
    key = _mix64_np(np.array([seed], dtype=np.uint64) * g + g)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = _mix64_np(key + idx * g)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def counter_uniform(seed, count):
    """``count`` uniforms in [0, 1); entry k depends only on (seed, k)."""
    seed = int(seed) & _MASK64
    if numba_enabled():
        return _counter_uniform_nb(np.uint64(seed), int(count))
    with np.errstate(over="ignore"):
        return _counter_uniform_np(seed, int(count))


# ---------------------------------------------------------------------------
# ADMM loop for min ||M||_* over the data-consistent set, M = Q_U Z Q_V
# ---------------------------------------------------------------------------
#
# Variables (all n x n): m (feasible copy), u (scaled dual); the low-rank copy
# w is recomputed by SVT every iteration.  The data map is
#     A(m) = (ku @ m @ kv)[rows, cols] * pinv
# with ku = Q_U^{-1}, kv = Q_V^{-1} symmetric.  Projection onto
# {m : ||A(m) - y|| <= e} uses the Gram matrix G = A A^T through either its
# inverse (e == 0) or its eigendecomposition (e > 0).  ``plain`` flags
# identity weights, where the equality projection is a plain entry overwrite.
#
# Returns (iters, status) with status 1 = converged, 0 = iteration cap,
# -1 = inner SVD failure.  ``w`` receives the final low-rank iterate and
# ``merit`` the per-iteration fixed-point residual; ``stats`` holds the last
# relative primal and dual residuals.

REORTH_EVERY = 50


@njit
def _mgs_rows_nb(vt):
    n = vt.shape[0]
    for i in range(n):
        for j in range(i):
            d = 0.0
            for k in range(n):
                d += vt[i, k] * vt[j, k]
            for k in range(n):
                vt[i, k] -= d * vt[j, k]
        s = 0.0
        for k in range(n):
            s += vt[i, k] * vt[i, k]
        s = math.sqrt(s)
        for k in range(n):
            vt[i, k] /= s


@njit
def _ball_multiplier_nb(delta, g, e):
    # solve sum (delta_i / (1 + mu g_i))^2 = e^2 for mu >= 0 by bisection
    norm = math.sqrt(np.sum(delta * delta))
    gmin = np.min(g)
    lo = 0.0
    hi = (norm / e - 1.0) / gmin + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = 0.0
        for i in range(delta.size):
            t = delta[i] / (1.0 + mid * g[i])
            s += t * t
        if s > e * e:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


@njit
def _project_nb(c, ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, plain):
    n = c.shape[0]
    k = rows.size
    if plain and e == 0.0:
        # identity weights: the projection just rewrites the observed entries
        out = c.copy()
        for a in range(k):
            out[rows[a], cols[a]] = y[a] / pinv[a]
        return out
    z = ku @ c @ kv
    d = np.empty(k)
    for a in range(k):
        d[a] = z[rows[a], cols[a]] * pinv[a] - y[a]
    if e == 0.0:
        corr = ginv @ d
    else:
        delta = evecs.T @ d
        if math.sqrt(np.sum(delta * delta)) <= e:
            return c.copy()
        mu = _ball_multiplier_nb(delta, evals, e)
        corr = evecs @ (mu * delta / (1.0 + mu * evals))
    scat = np.zeros((n, n))
    for a in range(k):
        scat[rows[a], cols[a]] = corr[a] * pinv[a]
    return c - ku @ scat @ kv


@njit
def _admm_nb(ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, rho, tol,
             max_iters, m, u, vt, w, merit, stats, plain, svd_tol):
    n = m.shape[0]
    tau = 1.0 / rho
    max_sweeps = 100 * n
    for it in range(max_iters):
        if it % REORTH_EVERY == 0:
            _mgs_rows_nb(vt)
        b = m - u
        at = vt @ b.T
        if _jacobi_sweeps_nb(at, vt, svd_tol, max_sweeps) < 0:
            return it, -1
        for i in range(n):
            s = 0.0
            for k in range(n):
                s += at[i, k] * at[i, k]
            s = math.sqrt(s)
            shrink = 1.0 - tau / s if s > tau else 0.0
            for k in range(n):
                at[i, k] *= shrink
        w[:, :] = at.T @ vt
        c = w + u
        m_new = _project_nb(c, ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, plain)
        dm = 0.0
        du = 0.0
        pr = 0.0
        wn = 0.0
        mn = 0.0
        for i in range(n):
            for k in range(n):
                u_new = u[i, k] + w[i, k] - m_new[i, k]
                dm += (m_new[i, k] - m[i, k]) ** 2
                du += (u_new - u[i, k]) ** 2
                pr += (w[i, k] - m_new[i, k]) ** 2
                wn += w[i, k] ** 2
                mn += m_new[i, k] ** 2
                u[i, k] = u_new
                m[i, k] = m_new[i, k]
        merit[it] = math.sqrt(dm + du)
        scale = max(math.sqrt(wn), math.sqrt(mn), 1e-300)
        stats[0] = math.sqrt(pr) / scale
        stats[1] = math.sqrt(dm) / scale
        if stats[0] <= tol and stats[1] <= tol:
            return it + 1, 1
    return max_iters, 0


def _ball_multiplier_np(delta, g, e):
    lo = 0.0
    hi = (np.linalg.norm(delta) / e - 1.0) / g.min() + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(delta / (1.0 + mid * g)) > e:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def _project_np(c, ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, plain):
    if plain and e == 0.0:
        out = c.copy()
        out[rows, cols] = y / pinv
        return out
    z = ku @ c @ kv
    d = z[rows, cols] * pinv - y
    if e == 0.0:
        corr = ginv @ d
    else:
        delta = evecs.T @ d
        if np.linalg.norm(delta) <= e:
            return c.copy()
        mu = _ball_multiplier_np(delta, evals, e)
        corr = evecs @ (mu * delta / (1.0 + mu * evals))
    scat = np.zeros_like(c)
    scat[rows, cols] = corr * pinv
    return c - ku @ scat @ kv


def _admm_np(ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, rho, tol,
             max_iters, m, u, vt, w, merit, stats, plain, svd_tol):
    tau = 1.0 / rho
    for it in range(max_iters):
        try:
            lu, s, lvt = np.linalg.svd(m - u)
        except np.linalg.LinAlgError:
            return it, -1
        w[:, :] = (lu * np.maximum(s - tau, 0.0)) @ lvt
        c = w + u
        m_new = _project_np(c, ku, kv, rows, cols, pinv, y, ginv, evecs, evals, e, plain)
        u_new = u + w - m_new
        dm = np.linalg.norm(m_new - m)
        merit[it] = np.hypot(dm, np.linalg.norm(u_new - u))
        scale = max(np.linalg.norm(w), np.linalg.norm(m_new), 1e-300)
        pr = np.linalg.norm(w - m_new)
        m[:, :] = m_new
        u[:, :] = u_new
        stats[0] = pr / scale
        stats[1] = dm / scale
        if stats[0] <= tol and stats[1] <= tol:
            return it + 1, 1
    return max_iters, 0


def admm_loop(*args):
    """Run the splitting iterations in place; see module notes for the layout."""
    if numba_enabled():
        it, status = _admm_nb(*args)
        return int(it), int(status)
    return _admm_np(*args)
