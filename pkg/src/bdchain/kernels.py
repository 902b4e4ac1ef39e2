"""Hot loops: tridiagonal elimination, distribution evolution, path simulation.

Each kernel has a numba version and a numpy version with identical
semantics. ``BDCHAIN_DISABLE_JIT=1`` selects the numpy versions (see
:mod:`bdchain._jit`). Path simulation is bit-identical across the two.

Random draws are counter based: the uniform used by step ``j`` of path ``p``
is a pure function of ``(seed, p, j)``, so results do not depend on how paths
are split between workers.
"""

import numpy as np

from ._jit import BACKEND, HAS_NUMBA, njit

__all__ = [
    "BACKEND",
    "thomas_solve",
    "mmatrix_solve",
    "evolve",
    "simulate_block",
    "uniform_reference",
]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# counter-based uniforms (SplitMix64 finalizer)


def _mix_py(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def path_key_reference(seed, path):
    base = _mix_py(seed & MASK64)
    return _mix_py((base + (path + 1) * 0x9E3779B97F4A7C15) & MASK64)


def uniform_reference(seed, path, step):
    """Plain-int reference for the draw at ``step`` of ``path``."""
    z = _mix_py((path_key_reference(seed, path) + (step + 1) * 0x9E3779B97F4A7C15) & MASK64)
    return (z >> 11) * _INV53


@njit
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def _path_key(seed, path):
    return _mix(_mix(seed) + (path + _ONE) * _GAMMA)


def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


# ---------------------------------------------------------------------------
# tridiagonal elimination


def thomas_core(lower, diag, upper, rhs, cp, dp, out):
    """Solve a tridiagonal system by forward elimination and back substitution.

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``
    in row ``i``; ``lower[0]`` and ``upper[-1]`` are ignored. Works on lists of
    Fractions as well as float arrays.
    """
    n = len(diag)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


_thomas_float = njit(thomas_core)


def thomas_solve(lower, diag, upper, rhs):
    """Float tridiagonal solve through the selected backend."""
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    n = len(diag)
    return _thomas_float(lower, diag, upper, rhs, np.empty(n), np.empty(n), np.empty(n))


def mmatrix_core(lower, upper, excess, rhs, cp, dp, out):
    """Tridiagonal solve for ``D x - L x_{i-1} - U x_{i+1} = rhs`` with nonnegative entries.

    The diagonal is implied: ``D[i] = lower[i] + upper[i] + excess[i]``, where
    ``lower[0]`` and ``upper[-1]`` count towards ``D`` but couple to nothing.
    Pivots are built from the running row excess, so no step subtracts and
    strongly drifting chains keep full relative accuracy.
    """
    n = len(rhs)
    slack = lower[0] + excess[0]
    piv = upper[0] + slack
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        slack = excess[i] + lower[i] * slack / piv
        piv = upper[i] + slack
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] + lower[i] * dp[i - 1]) / piv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] + cp[i] * out[i + 1]
    return out


_mmatrix_float = njit(mmatrix_core)


def mmatrix_solve(lower, upper, excess, rhs):
    """Float M-matrix tridiagonal solve through the selected backend."""
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    excess = np.ascontiguousarray(excess, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    n = len(rhs)
    return _mmatrix_float(lower, upper, excess, rhs, np.empty(n), np.empty(n), np.empty(n))


# ---------------------------------------------------------------------------
# distribution evolution on states 0..N with 0 and N absorbing


@njit
def _evolve_numba(left, right, start, steps, N):
    p = np.zeros(N + 1)
    q = np.zeros(N + 1)
    occ = np.zeros(N + 1)
    means = np.empty(steps + 1)
    p[start] = 1.0
    means[0] = start
    lo = max(start, 1)
    hi = min(start, N - 1)
    for j in range(steps):
        for n in range(lo, hi + 1):
            occ[n] += p[n]
        new_lo = max(lo - 1, 1)
        new_hi = min(hi + 1, N - 1)
        for n in range(new_lo, new_hi + 1):
            q[n] = 0.0
        q[0] = p[0]
        q[N] = p[N]
        for n in range(lo, hi + 1):
            mass = p[n]
            if mass != 0.0:
                q[n - 1] += mass * left[n]
                q[n + 1] += mass * right[n]
        for n in range(lo, hi + 1):
            p[n] = 0.0
        p, q = q, p
        lo, hi = new_lo, new_hi
        s = N * p[N]
        for n in range(lo, hi + 1):
            s += n * p[n]
        means[j + 1] = s
    return p, occ, means


def _evolve_numpy(left, right, start, steps, N):
    p = np.zeros(N + 1)
    occ = np.zeros(N + 1)
    means = np.empty(steps + 1)
    p[start] = 1.0
    means[0] = start
    states = np.arange(N + 1, dtype=np.float64)
    lo = max(start, 1)
    hi = min(start, N - 1)
    for j in range(steps):
        if lo <= hi:
            occ[lo:hi + 1] += p[lo:hi + 1]
            mass = p[lo:hi + 1].copy()
            p[lo:hi + 1] = 0.0
            q = np.zeros(hi - lo + 3)
            q[:-2] += mass * left[lo:hi + 1]
            q[2:] += mass * right[lo:hi + 1]
            p[lo - 1:hi + 2] += q
            lo, hi = max(lo - 1, 1), min(hi + 1, N - 1)
        means[j + 1] = states[lo:hi + 1] @ p[lo:hi + 1] + N * p[N] if lo <= hi else N * p[N]
    return p, occ, means


def evolve(left, right, start, steps, N):
    """Forward-evolve a point mass for ``steps`` steps.

    Returns the final distribution, the accumulated occupations
    ``sum_{j < steps} P(X_j = n)`` and the means ``E[X_j]`` for ``j = 0..steps``.
    """
    left = np.ascontiguousarray(left, dtype=np.float64)
    right = np.ascontiguousarray(right, dtype=np.float64)
    if HAS_NUMBA:
        return _evolve_numba(left, right, int(start), int(steps), int(N))
    return _evolve_numpy(left, right, int(start), int(steps), int(N))


# ---------------------------------------------------------------------------
# path simulation


@njit
def _simulate_numba(right, start, m_limit, upper, cap, seed, first, count, track,
                    stop_time, terminal, rights, capped, occ_sum, occ_sq, scratch):
    seed_u = np.uint64(seed)
    for i in range(count):
        key = _path_key(seed_u, np.uint64(first + i))
        x = start
        t = 0
        r_steps = 0
        lo = start
        hi = start
        hit_cap = False
        while x != 0 and x != upper and t < m_limit:
            if t >= cap:
                hit_cap = True
                break
            if track:
                scratch[x] += 1
                if x < lo:
                    lo = x
                if x > hi:
                    hi = x
            z = _mix(key + np.uint64(t + 1) * _GAMMA)
            u = np.float64(z >> _S11) * _INV53
            if u < right[x]:
                x += 1
                r_steps += 1
            else:
                x -= 1
            t += 1
        stop_time[i] = t
        terminal[i] = x
        rights[i] = r_steps
        capped[i] = hit_cap
        if track:
            for n in range(lo, hi + 1):
                c = scratch[n]
                if c != 0:
                    occ_sum[n] += c
                    occ_sq[n] += c * c
                    scratch[n] = 0


def _simulate_numpy(right, start, m_limit, upper, cap, seed, first, count, track,
                    stop_time, terminal, rights, capped, occ_sum, occ_sq, scratch, block=512):
    base = _mix_np(np.array([seed], dtype=np.uint64))[0]
    n_states = len(right)
    for b0 in range(0, count, block):
        nb = min(block, count - b0)
        idx = np.arange(first + b0, first + b0 + nb, dtype=np.uint64)
        keys = _mix_np(base + (idx + _ONE) * _GAMMA)
        x = np.full(nb, start, dtype=np.int64)
        t = np.zeros(nb, dtype=np.int64)
        r_steps = np.zeros(nb, dtype=np.int64)
        hit_cap = np.zeros(nb, dtype=np.bool_)
        counts = np.zeros((nb, n_states), dtype=np.int64) if track else None
        active = np.nonzero((x != 0) & (x != upper) & (t < m_limit))[0]
        while active.size:
            over = t[active] >= cap
            if over.any():
                hit_cap[active[over]] = True
                active = active[~over]
                if not active.size:
                    break
            xa = x[active]
            if track:
                counts[active, xa] += 1
            z = _mix_np(keys[active] + (t[active] + 1).astype(np.uint64) * _GAMMA)
            u = (z >> _S11).astype(np.float64) * _INV53
            up = u < right[xa]
            x[active] = np.where(up, xa + 1, xa - 1)
            r_steps[active] += up
            t[active] += 1
            xa = x[active]
            active = active[(xa != 0) & (xa != upper) & (t[active] < m_limit)]
        sl = slice(b0, b0 + nb)
        stop_time[sl] = t
        terminal[sl] = x
        rights[sl] = r_steps
        capped[sl] = hit_cap
        if track:
            occ_sum += counts.sum(axis=0)
            occ_sq += (counts * counts).sum(axis=0)


def simulate_block(right, start, m_limit, upper, cap, seed, first, count, track, backend=None):
    """Simulate paths ``first .. first+count-1``.

    A path stops at absorption in 0, on reaching ``upper``, or after
    ``m_limit`` steps; ``cap`` guards against non-termination.
    Returns ``(stop_time, terminal, rights, capped, occ_sum, occ_sq)`` where the
    last two are per-state sums of visit counts and squared visit counts.
    """
    right = np.ascontiguousarray(right, dtype=np.float64)
    n_states = len(right)
    stop_time = np.empty(count, dtype=np.int64)
    terminal = np.empty(count, dtype=np.int64)
    rights = np.empty(count, dtype=np.int64)
    capped = np.empty(count, dtype=np.bool_)
    occ_sum = np.zeros(n_states, dtype=np.int64)
    occ_sq = np.zeros(n_states, dtype=np.int64)
    scratch = np.zeros(n_states, dtype=np.int64)
    backend = backend or BACKEND
    if not HAS_NUMBA:
        backend = "numpy"
    fn = _simulate_numba if backend == "numba" else _simulate_numpy
    fn(right, int(start), int(m_limit), int(upper), int(cap), np.uint64(seed & MASK64), int(first), int(count),
       bool(track), stop_time, terminal, rights, capped, occ_sum, occ_sq, scratch)
    return stop_time, terminal, rights, capped, occ_sum, occ_sq
