"""Hot numeric kernels.

Every kernel exists twice: a vectorised numpy version and a plain-loop
version compiled with ``numba.njit``.  The loop version is used when numba
imports and ``SELFSIM_DISABLE_NUMBA`` is unset (or "0"); otherwise the numpy
version is used.  Both produce the same values up to floating-point
summation order.

    SELFSIM_DISABLE_NUMBA=1 pytest      # force the numpy path
"""

import os

import numpy as np

_CHUNK = 1 << 22  # max elements in any temporary numpy matrix


def _numba_disabled():
    flag = os.environ.get("SELFSIM_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _numba_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def cosine_sum_numpy(x, w, t):
    """r[k] = sum_i w[i] * cos(t[k] * x[i])."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    out = np.empty(t.size)
    step = max(1, _CHUNK // max(x.size, 1))
    for k0 in range(0, t.size, step):
        tk = t[k0:k0 + step]
        out[k0:k0 + step] = np.cos(np.outer(tk, x)) @ w
    return out


def pair_sinc_mean_numpy(x, w, T):
    """Exact time average (1/T) int_0^T r(t)^2 dt for r(t) = sum w cos(x t).

    Uses cos(a t) cos(b t) = (cos((a-b)t) + cos((a+b)t)) / 2 and
    (1/T) int_0^T cos(c t) dt = sinc(c T / pi).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    total = 0.0
    step = max(1, _CHUNK // max(x.size, 1))
    for i0 in range(0, x.size, step):
        xi = x[i0:i0 + step, None]
        wi = w[i0:i0 + step, None]
        d = np.sinc((xi - x[None, :]) * T / np.pi)
        s = np.sinc((xi + x[None, :]) * T / np.pi)
        total += float(np.sum(wi * w[None, :] * (d + s)))
    return 0.5 * total


def spectral_paths_numpy(freqs, amps, xi, eta, times):
    """X[p, k] = sum_m amps[m] (xi[p, m] cos(f_m t_k) + eta[p, m] sin(f_m t_k))."""
    phase = np.outer(freqs, times)
    c = amps[:, None] * np.cos(phase)
    s = amps[:, None] * np.sin(phase)
    # row by row: a batched product may round differently per batch shape
    out = np.empty((xi.shape[0], times.size))
    for p in range(xi.shape[0]):
        out[p] = xi[p] @ c + eta[p] @ s
    return out


def box_counts_numpy(trial, pts, box, n_trials):
    """Per-trial number of points inside an axis-aligned half-open box.

    ``pts`` has shape (n, d); ``box`` is a flat array lo_0, hi_0, lo_1, hi_1, ...
    """
    inside = np.ones(pts.shape[0], dtype=bool)
    for d in range(pts.shape[1]):
        inside &= (pts[:, d] >= box[2 * d]) & (pts[:, d] < box[2 * d + 1])
    return np.bincount(trial[inside], minlength=n_trials).astype(np.int64)


def linear_deposit_numpy(pos, w, lo, dx, n):
    """Cloud-in-cell deposit of point masses onto nodes lo + i*dx.

    Returns densities (mass / dx).  Mass falling outside [lo, lo + n*dx) is
    dropped; the caller checks conservation.
    """
    u = (np.asarray(pos, dtype=np.float64) - lo) / dx
    i = np.floor(u).astype(np.int64)
    frac = u - i
    # snap to the lattice so atoms sitting on a node land there exactly
    near = np.abs(frac) < 1e-9
    far = np.abs(frac - 1.0) < 1e-9
    frac = np.where(near | far, 0.0, frac)
    i = np.where(far, i + 1, i)
    out = np.zeros(n)
    for idx, wt in ((i, w * (1.0 - frac)), (i + 1, w * frac)):
        ok = (idx >= 0) & (idx < n) & (wt != 0.0)
        np.add.at(out, idx[ok], wt[ok])
    return out / dx


# ---------------------------------------------------------------------------
# loop implementations (numba targets)
# ---------------------------------------------------------------------------

def _cosine_sum_loop(x, w, t):
    out = np.empty(t.size)
    for k in range(t.size):
        acc = 0.0
        for i in range(x.size):
            acc += w[i] * np.cos(t[k] * x[i])
        out[k] = acc
    return out


def _sinc(u):
    if u == 0.0:
        return 1.0
    return np.sin(u) / u


def _pair_sinc_mean_loop(x, w, T):
    total = 0.0
    for i in range(x.size):
        acc = 0.0
        for j in range(x.size):
            acc += w[j] * (_sinc((x[i] - x[j]) * T) + _sinc((x[i] + x[j]) * T))
        total += w[i] * acc
    return 0.5 * total


def _spectral_paths_loop(freqs, amps, xi, eta, times):
    # trig tables once, then one product per path so that a path's values
    # do not depend on which other paths share the batch
    c = np.empty((freqs.size, times.size))
    s = np.empty((freqs.size, times.size))
    for m in range(freqs.size):
        for k in range(times.size):
            ph = freqs[m] * times[k]
            c[m, k] = amps[m] * np.cos(ph)
            s[m, k] = amps[m] * np.sin(ph)
    out = np.empty((xi.shape[0], times.size))
    for p in range(xi.shape[0]):
        out[p] = np.dot(xi[p], c) + np.dot(eta[p], s)
    return out


def _box_counts_loop(trial, pts, box, n_trials):
    out = np.zeros(n_trials, dtype=np.int64)
    d = pts.shape[1]
    for i in range(pts.shape[0]):
        ok = True
        for a in range(d):
            v = pts[i, a]
            if v < box[2 * a] or v >= box[2 * a + 1]:
                ok = False
                break
        if ok:
            out[trial[i]] += 1
    return out


def _linear_deposit_loop(pos, w, lo, dx, n):
    out = np.zeros(n)
    for k in range(pos.size):
        u = (pos[k] - lo) / dx
        i = int(np.floor(u))
        frac = u - i
        if abs(frac) < 1e-9:
            frac = 0.0
        elif abs(frac - 1.0) < 1e-9:
            frac = 0.0
            i += 1
        if 0 <= i < n:
            out[i] += w[k] * (1.0 - frac)
        if frac != 0.0 and 0 <= i + 1 < n:
            out[i + 1] += w[k] * frac
    return out / dx


if HAVE_NUMBA:
    _sinc = numba.njit(cache=True)(_sinc)
    cosine_sum_numba = numba.njit(cache=True)(_cosine_sum_loop)
    pair_sinc_mean_numba = numba.njit(cache=True)(_pair_sinc_mean_loop)
    spectral_paths_numba = numba.njit(cache=True)(_spectral_paths_loop)
    box_counts_numba = numba.njit(cache=True)(_box_counts_loop)
    linear_deposit_numba = numba.njit(cache=True)(_linear_deposit_loop)
else:  # pragma: no cover
    cosine_sum_numba = pair_sinc_mean_numba = spectral_paths_numba = None
    box_counts_numba = linear_deposit_numba = None


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def cosine_sum(x, w, t):
    x, w, t = _f64(x), _f64(w), _f64(np.atleast_1d(t))
    if USE_NUMBA:
        return cosine_sum_numba(x, w, t)
    return cosine_sum_numpy(x, w, t)


def pair_sinc_mean(x, w, T):
    x, w = _f64(x), _f64(w)
    if USE_NUMBA:
        return float(pair_sinc_mean_numba(x, w, float(T)))
    return pair_sinc_mean_numpy(x, w, float(T))


def spectral_paths(freqs, amps, xi, eta, times):
    args = (_f64(freqs), _f64(amps), _f64(xi), _f64(eta), _f64(times))
    if USE_NUMBA:
        return spectral_paths_numba(*args)
    return spectral_paths_numpy(*args)


def box_counts(trial, pts, box, n_trials):
    trial = np.ascontiguousarray(trial, dtype=np.int64)
    pts, box = _f64(pts), _f64(box)
    if pts.ndim != 2 or box.size != 2 * pts.shape[1]:
        raise ValueError("box must hold a (lo, hi) pair per point dimension")
    if USE_NUMBA:
        return box_counts_numba(trial, pts, box, int(n_trials))
    return box_counts_numpy(trial, pts, box, int(n_trials))


def linear_deposit(pos, w, lo, dx, n):
    pos, w = _f64(pos), _f64(w)
    if USE_NUMBA:
        return linear_deposit_numba(pos, w, float(lo), float(dx), int(n))
    return linear_deposit_numpy(pos, w, float(lo), float(dx), int(n))
