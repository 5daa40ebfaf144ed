"""Spectral side of the Gaussian flow attached to a symmetric measure sigma.

Only the one-dimensional stationary process is realised: covariance
``r(t) = int cos(t x) dsigma(x)``, the spectral representation used for
simulation, and the convolution exponential ``exp' sigma = sum_{p>=1}
sigma^{*p}/p!`` carrying the reduced maximal spectral type.

``sigma`` may be an :class:`~selfsim.measures.AtomicMeasure`, a real-line
:class:`~selfsim.measures.GridDensity` or a
:class:`~selfsim.lift.SigmaMeasure`, except where noted.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import signal

from . import _kernels
from .errors import NumericalGuardError
from .lift import SigmaMeasure
from .measures import (LINE, AtomicMeasure, GridDensity, convolve, hellinger_affinity,
                       next_pow2, pushforward, regrid, symmetrize)

DEFAULT_P_MAX = 12


def spectral_atoms(sigma):
    """(positions, weights) with zero weights dropped."""
    if isinstance(sigma, AtomicMeasure):
        return sigma.positions, sigma.weights
    if isinstance(sigma, SigmaMeasure):
        return sigma.atoms()
    if isinstance(sigma, GridDensity):
        if sigma.domain != LINE:
            raise ValueError("spectral measures live on the real line")
        w = sigma.weights()
        keep = w > 0
        return sigma.nodes[keep], w[keep]
    raise TypeError(f"unsupported spectral measure {type(sigma).__name__}")


# ---------------------------------------------------------------------------
# exp' sigma
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralExp:
    terms: list          # sigma^{*p}/p!, p = 1..P_max, on a common window
    sum: GridDensity
    P_max: int
    truncation_bound: float


def exp_truncation_bound(P_max):
    """sum_{p > P_max} 1/p!."""
    acc, term = 0.0, 1.0 / math.factorial(P_max)
    for p in range(P_max + 1, P_max + 40):
        term /= p
        acc += term
    return acc


def exp_prime(sigma, P_max=DEFAULT_P_MAX, window=None):
    """Truncated convolution exponential ``sum_{p<=P_max} sigma^{*p}/p!``.

    Without ``window`` the terms share the symmetric window [-M, M) with M
    the smallest power-of-two lattice bound above ``P_max`` times the reach
    of sigma's window, so no power is truncated.  With ``window`` each power
    is cropped to it.  Either way a truncation loss above 1e-6 raises
    :class:`NumericalGuardError`.
    """
    if not isinstance(sigma, GridDensity) or sigma.domain != LINE:
        raise TypeError("exp_prime needs a real-line grid (see SigmaMeasure.to_line)")
    if P_max < 1:
        raise ValueError("P_max must be >= 1")
    if window is None:
        # sigma^{*p} lives in p * window(sigma); one symmetric window holds all
        dx = sigma.dx
        half = P_max * max(abs(sigma.window[0]), abs(sigma.window[1]))
        cells = next_pow2(2 * math.ceil(half / dx - 1e-9))
        common = (-cells * dx / 2, cells * dx / 2)
        base = sigma
    else:
        common = window
        base = _crop(sigma, window)
    powers = [base]
    for _ in range(1, P_max):
        powers.append(convolve(powers[-1], sigma, window=common))
    terms = []
    fact = 1
    for p, pw in enumerate(powers, start=1):
        fact *= p
        g, dropped = regrid(pw, common)
        assert dropped == 0.0
        terms.append(g.scaled(1.0 / fact))
    total = terms[0].values.copy()
    for t in terms[1:]:
        total = total + t.values
    s = terms[0].with_values(total)
    if _symmetric(s) and _symmetric(sigma if window is None else terms[0]):
        s = symmetrize(s)
    return SpectralExp(terms, s, P_max, exp_truncation_bound(P_max))


def _symmetric(g):
    lo, hi = g.window
    if not math.isclose(lo, -hi, rel_tol=0, abs_tol=1e-12 * max(1.0, hi)):
        return False
    v = g.values
    # FFT round-off in the far tails is absolute, so compare against the peak
    return bool(np.allclose(v, v[g.mirror_index()], rtol=1e-9, atol=1e-12 * float(v.max(initial=0))))


def _crop(g, window):
    out, dropped = regrid(g, window)
    if dropped > 1e-6 * g.mass:
        raise NumericalGuardError("convolution window truncation",
                                  f"sigma loses {dropped:.3e} outside {window}")
    return out


# ---------------------------------------------------------------------------
# covariance and mixing
# ---------------------------------------------------------------------------

def covariance(sigma, t):
    """``r(t) = int cos(t x) dsigma(x)``; scalar in, scalar out."""
    x, w = spectral_atoms(sigma)
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    r = _kernels.cosine_sum(x, w, t_arr)
    return float(r[0]) if np.ndim(t) == 0 else r


def mixing_diagnostic(sigma, T_horizon):
    """Time average ``(1/T) int_0^T r(t)^2 dt``.

    Computed in closed form for the discretised sigma (pairwise sinc sum),
    so there is no time-quadrature error.  Tends to 0 for non-atomic sigma
    and to ``sum_{x_i = +-x_j} w_i w_j / 2`` when sigma has atoms.
    """
    if T_horizon <= 0:
        raise ValueError("T_horizon must be positive")
    if isinstance(sigma, GridDensity) and sigma.domain == LINE and sigma.grid_count > 256:
        return lattice_pair_sinc_mean(sigma, T_horizon)
    x, w = spectral_atoms(sigma)
    return _kernels.pair_sinc_mean(x, w, T_horizon)


def lattice_pair_sinc_mean(sigma, T_horizon):
    """Same value as the pairwise sinc sum, for nodes on a lattice.

    ``x_i - x_j`` and ``x_i + x_j`` depend only on ``i - j`` and ``i + j``, so
    the double sum collapses onto the autocorrelation and self-convolution
    of the weights (FFT, O(n log n)).
    """
    w = sigma.weights()
    n, dx, x0 = w.size, sigma.dx, float(sigma.nodes[0])
    k = np.arange(2 * n - 1)
    corr = signal.fftconvolve(w, w[::-1])
    conv = signal.fftconvolve(w, w)
    T = float(T_horizon)
    diff = np.sinc((k - (n - 1)) * dx * T / np.pi)
    summ = np.sinc((2 * x0 + k * dx) * T / np.pi)
    return 0.5 * float(corr @ diff + conv @ summ)


def atomic_mixing_limit(atoms):
    """Limit of :func:`mixing_diagnostic` as T grows, for an atomic sigma."""
    acc = 0.0
    for p, w in atoms.atoms:
        for q, v in atoms.atoms:
            if p == q:
                acc += w * v
            if p == -q:
                acc += w * v
    return 0.5 * acc


# ---------------------------------------------------------------------------
# process simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProcessSample:
    times: np.ndarray
    values: np.ndarray
    mode_count: int
    seed: int


def quantize_half(sigma, M):
    """Mass-preserving M-bin quantisation of the positive half of sigma.

    Returns ``(freqs, weights, zero_weight, bin_width)``; ``weights`` are the
    sigma-masses of the bins on (0, inf), ``zero_weight`` the mass at 0.
    """
    x, w = spectral_atoms(sigma)
    pos = x > 0
    neg = x < 0
    zero_w = float(np.sum(w[~pos & ~neg]))
    if not math.isclose(np.sum(w[pos]), np.sum(w[neg]), rel_tol=1e-6, abs_tol=1e-12):
        raise ValueError("sigma must be symmetric")
    xp, wp = x[pos], w[pos]
    if xp.size <= M:
        return xp, wp, zero_w, 0.0
    edges = np.linspace(0.0, float(xp.max()), M + 1)
    idx = np.clip(np.searchsorted(edges, xp, side="right") - 1, 0, M - 1)
    bw = np.bincount(idx, weights=wp, minlength=M)
    bx = np.bincount(idx, weights=wp * xp, minlength=M)
    keep = bw > 0
    return bx[keep] / bw[keep], bw[keep], zero_w, float(edges[1] - edges[0])


def _modes(sigma, M, times):
    if M < 16:
        raise ValueError("M must be at least 16")
    x, w = spectral_atoms(sigma)
    if abs(float(np.sum(w)) - 1.0) > 1e-6:
        raise ValueError("sigma must be probability-normalized")
    freqs, wts, w0, width = quantize_half(sigma, M)
    horizon = float(np.max(np.abs(times))) if len(times) else 0.0
    if width * horizon > math.pi:
        warnings.warn(f"quantization bin width {width:.3g} too coarse for time horizon "
                      f"{horizon:.3g}; increase M", RuntimeWarning, stacklevel=3)
    amps = np.sqrt(2.0 * wts)
    if w0 > 0:
        freqs = np.concatenate([[0.0], freqs])
        amps = np.concatenate([[math.sqrt(w0)], amps])
    return freqs, amps


def _draw(seed, path, m):
    rng = np.random.default_rng([int(seed), int(path)])
    z = rng.standard_normal((2, m))
    return z[0], z[1]


def sample_paths(sigma, times, M, seed, n_paths, workers=1):
    """``n_paths`` independent realisations; path p uses the seed (seed, p).

    ``X(t) = sum_m sqrt(2 w_m) (xi_m cos(x_m t) + eta_m sin(x_m t))`` (the
    zero frequency, if present, gets ``sqrt(w_0) xi_0``).  The result does
    not depend on ``workers``.
    """
    times = np.asarray(times, dtype=np.float64)
    freqs, amps = _modes(sigma, M, times)
    m = freqs.size

    def chunk(lo, hi):
        xi = np.empty((hi - lo, m))
        eta = np.empty((hi - lo, m))
        for p in range(lo, hi):
            xi[p - lo], eta[p - lo] = _draw(seed, p, m)
        return _kernels.spectral_paths(freqs, amps, xi, eta, times)

    step = 1024
    bounds = [(lo, min(lo + step, n_paths)) for lo in range(0, n_paths, step)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: chunk(*b), bounds))
    else:
        parts = [chunk(*b) for b in bounds]
    return np.vstack(parts) if parts else np.empty((0, times.size))


def sample_process(sigma, times, M, seed, path=0):
    """One realisation of the stationary Gaussian process at ``times``."""
    times = np.asarray(times, dtype=np.float64)
    freqs, amps = _modes(sigma, M, times)
    xi, eta = _draw(seed, path, freqs.size)
    vals = _kernels.spectral_paths(freqs, amps, xi[None, :], eta[None, :], times)[0]
    return ProcessSample(times, vals, M, seed)


def quantized_covariance(sigma, M, t):
    """Covariance of the simulated (quantised) process."""
    freqs, wts, w0, _ = quantize_half(sigma, M)
    return w0 + 2.0 * _kernels.cosine_sum(freqs, wts, np.atleast_1d(t))


# ---------------------------------------------------------------------------
# self-similarity diagnostics
# ---------------------------------------------------------------------------

def _scaled_prob(g, s):
    gs = pushforward(g, "scale", s, window=g.window)
    m = gs.mass
    if abs(m - 1.0) > 1e-6:
        raise NumericalGuardError("scaled measure leaves the window",
                                  f"mass {m:.9g} after scaling by {s}")
    return gs.with_values(gs.values / m)


def spectral_selfsim_test(sigma, s, P_max=DEFAULT_P_MAX, exp_sum=None):
    """Hellinger affinities of sigma and of exp' sigma with their s-images.

    Affinity ~0 says the s-image is (numerically) singular, which rules out
    s as a self-similarity.  ``s < 0`` is replaced by ``|s|`` (sigma is
    symmetric).  Pass a precomputed ``exp_sum`` to reuse it across s.
    """
    if s == 0:
        raise ValueError("s must be nonzero")
    s = abs(float(s))
    if not isinstance(sigma, GridDensity):
        raise TypeError("spectral_selfsim_test needs a real-line grid")
    base = sigma.normalized()
    a_sig = hellinger_affinity(base, _scaled_prob(base, s))
    if exp_sum is None:
        exp_sum = exp_prime(sigma, P_max).sum
    e = exp_sum.normalized()
    a_exp = hellinger_affinity(e, _scaled_prob(e, s))
    return {"affinity_sigma": a_sig, "affinity_exp": a_exp}
