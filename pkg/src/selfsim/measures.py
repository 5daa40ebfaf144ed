"""Grid, atomic and trigonometric-polynomial representations of measures.

Three charts are supported:

``circle-unit``
    the circle R/Z, window fixed to [0, 1), nodes i/n.
``real-line``
    an interval [lo, hi) of the real line, nodes lo + i*dx.
``pos-reals-log``
    the multiplicative positive reals stored in the coordinate t = log s,
    so multiplication by h becomes translation by log h.

A :class:`GridDensity` stores density values *at the nodes*; integrals are
node Riemann sums ``dx * sum(values * f(nodes))``.  With this convention the
discrete convolution of two grids lives exactly on the Minkowski-sum window,
and the convolution theorem holds exactly for :func:`transform_eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalGuardError

CIRCLE = "circle-unit"
LINE = "real-line"
LOGPOS = "pos-reals-log"
DOMAINS = (CIRCLE, LINE, LOGPOS)

CLAMP_TOL = 1e-12      # relative to the peak value
LATTICE_TOL = 1e-9     # in units of dx


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def _lattice_offset(a, b, dx):
    """(b - a)/dx as an int, or raise if b is not on the lattice through a."""
    u = (b - a) / dx
    k = round(u)
    if abs(u - k) > LATTICE_TOL * max(1.0, abs(u)):
        raise DomainError(f"point {b} is not on the grid lattice through {a} (dx={dx})")
    return int(k)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative density sampled at the nodes of a uniform grid.

    Parameters
    ----------
    domain : str
        One of :data:`DOMAINS`.
    window : (float, float)
        Half-open window [lo, hi).  Must be (0, 1) for the circle.
    values : array_like
        Density values at ``lo + i*dx``; the length must be a power of two.
    """

    domain: str
    window: tuple
    values: np.ndarray

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise DomainError(f"unknown domain {self.domain!r}")
        lo, hi = (float(w) for w in self.window)
        if not hi > lo:
            raise DomainError(f"empty window {self.window}")
        if self.domain == CIRCLE and (lo, hi) != (0.0, 1.0):
            raise DomainError("circle windows are fixed to [0, 1)")
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or not _is_pow2(v.size):
            raise DomainError(f"grid_count must be a power of two, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if np.any(v < 0):
            raise ValueError(f"density has negative values (min {v.min():.3e})")
        v.flags.writeable = False
        object.__setattr__(self, "window", (lo, hi))
        object.__setattr__(self, "values", v)

    # -- geometry ---------------------------------------------------------
    @property
    def grid_count(self):
        return self.values.size

    @property
    def dx(self):
        return (self.window[1] - self.window[0]) / self.values.size

    @property
    def nodes(self):
        return self.window[0] + self.dx * np.arange(self.values.size)

    @property
    def mass(self):
        return self.dx * float(np.sum(self.values))

    def weights(self):
        """Node masses ``values * dx``."""
        return self.values * self.dx

    def with_values(self, values):
        return GridDensity(self.domain, self.window, values)

    def normalized(self):
        m = self.mass
        if m <= 0:
            raise ValueError("cannot normalize a zero measure")
        return self.with_values(self.values / m)

    def scaled(self, c):
        return self.with_values(self.values * c)

    def relabel(self, domain):
        return GridDensity(domain, self.window, self.values)

    def mirror_index(self):
        """Index of the node at -x for each node x (see :func:`symmetrize`)."""
        n = self.grid_count
        i = np.arange(n)
        if self.domain == CIRCLE:
            return (n - i) % n
        lo, hi = self.window
        if not math.isclose(lo, -hi, rel_tol=0, abs_tol=1e-12 * max(1.0, hi)):
            raise DomainError("mirror indexing needs a window symmetric about 0")
        # node -L has no partner inside [-L, L); it is treated as self-mirrored
        j = n - i
        j[0] = 0
        return j

    def interp(self, x):
        """Linear interpolation of the density at ``x`` (0 outside the window)."""
        x = np.asarray(x, dtype=np.float64)
        if self.domain == CIRCLE:
            xp = np.append(self.nodes, 1.0)
            fp = np.append(self.values, self.values[0])
            return np.interp(np.mod(x, 1.0), xp, fp)
        # the last cell [x_{n-1}, hi) ramps to 0 at hi
        xp = np.append(self.nodes, self.window[1])
        fp = np.append(self.values, 0.0)
        return np.interp(x, xp, fp, left=0.0, right=0.0)

    def cdf(self, x):
        """Node-sum mass of nodes strictly below ``x``."""
        x = np.asarray(x, dtype=np.float64)
        cum = np.concatenate([[0.0], np.cumsum(self.weights())])
        k = np.clip(np.ceil((x - self.window[0]) / self.dx - 1e-9), 0, self.grid_count)
        return cum[k.astype(np.int64)]

    # -- serialization ---------------------------------------------------
    def to_json(self):
        return {
            "domain": self.domain,
            "window": [self.window[0], self.window[1]],
            "grid_count": self.grid_count,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_json(cls, obj):
        vals = obj["values"]
        if int(obj["grid_count"]) != len(vals):
            raise ValueError("grid_count does not match the number of values")
        return cls(obj["domain"], tuple(obj["window"]), np.asarray(vals, dtype=np.float64))

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_function(cls, domain, window, grid_count, fn):
        lo, hi = window
        x = lo + (hi - lo) / grid_count * np.arange(grid_count)
        return cls(domain, (lo, hi), np.asarray(fn(x), dtype=np.float64))

    @classmethod
    def uniform(cls, a, b, domain=LINE, window=None, grid_count=1024, total=1.0,
                trapezoid=False):
        """Uniform density of mass ``total`` on [a, b).

        With ``trapezoid=True`` the interval is closed and endpoint nodes get
        half weight, which makes node sums second-order accurate for smooth
        integrands (used for closed-form covariance checks).
        """
        if domain == CIRCLE:
            window = (0.0, 1.0)
        window = window or (a, b)
        g = cls.from_function(domain, window, grid_count, np.zeros_like)
        x = g.nodes
        dx = g.dx
        eps = 1e-9 * dx
        h = total / (b - a)
        if trapezoid:
            v = np.where((x > a + eps) & (x < b - eps), h, 0.0)
            v = v + np.where((np.abs(x - a) <= eps) | (np.abs(x - b) <= eps), 0.5 * h, 0.0)
        else:
            v = np.where((x > a - eps) & (x < b - eps), h, 0.0)
        if v.sum() == 0:
            raise ValueError("interval contains no grid node")
        # exact already when a and b are on the lattice; fixes off-lattice ends
        v *= total / (dx * v.sum())
        return g.with_values(v)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of point masses; positions in natural coordinates."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(p), float(w)) for p, w in self.atoms)
        for (p0, _), (p1, _) in zip(atoms, atoms[1:]):
            if not p1 > p0:
                raise ValueError("atom positions must be strictly increasing")
        if any(not (w > 0 and math.isfinite(w)) for _, w in atoms):
            raise ValueError("atom weights must be positive and finite")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_pairs(cls, pairs):
        """Sort and merge coincident positions."""
        acc = {}
        for p, w in pairs:
            if w != 0:
                acc[float(p)] = acc.get(float(p), 0.0) + float(w)
        return cls(tuple(sorted(acc.items())))

    @property
    def positions(self):
        return np.array([p for p, _ in self.atoms])

    @property
    def weights(self):
        return np.array([w for _, w in self.atoms])

    @property
    def mass(self):
        return float(sum(w for _, w in self.atoms))

    def to_json(self):
        return {"atoms": [[p, w] for p, w in self.atoms]}

    @classmethod
    def from_json(cls, obj):
        return cls.from_pairs(obj["atoms"])

    def rasterize(self, domain, window, grid_count):
        """Deposit the atoms on a grid, splitting each mass between the two
        nearest nodes.  Atoms sitting on nodes land there exactly."""
        lo, hi = window
        dx = (hi - lo) / grid_count
        pos = self.positions
        if domain == CIRCLE:
            pos = np.mod(pos, 1.0)
        vals = _kernels.linear_deposit(pos, self.weights, lo, dx, grid_count)
        if domain == CIRCLE:
            # mass deposited past the last node wraps to node 0
            tail = pos > 1.0 - dx
            if np.any(tail):
                frac = (pos[tail] - (1.0 - dx)) / dx
                vals[0] += float(np.sum(self.weights[tail] * frac)) / dx
        g = GridDensity(domain, window, vals)
        if not math.isclose(g.mass, self.mass, rel_tol=1e-9):
            raise NumericalGuardError("rasterization window truncation",
                                      f"kept {g.mass} of {self.mass}")
        return g


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """Sparse trigonometric polynomial sum_n c_n z^n, z = exp(2 pi i theta)."""

    coeffs: Mapping = field(default_factory=dict)

    def __post_init__(self):
        c = {int(k): complex(v) for k, v in dict(self.coeffs).items() if v != 0}
        for k, v in c.items():
            w = c.get(-k, 0j)
            if abs(v - w.conjugate()) > 1e-12 * max(1.0, abs(v)):
                raise ValueError(f"coefficients are not Hermitian at frequency {k}")
        object.__setattr__(self, "coeffs", MappingProxyType(c))

    def __getitem__(self, n):
        return self.coeffs.get(int(n), 0j)

    def __mul__(self, other):
        out = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                k = k1 + k2
                out[k] = out.get(k, 0j) + c1 * c2
        return TrigPoly(out)

    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return dict(self.coeffs) == dict(other.coeffs)

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    @property
    def degree(self):
        return max((abs(k) for k in self.coeffs), default=0)

    def frequencies(self):
        return sorted(self.coeffs)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        out = np.zeros(theta.shape)
        for k, c in self.coeffs.items():
            out += (c * np.exp(2j * np.pi * k * theta)).real
        return out

    def rasterize(self, grid_count):
        """Values on the circle grid ``i / grid_count`` via an inverse FFT."""
        N = int(grid_count)
        if not N > 2 * self.degree:
            raise NumericalGuardError("trigonometric raster aliasing",
                                      f"grid_count {N} <= 2*degree {2 * self.degree}")
        arr = np.zeros(N, dtype=np.complex128)
        for k, c in self.coeffs.items():
            arr[k % N] += c
        v = (N * np.fft.ifft(arr)).real
        return GridDensity(CIRCLE, (0.0, 1.0), _clamp(v, "trigonometric polynomial is negative"))

    def to_json(self):
        return {"coeffs": [[k, c.real, c.imag] for k, c in sorted(self.coeffs.items())]}

    @classmethod
    def from_json(cls, obj):
        return cls({int(k): complex(re, im) for k, re, im in obj["coeffs"]})


def _clamp(v, guard):
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    tol = CLAMP_TOL * max(1.0, peak)
    if np.any(v < -tol):
        raise NumericalGuardError(guard, f"min value {float(v.min()):.3e} below -{tol:.1e}")
    return np.where(v < 0, 0.0, v)


def measure_from_json(obj):
    """Parse either a grid density or an atom list."""
    if "atoms" in obj:
        return AtomicMeasure.from_json(obj)
    if "coeffs" in obj:
        return TrigPoly.from_json(obj)
    return GridDensity.from_json(obj)


# ---------------------------------------------------------------------------
# regridding and convolution
# ---------------------------------------------------------------------------

def regrid(f, window, grid_count=None):
    """Re-embed ``f`` on another window of the same lattice (no interpolation).

    Returns ``(g, dropped_mass)``.
    """
    if f.domain == CIRCLE:
        raise DomainError("circle grids have a fixed window")
    lo, hi = (float(w) for w in window)
    dx = f.dx
    if grid_count is None:
        grid_count = round((hi - lo) / dx)
        if not math.isclose(grid_count * dx, hi - lo, rel_tol=1e-9):
            raise DomainError("window length is not a multiple of the cell width")
    off = _lattice_offset(lo, f.window[0], dx)
    n = int(grid_count)
    out = np.zeros(n)
    src = np.arange(f.grid_count)
    dst = src + off
    ok = (dst >= 0) & (dst < n)
    out[dst[ok]] = f.values[ok]
    dropped = dx * float(np.sum(f.values[~ok]))
    return GridDensity(f.domain, (lo, lo + n * dx), out), dropped


def convolve(f, g, window=None):
    """Convolution of two grid densities.

    On the circle both grids must match and the convolution is circular.  On
    the line charts the cell widths must agree; the result lives on the
    Minkowski-sum window [lo_f + lo_g, ...) extended to a power-of-two count,
    or on ``window`` if given (same lattice; a mass loss above 1e-6 of the
    total raises :class:`NumericalGuardError`).
    """
    if f.domain != g.domain:
        raise DomainError(f"cannot convolve {f.domain} with {g.domain}")
    if f.domain == CIRCLE:
        if f.grid_count != g.grid_count:
            raise DomainError("circle convolution needs equal grid counts")
        v = np.fft.irfft(np.fft.rfft(f.values) * np.fft.rfft(g.values), n=f.grid_count) * f.dx
        return f.with_values(_clamp(v, "convolution produced negative density"))
    if not math.isclose(f.dx, g.dx, rel_tol=1e-12):
        raise DomainError(f"cell widths differ: {f.dx} vs {g.dx}")
    dx = f.dx
    n_lin = f.grid_count + g.grid_count - 1
    N = next_pow2(f.grid_count + g.grid_count)
    v = np.fft.irfft(np.fft.rfft(f.values, N) * np.fft.rfft(g.values, N), n=N) * dx
    v[n_lin:] = 0.0
    lo = f.window[0] + g.window[0]
    h = GridDensity(f.domain, (lo, lo + N * dx), _clamp(v, "convolution produced negative density"))
    if window is None:
        return h
    out, dropped = regrid(h, window)
    total = h.mass
    if total > 0 and dropped > 1e-6 * total:
        raise NumericalGuardError("convolution window truncation",
                                  f"lost {dropped:.3e} of mass {total:.6g}")
    return out


# ---------------------------------------------------------------------------
# pushforwards
# ---------------------------------------------------------------------------

MAP_KINDS = ("scale", "exp", "mod1", "negate")


def pushforward(m, map_kind, s=None, *, window=None, grid_count=None):
    """Image of a measure under ``scale s``, ``exp``, ``mod1`` or ``negate``.

    ``scale`` on the real line maps the grid exactly (window [s*lo, s*hi),
    density divided by |s|) unless a target ``window`` is given, in which
    case the scaled density is linearly interpolated onto it.  On the
    ``pos-reals-log`` chart scaling by s > 0 is translation by log s.
    ``exp`` relabels a real-line grid as the log chart; ``mod1`` folds a
    real-line grid onto the circle.
    """
    if map_kind not in MAP_KINDS:
        raise ValueError(f"unknown map kind {map_kind!r}")
    if map_kind == "scale":
        if s is None or s == 0:
            raise ValueError("scale factor must be nonzero")
        s = float(s)
    if isinstance(m, AtomicMeasure):
        return _push_atoms(m, map_kind, s)
    if isinstance(m, GridDensity):
        if map_kind == "scale":
            return _scale_grid(m, s, window, grid_count)
        if map_kind == "negate":
            if m.domain == CIRCLE:
                return m.with_values(m.values[(m.grid_count - np.arange(m.grid_count)) % m.grid_count])
            return _scale_grid(m, -1.0, window, grid_count)
        if map_kind == "exp":
            if m.domain != LINE:
                raise DomainError("exp maps the real line to the positive reals")
            return m.relabel(LOGPOS)
        return _fold_mod1(m)
    raise TypeError(f"cannot push forward {type(m).__name__}")


def _push_atoms(m, kind, s):
    p, w = m.positions, m.weights
    if kind == "scale":
        p = p * s
    elif kind == "negate":
        p = -p
    elif kind == "exp":
        p = np.exp(p)
    else:
        p = np.mod(p, 1.0)
    return AtomicMeasure.from_pairs(zip(p, w))


def _scale_grid(m, s, window, grid_count):
    if m.domain == CIRCLE:
        raise DomainError("scaling is not defined on the circle chart")
    if m.domain == LOGPOS:
        if s <= 0:
            raise DomainError("the positive reals only admit positive scalings")
        shift = math.log(s)
        if s == 1.0 and window is None:
            return m
        if window is None:
            lo, hi = m.window
            return GridDensity(LOGPOS, (lo + shift, hi + shift), m.values)
        n = grid_count or m.grid_count
        tgt = GridDensity.from_function(LOGPOS, window, n, lambda t: m.interp(t - shift))
        return tgt
    if window is None:
        if s == 1.0:
            return m
        lo, hi = m.window
        dx = m.dx
        if s > 0:
            return GridDensity(LINE, (s * lo, s * hi), m.values / s)
        new_lo = s * (hi - dx)
        return GridDensity(LINE, (new_lo, new_lo + m.grid_count * abs(s) * dx),
                           m.values[::-1] / abs(s))
    n = grid_count or m.grid_count
    return GridDensity.from_function(LINE, window, n, lambda y: m.interp(y / s) / abs(s))


def _fold_mod1(m):
    if m.domain != LINE:
        raise DomainError("mod1 maps the real line to the circle")
    per_unit = 1.0 / m.dx
    n_c = round(per_unit)
    if not (math.isclose(per_unit, n_c, rel_tol=1e-9) and _is_pow2(n_c)):
        raise DomainError("mod1 needs a power-of-two number of cells per unit length")
    start = _lattice_offset(0.0, m.window[0], m.dx)
    idx = (start + np.arange(m.grid_count)) % n_c
    out = np.bincount(idx, weights=m.values, minlength=n_c)
    return GridDensity(CIRCLE, (0.0, 1.0), out)


# ---------------------------------------------------------------------------
# transforms and diagnostics
# ---------------------------------------------------------------------------

def transform_eval(m, arg):
    """Fourier transform of a measure.

    Circle (and :class:`TrigPoly`): ``int conj(z)^n dm`` at integer ``n``.
    Line charts and atoms: characteristic function ``int exp(i t x) dm(x)``.
    """
    if isinstance(m, TrigPoly):
        if int(arg) != arg:
            raise TypeError("circle transforms take integer frequencies")
        return m[int(arg)]
    if isinstance(m, AtomicMeasure):
        return complex(np.sum(m.weights * np.exp(1j * float(arg) * m.positions)))
    if m.domain == CIRCLE:
        if int(arg) != arg:
            raise TypeError("circle transforms take integer frequencies")
        ph = np.exp(-2j * np.pi * int(arg) * np.arange(m.grid_count) / m.grid_count)
        return complex(m.dx * np.sum(m.values * ph))
    return complex(m.dx * np.sum(m.values * np.exp(1j * float(arg) * m.nodes)))


def _check_probability(m, name):
    if abs(m.mass - 1.0) > 1e-6:
        raise ValueError(f"{name} is not probability-normalized (mass {m.mass:.9g})")


def hellinger_affinity(f, g):
    """Hellinger affinity ``int sqrt(f g)`` of two probability measures.

    0 means mutually singular (at grid resolution), 1 means equal.
    """
    _check_probability(f, "first argument")
    _check_probability(g, "second argument")
    if isinstance(f, AtomicMeasure) and isinstance(g, AtomicMeasure):
        gw = dict(g.atoms)
        val = sum(math.sqrt(w * gw[p]) for p, w in f.atoms if p in gw)
        return min(1.0, val)
    if not (isinstance(f, GridDensity) and isinstance(g, GridDensity)):
        raise TypeError("affinity needs two grids or two atomic measures")
    if f.domain != g.domain or f.grid_count != g.grid_count or not (
            np.allclose(f.window, g.window, rtol=0, atol=1e-12 * max(1.0, *map(abs, f.window)))):
        raise DomainError("affinity needs identical grids")
    val = f.dx * float(np.sum(np.sqrt(f.values * g.values)))
    return min(1.0, max(0.0, val))


def symmetrize(m):
    """``(m + negate(m)) / 2`` on a window symmetric about 0.

    A non-symmetric real-line window is first extended to the symmetric hull
    [-M, M) of the same lattice (M rounded so the count stays a power of two).
    """
    if m.domain == LOGPOS:
        raise DomainError("symmetrize acts on the real line or the circle")
    if m.domain == LINE:
        lo, hi = m.window
        if not math.isclose(lo, -hi, rel_tol=0, abs_tol=1e-12 * max(1.0, hi)):
            dx = m.dx
            _lattice_offset(0.0, lo, dx)
            half = max(abs(lo), abs(hi))
            cells = next_pow2(2 * math.ceil(half / dx - 1e-9))
            M = cells * dx / 2
            m, dropped = regrid(m, (-M, M))
            assert dropped == 0.0
    j = m.mirror_index()
    return m.with_values(0.5 * (m.values + m.values[j]))


def is_symmetric(m, rtol=1e-12):
    j = m.mirror_index()
    return bool(np.allclose(m.values, m.values[j], rtol=rtol, atol=0.0))
