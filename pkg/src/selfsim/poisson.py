"""Monte-Carlo Poisson suspension of the product flow on R*_+ x R x Z.

The base space is ``X = R*_+ x R x Z`` with ``mu = kappa x Lebesgue x nu``
and the flow ``T_t(s, y, z) = (s, y, V_{st} z)``.  The fibre Z is realised
as a circle of circumference L with the rotation ``V_t z = z + t mod L``,
so every finite window of the form (s-range) x (y-range) x Z is invariant.

Scalings act through ``Q_h(s, y, z) = (h s, y D_h(s), z)`` with
``D_h = d kappa / d(kappa o h)``, where ``(kappa o h)(A) = kappa(hA)``.
That choice of Radon-Nikodym factor is the one making Q_h preserve mu, and
it gives ``Q_{1/h} = Q_h^{-1}`` by the chain rule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import _kernels
from .errors import NumericalGuardError
from .measures import (LINE, LOGPOS, AtomicMeasure, GridDensity, hellinger_affinity,
                       pushforward)

BLOCK = 4096  # trials per RNG block; fixed so results ignore the worker count


class QuasiInvarianceError(ValueError):
    """The density ratio d kappa / d(kappa o h) vanishes or is undefined."""


# ---------------------------------------------------------------------------
# kappa: measures on R*_+
# ---------------------------------------------------------------------------

class Kappa:
    """A finite measure on R*_+.  Subclasses work in the log chart t = log s."""

    improper = False

    def mass(self, s_lo, s_hi):
        raise NotImplementedError

    def sample(self, rng, size, s_lo, s_hi):
        raise NotImplementedError

    def log_density(self, t):
        """Density with respect to dt, t = log s."""
        raise NotImplementedError

    def in_support(self, s):
        raise NotImplementedError

    def ratio(self, s, h):
        """``D_h(s) = d kappa / d(kappa o h)`` at the points ``s``."""
        t = np.log(np.asarray(s, dtype=np.float64))
        num = self.log_density(t)
        den = self.log_density(t + math.log(h))
        if np.any(num <= 0) or np.any(den <= 0):
            raise QuasiInvarianceError(f"density ratio undefined for h={h}")
        return num / den

    def support_matches(self, h):
        raise NotImplementedError

    def log_window(self):
        """A log-chart window holding all but ~1e-12 of the mass."""
        raise NotImplementedError

    def to_grid(self, window, grid_count, shift=0.0):
        """Normalised log-chart raster of kappa translated by ``shift``."""
        g = GridDensity.from_function(LOGPOS, window, grid_count,
                                      lambda t: self.log_density(t - shift))
        return g.normalized()

    def total(self):
        return self.mass(0.0, math.inf)

    def quadrature_weights(self, s_nodes):
        """kappa-mass of the Voronoi cell of each node (cells cover (0, inf))."""
        s = np.asarray(s_nodes, dtype=np.float64)
        if np.any(np.diff(s) <= 0) or np.any(s <= 0):
            raise ValueError("quadrature nodes must be positive and increasing")
        bad = [float(x) for x in s if not self.in_support(x)]
        if bad:
            raise ValueError(f"quadrature nodes outside the support of kappa: {bad}")
        edges = np.concatenate([[0.0], 0.5 * (s[1:] + s[:-1]), [math.inf]])
        return np.array([self.mass(a, b) for a, b in zip(edges[:-1], edges[1:])])


@dataclass(frozen=True)
class LogNormalKappa(Kappa):
    mu: float = 0.0
    sd: float = 1.0

    def log_density(self, t):
        z = (np.asarray(t, dtype=np.float64) - self.mu) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))

    def _cdf(self, s):
        with np.errstate(divide="ignore"):
            t = np.log(np.asarray(s, dtype=np.float64))
        return special.ndtr((t - self.mu) / self.sd)

    def mass(self, s_lo, s_hi):
        return float(self._cdf(s_hi) - self._cdf(s_lo))

    def sample(self, rng, size, s_lo, s_hi):
        u = rng.uniform(self._cdf(s_lo), self._cdf(s_hi), size)
        return np.exp(self.mu + self.sd * special.ndtri(u))

    def in_support(self, s):
        return s > 0

    def ratio(self, s, h):
        # closed form of phi(t)/phi(t + c)
        t = np.log(np.asarray(s, dtype=np.float64)) - self.mu
        c = math.log(h)
        return np.exp((2 * t * c + c * c) / (2 * self.sd ** 2))

    def support_matches(self, h):
        return True

    def log_window(self):
        return (self.mu - 8 * self.sd, self.mu + 8 * self.sd)

    def to_json(self):
        return {"type": "lognormal", "mu": self.mu, "sd": self.sd}


@dataclass(frozen=True)
class UniformKappa(Kappa):
    """Uniform probability on [a, b] in the s coordinate."""

    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")

    def log_density(self, t):
        t = np.asarray(t, dtype=np.float64)
        inside = (t >= math.log(self.a)) & (t <= math.log(self.b))
        return np.where(inside, np.exp(t) / (self.b - self.a), 0.0)

    def mass(self, s_lo, s_hi):
        lo, hi = max(s_lo, self.a), min(s_hi, self.b)
        return max(0.0, hi - lo) / (self.b - self.a)

    def sample(self, rng, size, s_lo, s_hi):
        lo, hi = max(s_lo, self.a), min(s_hi, self.b)
        return rng.uniform(lo, hi, size)

    def in_support(self, s):
        return self.a <= s <= self.b

    def support_matches(self, h):
        return h == 1.0

    def log_window(self):
        return (math.log(self.a), math.log(self.b))

    def to_json(self):
        return {"type": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class AtomicKappa(Kappa):
    atoms: AtomicMeasure

    def __post_init__(self):
        if np.any(self.atoms.positions <= 0):
            raise ValueError("kappa atoms must sit in R*_+")

    def mass(self, s_lo, s_hi):
        p, w = self.atoms.positions, self.atoms.weights
        return float(np.sum(w[(p >= s_lo) & (p < s_hi)]))

    def sample(self, rng, size, s_lo, s_hi):
        p, w = self.atoms.positions, self.atoms.weights
        keep = (p >= s_lo) & (p < s_hi)
        p, w = p[keep], w[keep]
        return p[rng.choice(p.size, size=size, p=w / w.sum())] if size else np.empty(0)

    def _weight_at(self, s):
        p, w = self.atoms.positions, self.atoms.weights
        i = np.searchsorted(p, s)
        out = np.zeros(np.shape(s))
        for k, (ii, x) in enumerate(zip(np.atleast_1d(i), np.atleast_1d(s))):
            for j in (ii - 1, ii):
                if 0 <= j < p.size and math.isclose(p[j], x, rel_tol=1e-12):
                    out.flat[k] = w[j]
        return out

    def ratio(self, s, h):
        num = self._weight_at(np.asarray(s, dtype=np.float64))
        den = self._weight_at(h * np.asarray(s, dtype=np.float64))
        if np.any(num <= 0) or np.any(den <= 0):
            raise QuasiInvarianceError(f"density ratio undefined for h={h}")
        return num / den

    def in_support(self, s):
        return bool(self._weight_at(np.array([s]))[0] > 0)

    def support_matches(self, h):
        p = self.atoms.positions
        return bool(np.all(self._weight_at(h * p) > 0) and np.all(self._weight_at(p / h) > 0))

    def affinity(self, h):
        shifted = pushforward(self.atoms, "scale", h)
        base = AtomicMeasure.from_pairs(zip(self.atoms.positions, self.atoms.weights / self.atoms.mass))
        moved = AtomicMeasure.from_pairs(zip(shifted.positions, shifted.weights / shifted.mass))
        acc = 0.0
        for p, w in base.atoms:
            for q, v in moved.atoms:
                if math.isclose(p, q, rel_tol=1e-12):
                    acc += math.sqrt(w * v)
        return min(1.0, acc)

    def to_json(self):
        return {"type": "atoms", **self.atoms.to_json()}


@dataclass(frozen=True, eq=False)
class GridKappa(Kappa):
    """kappa given by a log-chart grid; node masses spread over centred cells."""

    grid: GridDensity

    def __post_init__(self):
        if self.grid.domain != LOGPOS:
            raise ValueError("grid kappa must live on the pos-reals-log chart")

    def log_density(self, t):
        return self.grid.interp(t)

    def _cell_cdf(self, t):
        g = self.grid
        lo = g.window[0] - 0.5 * g.dx
        u = np.clip((np.asarray(t, dtype=np.float64) - lo) / g.dx, 0, g.grid_count)
        k = np.floor(u).astype(np.int64)
        cum = np.concatenate([[0.0], np.cumsum(g.weights())])
        part = np.where(k < g.grid_count, g.weights()[np.minimum(k, g.grid_count - 1)], 0.0)
        return cum[k] + (u - k) * part

    def mass(self, s_lo, s_hi):
        with np.errstate(divide="ignore"):
            a, b = np.log(s_lo), np.log(s_hi) if s_hi < math.inf else math.inf
        return float(self._cell_cdf(b) - self._cell_cdf(a))

    def sample(self, rng, size, s_lo, s_hi):
        g = self.grid
        w = g.weights()
        t = g.nodes
        # exact within the window only when window edges fall on cell edges
        keep = (t >= math.log(s_lo) if s_lo > 0 else True) & (np.exp(t) < s_hi)
        w = np.where(keep, w, 0.0)
        idx = rng.choice(t.size, size=size, p=w / w.sum())
        return np.exp(t[idx] + g.dx * (rng.random(size) - 0.5))

    def in_support(self, s):
        return bool(self.grid.interp(math.log(s)) > 1e-12)

    def ratio(self, s, h):
        t = np.log(np.asarray(s, dtype=np.float64))
        num = self.grid.interp(t)
        den = self.grid.interp(t + math.log(h))
        if np.any(num <= 1e-12) or np.any(den <= 1e-12):
            raise QuasiInvarianceError(f"density ratio undefined for h={h}")
        return num / den

    def support_matches(self, h):
        # only where both the window and its translate have data: a density
        # still positive at the window edge is taken to continue beyond it
        c = math.log(h)
        t = self.grid.nodes
        lo, hi = self.grid.window
        both = (t - c >= lo) & (t - c <= hi - self.grid.dx)
        a = self.grid.values[both] > 1e-12
        b = self.grid.interp(t[both] - c) > 1e-12
        return bool(both.any() and np.array_equal(a, b))

    def log_window(self):
        return self.grid.window

    def to_json(self):
        return {"type": "grid", **self.grid.to_json()}


@dataclass(frozen=True)
class LebesgueKappa(Kappa):
    """Lebesgue measure ds on R*_+ (improper; only usable on bounded windows)."""

    improper = True

    def log_density(self, t):
        return np.exp(np.asarray(t, dtype=np.float64))

    def mass(self, s_lo, s_hi):
        return max(0.0, s_hi - s_lo)

    def sample(self, rng, size, s_lo, s_hi):
        if not math.isfinite(s_hi):
            raise ValueError("Lebesgue kappa needs a bounded s-range")
        return rng.uniform(s_lo, s_hi, size)

    def in_support(self, s):
        return s > 0

    def ratio(self, s, h):
        return np.full(np.shape(s), 1.0 / h)

    def support_matches(self, h):
        return True

    def to_json(self):
        return {"type": "lebesgue"}


def kappa_from_json(obj):
    kind = obj.get("type")
    if kind == "lognormal":
        return LogNormalKappa(float(obj.get("mu", 0.0)), float(obj.get("sd", 1.0)))
    if kind == "uniform":
        return UniformKappa(float(obj["a"]), float(obj["b"]))
    if kind == "delta":
        return AtomicKappa(AtomicMeasure(((float(obj["s"]), float(obj.get("weight", 1.0))),)))
    if kind == "atoms":
        return AtomicKappa(AtomicMeasure.from_pairs(obj["atoms"]))
    if kind == "grid":
        return GridKappa(GridDensity.from_json(obj))
    if kind == "lebesgue":
        return LebesgueKappa()
    raise ValueError(f"unknown kappa type {kind!r}")


# ---------------------------------------------------------------------------
# windows, configurations, flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Half-open box s x y x z; the z-range is part of the fibre circle."""

    s: tuple
    y: tuple
    z: tuple

    def as_array(self):
        return np.array([*self.s, *self.y, *self.z], dtype=np.float64)

    def disjoint(self, other):
        return any(min(a[1], b[1]) <= max(a[0], b[0])
                   for a, b in ((self.s, other.s), (self.y, other.y), (self.z, other.z)))

    def inside(self, other):
        return all(b[0] <= a[0] and a[1] <= b[1]
                   for a, b in ((self.s, other.s), (self.y, other.y), (self.z, other.z)))

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["s"]), tuple(obj["y"]), tuple(obj["z"]))


@dataclass(frozen=True)
class Window:
    """Sampling window s_range x y_range x (circle of circumference L)."""

    s_range: tuple
    y_range: tuple
    L: float = 1.0

    def __post_init__(self):
        if not self.s_range[0] > 0:
            raise ValueError("s_range must lie in R*_+")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.s_range[1] < self.s_range[0] or self.y_range[1] < self.y_range[0]:
            raise ValueError("window ranges must be ordered")

    def box(self):
        return Box(tuple(self.s_range), tuple(self.y_range), (0.0, self.L))

    def flow_invariant_box(self, s, y):
        return Box(tuple(s), tuple(y), (0.0, self.L))

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["s_range"]), tuple(obj["y_range"]), float(obj.get("L", 1.0)))

    def to_json(self):
        return {"s_range": list(self.s_range), "y_range": list(self.y_range), "L": self.L}


@dataclass(frozen=True)
class ProductFlowSpec:
    kappa: Kappa
    window: Window

    @classmethod
    def lebesgue_base(cls, s_range, L=1.0):
        """Base with Lebesgue measure in s and no y coordinate.

        Realised with an improper (windowed Lebesgue) kappa and a unit
        y-range; reports label it "improper kappa".
        """
        return cls(LebesgueKappa(), Window(tuple(s_range), (0.0, 1.0), L))

    @property
    def improper(self):
        return self.kappa.improper

    def intensity(self, box=None):
        """mu(box) = kappa(s) |y| |z|."""
        b = box or self.window.box()
        return (self.kappa.mass(*b.s) * max(0.0, b.y[1] - b.y[0])
                * max(0.0, b.z[1] - b.z[0]))


@dataclass(frozen=True, eq=False)
class PointConfig:
    """Finite multiset of points (s, y, z); ``points`` has shape (n, 3)."""

    points: np.ndarray
    window: Window

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.shape[0]

    def count(self, box):
        if len(self) == 0:
            return 0
        return int(_kernels.box_counts(np.zeros(len(self), dtype=np.int64),
                                       self.points, box.as_array(), 1)[0])

    def inside_window(self):
        if len(self) == 0:
            return True
        s, y, z = self.points.T
        w = self.window
        return bool(np.all((s >= w.s_range[0]) & (s <= w.s_range[1])
                           & (y >= w.y_range[0]) & (y <= w.y_range[1])
                           & (z >= 0) & (z < w.L)))


def _sample_points(spec, rng, count):
    if count == 0:
        return np.empty((0, 3))
    w = spec.window
    s = spec.kappa.sample(rng, count, *w.s_range)
    y = rng.uniform(w.y_range[0], w.y_range[1], count)
    z = rng.uniform(0.0, w.L, count)
    return np.column_stack([s, y, z])


def _window_mass(spec):
    m = spec.intensity()
    if not math.isfinite(m) or m < 0:
        raise ValueError(f"window intensity must be finite, got {m}")
    return m


def sample_poisson(spec, seed):
    """One Poisson configuration with intensity mu restricted to the window.

    A zero-mass window gives the empty configuration.
    """
    m = _window_mass(spec)
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(m)) if m > 0 else 0
    return PointConfig(_sample_points(spec, rng, n), spec.window)


def apply_flow(spec, t, cfg):
    """``T_t(s, y, z) = (s, y, z + s t mod L)``."""
    p = cfg.points.copy()
    if len(p):
        p[:, 2] = np.mod(p[:, 2] + p[:, 0] * t, spec.window.L)
    return PointConfig(p, cfg.window)


def q_transform(spec, h, cfg):
    """``Q_h(s, y, z) = (h s, y D_h(s), z)``.

    Raises :class:`QuasiInvarianceError` when ``D_h`` vanishes or is
    undefined at a sampled s (evidence that h is outside H(kappa)).
    """
    if not h > 0:
        raise ValueError("h must be positive")
    p = cfg.points.copy()
    if len(p):
        d = np.asarray(spec.kappa.ratio(p[:, 0], h), dtype=np.float64)
        p[:, 0] = h * p[:, 0]
        p[:, 1] = p[:, 1] * d
    w = cfg.window
    ys = [*w.y_range, *(p[:, 1] if len(p) else [])]
    win = Window((h * w.s_range[0], h * w.s_range[1]), (min(ys), max(ys)), w.L)
    return PointConfig(p, win)


def circular_distance(a, b, L):
    d = np.mod(np.asarray(a) - np.asarray(b), L)
    return np.minimum(d, L - d)


# ---------------------------------------------------------------------------
# batch counting
# ---------------------------------------------------------------------------

def count_matrix(spec, boxes, n_trials, seed, t_values=(0.0,), workers=1):
    """Counts ``C[i, k, n]`` of trial n's configuration, flowed by t_values[i],
    inside boxes[k].

    Trials are drawn in fixed blocks of :data:`BLOCK`, block b seeded by
    (seed, b), so the result is independent of ``workers``.
    """
    m = _window_mass(spec)
    box_arr = [b.as_array() for b in boxes]
    L = spec.window.L

    def block(b):
        lo = b * BLOCK
        size = min(BLOCK, n_trials - lo)
        rng = np.random.default_rng([int(seed), b])
        counts = rng.poisson(m, size) if m > 0 else np.zeros(size, dtype=np.int64)
        pts = _sample_points(spec, rng, int(counts.sum()))
        trial = np.repeat(np.arange(size), counts)
        out = np.empty((len(t_values), len(boxes), size), dtype=np.int64)
        for i, t in enumerate(t_values):
            moved = pts
            if t != 0.0:
                moved = pts.copy()
                moved[:, 2] = np.mod(pts[:, 2] + pts[:, 0] * t, L)
            for k, ba in enumerate(box_arr):
                out[i, k] = _kernels.box_counts(trial, moved, ba, size)
        return out

    n_blocks = -(-n_trials // BLOCK)
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    return np.concatenate(parts, axis=2)


# ---------------------------------------------------------------------------
# verification reports
# ---------------------------------------------------------------------------

def _row(check, parameter, theoretical, empirical, lo, hi, note=""):
    return {
        "check_name": check,
        "parameter": parameter,
        "theoretical": float(theoretical),
        "empirical": float(empirical),
        "band_low": float(lo),
        "band_high": float(hi),
        "pass": bool(lo <= empirical <= hi),
        "note": note,
    }


def poisson_pmf(mu, j):
    return math.exp(-mu) * mu ** j / math.factorial(j)


def count_law_rows(counts, mu, j_max, label, n_sigma=3.0):
    """Empirical P(count = j) against the Poisson law, j = 0..j_max, plus a
    tail row for j > 10 mu."""
    N = counts.size
    freq = np.bincount(counts, minlength=j_max + 1)
    rows = []
    for j in range(j_max + 1):
        p = poisson_pmf(mu, j)
        half = n_sigma * math.sqrt(p * (1 - p) / N)
        rows.append(_row("c1_count_law", f"{label};mu={mu:g};j={j}", p, freq[j] / N,
                         p - half, p + half))
    j_tail = max(j_max + 1, math.floor(10 * mu) + 1)
    p_tail = float(stats.poisson.sf(j_tail - 1, mu))
    half = n_sigma * math.sqrt(p_tail * (1 - p_tail) / N)
    emp = float(np.mean(counts >= j_tail))
    rows.append(_row("c1_tail", f"{label};mu={mu:g};j>={j_tail}", p_tail, emp,
                     max(0.0, p_tail - half), p_tail + half))
    return rows


def _pooled_gof(counts, mu, min_expected=5.0):
    """Chi-square goodness of fit of counts to Poisson(mu), tail pooled."""
    N = counts.size
    j = 0
    obs, exp = [], []
    acc = 0.0
    while True:
        p = poisson_pmf(mu, j)
        if N * stats.poisson.sf(j, mu) < min_expected:
            obs.append(int(np.sum(counts >= j)))
            exp.append(N * stats.poisson.sf(j - 1, mu))
            break
        obs.append(int(np.sum(counts == j)))
        exp.append(N * p)
        acc += p
        j += 1
    obs, exp = np.array(obs, dtype=float), np.array(exp)
    exp *= N / exp.sum()
    if obs.size < 2:
        return 1.0
    return float(stats.chisquare(obs, exp).pvalue)


def cylinder_verify(spec, K, K2, N, seed, j_max=8, t_values=(0.5, 1.7, 12.25),
                    workers=1, alpha=1e-3):
    """Monte-Carlo check of the cylinder laws and their flow invariance.

    Rows: Poisson law of the count in K and in K2 (3-sigma binomial bands),
    count covariance of the disjoint K, K2 (band 3 sqrt(mu mu') / sqrt(N)),
    chi-square independence, and for each t the Poisson goodness of fit of
    the count in K after the flow together with the covariance after flow.
    """
    if not K.disjoint(K2):
        raise ValueError("K and K2 overlap")
    full = spec.window.box()
    if not (K.inside(full) and K2.inside(full)):
        raise ValueError("sub-windows must lie inside the sampling window")
    if N < 10_000:
        raise ValueError("N must be at least 1e4")
    mu1, mu2 = spec.intensity(K), spec.intensity(K2)
    ts = (0.0, *t_values)
    C = count_matrix(spec, [K, K2], N, seed, ts, workers)
    rows = count_law_rows(C[0, 0], mu1, j_max, "K")
    rows += count_law_rows(C[0, 1], mu2, j_max, "K2")
    for i, t in enumerate(ts):
        a, b = C[i, 0], C[i, 1]
        cov = float(np.mean(a * b) - np.mean(a) * np.mean(b))
        band = 3 * math.sqrt(mu1 * mu2 / N)
        rows.append(_row("c2_covariance", f"t={t:g}", 0.0, cov, -band, band))
        if t == 0.0:
            rows.append(_independence_row(a, b, alpha))
        else:
            p = _pooled_gof(a, mu1)
            rows.append(_row("flow_invariance_gof", f"t={t:g}", 1.0, p, alpha, 1.0,
                             "chi-square p-value of Poisson law after flow"))
    return rows


def _independence_row(a, b, alpha):
    ca = np.minimum(a, _pool_cut(a))
    cb = np.minimum(b, _pool_cut(b))
    table = np.zeros((ca.max() + 1, cb.max() + 1))
    np.add.at(table, (ca, cb), 1)
    table = table[table.sum(1) > 0][:, table.sum(0) > 0]
    if min(table.shape) < 2:
        p = 1.0
    else:
        p = float(stats.chi2_contingency(table, correction=False).pvalue)
    return _row("c2_independence", "t=0", 1.0, p, alpha, 1.0,
                "chi-square p-value of the K x K2 contingency table")


def _pool_cut(c, min_count=50):
    freq = np.bincount(c)
    tail = np.cumsum(freq[::-1])[::-1]
    ok = np.nonzero(tail >= min_count)[0]
    return int(ok[-1]) if ok.size else 0


def poisson_verify_simple(mu, j_max, N, seed, workers=1):
    """(c1) rows for a canonical window of mass ``mu`` (kappa = delta_1)."""
    spec = ProductFlowSpec(AtomicKappa(AtomicMeasure(((1.0, 1.0),))),
                           Window((0.5, 2.0), (0.0, float(mu)), 1.0))
    C = count_matrix(spec, [spec.window.box()], N, seed, (0.0,), workers)
    return count_law_rows(C[0, 0], mu, j_max, "W")[: j_max + 1]


# ---------------------------------------------------------------------------
# conjugacy and measure preservation
# ---------------------------------------------------------------------------

def conjugacy_errors(spec, n, seed, h_range=(0.25, 4.0), t_range=(-10.0, 10.0)):
    """Max coordinate errors of ``Q_h^{-1} T_t Q_h = T_{ht}`` and of
    ``Q_{1/h} Q_h = id`` over ``n`` seeded (point, t, h) triples."""
    rng = np.random.default_rng(seed)
    w = spec.window
    pts = _sample_points(spec, rng, n)
    ts = rng.uniform(*t_range, n)
    hs = np.exp(rng.uniform(math.log(h_range[0]), math.log(h_range[1]), n))
    conj = np.zeros(3)
    inv = np.zeros(3)
    for x, t, h in zip(pts, ts, hs):
        cfg = PointConfig(x[None, :], w)
        q = q_transform(spec, h, cfg)
        back = q_transform(spec, 1.0 / h, apply_flow(spec, t, q))
        ref = apply_flow(spec, h * t, cfg)
        d = np.abs(back.points[0] - ref.points[0])
        d[2] = circular_distance(back.points[0, 2], ref.points[0, 2], w.L)
        conj = np.maximum(conj, d / np.maximum(1.0, np.abs(ref.points[0])))
        rt = q_transform(spec, 1.0 / h, q).points[0]
        e = np.abs(rt - x) / np.maximum(1.0, np.abs(x))
        inv = np.maximum(inv, e)
    return {"conjugacy": conj, "inverse": inv}


def q_preservation_pvalue(kappa, h, n, seed, y_max=1.0, s_bins=8, y_bins=4, sub_s=None,
                          sub_y=None):
    """Two-sample chi-square p-value comparing kappa x Unif[0, y_max] with its
    image under (s, y) -> (h s, y D_h(s)) on a common sub-window."""
    rng = np.random.default_rng(seed)
    s = kappa.sample(rng, n, 0.0, math.inf)
    y = rng.uniform(0.0, y_max, n)
    s2 = kappa.sample(rng, n, 0.0, math.inf)
    y2 = rng.uniform(0.0, y_max, n)
    d = kappa.ratio(s2, h)
    s2, y2 = h * s2, y2 * d
    if sub_s is None:
        sub_s = (math.exp(-1.0), math.exp(1.0))
    if sub_y is None:
        # the image fully covers y <= y_max * min D over the preimage s-range
        pre = np.linspace(sub_s[0] / h, sub_s[1] / h, 257)
        sub_y = (0.0, y_max * float(np.min(kappa.ratio(pre, h))))
    se = np.linspace(*sub_s, s_bins + 1)
    ye = np.linspace(*sub_y, y_bins + 1)
    a, _, _ = np.histogram2d(s, y, [se, ye])
    b, _, _ = np.histogram2d(s2, y2, [se, ye])
    a, b = a.ravel(), b.ravel()
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    # equal sample sizes: (a-b)^2/(a+b) is chi-square with k-1 dof
    chi = float(np.sum((a - b) ** 2 / (a + b)))
    return float(stats.chi2.sf(chi, a.size - 1))


# ---------------------------------------------------------------------------
# quasi-invariance of kappa and the spectral formula
# ---------------------------------------------------------------------------

MEMBER = "member-evidence"
NOT_MEMBER = "not-member"


def kappa_group_test(kappa, h, threshold=1e-3, grid_count=1 << 14):
    """Evidence for ``h`` in the quasi-invariance group of kappa.

    In the log chart kappa_h is kappa translated by log h; the affinity is
    the Hellinger affinity of the two, and ``support_match`` says whether
    the supports coincide (analytically for parametric kappa, cell-wise
    above 1e-12 for grid kappa).
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if kappa.improper:
        raise ValueError("improper kappa: affinity undefined")
    if isinstance(kappa, AtomicKappa):
        aff = kappa.affinity(h)
    else:
        c = math.log(h)
        lo, hi = kappa.log_window()
        pad = abs(c) + 0.05 * (hi - lo) + 1e-3
        win = (lo - pad, hi + pad)
        if isinstance(kappa, GridKappa):
            base = kappa.grid.normalized()
            moved = GridDensity.from_function(LOGPOS, base.window, base.grid_count,
                                              lambda t: base.interp(t - c))
            aff = hellinger_affinity(base, moved.normalized()) if moved.mass > 0 else 0.0
        else:
            aff = hellinger_affinity(kappa.to_grid(win, grid_count),
                                     kappa.to_grid(win, grid_count, shift=c))
    match = kappa.support_matches(h)
    verdict = MEMBER if (match and aff > threshold) else NOT_MEMBER
    return {"affinity": aff, "support_match": match, "verdict": verdict}


def tau_spectral(sigma_V, kappa, s_grid, window=None, grid_count=None):
    """``tau = int sigma_s dkappa(s)`` by quadrature over ``s_grid``.

    Node weights are kappa-masses of the Voronoi cells of the nodes.  Each
    scaled copy moves the atoms (or grid-node masses) of ``sigma_V`` and
    deposits them on ``window`` (default: the window of a grid ``sigma_V``),
    which conserves mass exactly up to window truncation.
    """
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=np.float64))
    wts = kappa.quadrature_weights(s_grid)
    expected = sigma_V.mass * float(np.sum(wts))
    if isinstance(sigma_V, AtomicMeasure):
        if window is None or grid_count is None:
            raise ValueError("an atomic sigma_V needs an output window and grid_count")
        pairs = []
        for s, w in zip(s_grid, wts):
            if w > 0:
                pairs += [(p * s, q * w) for p, q in sigma_V.atoms]
        tau = AtomicMeasure.from_pairs(pairs).rasterize(LINE, window, grid_count)
    else:
        if len(s_grid) == 1 and window is None:
            tau = sigma_V.scaled(wts[0]) if wts[0] != 1.0 else sigma_V
            if s_grid[0] != 1.0:
                tau = pushforward(tau, "scale", s_grid[0], window=sigma_V.window)
        else:
            # node masses are moved and deposited, so no mass is lost to
            # interpolating a discontinuous density
            win = window or sigma_V.window
            n = grid_count or sigma_V.grid_count
            dx = (win[1] - win[0]) / n
            x, m = sigma_V.nodes, sigma_V.weights()
            acc = np.zeros(n)
            for s, w in zip(s_grid, wts):
                if w > 0:
                    acc += _kernels.linear_deposit(s * x, w * m, win[0], dx, n)
            tau = GridDensity(sigma_V.domain, win, acc)
    if abs(tau.mass - expected) > 1e-6 * max(1.0, expected):
        raise NumericalGuardError("tau window truncation",
                                  f"mass {tau.mass:.9g} vs expected {expected:.9g}")
    return tau


def orthogonality_report(sigma_V, s_values):
    """Hellinger affinity of sigma_V with its image under each scaling s."""
    out = []
    for s in s_values:
        if isinstance(sigma_V, AtomicMeasure):
            base = AtomicMeasure.from_pairs(zip(sigma_V.positions, sigma_V.weights / sigma_V.mass))
            aff = hellinger_affinity(base, pushforward(base, "scale", s))
        else:
            base = sigma_V.normalized()
            moved = pushforward(base, "scale", s, window=base.window)
            if moved.mass <= 0:
                aff = 0.0
            else:
                aff = hellinger_affinity(base, moved.normalized())
        out.append((float(s), float(aff)))
    return out
