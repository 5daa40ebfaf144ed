"""Lifting a circle measure to the line and on to a symmetric measure on R*.

The chain is  rho (circle)  ->  rho' (real line)  ->  sigma (R*, symmetric).

The lift used here tiles the line with integer translates of the circle
density weighted by ``w_k = 2^{-|k|}/3``.  Folding it back mod 1 gives a
constant multiple of rho, and integer translations change the density by a
factor of at most 2, so the integers sit inside its quasi-invariance group.
The identification R -> R*_+ is ``t -> e^t``, so in the log chart sigma's
positive half is just ``rho'/2`` relabelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import NumericalGuardError
from .measures import LINE, LOGPOS, GridDensity, next_pow2
from .riesz import RieszSpec, as_fraction, h_membership_terms, partial_product


def tile_weight(k):
    return 2.0 ** (-abs(k)) / 3.0


@dataclass(frozen=True)
class LiftSpec:
    """Parameters of the standard lift.

    ``cells_per_unit`` is the circle raster size (power of two); the lift
    covers tiles ``k = -K..K``.
    """

    source: RieszSpec
    K: int
    J: int
    cells_per_unit: int = 1024

    @property
    def captured_mass(self):
        return math.fsum(tile_weight(k) for k in range(-self.K, self.K + 1))

    @property
    def deficit(self):
        """Lift mass outside the K tiles: (2/3) 2^-K <= 2^-K."""
        return 2.0 ** (1 - self.K) / 3.0

    def to_json(self):
        return {"source": self.source.to_json(), "K": self.K, "J": self.J,
                "cells_per_unit": self.cells_per_unit}


def circle_density(spec):
    """Raster of the J-th partial product on the circle grid of the lift."""
    nJ = spec.source.n[spec.J - 1]
    c = spec.cells_per_unit
    if 1.0 / c > 1.0 / (4 * nJ):
        raise NumericalGuardError("lift grid too coarse",
                                  f"cell width 1/{c} exceeds 1/(4*n_J) = 1/{4 * nJ}")
    return partial_product(spec.source, spec.J).rasterize(c)


def standard_lift(spec):
    """Tiled lift of the partial-product density to the real line.

    The window is [-K, -K + 2^m) with 2^m >= 2K + 1 unit tiles (padding is
    zero), so the node count stays a power of two.
    """
    rho = circle_density(spec)
    c = spec.cells_per_unit
    units = next_pow2(2 * spec.K + 1)
    vals = np.zeros(units * c)
    for k in range(-spec.K, spec.K + 1):
        off = (k + spec.K) * c
        vals[off:off + c] = tile_weight(k) * rho.values
    return GridDensity(LINE, (-float(spec.K), float(units - spec.K)), vals)


@dataclass(frozen=True, eq=False)
class SigmaMeasure:
    """Symmetric measure on R* stored by its positive half in the log chart.

    ``half`` is a ``pos-reals-log`` grid: the node t carries the mass of
    sigma at s = e^t; the same mass sits at -e^t.
    """

    half: GridDensity
    symmetric: bool = True

    def __post_init__(self):
        if self.half.domain != LOGPOS:
            raise ValueError("sigma's half must live on the pos-reals-log chart")

    @property
    def mass(self):
        return 2.0 * self.half.mass

    def atoms(self):
        """(positions, weights) of the discretised measure, both signs."""
        w = self.half.weights()
        keep = w > 0
        s = np.exp(self.half.nodes[keep])
        w = w[keep]
        return np.concatenate([-s[::-1], s]), np.concatenate([w[::-1], w])

    def interval_mass(self, a, b):
        """sigma([a, b)) for the discretised measure."""
        x, w = self.atoms()
        return float(np.sum(w[(x >= a) & (x < b)]))

    def to_line(self, window, grid_count):
        """Deposit sigma on a real-line grid (mass-preserving linear split)."""
        x, w = self.atoms()
        lo, hi = window
        dx = (hi - lo) / grid_count
        vals = _kernels.linear_deposit(x, w, lo, dx, grid_count)
        g = GridDensity(LINE, (lo, hi), vals)
        if not math.isclose(g.mass, self.mass, rel_tol=1e-9):
            raise NumericalGuardError("sigma line window truncation",
                                      f"kept {g.mass:.12g} of {self.mass:.12g}")
        return g


def build_sigma(rho_prime):
    """sigma with positive half ``rho'/2`` in the log chart (t = log s)."""
    if rho_prime.domain != LINE:
        raise ValueError("the lift must live on the real line")
    return SigmaMeasure(GridDensity(LOGPOS, rho_prime.window, 0.5 * rho_prime.values))


# ---------------------------------------------------------------------------
# membership of scalings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogScale:
    """The nonzero real ``sign * exp(log_abs)`` with an exact exponent."""

    log_abs: Fraction
    sign: int = 1

    def __float__(self):
        return self.sign * math.exp(float(self.log_abs))


SNAP_DENOMINATOR = 10_000
SNAP_TOL = 1e-12


def theta_of_scale(s):
    """Circle point ``(log|s|) mod 1`` as an exact fraction.

    For a float ``s`` the value is snapped to a rational with denominator at
    most ``SNAP_DENOMINATOR`` when within ``SNAP_TOL``; otherwise the exact
    binary value of the float is used.
    """
    if isinstance(s, LogScale):
        return s.log_abs - math.floor(s.log_abs)
    s = float(s)
    if s == 0:
        raise ValueError("s must be nonzero")
    t = math.log(abs(s))
    th = t - math.floor(t)
    snapped = Fraction(th).limit_denominator(SNAP_DENOMINATOR)
    if abs(float(snapped) - th) <= SNAP_TOL * max(1.0, abs(t)):
        return snapped - math.floor(snapped)
    return as_fraction(th)


def parse_scale(obj):
    """JSON scale: a number or ``{"log_abs": "p/q", "sign": -1}``."""
    if isinstance(obj, dict):
        return LogScale(as_fraction(obj["log_abs"]), int(obj.get("sign", 1)))
    return float(obj)


MEMBER = "member-evidence"
DIVERGENT = "divergence-evidence"


def membership_verdict(terms, tail_tol=1e-9, conv_tol=1e-6):
    """Evidence label from the last quarter of the series terms.

    Member when those terms all vanish below ``tail_tol``, or when they are
    strictly decreasing with a sum below ``conv_tol``.
    """
    q = max(1, len(terms) // 4)
    tail = np.asarray(terms[-q:])
    if np.all(tail < tail_tol):
        return MEMBER
    if q > 1 and np.all(np.diff(tail) < 0) and tail.sum() < conv_tol:
        return MEMBER
    return DIVERGENT


def h_sigma_membership(source, s, J, tail_tol=1e-9, conv_tol=1e-6):
    """Evidence for ``s`` in the quasi-invariance group of sigma.

    ``s`` is tested through ``theta = (log|s|) mod 1``; the sign of ``s`` is
    irrelevant since the group is symmetric under negation.
    """
    if not isinstance(s, LogScale) and float(s) == 0:
        raise ValueError("s must be nonzero")
    theta = theta_of_scale(s)
    terms = h_membership_terms(source, theta, J)
    return {
        "theta": theta,
        "series": float(math.fsum(terms)),
        "verdict": membership_verdict(terms, tail_tol, conv_tol),
    }
