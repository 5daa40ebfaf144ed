"""Riesz products on the circle.

A Riesz product is the weak-* limit of the probability measures
``prod_{k<=J} P_k(z) dz`` with ``P_k(z) = 1 + a_k z^{n_k}/2 + conj(a_k) z^{-n_k}/2``.
It is singular in general, so it is represented here by its exact Fourier
coefficients and by finite partial products.

Frequencies are Python ints (``n_j = j!`` overflows any fixed-width type
quickly) and the angle ``theta * n_j mod 1`` is reduced exactly in rational
arithmetic before any floating point is involved.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType

import numpy as np

from .measures import TrigPoly


class FactorialSeq(Sequence):
    """The lazy sequence 1!, 2!, ..., J!  (never materialised as a whole)."""

    def __init__(self, J):
        self.J = int(J)

    def __len__(self):
        return self.J

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(self.J))]
        if i < 0:
            i += self.J
        if not 0 <= i < self.J:
            raise IndexError(i)
        return _factorial(i + 1)

    def __repr__(self):
        return f"FactorialSeq({self.J})"


@lru_cache(maxsize=256)
def _factorial(j):
    return math.factorial(j)


@dataclass(frozen=True, eq=False)
class RieszSpec:
    """Frequencies ``n`` and weights ``a`` generating a Riesz product.

    By default the lacunarity ``n_j > 2(n_1 + ... + n_{j-1})`` is enforced,
    since it is what makes signed representations unique.  Pass
    ``require_lacunary=False`` to build a spec that only supports the
    operations not relying on uniqueness (partial products, the membership
    series, the criteria sums).
    """

    n: Sequence
    a: Sequence
    family: str | None = None
    require_lacunary: bool = True

    def __post_init__(self):
        if len(self.n) != len(self.a):
            raise ValueError("n and a must have the same length")
        if len(self.n) == 0:
            raise ValueError("a Riesz spec needs at least one factor")
        a = tuple(complex(x) for x in self.a)
        if any(abs(x) > 1 + 1e-12 for x in a):
            raise ValueError("weights must satisfy |a_j| <= 1")
        object.__setattr__(self, "a", a)
        if not isinstance(self.n, FactorialSeq):
            n = tuple(int(x) for x in self.n)
            if any(x <= 0 for x in n) or any(y <= x for x, y in zip(n, n[1:])):
                raise ValueError("frequencies must be positive and strictly increasing")
            object.__setattr__(self, "n", n)
        if self.require_lacunary and not self.lacunary:
            j = self.first_lacunarity_violation()
            raise ValueError(f"lacunarity n_j > 2*sum(n_i, i<j) fails at j={j}")

    @classmethod
    def factorial(cls, J, a=1.0):
        """``n_j = j!`` with constant weight ``a``.

        Note that 2! = 2*1! and 3! = 2*(1!+2!), so strict lacunarity fails at
        j = 2, 3 and this spec is built with ``require_lacunary=False``.
        """
        return cls(FactorialSeq(J), (complex(a),) * int(J), family="factorial",
                   require_lacunary=False)

    @property
    def J_max(self):
        return len(self.n)

    @property
    def lacunary(self):
        return self.first_lacunarity_violation() is None

    def first_lacunarity_violation(self):
        if self.family == "factorial":
            return 2 if self.J_max >= 2 else None
        prefix = 0
        for j, nj in enumerate(self.n, start=1):
            if not nj > 2 * prefix:
                return j
            prefix += nj
        return None

    def ratio(self, j):
        """``n_j / n_{j+1}`` as a float (1-based ``j``)."""
        if self.family == "factorial":
            return 1.0 / (j + 1)
        return self.n[j - 1] / self.n[j]

    def total(self, J=None):
        J = self.J_max if J is None else J
        return sum(self.n[k] for k in range(J))

    def to_json(self):
        if self.family == "factorial" and all(x == 1 for x in self.a):
            return {"family": "factorial", "J": self.J_max}
        return {"n": [int(x) for x in self.n], "a": [[x.real, x.imag] for x in self.a]}

    @classmethod
    def from_json(cls, obj):
        if obj.get("family") == "factorial":
            return cls.factorial(int(obj["J"]), complex(*_pair(obj.get("a", 1.0))))
        if "family" in obj:
            raise ValueError(f"unknown family {obj['family']!r}")
        return cls(obj["n"], [complex(*_pair(x)) for x in obj["a"]],
                   require_lacunary=obj.get("require_lacunary", True))


def _pair(x):
    if isinstance(x, (list, tuple)):
        return float(x[0]), float(x[1])
    return float(x), 0.0


@dataclass(frozen=True)
class SignedRepresentation:
    """Sparse map ``j -> k_j`` in {-1, +1} with ``m = sum k_j n_j``."""

    k: MappingProxyType

    def value(self, spec):
        return sum(kj * spec.n[j - 1] for j, kj in self.k.items())

    def __len__(self):
        return len(self.k)


def _require_unique(spec):
    if not spec.lacunary:
        raise ValueError("signed representations are not unique for a non-lacunary spec "
                         f"(fails at j={spec.first_lacunarity_violation()})")


def decompose(spec, m):
    """Signed-digit representation of ``m`` by the top-down greedy rule.

    Returns ``None`` when ``m`` is not a sum of distinct ``+-n_j``.  For a
    non-lacunary spec the greedy answer is still a valid representation
    when one is returned, but it need not be the only one, and ``None`` only
    means the greedy rule found none.
    """
    m = int(m)
    prefix = [0]
    for nj in spec.n:
        prefix.append(prefix[-1] + nj)
    if abs(m) > prefix[-1]:
        return None
    rem = m
    k = {}
    for j in range(spec.J_max, 0, -1):
        if abs(rem) > prefix[j - 1]:
            sgn = 1 if rem > 0 else -1
            k[j] = sgn
            rem -= sgn * spec.n[j - 1]
    if rem != 0:
        return None
    return SignedRepresentation(MappingProxyType(dict(sorted(k.items()))))


def partial_product(spec, J):
    """``prod_{k<=J} P_k`` as a sparse trigonometric polynomial."""
    if not 1 <= J <= spec.J_max:
        raise ValueError(f"J={J} out of range 1..{spec.J_max}")
    poly = TrigPoly({0: 1.0})
    for j in range(J):
        aj = spec.a[j]
        if aj == 0:
            continue
        nj = spec.n[j]
        poly = poly * TrigPoly({0: 1.0, nj: aj / 2, -nj: aj.conjugate() / 2})
    return poly


def fourier_coefficient(spec, m):
    """``rho_hat(m) = int conj(z)^m d rho``.

    Nonzero only on signed sums ``m = sum k_j n_j``, where it equals
    ``prod_{k_j=+1} a_j/2 * prod_{k_j=-1} conj(a_j)/2``.
    """
    _require_unique(spec)
    rep = decompose(spec, m)
    if rep is None:
        return 0j
    acc = 1 + 0j
    for j, kj in rep.k.items():
        aj = spec.a[j - 1]
        acc = acc * (aj / 2 if kj > 0 else aj.conjugate() / 2)
    return acc


# ---------------------------------------------------------------------------
# quasi-invariance series and criteria
# ---------------------------------------------------------------------------

def as_fraction(theta):
    """Exact rational value of ``theta`` (floats convert exactly)."""
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, (int, np.integer)):
        return Fraction(int(theta))
    if isinstance(theta, str):
        return Fraction(theta.strip())
    return Fraction(float(theta))


# cos(2 pi r) for the reduced fractions whose cosine is rational
_EXACT_COS = {
    Fraction(0): 1.0, Fraction(1, 2): -1.0,
    Fraction(1, 4): 0.0, Fraction(3, 4): 0.0,
    Fraction(1, 3): -0.5, Fraction(2, 3): -0.5,
    Fraction(1, 6): 0.5, Fraction(5, 6): 0.5,
}
_EXACT_SIN = {Fraction(0): 0.0, Fraction(1, 2): 0.0, Fraction(1, 4): 1.0, Fraction(3, 4): -1.0}


def _unit(r):
    c = _EXACT_COS.get(r)
    s = _EXACT_SIN.get(r)
    ang = 2 * math.pi * float(r)
    return (math.cos(ang) if c is None else c), (math.sin(ang) if s is None else s)


def h_membership_terms(spec, theta, J=None):
    """Terms ``|a_j|^2 |1 - a_j exp(2 pi i theta n_j)|^2`` for ``j = 1..J``."""
    J = spec.J_max if J is None else int(J)
    if not 1 <= J <= spec.J_max:
        raise ValueError(f"J={J} out of range 1..{spec.J_max}")
    th = as_fraction(theta)
    p, q = th.numerator, th.denominator
    out = np.empty(J)
    for j in range(J):
        aj = spec.a[j]
        r = Fraction((p * spec.n[j]) % q, q)
        c, s = _unit(r)
        re = aj.real * c - aj.imag * s
        out[j] = abs(aj) ** 2 * max(0.0, 1.0 + abs(aj) ** 2 - 2.0 * re)
    return out


def h_membership_series(spec, theta, J=None):
    """Partial sum ``S_J(theta)`` of the quasi-invariance series.

    ``exp(2 pi i theta)`` belongs to the quasi-invariance group of the Riesz
    product exactly when the full series converges.
    """
    return float(math.fsum(h_membership_terms(spec, theta, J)))


def random_thetas(seed, count, bits=256):
    """``count`` reproducible uniform points of [0, 1) as exact fractions."""
    rng = np.random.default_rng(seed)
    words = (bits + 63) // 64
    out = []
    for _ in range(count):
        v = 0
        for w in rng.integers(0, 2**63, size=words, dtype=np.int64):
            v = (v << 63) | int(w)
        out.append(Fraction(v, 1 << (63 * words)))
    return out


def criteria(spec):
    """Criterion sums for the weights and gaps of a Riesz spec.

    ``lacunary_sum``  sum_{j<J} |a_j|^2 (n_j/n_{j+1})^2
    ``weight_sum``    sum_{j<=J} |a_j|^2
    ``tail_bound``    1/J: bound on the remaining lacunary tail when
                      n_j/n_{j+1} = 1/(j+1) and |a_j| <= 1 (factorial family)
    """
    if spec.J_max < 2:
        raise ValueError("criteria need at least two factors")
    J = spec.J_max
    lac = math.fsum(abs(spec.a[j - 1]) ** 2 * spec.ratio(j) ** 2 for j in range(1, J))
    wts = math.fsum(abs(x) ** 2 for x in spec.a)
    return {"lacunary_sum": lac, "weight_sum": wts, "tail_bound": 1.0 / J}
