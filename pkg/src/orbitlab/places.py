"""Exact rational scalars and per-place absolute values.

Scalars are stdlib ``fractions.Fraction`` (always in lowest terms with a
positive denominator, which is exactly the normal form we need).  A
*place* is either the archimedean place or a finite place attached to a
prime p.  At a finite place the absolute value |x|_p = p^(-v_p(x)) is an
exact rational; at the archimedean place it is the usual |x|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

Rational = Fraction

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3e24."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def as_rational(x) -> Fraction:
    """Coerce int/str/Fraction to an exact rational.

    Strings use the "a/b" form also accepted in config files and CSV
    matrix literals.  Floats are rejected: callers must be explicit
    about where exactness ends.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact rational: {x!r}")


@dataclass(frozen=True, order=True)
class Place:
    """One place of Q: ``Place.real()`` or ``Place.finite(p)``."""

    p: int  # 0 encodes the archimedean place, else a prime

    def __post_init__(self):
        if self.p != 0 and not is_prime(self.p):
            raise ValueError(f"finite place needs a prime, got {self.p}")

    @classmethod
    def real(cls) -> "Place":
        return cls(0)

    @classmethod
    def finite(cls, p: int) -> "Place":
        if p == 0:
            raise ValueError("finite place needs a prime")
        return cls(p)

    @property
    def is_finite(self) -> bool:
        return self.p != 0

    def __repr__(self):
        return "Place(inf)" if self.p == 0 else f"Place({self.p})"


def padic_valuation(x, p: int):
    """v_p(x) for rational x; v_p(0) is +infinity (math.inf)."""
    x = as_rational(x)
    if x == 0:
        return math.inf
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    v = 0
    num = x.numerator
    while num % p == 0:
        num //= p
        v += 1
    den = x.denominator
    while den % p == 0:
        den //= p
        v -= 1
    return v


def padic_abs(x, p: int) -> Fraction:
    """|x|_p = p^(-v_p(x)) as an exact rational; |0|_p = 0."""
    v = padic_valuation(x, p)
    if v is math.inf:
        return Fraction(0)
    return Fraction(p) ** (-v)


def is_p_integral(x, p: int) -> bool:
    return padic_valuation(x, p) >= 0


def floor_log(x, p: int) -> int:
    """E(ln_p x): largest j with p^j <= x, exact even for float x.

    Floats convert to Fraction losslessly, so no log-rounding artifacts
    near powers of p.
    """
    x = Fraction(x) if isinstance(x, float) else as_rational(x)
    if x <= 0:
        raise ValueError("floor_log needs x > 0")
    j = 0
    if x >= 1:
        while Fraction(p) ** (j + 1) <= x:
            j += 1
    else:
        while Fraction(p) ** j > x:
            j -= 1
    return j


def abs_at_place(x, place: Place):
    """|x| at the given place: exact Fraction when finite, float else."""
    if place.is_finite:
        return padic_abs(x, place.p)
    return abs(float(as_rational(x)))


# ---------------------------------------------------------------------------
# archimedean precision and symbolic entries

_REAL_DPS = 0  # 0 = hardware doubles


def set_real_precision(dps: int) -> None:
    """Digits of working precision for archimedean evaluation.

    0 restores hardware doubles; anything larger routes symbolic
    entries through mpmath at that many digits.
    """
    global _REAL_DPS
    if dps < 0:
        raise ValueError("precision must be >= 0")
    _REAL_DPS = dps


def get_real_precision() -> int:
    return _REAL_DPS


def evaluate_symbolic(text):
    """Evaluate a vector-entry literal.

    Accepted forms: "a/b", "sqrt(a/b)", and "a/b*sqrt(c/d)".  Pure
    rationals come back as Fraction; anything with a surd comes back as
    float (or mpmath.mpf under extended precision).
    """
    if isinstance(text, (int, Fraction)):
        return as_rational(text)
    if isinstance(text, float):
        return text
    s = str(text).strip().replace(" ", "")
    coef = Fraction(1)
    if "*" in s:
        left, s = s.split("*", 1)
        coef = as_rational(left)
    if s.startswith("sqrt(") and s.endswith(")"):
        rad = as_rational(s[5:-1])
        if rad < 0:
            raise ValueError(f"negative radicand in {text!r}")
        root = _exact_sqrt(rad)
        if root is not None:
            return coef * root
        if _REAL_DPS > 0:
            with mpmath.workdps(_REAL_DPS):
                return mpmath.mpf(coef.numerator) / coef.denominator * mpmath.sqrt(
                    mpmath.mpf(rad.numerator) / rad.denominator
                )
        return float(coef) * math.sqrt(rad)
    return coef * as_rational(s)


def _exact_sqrt(q: Fraction):
    rn = math.isqrt(q.numerator)
    rd = math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def continued_fraction(x, depth: int = 48, big: int = 10**9):
    """Partial quotients of x until they blow up or depth is reached.

    A float that came from a small rational ends in a huge quotient
    almost immediately; genuine irrationals keep producing moderate
    quotients.  Used only as a heuristic.
    """
    quotients = []
    x = mpmath.mpf(x) if _REAL_DPS > 0 else float(x)
    for _ in range(depth):
        a = math.floor(x)
        quotients.append(int(a))
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
        if x > big:
            break
    return quotients


def looks_rational(x, depth: int = 48, big: int = 10**9) -> bool:
    """CF-depth heuristic: does x behave like a small rational?"""
    if isinstance(x, (int, Fraction)):
        return True
    q = continued_fraction(x, depth=depth, big=big)
    return len(q) < depth
