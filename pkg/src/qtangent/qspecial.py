"""q-series building blocks: infinite q-Pochhammer products and the phi/psi factor families.

Everything here is a pure function of its arguments.  The kernel densities
are built from two families of quadratic forms,

    phi_{q,k}(delta, x, y) = (1 - e^{-2 delta} q^{2k})^2
                             - (1-q) e^{-delta} q^k (1 + e^{-2 delta} q^{2k}) x y
                             + (1-q) e^{-2 delta} q^{2k} (x^2 + y^2)

    psi_{q,k}(x) = (1 + q^k)^2 - (1-q) x^2 q^k

together with their two-time analogues ``phi_star``/``psi_star``, and the
Euler-type products (a; q)_inf = prod_{k>=0} (1 - a q^k).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentTerm, NonConvergent, TruncationExceeded

__all__ = [
    "QParams",
    "TruncationPolicy",
    "DEFAULT_POLICY",
    "q_pochhammer_inf",
    "phi_qk",
    "psi_qk",
    "phi_star",
    "psi_star",
    "tail_product_ratio",
    "series_terms",
]


@dataclass(frozen=True)
class QParams:
    """Deformation parameter q in (-1, 1) plus the support endpoints it induces.

    The marginal law lives on the closed interval [x_minus, x_plus] with
    x_plus = 2/sqrt(1-q).
    """

    q: float
    x_plus: float = field(init=False)
    x_minus: float = field(init=False)

    def __post_init__(self):
        if not -1.0 < self.q < 1.0:
            raise NonConvergent(f"q must lie in (-1, 1), got {self.q}")
        xp = 2.0 / math.sqrt(1.0 - self.q)
        object.__setattr__(self, "x_plus", xp)
        object.__setattr__(self, "x_minus", -xp)


@dataclass(frozen=True)
class TruncationPolicy:
    """Where to cut the infinite products.

    Products are truncated once the next factor differs from 1 by less than
    ``rel_tol * (1 - |q|)``; geometric decay of the factors then bounds the
    total relative error by a small multiple of ``rel_tol``.
    """

    rel_tol: float = 1e-14
    k_max: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    def threshold(self, q):
        return self.rel_tol * (1.0 - abs(q))


DEFAULT_POLICY = TruncationPolicy()


def series_terms(q, policy=DEFAULT_POLICY, extra_decades=2):
    """Number of product terms after which |q|^k drops below the policy threshold.

    ``extra_decades`` adds safety margin for O(1) constants multiplying q^k in
    the factor families.  Raises TruncationExceeded if k_max is insufficient.
    """
    if q == 0.0:
        return 1
    thr = policy.threshold(q) * 10.0 ** (-extra_decades)
    n = int(math.ceil(math.log(thr) / math.log(abs(q))))
    n = max(n, 1)
    if n > policy.k_max:
        raise TruncationExceeded(
            f"need {n} terms at q={q} but k_max={policy.k_max}"
        )
    return n


def q_pochhammer_inf(a, q, policy=DEFAULT_POLICY):
    """Infinite q-Pochhammer product (a; q)_inf = prod_{k>=0} (1 - a q^k).

    Truncates at the first k with |a q^k| below the policy threshold.  The
    running product is held as a normalized mantissa with a separate binary
    exponent, so huge factors and long runs of near-unit factors near
    q -> +-1 accumulate without overflow or underflow.
    """
    if not abs(q) < 1.0:
        raise NonConvergent(f"(a; q)_inf requires |q| < 1, got q={q}")
    if q == 0.0:
        return 1.0 - a
    thr = policy.threshold(q)
    mant = 1.0
    exp2 = 0
    term = float(a)
    for k in range(policy.k_max + 1):
        mant, e = math.frexp(mant * (1.0 - term))
        exp2 += e
        if abs(term) < thr:
            return math.ldexp(mant, exp2)
        term *= q
    raise TruncationExceeded(
        f"(a; q)_inf with a={a}, q={q} needs more than k_max={policy.k_max} factors"
    )


def phi_qk(q, k, delta, x, y):
    """The quadratic form phi_{q,k}(delta, x, y) entering the q-OU kernel.

    Total on its domain; broadcasts over any of k, x, y; exactly symmetric
    under swapping x and y.
    """
    qk = np.power(q, k)
    q2k = qk * qk
    e1 = math.exp(-delta)
    e2 = e1 * e1
    xy = x * y
    return (
        (1.0 - e2 * q2k) ** 2
        - (1.0 - q) * e1 * qk * (1.0 + e2 * q2k) * xy
        + (1.0 - q) * e2 * q2k * (x * x + y * y)
    )


def psi_qk(q, k, x):
    """psi_{q,k}(x) = (1 + q^k)^2 - (1-q) x^2 q^k, defined for k >= 1."""
    qk = np.power(q, k)
    return (1.0 + qk) ** 2 - (1.0 - q) * x * x * qk


def phi_star(q, k, t1, t2, y1, y2):
    """Two-time quadratic form phi*_{q,k} entering the q-BM kernel (k >= 0)."""
    qk = np.power(q, k)
    q2k = qk * qk
    return (
        (t2 - t1 * q2k) ** 2
        - (1.0 - q) * qk * (t2 + t1 * q2k) * y1 * y2
        + (1.0 - q) * (t1 * y2 * y2 + t2 * y1 * y1) * q2k
    )


def psi_star(q, k, t1, t2, y2):
    """psi*_{q,k}(t1, t2, y2) = (t2 - t1 q^k)(1 - q^{k+1})[t2 (1+q^k)^2 - (1-q) y2^2 q^k]."""
    qk = np.power(q, k)
    return (t2 - t1 * qk) * (1.0 - q * qk) * (t2 * (1.0 + qk) ** 2 - (1.0 - q) * y2 * y2 * qk)


def tail_product_ratio(q, numerator_terms, denominator_terms, policy=DEFAULT_POLICY, k_start=1):
    """Truncated product of term ratios prod_k num(k)/den(k).

    ``numerator_terms`` and ``denominator_terms`` are callables k -> float
    whose values approach 1 geometrically in k (rate |q|).  Truncation stops
    at the first k where both factors are within the policy threshold of 1.
    Accumulation is mantissa/exponent-normalized like q_pochhammer_inf.

    Raises DivergentTerm if a denominator factor is <= 0 inside the
    truncation range, TruncationExceeded if k_max is hit first.
    """
    if not abs(q) < 1.0:
        raise NonConvergent(f"tail products require |q| < 1, got q={q}")
    thr = policy.threshold(q)
    mant = 1.0
    exp2 = 0
    for k in range(k_start, k_start + policy.k_max + 1):
        num = float(numerator_terms(k))
        den = float(denominator_terms(k))
        if den <= 0.0:
            raise DivergentTerm(f"denominator term {den} <= 0 at k={k}")
        mant, e = math.frexp(mant * (num / den))
        exp2 += e
        if abs(num - 1.0) < thr and abs(den - 1.0) < thr:
            return math.ldexp(mant, exp2)
        if q == 0.0:
            return math.ldexp(mant, exp2)
    raise TruncationExceeded(
        f"product ratio at q={q} needs more than k_max={policy.k_max} terms"
    )
