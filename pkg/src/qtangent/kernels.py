"""Closed-form densities: q-normal marginal, q-OU and q-BM transition kernels,
Cauchy and 1/2-stable Biane kernels, and the free stable marginal semigroups.

All density functions broadcast over their state arguments, return plain
floats for scalar input, and return exactly 0 outside the support of the
target state.  Arguments of square roots are clamped at 0 at the support
boundary where rounding can produce tiny negatives.

For the q-kernels the k = 0 quadratic form is evaluated in a regrouped form
that avoids the catastrophic cancellation the displayed form suffers when
delta -> 0 with x ~ y (the regime every tangent-process study probes):

    phi_{q,0}(d,x,y) = e^{-2d}(1-q)(x-y)^2 + u^2 [e^{-d}(4-(1-q)xy) + u^2],
    u = 1 - e^{-d},

which is an algebraic identity with the displayed quadratic form.  The
k >= 1 factors use the analogous factorisation of their cross terms.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidState, InvalidTime, UnknownProcess
from .qspecial import DEFAULT_POLICY, QParams, q_pochhammer_inf, series_terms

__all__ = [
    "Support",
    "qnormal_pdf",
    "qou_transition_pdf",
    "qbm_transition_pdf",
    "cauchy_transition_pdf",
    "biane_half_pdf",
    "biane_shifted_pdf",
    "half_stable_marginal",
    "cauchy_marginal",
    "support_of",
]

# Batches up to this size evaluate the k-product as one (K, ...) array;
# larger batches loop over k to keep the working set flat.
_VECTOR_K_LIMIT = 1_500_000


@dataclass(frozen=True)
class Support:
    """A (possibly unbounded) interval on which a density lives."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidState(f"support requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)


def _as_float_or_array(_ref, out):
    out = np.asarray(out)
    return out.item() if out.ndim == 0 else out


@lru_cache(maxsize=256)
def _euler_qpoch(q, rel_tol, k_max):
    from .qspecial import TruncationPolicy

    return q_pochhammer_inf(q, q, TruncationPolicy(rel_tol, k_max))


def _phi0_qou(q, delta, x, y):
    # Regrouped phi_{q,0}; exact identity with the displayed quadratic form.
    u = -math.expm1(-delta)
    e1 = math.exp(-delta)
    e2 = e1 * e1
    return e2 * (1.0 - q) * (x - y) ** 2 + u * u * (e1 * (4.0 - (1.0 - q) * x * y) + u * u)


def _qou_tail_product(q, delta, x, y, policy):
    """prod_{k>=1} (1 - e^{-2d} q^k) psi_{q,k}(y) / phi_{q,k}(d, x, y), broadcast over x, y.

    The factored cross term of phi expands to
    e1 qk (y - e1 qk x)(e1 qk y - x) = e1^2 qk^2 (x^2 + y^2) - e1 qk (1 + e1^2 qk^2) x y,
    so each k costs a few fused array operations on precomputed squares.
    """
    K = series_terms(q, policy)
    e1 = math.exp(-delta)
    e2 = e1 * e1
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    bshape = np.broadcast_shapes(xa.shape, ya.shape)
    ks = np.arange(1, K + 1, dtype=float)
    qk_all = np.power(q, ks)
    size = K * max(int(np.prod(bshape)), 1)
    c1 = 1.0 - q
    if size <= _VECTOR_K_LIMIT:
        qk = qk_all.reshape((K,) + (1,) * len(bshape))
        psi = (1.0 + qk) ** 2 - c1 * ya * ya * qk
        phi = (1.0 - e2 * qk * qk) ** 2 + c1 * e1 * qk * (ya - e1 * qk * xa) * (
            e1 * qk * ya - xa
        )
        return np.prod((1.0 - e2 * qk) * psi / phi, axis=0)
    y2 = np.broadcast_to(ya * ya, bshape)
    x2 = xa * xa
    xy = np.broadcast_to(xa * ya, bshape)
    acc = np.ones(bshape)
    tmp = np.empty(bshape)
    num = np.empty(bshape)
    for qk in qk_all:
        a_psi = (1.0 + qk) ** 2
        b_psi = c1 * qk
        s_phi = (1.0 - e2 * qk * qk) ** 2
        sq = c1 * e2 * qk * qk
        cx = c1 * e1 * qk * (1.0 + e2 * qk * qk)
        scale = 1.0 - e2 * qk
        # num = scale * (a_psi - b_psi * y2)
        np.multiply(y2, -b_psi * scale, out=num)
        num += a_psi * scale
        # tmp = s_phi + sq * (x2 + y2) - cx * xy
        np.multiply(y2, sq, out=tmp)
        tmp += sq * x2 + s_phi
        tmp -= cx * xy
        num /= tmp
        acc *= num
    return acc


def qnormal_pdf(p: QParams, x, policy=DEFAULT_POLICY):
    """Density of the q-normal law on [-2/sqrt(1-q), 2/sqrt(1-q)].

    At q = 0 this is the Wigner semicircle law sqrt(4 - x^2)/(2 pi); as
    q -> 1 it approaches the standard normal.
    """
    q = p.q
    xarr = np.asarray(x, dtype=float)
    sq = np.sqrt(np.clip(4.0 - (1.0 - q) * xarr * xarr, 0.0, None))
    K = series_terms(q, policy)
    ks = np.arange(1, K + 1, dtype=float).reshape((K,) + (1,) * xarr.ndim)
    qk = np.power(q, ks)
    prod = np.prod((1.0 + qk) ** 2 - (1.0 - q) * xarr * xarr * qk, axis=0)
    cq = math.sqrt(1.0 - q) * _euler_qpoch(q, policy.rel_tol, policy.k_max) / (2.0 * math.pi)
    out = np.where(np.abs(xarr) >= p.x_plus, 0.0, cq * sq * prod)
    return _as_float_or_array(x, out)


def qou_transition_pdf(p: QParams, delta, x, y, policy=DEFAULT_POLICY):
    """Transition density of the stationary q-OU process over a time lag delta.

    Depends on (s, t) only through delta = t - s.  Zero for target states
    |y| >= x_plus; the conditioning state x must lie in [x_minus, x_plus].
    """
    if not delta > 0.0:
        raise InvalidTime(f"q-OU kernel requires delta > 0, got {delta}")
    q = p.q
    if np.max(np.abs(x)) > p.x_plus * (1.0 + 1e-12):
        raise InvalidState(f"conditioning state x={x} outside [{p.x_minus}, {p.x_plus}]")
    xarr = np.asarray(x, dtype=float)
    yarr = np.asarray(y, dtype=float)
    u2 = -math.expm1(-2.0 * delta)  # 1 - e^{-2 delta}
    phi0 = _phi0_qou(q, delta, xarr, yarr)
    tail = _qou_tail_product(q, delta, xarr, yarr, policy)
    sq = np.sqrt(np.clip(4.0 - (1.0 - q) * yarr * yarr, 0.0, None))
    cq = math.sqrt(1.0 - q) * _euler_qpoch(q, policy.rel_tol, policy.k_max) / (2.0 * math.pi)
    out = np.where(np.abs(yarr) >= p.x_plus, 0.0, cq * u2 * sq / phi0 * tail)
    return _as_float_or_array(y, out)


def _qbm_tail_product(q, t1, t2, y1, y2, policy):
    """prod_{k>=1} psi*_{q,k}(t1,t2,y2) / phi*_{q,k}(t1,t2,y1,y2), broadcast over y1, y2."""
    K = series_terms(q, policy)
    y1a = np.asarray(y1, dtype=float)
    y2a = np.asarray(y2, dtype=float)
    bshape = np.broadcast_shapes(y1a.shape, y2a.shape)
    ks = np.arange(1, K + 1, dtype=float)
    qk_all = np.power(q, ks)
    size = K * max(int(np.prod(bshape)), 1)
    c1 = 1.0 - q
    if size <= _VECTOR_K_LIMIT:
        qk = qk_all.reshape((K,) + (1,) * len(bshape))
        psi = (t2 - t1 * qk) * (1.0 - q * qk) * (
            t2 * (1.0 + qk) ** 2 - c1 * y2a * y2a * qk
        )
        phi = (t2 - t1 * qk * qk) ** 2 + c1 * qk * (y2a - qk * y1a) * (
            t1 * qk * y2a - t2 * y1a
        )
        return np.prod(psi / phi, axis=0)
    # large batches: per-k fused operations on precomputed cross terms (the
    # factored phi* expands to t1 qk^2 y2^2 - qk (t2 + t1 qk^2) y1 y2 + t2 qk^2 y1^2)
    y2sq = np.broadcast_to(y2a * y2a, bshape)
    y1sq = y1a * y1a
    y1y2 = np.broadcast_to(y1a * y2a, bshape)
    acc = np.ones(bshape)
    tmp = np.empty(bshape)
    num = np.empty(bshape)
    for qk in qk_all:
        pref = (t2 - t1 * qk) * (1.0 - q * qk)
        a_psi = pref * t2 * (1.0 + qk) ** 2
        b_psi = pref * c1 * qk
        s_phi = (t2 - t1 * qk * qk) ** 2
        a_phi = c1 * qk * qk * t1
        b_phi = c1 * qk * (t2 + t1 * qk * qk)
        c_phi = c1 * qk * qk * t2
        np.multiply(y2sq, -b_psi, out=num)
        num += a_psi
        np.multiply(y2sq, a_phi, out=tmp)
        tmp -= b_phi * y1y2
        tmp += c_phi * y1sq + s_phi
        num /= tmp
        acc *= num
    return acc


def qbm_transition_pdf(p: QParams, t1, t2, y1, y2, policy=DEFAULT_POLICY):
    """Transition density of the q-Brownian motion from (t1, y1) to (t2, .).

    Supports t1 = 0 only with y1 = 0 (start at the origin).  Zero outside
    the time-t2 support [-2 sqrt(t2/(1-q)), 2 sqrt(t2/(1-q))].
    """
    q = p.q
    if t1 < 0.0 or not t2 > t1:
        raise InvalidTime(f"q-BM kernel requires 0 <= t1 < t2, got t1={t1}, t2={t2}")
    if t1 == 0.0:
        if np.any(np.asarray(y1) != 0.0):
            raise InvalidState("t1 = 0 requires y1 = 0 (path starts at the origin)")
    else:
        b1 = 2.0 * math.sqrt(t1 / (1.0 - q))
        if np.max(np.abs(y1)) > b1 * (1.0 + 1e-12):
            raise InvalidState(f"y1={y1} outside the time-t1 support [-{b1}, {b1}]")
    y1a = np.asarray(y1, dtype=float)
    y2a = np.asarray(y2, dtype=float)
    b2 = 2.0 * math.sqrt(t2 / (1.0 - q))
    dt = t2 - t1
    # phi*_{q,0} with the cross terms factored: exact identity with the
    # displayed form, stable when dt -> 0 with y2 ~ y1.
    phi0 = dt * dt + (1.0 - q) * (y2a - y1a) * (t1 * (y2a - y1a) - dt * y1a)
    tail = _qbm_tail_product(q, t1, t2, y1a, y2a, policy)
    sq = np.sqrt(np.clip(4.0 * t2 - (1.0 - q) * y2a * y2a, 0.0, None))
    pref = (1.0 - q) ** 1.5 * dt / (2.0 * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = pref * sq / phi0 * tail
    out = np.where(np.abs(y2a) >= b2, 0.0, val)
    return _as_float_or_array(y2, out)


def cauchy_transition_pdf(t1, t2, y1, y2):
    """Cauchy process kernel f^(1): (t2-t1)/pi / ((y2-y1)^2 + (t2-t1)^2)."""
    if t1 < 0.0 or not t2 > t1:
        raise InvalidTime(f"Cauchy kernel requires 0 <= t1 < t2, got t1={t1}, t2={t2}")
    y2a = np.asarray(y2, dtype=float)
    dt = t2 - t1
    out = dt / math.pi / ((y2a - y1) ** 2 + dt * dt)
    return _as_float_or_array(y2, out)


def biane_half_pdf(t1, t2, y1, y2):
    """1/2-stable Biane process kernel f^(1/2); the time-t support is [t^2/4, inf)."""
    if t1 < 0.0 or not t2 > t1:
        raise InvalidTime(f"Biane kernel requires 0 <= t1 < t2, got t1={t1}, t2={t2}")
    if y1 <= t1 * t1 / 4.0 and not (t1 == 0.0 and y1 == 0.0):
        raise InvalidState(f"y1={y1} outside the time-t1 support ({t1 * t1 / 4.0}, inf)")
    y2a = np.asarray(y2, dtype=float)
    dt = t2 - t1
    sq = np.sqrt(np.clip(4.0 * y2a - t2 * t2, 0.0, None))
    den = 2.0 * math.pi * ((y2a - y1) ** 2 - dt * (t1 * y2a - t2 * y1))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = dt * sq / den
    out = np.where(y2a <= t2 * t2 / 4.0, 0.0, val)
    return _as_float_or_array(y2, out)


def biane_shifted_pdf(t1, t2, y1, y2):
    """Kernel of the drift-and-time-scaled Biane process Z^(1/2)_{2t} - t^2 on (0, inf)."""
    if not 0.0 < t1 < t2:
        raise InvalidTime(f"shifted Biane kernel requires 0 < t1 < t2, got t1={t1}, t2={t2}")
    if not y1 > 0.0:
        raise InvalidState(f"y1={y1} outside the support (0, inf)")
    y2a = np.asarray(y2, dtype=float)
    dt = t2 - t1
    sq = np.sqrt(np.clip(y2a, 0.0, None))
    den = math.pi * ((y2a - y1) ** 2 + 2.0 * (y1 + y2a) * dt * dt + dt ** 4)
    out = np.where(y2a <= 0.0, 0.0, 2.0 * dt * sq / den)
    return _as_float_or_array(y2, out)


def half_stable_marginal(t, x):
    """Free 1/2-stable marginal t sqrt(4x - t^2) / (2 pi x^2) on (t^2/4, inf)."""
    if not t > 0.0:
        raise InvalidTime(f"marginal requires t > 0, got {t}")
    xarr = np.asarray(x, dtype=float)
    sq = np.sqrt(np.clip(4.0 * xarr - t * t, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = t * sq / (2.0 * math.pi * xarr * xarr)
    out = np.where(xarr <= t * t / 4.0, 0.0, val)
    return _as_float_or_array(x, out)


def cauchy_marginal(t, x):
    """Cauchy law with scale t: t / (pi (x^2 + t^2))."""
    if not t > 0.0:
        raise InvalidTime(f"marginal requires t > 0, got {t}")
    xarr = np.asarray(x, dtype=float)
    out = t / (math.pi * (xarr * xarr + t * t))
    return _as_float_or_array(x, out)


def half_stable_cdf(t, x):
    """Distribution function of the free 1/2-stable marginal, in closed form.

    F_t(x) = (2/pi) [arctan(w) - w t^2 / (4x)] with w = sqrt(4x/t^2 - 1).
    """
    if not t > 0.0:
        raise InvalidTime(f"cdf requires t > 0, got {t}")
    xarr = np.asarray(x, dtype=float)
    u = xarr / (t * t)
    w = np.sqrt(np.clip(4.0 * u - 1.0, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 / math.pi * (np.arctan(w) - w / (4.0 * u))
    out = np.where(u <= 0.25, 0.0, val)
    return _as_float_or_array(x, out)


def support_of(process, q=None, t=None):
    """Support interval of the named process (at time t where applicable)."""
    if process in ("qnormal", "qou"):
        p = QParams(_require(q, "q", process))
        return Support(p.x_minus, p.x_plus)
    if process == "qbm":
        qv = _require(q, "q", process)
        tv = _require(t, "t", process)
        b = 2.0 * math.sqrt(tv / (1.0 - qv))
        return Support(-b, b)
    if process in ("cauchy", "cauchy_marginal"):
        return Support(-math.inf, math.inf)
    if process in ("biane_half", "half_stable_marginal"):
        tv = _require(t, "t", process)
        return Support(tv * tv / 4.0, math.inf)
    if process == "biane_shifted":
        return Support(0.0, math.inf)
    raise UnknownProcess(f"unknown process tag {process!r}")


def _require(value, name, process):
    if value is None:
        raise InvalidState(f"process {process!r} needs parameter {name}")
    return value
