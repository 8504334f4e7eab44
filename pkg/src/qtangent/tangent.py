"""Numerical verification of the tangent-process limits: exact rescaled
transition densities at finite epsilon against their closed-form limits.

Four cases are covered.  Interior points of the q-OU state space rescale with
beta = 1 to a Cauchy process scaled by c = sqrt(4/(1-q) - x^2); interior
points of the q-BM support rescale to a drifted Cauchy process; the left
boundary points rescale with beta = 2 to affine images of the 1/2-stable
Biane process.

Convergence is measured as an L1 distance between the rescaled and the limit
density over a window carrying >= 99% of the limit mass, on a grid that mixes
uniform nodes with limit-quantile nodes (the half-stable limits concentrate
near their support edge and carry heavy tails; uniform grids resolve
neither).  Where the rescaled target coordinate falls outside the state
space the exact density is 0 and is integrated as such, so every rung of an
epsilon ladder is measured on the same window and the distances are
comparable.

The window's time horizon defaults to a q-scaled value: the finite-epsilon
corrections of the exact kernels enter through eps * t2 (the limits are
self-similar, so the horizon is a pure convention), with constants that grow
like 1/(1-q).  The defaults below were calibrated once so the standard
ladder {0.2 ... 0.01} reaches its asymptotic regime for every |q| <= 0.9;
each report records the horizon used.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidState, InvalidTime, OutOfSupport, UnknownProcess
from .kernels import (
    biane_half_pdf,
    cauchy_transition_pdf,
    half_stable_cdf,
    qbm_transition_pdf,
    qou_transition_pdf,
)
from .qspecial import DEFAULT_POLICY, QParams

__all__ = [
    "TangentCase",
    "Window",
    "ConvergenceReport",
    "rescaled_pdf",
    "limit_pdf",
    "distance",
    "convergence_study",
    "default_window",
    "aldous_ratio",
]

_CASES = ("qou_interior", "qou_boundary", "qbm_interior", "qbm_boundary")


@dataclass(frozen=True)
class TangentCase:
    """One tangent-process scenario: which theorem, at which (q, s, x)."""

    case: str
    q: float
    x: float = None
    s: float = None

    def __post_init__(self):
        if self.case not in _CASES:
            raise UnknownProcess(f"unknown tangent case {self.case!r}")
        p = QParams(self.q)
        if self.case.startswith("qbm"):
            if self.s is None or not self.s > 0.0:
                raise InvalidTime("q-BM cases need the base time s > 0")
        if self.case == "qou_interior":
            if self.x is None or not abs(self.x) < p.x_plus:
                raise InvalidState("interior case needs x strictly inside (x_minus, x_plus)")
        elif self.case == "qbm_interior":
            half = 2.0 * math.sqrt(self.s / (1.0 - self.q))
            if self.x is None or not abs(self.x) < half:
                raise InvalidState(f"interior case needs |x| < {half}")
        elif self.case == "qou_boundary":
            object.__setattr__(self, "x", p.x_minus)
        else:
            object.__setattr__(self, "x", -2.0 * math.sqrt(self.s / (1.0 - self.q)))

    @property
    def params(self):
        return QParams(self.q)

    def limit_scale(self):
        """Multiplicative constant of the limiting process."""
        if self.case == "qou_interior":
            return math.sqrt(4.0 / (1.0 - self.q) - self.x * self.x)
        if self.case == "qbm_interior":
            return math.sqrt(4.0 * self.s / (1.0 - self.q) - self.x * self.x) / (2.0 * self.s)
        if self.case == "qou_boundary":
            return 4.0 / math.sqrt(1.0 - self.q)
        return 1.0 / (self.s ** 1.5 * math.sqrt(1.0 - self.q))

    def drift(self):
        """Linear drift of the limit (qbm_interior only, else 0)."""
        if self.case == "qbm_interior":
            return self.x / (2.0 * self.s)
        return 0.0


@dataclass(frozen=True)
class Window:
    """Comparison window: fixed pair times, pinned y1, and a finite y2 range."""

    t1: float
    t2: float
    y1: float
    y2_lo: float
    y2_hi: float
    coverage: float = 0.99

    def __post_init__(self):
        if not self.t2 > self.t1 >= 0.0:
            raise InvalidTime("window needs 0 <= t1 < t2")
        if not self.y2_hi > self.y2_lo:
            raise InvalidState("window needs y2_lo < y2_hi")


@dataclass(frozen=True)
class ConvergenceReport:
    """Ladder of (eps, L1, sup) distances with the pass/fail verdict."""

    case: TangentCase
    window: Window
    ladder: tuple
    verdict: bool
    threshold: float
    slack: float
    scale_override: float = None

    def to_dict(self):
        d = {
            "case": self.case.case,
            "q": self.case.q,
            "s": self.case.s,
            "x": self.case.x,
            "window": {
                "t1": self.window.t1,
                "t2": self.window.t2,
                "y1": self.window.y1,
                "y2": [self.window.y2_lo, self.window.y2_hi],
                "coverage": self.window.coverage,
            },
            "ladder": [{"eps": e, "l1": l1, "sup": sup} for (e, l1, sup) in self.ladder],
            "verdict": "pass" if self.verdict else "fail",
            "threshold": self.threshold,
            "slack": self.slack,
        }
        if self.scale_override is not None:
            d["scale_override"] = self.scale_override
        return d


def rescaled_pdf(case: TangentCase, eps, t1, t2, y1, y2, policy=DEFAULT_POLICY):
    """Exact density of the rescaled increment process at finite eps.

    Computed from the closed-form kernels by change of variables; zero where
    the rescaled target coordinate leaves the state space.  Raises
    OutOfSupport when the conditioning coordinate (the y1 side) leaves it.
    """
    if not eps > 0.0:
        raise InvalidTime(f"eps must be positive, got {eps}")
    if t1 < 0.0 or not t2 > t1:
        raise InvalidTime(f"need 0 <= t1 < t2, got t1={t1}, t2={t2}")
    p = case.params
    q, x, s = case.q, case.x, case.s
    if case.case == "qou_interior":
        w1 = x + y1 * eps
        if abs(w1) > p.x_plus:
            raise OutOfSupport(f"conditioning point {w1} outside the state space", w1)
        return qou_transition_pdf(p, eps * (t2 - t1), w1, x + np.asarray(y2) * eps, policy) * eps
    if case.case == "qou_boundary":
        w1 = p.x_minus + y1 * eps * eps
        if w1 < p.x_minus or w1 > p.x_plus:
            raise OutOfSupport(f"conditioning point {w1} outside the state space", w1)
        w2 = p.x_minus + np.asarray(y2) * eps * eps
        out = qou_transition_pdf(p, eps * (t2 - t1), w1, w2, policy) * eps * eps
        return _zero_outside(out, w2 < p.x_minus)
    if case.case == "qbm_interior":
        tau1, tau2 = s + t1 * eps, s + t2 * eps
        w1 = x + y1 * eps
        b1 = 2.0 * math.sqrt(tau1 / (1.0 - q))
        if abs(w1) > b1:
            raise OutOfSupport(f"conditioning point {w1} outside the time-{tau1} support", w1)
        return qbm_transition_pdf(p, tau1, tau2, w1, x + np.asarray(y2) * eps, policy) * eps
    tau1, tau2 = s + t1 * eps, s + t2 * eps
    a = 1.0 / math.sqrt(s * (1.0 - q))
    w1 = x - a * t1 * eps + y1 * eps * eps
    b1 = 2.0 * math.sqrt(tau1 / (1.0 - q))
    if abs(w1) > b1:
        raise OutOfSupport(f"conditioning point {w1} outside the time-{tau1} support", w1)
    w2 = x - a * t2 * eps + np.asarray(y2) * eps * eps
    b2 = 2.0 * math.sqrt(tau2 / (1.0 - q))
    out = qbm_transition_pdf(p, tau1, tau2, w1, w2, policy) * eps * eps
    return _zero_outside(out, np.abs(w2) > b2)


def _zero_outside(values, outside_mask):
    out = np.where(outside_mask, 0.0, values)
    return out.item() if np.ndim(out) == 0 else out


def limit_pdf(case: TangentCase, t1, t2, y1, y2, scale_override=None):
    """Closed-form limiting transition density of the tangent process.

    ``scale_override`` substitutes the multiplicative constant of the Cauchy
    limits (used as a negative control: a wrong constant must make the
    convergence study fail).
    """
    if t1 < 0.0 or not t2 > t1:
        raise InvalidTime(f"need 0 <= t1 < t2, got t1={t1}, t2={t2}")
    q, s = case.q, case.s
    if case.case in ("qou_interior", "qbm_interior"):
        c = case.limit_scale() if scale_override is None else scale_override
        drift = case.drift()
        return cauchy_transition_pdf(
            c * t1, c * t2, y1 - t1 * drift, np.asarray(y2) - t2 * drift
        )
    if case.case == "qou_boundary":
        r = math.sqrt(1.0 - q)
        if y1 < 0.0 or (t1 > 0.0 and y1 == 0.0):
            raise OutOfSupport(f"y1={y1} outside the limit support [0, inf)", y1)
        z2 = r * np.asarray(y2) + t2 * t2
        return biane_half_pdf(2.0 * t1, 2.0 * t2, r * y1 + t1 * t1, z2) * r
    m = math.sqrt(s ** 3 * (1.0 - q))
    z1 = m * y1
    if t1 > 0.0 and z1 <= t1 * t1 / 4.0:
        raise OutOfSupport(f"y1={y1} outside the limit support", y1)
    out = biane_half_pdf(t1, t2, z1, m * np.asarray(y2)) * m
    return out


def _limit_quantile(case, window_t, prob):
    """Quantile of the limit's y2 marginal from (t1=0, y1=0) at time window_t."""
    if case.case in ("qou_interior", "qbm_interior"):
        gam = case.limit_scale() * window_t
        return case.drift() * window_t + gam * math.tan(math.pi * (prob - 0.5))
    if case.case == "qou_boundary":
        r = math.sqrt(1.0 - case.q)
        xq = _half_stable_quantile(2.0 * window_t, prob)
        return (xq - window_t * window_t) / r
    m = math.sqrt(case.s ** 3 * (1.0 - case.q))
    return _half_stable_quantile(window_t, prob) / m


def _half_stable_quantile(t, prob):
    lo = t * t / 4.0
    hi = t * t
    while half_stable_cdf(t, hi) < prob:
        hi *= 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if half_stable_cdf(t, mid) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# Window horizons calibrated so the standard ladder operates in the
# asymptotic regime across |q| <= 0.9 (finite-eps corrections enter through
# eps*t2 with constants growing like 1/(1-q); the limits are self-similar so
# the horizon choice is a convention, recorded in every report).
_HORIZON = {
    "qou_interior": lambda q, s: 0.4 * (1.0 - q),
    "qbm_interior": lambda q, s: 0.4 * s * (1.0 - q),
    "qou_boundary": lambda q, s: 0.15 * (1.0 - q),
    "qbm_boundary": lambda q, s: 0.125 * s * (1.0 - q),
}


def default_window(case: TangentCase, coverage=0.99, horizon=None):
    """Window (t1=0, y1=0, calibrated t2) covering ``coverage`` of the limit mass."""
    t2 = horizon if horizon is not None else _HORIZON[case.case](case.q, case.s)
    tail = 1.0 - coverage
    if case.case in ("qou_interior", "qbm_interior"):
        lo = _limit_quantile(case, t2, tail / 2.0)
        hi = _limit_quantile(case, t2, 1.0 - tail / 2.0)
    else:
        lo = _limit_quantile(case, t2, 1e-9)
        hi = _limit_quantile(case, t2, 1.0 - tail)
    return Window(0.0, t2, 0.0, lo, hi, coverage)


def _window_grid(case, window, resolution):
    """Union of uniform and limit-quantile nodes across the window."""
    n_u = max(resolution // 2, 16)
    uniform = np.linspace(window.y2_lo, window.y2_hi, n_u)
    tail = 1.0 - window.coverage
    if case.case in ("qou_interior", "qbm_interior"):
        probs = np.linspace(tail / 2.0, 1.0 - tail / 2.0, n_u)
        gam = case.limit_scale() * window.t2
        quant = case.drift() * window.t2 + gam * np.tan(np.pi * (probs - 0.5))
    else:
        probs = np.linspace(1e-6, 1.0 - tail, n_u)
        if case.case == "qou_boundary":
            r = math.sqrt(1.0 - case.q)
            xq = _half_stable_quantile_vec(2.0 * window.t2, probs)
            quant = (xq - window.t2 ** 2) / r
        else:
            m = math.sqrt(case.s ** 3 * (1.0 - case.q))
            quant = _half_stable_quantile_vec(window.t2, probs) / m
    quant = quant[(quant >= window.y2_lo) & (quant <= window.y2_hi)]
    return np.unique(np.concatenate([uniform, quant]))


def _half_stable_quantile_vec(t, probs):
    lo = np.full(len(probs), t * t / 4.0)
    hi_val = t * t
    while half_stable_cdf(t, hi_val) < probs[-1]:
        hi_val *= 4.0
    hi = np.full(len(probs), hi_val)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        c = half_stable_cdf(t, mid)
        smaller = c < probs
        lo = np.where(smaller, mid, lo)
        hi = np.where(smaller, hi, mid)
    return 0.5 * (lo + hi)


def distance(case: TangentCase, eps, window: Window, resolution=2001,
             scale_override=None, policy=DEFAULT_POLICY):
    """(L1, sup) distance between rescaled and limit density over the window.

    Trapezoid rule on the mixed uniform/quantile grid.  Regions of the
    window that the rescaled process cannot reach at this eps contribute the
    limit's mass there (the exact density is zero on them).
    """
    grid = _window_grid(case, window, resolution)
    resc = np.asarray(rescaled_pdf(case, eps, window.t1, window.t2, window.y1, grid, policy))
    lim = np.asarray(limit_pdf(case, window.t1, window.t2, window.y1, grid, scale_override))
    diff = np.abs(resc - lim)
    l1 = float(np.trapezoid(diff, grid))
    sup = float(np.max(diff))
    return l1, sup


def convergence_study(case: TangentCase, ladder, window: Window = None, resolution=2001,
                      threshold=0.02, slack=0.10, scale_override=None,
                      policy=DEFAULT_POLICY):
    """Evaluate an eps ladder and produce the pass/fail ConvergenceReport.

    Pass requires the L1 distances to be nonincreasing within ``slack``
    per rung and the terminal L1 to fall below ``threshold``.
    """
    ladder = tuple(float(e) for e in ladder)
    if len(ladder) < 2 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidState("ladder must be a strictly decreasing list of eps values")
    if window is None:
        window = default_window(case)
    rows = []
    for eps in ladder:
        l1, sup = distance(case, eps, window, resolution, scale_override, policy)
        rows.append((eps, l1, sup))
    l1s = [r[1] for r in rows]
    monotone = all(l1s[i + 1] <= l1s[i] * (1.0 + slack) for i in range(len(l1s) - 1))
    verdict = monotone and l1s[-1] < threshold
    return ConvergenceReport(case, window, tuple(rows), verdict, threshold, slack,
                             scale_override)


def aldous_ratio(q, eps, x, y1, t1, t2, policy=DEFAULT_POLICY):
    """Truncated-second-moment ratio E(|Y_t2 - Y_t1|^2 ∧ 1 | Y_t1 = y1)/(t2 - t1).

    Quadrature diagnostic for the tightness bound; the bound's constant is
    not explicit, so this reports the raw ratio rather than a verdict.
    """
    if not t2 > t1:
        raise InvalidTime(f"need t1 < t2, got t1={t1}, t2={t2}")
    case = TangentCase("qou_interior", q, x=x)
    p = case.params
    lo = (p.x_minus - x) / eps
    hi = (p.x_plus - x) / eps
    breaks = sorted({lo, hi, max(lo, min(hi, y1 - 1.0)), max(lo, min(hi, y1 + 1.0))})

    def integrand(y2):
        g = min((y2 - y1) ** 2, 1.0)
        return g * rescaled_pdf(case, eps, t1, t2, y1, y2, policy)

    total = 0.0
    for a, b in zip(breaks, breaks[1:]):
        if b > a:
            val, _ = quad(integrand, a, b, limit=200)
            total += val
    return total / (t2 - t1)
