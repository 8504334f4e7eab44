"""Randomized integrity sweeps over the closed-form kernels, packaged as
reports for the CLI `verify` subcommand and the acceptance suite.

Covers normalization (each transition kernel integrates to 1 over its
target support), the Chapman-Kolmogorov composition, and the deterministic
time change identity p_{t-s}(x, y) = e^t kappa_{e^{2s}, e^{2t}}(e^s x, e^t y)
linking the q-OU and q-BM kernels.
"""

import math

import numpy as np
from scipy.integrate import quad

from .kernels import (
    biane_half_pdf,
    cauchy_transition_pdf,
    qbm_transition_pdf,
    qou_transition_pdf,
)
from .qspecial import QParams
from .sampling import SeedSpec
from .tangent import TangentCase, convergence_study

__all__ = [
    "kernel_normalization_report",
    "chapman_kolmogorov_report",
    "ou_bm_identity_report",
    "kernels_verification_report",
    "tangent_verification_report",
]

_LADDER = (0.2, 0.1, 0.05, 0.02, 0.01)


def _norm_case(gen, which):
    if which == "qou":
        q = gen.uniform(-0.9, 0.9)
        p = QParams(q)
        d = gen.uniform(0.05, 5.0)
        x = gen.uniform(-0.95, 0.95) * p.x_plus
        val, _ = quad(lambda y: qou_transition_pdf(p, d, x, y),
                      p.x_minus, p.x_plus, limit=300)
        return val
    if which == "qbm":
        q = gen.uniform(-0.9, 0.9)
        p = QParams(q)
        t1 = gen.uniform(0.1, 2.0)
        t2 = t1 + gen.uniform(0.05, 3.0)
        y1 = gen.uniform(-0.95, 0.95) * 2.0 * math.sqrt(t1 / (1.0 - q))
        b2 = 2.0 * math.sqrt(t2 / (1.0 - q))
        val, _ = quad(lambda y: qbm_transition_pdf(p, t1, t2, y1, y), -b2, b2, limit=300)
        return val
    if which == "cauchy":
        t1 = gen.uniform(0.0, 2.0)
        t2 = t1 + gen.uniform(0.05, 3.0)
        y1 = gen.uniform(-3.0, 3.0)
        val, _ = quad(lambda y: cauchy_transition_pdf(t1, t2, y1, y),
                      -np.inf, np.inf, limit=400)
        return val
    t1 = gen.uniform(0.05, 2.0)
    t2 = t1 + gen.uniform(0.05, 3.0)
    y1 = t1 * t1 / 4.0 + gen.uniform(0.05, 3.0)
    # substitute y = t2^2/4 + u^2 to absorb the square-root edge
    edge = t2 * t2 / 4.0
    val, _ = quad(lambda u: biane_half_pdf(t1, t2, y1, edge + u * u) * 2.0 * u,
                  0.0, np.inf, limit=400)
    return val


def kernel_normalization_report(n_sets=50, seed=SeedSpec(1), tol=1e-7):
    """Max |integral - 1| per kernel family over randomized parameters."""
    out = []
    for idx, which in enumerate(("qou", "qbm", "cauchy", "biane_half")):
        gen = SeedSpec(seed.base_seed, 11 + idx).generator()
        worst = max(abs(_norm_case(gen, which) - 1.0) for _ in range(n_sets))
        out.append({"kind": f"normalization:{which}", "samples": n_sets,
                    "max_residual": worst, "threshold": tol, "pass": bool(worst < tol)})
    return out


def _ck_case(gen, which):
    if which == "qou":
        q = gen.uniform(-0.9, 0.9)
        p = QParams(q)
        d1, d2 = gen.uniform(0.1, 1.5, 2)
        x = gen.uniform(-0.8, 0.8) * p.x_plus
        y = gen.uniform(-0.8, 0.8) * p.x_plus
        val, _ = quad(lambda z: qou_transition_pdf(p, d1, x, z) * qou_transition_pdf(p, d2, z, y),
                      p.x_minus, p.x_plus, limit=300)
        return val, qou_transition_pdf(p, d1 + d2, x, y)
    if which == "qbm":
        q = gen.uniform(-0.9, 0.9)
        p = QParams(q)
        t1 = gen.uniform(0.1, 1.5)
        u = t1 + gen.uniform(0.1, 1.5)
        t2 = u + gen.uniform(0.1, 1.5)
        y1 = gen.uniform(-0.8, 0.8) * 2.0 * math.sqrt(t1 / (1.0 - q))
        y2 = gen.uniform(-0.8, 0.8) * 2.0 * math.sqrt(t2 / (1.0 - q))
        bu = 2.0 * math.sqrt(u / (1.0 - q))
        val, _ = quad(lambda z: qbm_transition_pdf(p, t1, u, y1, z) * qbm_transition_pdf(p, u, t2, z, y2),
                      -bu, bu, limit=300)
        return val, qbm_transition_pdf(p, t1, t2, y1, y2)
    if which == "cauchy":
        t1 = gen.uniform(0.0, 1.5)
        u = t1 + gen.uniform(0.1, 1.5)
        t2 = u + gen.uniform(0.1, 1.5)
        y1, y2 = gen.uniform(-2.0, 2.0, 2)
        val, _ = quad(lambda z: cauchy_transition_pdf(t1, u, y1, z) * cauchy_transition_pdf(u, t2, z, y2),
                      -np.inf, np.inf, limit=400)
        return val, cauchy_transition_pdf(t1, t2, y1, y2)
    t1 = gen.uniform(0.05, 1.0)
    u = t1 + gen.uniform(0.1, 1.0)
    t2 = u + gen.uniform(0.1, 1.0)
    y1 = t1 * t1 / 4.0 + gen.uniform(0.05, 2.0)
    y2 = t2 * t2 / 4.0 + gen.uniform(0.05, 2.0)
    edge = u * u / 4.0
    val, _ = quad(lambda w: biane_half_pdf(t1, u, y1, edge + w * w)
                  * biane_half_pdf(u, t2, edge + w * w, y2) * 2.0 * w,
                  0.0, np.inf, limit=400)
    return val, biane_half_pdf(t1, t2, y1, y2)


def chapman_kolmogorov_report(n_sets=50, seed=SeedSpec(2), tol=1e-6):
    """Max |int p_1 p_2 - p_12| per kernel family over randomized parameters."""
    out = []
    for idx, which in enumerate(("qou", "qbm", "cauchy", "biane_half")):
        gen = SeedSpec(seed.base_seed, 21 + idx).generator()
        worst = 0.0
        for _ in range(n_sets):
            composed, direct = _ck_case(gen, which)
            worst = max(worst, abs(composed - direct))
        out.append({"kind": f"chapman_kolmogorov:{which}", "samples": n_sets,
                    "max_residual": worst, "threshold": tol, "pass": bool(worst < tol)})
    return out


def ou_bm_identity_report(n_points=100, seed=SeedSpec(3), tol=1e-10):
    """Relative residual of the OU <-> BM kernel identity at random points."""
    gen = seed.generator()
    worst = 0.0
    for _ in range(n_points):
        q = gen.uniform(-0.9, 0.9)
        p = QParams(q)
        s = gen.uniform(-1.0, 1.0)
        t = s + gen.uniform(0.05, 2.0)
        x = gen.uniform(-0.9, 0.9) * p.x_plus
        y = gen.uniform(-0.9, 0.9) * p.x_plus
        lhs = qou_transition_pdf(p, t - s, x, y)
        rhs = math.exp(t) * qbm_transition_pdf(
            p, math.exp(2.0 * s), math.exp(2.0 * t), math.exp(s) * x, math.exp(t) * y
        )
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return [{"kind": "ou_bm_identity", "samples": n_points, "max_residual": worst,
             "threshold": tol, "pass": bool(worst < tol)}]


def kernels_verification_report(n_sets=50, n_points=100, seed=SeedSpec(5)):
    """Normalization + Chapman-Kolmogorov + OU/BM identity, one report list."""
    report = []
    report += kernel_normalization_report(n_sets, SeedSpec(seed.base_seed, 1))
    report += chapman_kolmogorov_report(n_sets, SeedSpec(seed.base_seed, 2))
    report += ou_bm_identity_report(n_points, SeedSpec(seed.base_seed, 3))
    return report


def tangent_verification_report(qs=(-0.5, 0.0, 0.5, 0.9), s_values=(0.5, 1.0, 2.0),
                                ladder=_LADDER, threshold=0.02, resolution=2001):
    """Convergence studies over the standard parameter grid, as report rows."""
    report = []

    def run(case):
        rep = convergence_study(case, ladder, threshold=threshold, resolution=resolution)
        terminal = rep.ladder[-1][1]
        report.append({
            "kind": f"tangent:{case.case}",
            "q": case.q, "s": case.s, "x": case.x,
            "max_residual": terminal, "threshold": threshold,
            "ladder": [row[1] for row in rep.ladder],
            "horizon": rep.window.t2,
            "pass": bool(rep.verdict),
        })

    for q in qs:
        xp = 2.0 / math.sqrt(1.0 - q)
        for frac in (0.0, 0.5, -0.5):
            run(TangentCase("qou_interior", q, x=frac * xp))
        run(TangentCase("qou_boundary", q))
        for s in s_values:
            half = 2.0 * math.sqrt(s / (1.0 - q))
            for frac in (0.0, 0.5, -0.5):
                run(TangentCase("qbm_interior", q, x=frac * half, s=s))
            run(TangentCase("qbm_boundary", q, s=s))
    # negative control: a wrong limit scale must fail
    control = convergence_study(TangentCase("qou_interior", 0.5, x=0.5 * 2.0 / math.sqrt(0.5)),
                                ladder, threshold=threshold, scale_override=1.0,
                                resolution=resolution)
    report.append({
        "kind": "tangent:negative_control", "q": 0.5, "s": None, "x": control.case.x,
        "max_residual": control.ladder[-1][1], "threshold": threshold,
        "ladder": [row[1] for row in control.ladder],
        "horizon": control.window.t2,
        "pass": bool(not control.verdict),
    })
    return report
