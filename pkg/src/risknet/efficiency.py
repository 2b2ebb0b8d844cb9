"""Subsidiary efficiency: readiness threshold, impatience rate, barrier influence."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .levy_core import DomainError, LevyModel, ScaleEval

log = logging.getLogger(__name__)

ROOT_TIE_TOL = 1e-10


class Efficiency(str, Enum):
    NON = "NonEfficient"
    TOTAL = "TotallyEfficient"
    PARTIAL = "PartiallyEfficient"


class Criterion(str, Enum):
    DEFINETTI = "DeFinettiLinearPenalty"
    SLG = "SLG"


@dataclass(frozen=True)
class Subsidiary:
    model: LevyModel
    k: float = 1.0
    K: float = 0.0
    q: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("proportional bail-out cost k must be >= 1")
        if self.K < 0:
            raise ValueError("fixed bail-out cost K must be >= 0")
        if not self.q > 0:
            raise ValueError("discount rate q must be positive")


@dataclass(frozen=True)
class EfficiencyVerdict:
    cls: Efficiency
    f_value: float
    theta: float
    criterion: Criterion

    def to_dict(self) -> dict:
        return {"class": self.cls.value, "f": self.f_value, "theta": self.theta,
                "criterion": self.criterion.value}


def loading_factor(sub: Subsidiary) -> float:
    return sub.model.rho


def readiness_f(model: LevyModel, q_scaled: float, K: float = 0.0) -> float:
    """Largest k for which the zero barrier is optimal, at scaled discount q/c."""
    if not q_scaled > 0:
        raise DomainError("scaled discount must be positive")
    lt = model.lam / model.c
    fc0 = model.claim.density_at_zero
    gap = 1.0 - model.claim.mean * fc0
    if abs(gap) < 1e-14:
        # m1 f_C(0) = 1 (exponential claims): denominator is q~ alone
        gap = 0.0
    num = (lt + q_scaled) ** 2 - lt * fc0 - K * q_scaled * lt * fc0
    den = q_scaled + lt * gap
    if den == 0:
        raise DomainError("readiness denominator vanishes")
    return num / (lt * den)


def _exponential_delta(sub: Subsidiary) -> float:
    m = sub.model
    lam, c, mu, k = m.lam, m.c, float(m.claim.rates[0]), sub.k
    b = lam * (2.0 - k)
    cc = lam * (lam - c * mu)
    disc = b * b - 4 * cc
    if disc < 0:
        raise DomainError("no real impatience root")
    roots = sorted([(-b - math.sqrt(disc)) / 2, (-b + math.sqrt(disc)) / 2])
    above = [r for r in roots if r > sub.q - ROOT_TIE_TOL]
    if not above:
        raise DomainError("no impatience root above q")
    return above[0]


def impatience_rate(sub: Subsidiary, closed_form: bool = True) -> float:
    """theta = delta(k) - q with delta(k) the smallest root above q of f(delta/c, K) = k."""
    m = sub.model
    if m.rho >= 1:
        raise DomainError("impatience rate needs rho < 1")
    f_q = readiness_f(m, sub.q / m.c, sub.K)
    if sub.k <= f_q + ROOT_TIE_TOL:
        return 0.0
    if closed_form and m.claim.kind == "exponential" and sub.K == 0 and m.sigma == 0:
        return max(0.0, _exponential_delta(sub) - sub.q)
    return _numeric_delta(sub) - sub.q


def _numeric_delta(sub: Subsidiary) -> float:
    m = sub.model
    lt = m.lam / m.c
    gap = 1.0 - m.claim.mean * m.claim.density_at_zero
    g = lambda d: readiness_f(m, d / m.c, sub.K) - sub.k
    pole = -m.c * lt * gap if abs(gap) > 1e-14 else -1.0
    lo = sub.q
    glo = g(lo)
    hi = lo
    step = max(1e-3, 1e-2 * lo)
    while hi < 1e8:
        nxt = hi + step
        if lo < pole <= nxt:
            # jump over the pole of f; restart just to its right
            hi = pole * (1 + 1e-9) + 1e-12
            glo = g(hi)
            lo = hi
            continue
        gn = g(nxt)
        if np.sign(gn) != np.sign(glo) or gn == 0:
            root = optimize.brentq(g, hi, nxt, xtol=1e-15, rtol=1e-15, maxiter=500)
            return root
        hi, glo = nxt, gn
        step *= 1.3
    raise DomainError("no impatience root found above q")


def classify(sub: Subsidiary, criterion: Criterion = Criterion.DEFINETTI) -> EfficiencyVerdict:
    m = sub.model
    criterion = Criterion(criterion)
    if criterion is Criterion.SLG:
        bound = 1.0 + sub.q / m.lam if m.lam > 0 else math.inf
        if m.rho >= 1:
            return EfficiencyVerdict(Efficiency.NON, bound, 0.0, criterion)
        if sub.k <= bound:
            return EfficiencyVerdict(Efficiency.TOTAL, bound, 0.0, criterion)
        return EfficiencyVerdict(Efficiency.PARTIAL, bound, m.lam * (sub.k - 1) - sub.q, criterion)
    if m.rho >= 1:
        return EfficiencyVerdict(Efficiency.NON, math.nan, 0.0, criterion)
    f = readiness_f(m, sub.q / m.c, sub.K)
    if sub.k <= f:
        return EfficiencyVerdict(Efficiency.TOTAL, f, 0.0, criterion)
    return EfficiencyVerdict(Efficiency.PARTIAL, f, impatience_rate(sub), criterion)


# --------------------------------------------------------------------------
# barrier influence


def _value_parts(sub: Subsidiary, b):
    ev = ScaleEval(sub.model, sub.q)
    b = np.asarray(b, dtype=float)
    return ev, ev.W(b), ev.dW(b), ev.d2W(b), ev.Zq(b), ev.Wbar(b)


def barrier_influence(sub: Subsidiary, b):
    """(G(b), H(b)) with V(x) = Fbar(x) + W(x) G(b) and H = G'(b) W'(b)^2."""
    ev, W, dW, d2W, Z, Wbar = _value_parts(sub, b)
    k, K, q = sub.k, sub.K, sub.q
    kp0 = sub.model.drift
    F = k * (Z - kp0 * W) - K * q * W
    G = (1.0 - F) / dW
    H = (k * (kp0 * dW - q * W) + K * q * dW) * dW - d2W * (
        1.0 + k * (kp0 * W - 1.0 - q * Wbar) + K * q * W
    )
    return G, H


def optimal_barrier(sub: Subsidiary, b_max: float | None = None) -> float:
    """Maximizer of G on [0, b_max] by a coarse scan followed by golden-section refinement."""
    if b_max is None:
        b_max = 20.0 / sub.model.claim.decay_rate
    grid = np.linspace(0.0, b_max, 401)
    G, _ = barrier_influence(sub, grid)
    i = int(np.argmax(G))
    if i == 0:
        return 0.0
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda b: -float(barrier_influence(sub, b)[0]),
                                   bracket=None, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)


def slg_criterion(sub: Subsidiary, a):
    """[k Z(a) - 1] W'(a) - k q W(a)^2; the SLG barrier is its first nonpositive point."""
    ev = ScaleEval(sub.model, sub.q)
    a = np.asarray(a, dtype=float)
    return (sub.k * ev.Zq(a) - 1.0) * ev.dW(a) - sub.k * sub.q * ev.W(a) ** 2


def slg_barrier(sub: Subsidiary, a_max: float | None = None) -> float:
    m = sub.model
    if sub.k <= 1.0 + sub.q / m.lam:
        return 0.0
    if a_max is None:
        a_max = 50.0 / m.claim.decay_rate
    grid = np.linspace(0.0, a_max, 2001)
    vals = slg_criterion(sub, grid)
    idx = np.nonzero(vals <= 0)[0]
    if idx.size == 0:
        log.warning("no sign change of the SLG criterion on [0, %g]", a_max)
        return a_max
    j = int(idx[0])
    lo, hi = grid[j - 1], grid[j]
    while hi - lo > 1e-13 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if slg_criterion(sub, mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi
