"""Analytic formulas paired with their Monte-Carlo counterparts."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .compendium import Compendium
from .levy_core import ClaimLaw, LevyModel
from .mc import (
    SimConfig,
    SimEstimate,
    simulate_dividends,
    simulate_parisian_severity,
    simulate_regulated_ruin,
    simulate_ruin,
    simulate_severity,
    simulate_two_sided_exit,
)


@dataclass(frozen=True)
class Pair:
    name: str
    analytic: float
    estimate: SimEstimate
    k: float = 3.0

    @property
    def z(self) -> float:
        return self.estimate.z_score(self.analytic)

    @property
    def passed(self) -> bool:
        return abs(self.z) <= self.k

    def row(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.name:<34s} analytic={self.analytic:.10g}  "
                f"mc={self.estimate.mean:.10g} +- {self.estimate.stderr:.3g}  z={self.z:+.2f}")


@dataclass(frozen=True)
class Case:
    label: str
    model: LevyModel
    q: float
    x: float
    b: float
    theta: float
    nu: float
    r: float
    parisian_b: float


CASES = (
    Case("exp", LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0)), q=0.1, x=1.0, b=3.0,
         theta=0.5, nu=0.7, r=0.8, parisian_b=3.0),
    Case("hyp", LevyModel(3.0, 1.5, ClaimLaw.hyperexponential([0.3, 0.7], [0.5, 3.0])), q=0.05,
         x=1.5, b=4.0, theta=0.3, nu=1.2, r=0.5, parisian_b=math.inf),
)


def compendium_pairs(n_paths: int, seed: int = 1) -> list[Pair]:
    """Six formulas on two parameter sets."""
    out = []
    for j, cs in enumerate(CASES):
        C = Compendium(cs.model)
        cfg = SimConfig(n_paths=n_paths, seed=seed + 100 * j, q=cs.q)
        m, q, x, b, th = cs.model, cs.q, cs.x, cs.b, cs.theta
        out += [
            Pair(f"{cs.label}/two_sided_exit", float(C.two_sided_exit(q, x, b)),
                 simulate_two_sided_exit(m, x, b, cfg)),
            Pair(f"{cs.label}/severity", float(C.severity_of_ruin(q, x, b, th)),
                 simulate_severity(m, x, b, th, cfg)),
            Pair(f"{cs.label}/definetti_dividends", float(C.definetti_dividends(q, x, b)),
                 simulate_dividends(m, b, cfg, x=x)),
            Pair(f"{cs.label}/poisson_dividends", float(C.poisson_dividends(q, cs.nu, x, b)),
                 simulate_dividends(m, b, cfg, x=x, observation_rate=cs.nu)),
            Pair(f"{cs.label}/regulated_ruin", float(C.regulated_ruin_lt(q, x, b)),
                 simulate_regulated_ruin(m, x, b, 0.0, cfg)),
            Pair(f"{cs.label}/parisian_severity", float(C.parisian_severity(q, cs.r, th, x, cs.parisian_b)),
                 simulate_parisian_severity(m, cs.r, x, cs.parisian_b, th, cfg)),
        ]
    return out


def ruin_pair(n_paths: int, seed: int = 7) -> Pair:
    m = LevyModel(2.0, 1.0, ClaimLaw.exponential(1.0))
    return Pair("exp/ruin_probability", float(Compendium(m).ruin_probability(0.5)),
                simulate_ruin(m, 0.5, SimConfig(n_paths=n_paths, seed=seed)))


def validation_suite(n_paths: int, seed: int = 1) -> list[Pair]:
    return compendium_pairs(n_paths, seed) + [ruin_pair(n_paths, seed + 6)]
