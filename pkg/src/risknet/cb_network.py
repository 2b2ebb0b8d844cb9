"""Central-branch networks: exact reductions, first bail-out law, Pade-based MAP of the CB."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .compendium import Compendium
from .ladder import exact_ladder_cdf, exact_ladder_density, two_point_pade3
from .levy_core import ClaimLaw, DomainError, LevyModel
from .map_scale import FluidEmbedding, MapModel, MatrixScaleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubsidiarySpec:
    u: float
    c: float
    k: float
    lam: float
    claim: ClaimLaw

    def __post_init__(self):
        if self.u < 0 or not self.c > 0:
            raise ValueError("subsidiary needs u >= 0 and c > 0")
        if self.k < 1:
            raise ValueError("bail-out cost k must be >= 1")

    @property
    def model(self) -> LevyModel:
        return LevyModel(self.c, self.lam, self.claim)


@dataclass(frozen=True)
class CbNetwork:
    """A CB with deterministic premium ``c0`` and capital ``u0`` backing its subsidiaries.

    With ``chain=True`` the subsidiaries form a line: each one is bailed out by
    its predecessor, the first by the CB, and only the last one carries claims.
    """

    u0: float
    c0: float
    subsidiaries: tuple = field(default_factory=tuple)
    chain: bool = False

    def __post_init__(self):
        object.__setattr__(self, "subsidiaries", tuple(self.subsidiaries))
        if not self.subsidiaries:
            raise ValueError("network needs at least one subsidiary")
        if self.u0 < 0 or not self.c0 > 0:
            raise ValueError("CB needs u0 >= 0 and c0 > 0")

    @property
    def size(self) -> int:
        return len(self.subsidiaries)


@dataclass(frozen=True)
class Reduction:
    """One-dimensional surrogate: capital ``u``, premium ``c``, claims ``model``."""

    u: float
    c: float
    exact: bool
    model: LevyModel

    def ruin_probability(self, time_horizon: float = math.inf) -> float:
        if math.isinf(time_horizon):
            return float(Compendium(self.model).ruin_probability(self.u))
        from .compendium import finite_time_ruin_exponential
        return float(finite_time_ruin_exponential(self.model, self.u, time_horizon))


def _mixture(weights, laws) -> ClaimLaw:
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    if all(l.kind == "exponential" for l in laws):
        rates = np.array([float(l.rates[0]) for l in laws])
        uniq = np.unique(rates)
        if uniq.size == 1:
            return ClaimLaw.exponential(float(uniq[0]))
        merged = np.array([weights[rates == r].sum() for r in uniq])
        return ClaimLaw.hyperexponential(merged, uniq)
    beta = np.concatenate([w * l.beta for w, l in zip(weights, laws)])
    return ClaimLaw.phase_type(beta, linalg.block_diag(*[l.B for l in laws]))


def reduce_deterministic_cb(net: CbNetwork) -> Reduction:
    """Exact reduction for one subsidiary; pooled upper bound on the ruin time otherwise."""
    if net.chain:
        return reduce_chain(net)
    subs = net.subsidiaries
    if len(subs) == 1:
        s = subs[0]
        u, c = net.u0 / s.k + s.u, net.c0 / s.k + s.c
        return Reduction(u, c, True, LevyModel(c, s.lam, s.claim))
    u = net.u0 + sum(s.k * s.u for s in subs)
    c = net.c0 + sum(s.k * s.c for s in subs)
    lam = sum(s.lam for s in subs)
    claim = _mixture([s.lam for s in subs], [s.claim.scaled(s.k) for s in subs])
    return Reduction(u, c, False, LevyModel(c, lam, claim))


def reduce_chain(net: CbNetwork) -> Reduction:
    """Linear chain: capital and premium of each level discounted by the downstream costs."""
    subs = net.subsidiaries
    ks = [s.k for s in subs]
    levels = [(net.u0, net.c0)] + [(s.u, s.c) for s in subs]
    u = c = 0.0
    for i, (ui, ci) in enumerate(levels):
        scale = float(np.prod(ks[i:]))
        u += ui / scale
        c += ci / scale
    last = subs[-1]
    return Reduction(u, c, True, LevyModel(c, last.lam, last.claim))


def optimal_allocation(net: CbNetwork, u_plus: float, c_plus: float) -> dict:
    """Split of (u_plus, c_plus) between CB and its single subsidiary minimizing ruin."""
    if len(net.subsidiaries) != 1 or net.chain:
        raise DomainError("optimal allocation is only available for one subsidiary")
    k = net.subsidiaries[0].k
    if k > 1:
        return {"u0": 0.0, "c0": 0.0, "u1": float(u_plus), "c1": float(c_plus), "unique": True}
    return {"u0": None, "c0": None, "u1": None, "c1": None, "unique": False,
            "indifference": "any split with u0 + u1 = u_plus and c0 + c1 = c_plus"}


# --------------------------------------------------------------------------
# first bail-out


def _ladder_rho(s: SubsidiarySpec) -> tuple[float, float]:
    if s.claim.kind != "exponential":
        raise DomainError("first bail-out law needs exponential subsidiary claims")
    if s.u != 0:
        raise DomainError("first bail-out law needs subsidiaries starting at 0")
    mu = float(s.claim.rates[0])
    return s.lam / (s.c * mu), s.c * mu


def first_bailout_density(net: CbNetwork, t, x):
    """Joint density of (time, size) of the first bail-out paid by the CB."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    parts = [_ladder_rho(s) for s in net.subsidiaries]
    dens = [scale * exact_ladder_density(rho, scale * t) for rho, scale in parts]
    surv = [1.0 - exact_ladder_cdf(rho, scale * t) for rho, scale in parts]
    total = 0.0
    for i, s in enumerate(net.subsidiaries):
        others = np.prod([surv[j] for j in range(len(parts)) if j != i], axis=0) if len(parts) > 1 else 1.0
        rate = float(s.claim.rates[0]) / s.k
        total = total + others * dens[i] * rate * np.exp(-rate * x) * (x >= 0)
    return total


# --------------------------------------------------------------------------
# Pade-based MAP of the CB


@dataclass(eq=False)
class CbMap:
    """MAP approximation of the CB with its initial phase law."""

    map: MapModel
    initial: np.ndarray
    ladder_rates: np.ndarray
    ladder_weights: np.ndarray
    jump_rate: float
    quiet_state: bool

    def with_discount(self, q: float) -> MapModel:
        m = self.map
        return MapModel(Q=m.Q, c=m.c, sigma=m.sigma, kill=m.kill + q, lam=m.lam,
                        claims=m.claims, jumps=m.jumps)

    def mmbm(self, q: float = 0.0) -> FluidEmbedding:
        """Fluid form with one unit-rate stage per destination phase."""
        lam, alpha, r = self.ladder_rates, self.ladder_weights, self.jump_rate
        c0 = float(self.map.c[0])
        n = lam.size + (1 if self.quiet_state else 0)
        outflow = np.outer(lam, alpha)
        if self.quiet_state:
            outflow = np.hstack([outflow, (lam * (1 - alpha.sum()))[:, None]])
            outflow = np.vstack([outflow, np.zeros(n)])
        T = np.zeros((2 * n, 2 * n))
        up_total = np.concatenate([lam, [0.0]]) if self.quiet_state else lam
        T[:n, :n] = -np.diag(up_total) - q * np.eye(n)
        T[:n, n:] = outflow
        T[n:, :n] = r * np.eye(n)
        T[n:, n:] = -r * np.eye(n)
        drift = np.concatenate([np.full(n, c0), -np.ones(n)])
        return FluidEmbedding(drift=drift, T=T, n_up=n)


def build_cb_map(sub: SubsidiarySpec, c0: float, k: float | None = None, K: float = 0.0,
                 quiet_state: bool = True) -> CbMap:
    """Replace the subsidiary's ladder law by the two-point Pade mixture and read off the CB's MAP."""
    if K > 0:
        raise DomainError("fixed bail-out cost K > 0 is not supported by the MAP builder")
    if sub.claim.kind != "exponential":
        raise DomainError("CB approximation needs exponential subsidiary claims")
    k = sub.k if k is None else k
    mu = float(sub.claim.rates[0])
    rho = sub.lam / (sub.c * mu)
    if rho >= 1:
        raise DomainError("ladder approximation needs rho < 1")
    approx = two_point_pade3(rho).with_time_scale(sub.c * mu)
    lam = approx.real_rates()
    alpha = approx.weights
    n = lam.size
    jump = ClaimLaw.exponential(mu / k)
    outflow = np.outer(lam, alpha)
    defect = lam * (1.0 - alpha.sum())
    size = n + 1 if quiet_state else n
    Q = np.zeros((size, size))
    Q[:n, :n] = outflow - np.diag(np.diag(outflow))
    jumps = {(i, j): jump for i in range(n) for j in range(n) if i != j}
    kill = np.zeros(size)
    if quiet_state:
        Q[:n, n] = defect
        for i in range(n):
            jumps[(i, n)] = jump
    else:
        kill[:n] = defect
    Q -= np.diag(Q.sum(axis=1))
    claim_rates = np.concatenate([np.diag(outflow), np.zeros(size - n)])
    claims = [jump] * n + [None] * (size - n)
    mm = MapModel(Q=Q, c=np.full(size, float(c0)), kill=kill, lam=claim_rates,
                  claims=claims, jumps=jumps)
    init = np.concatenate([alpha, [1.0 - alpha.sum()]]) if quiet_state else alpha.copy()
    return CbMap(mm, init, lam, alpha, mu / k, quiet_state)


def cb_dividend_value(cb: CbMap, q: float, b: float, ss: MatrixScaleSet | None = None) -> float:
    """pi0 W(0) W'(b+)^{-1} 1: barrier dividends from CB capital 0."""
    if ss is None:
        ss = MatrixScaleSet(cb.with_discount(q))
    n = cb.map.n
    val = cb.initial @ ss.W(0.0) @ np.linalg.solve(ss.dW(b), np.ones(n))
    return float(val)


@dataclass(frozen=True)
class DividendScan:
    b: np.ndarray
    value: np.ndarray
    b_star: float
    v_star: float
    unimodal: bool


def dividend_barrier_scan(cb: CbMap, q: float, b_grid) -> DividendScan:
    """Dividend value on a barrier grid and its maximizer (parabolic refinement)."""
    if not q > 0:
        raise DomainError("dividend scan needs q > 0")
    b = np.asarray(b_grid, dtype=float)
    if np.any(b <= 0) or np.any(np.diff(b) <= 0):
        raise DomainError("barrier grid must be positive and increasing")
    ss = MatrixScaleSet(cb.with_discount(q))
    v = np.array([cb_dividend_value(cb, q, bi, ss) for bi in b])
    i = int(np.argmax(v))
    d = np.sign(np.diff(v))
    d = d[d != 0]
    unimodal = bool(np.all(np.diff(d) <= 0))
    if not unimodal:
        log.warning("dividend values are not unimodal on the grid; returning the grid argmax")
        return DividendScan(b, v, float(b[i]), float(v[i]), False)
    if 0 < i < b.size - 1:
        x0, x1, x2 = b[i - 1: i + 2]
        y0, y1, y2 = v[i - 1: i + 2]
        den = (x0 - x1) * (x0 - x2) * (x1 - x2)
        A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
        B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / den
        if A < 0:
            bs = -B / (2 * A)
            if x0 <= bs <= x2:
                return DividendScan(b, v, float(bs), cb_dividend_value(cb, q, bs, ss), True)
    return DividendScan(b, v, float(b[i]), float(v[i]), True)
