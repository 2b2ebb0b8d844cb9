"""Monte-Carlo estimators built on the event-driven kernels."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..levy_core import ClaimLaw, DomainError, LevyModel
from . import kernels as K
from ._jit import USE_NUMBA

log = logging.getLogger(__name__)

CAP_EXPONENT = 30.0


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    seed: int = 20240917
    horizon: float = math.inf
    q: float = 0.0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.q < 0:
            raise ValueError("discount must be nonnegative")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    stderr: float
    n: int
    elapsed: float = 0.0

    @classmethod
    def from_samples(cls, samples, elapsed: float = 0.0) -> "SimEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        sd = float(x.std(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), sd / math.sqrt(n), n, elapsed)

    def z_score(self, value: float) -> float:
        if self.stderr == 0:
            return 0.0 if abs(self.mean - value) < 1e-12 else math.inf
        return (self.mean - value) / self.stderr

    def agrees(self, value: float, k: float = 3.0) -> bool:
        return abs(self.z_score(value)) <= k

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "elapsed": self.elapsed}


# --------------------------------------------------------------------------
# packing


def pack_law(law: ClaimLaw, width: int | None = None):
    """(order, cumulative initial vector, holding rates, cumulative jump table)."""
    m = law.order
    w = m if width is None else width
    beta_cum = np.ones(w)
    beta_cum[:m] = np.cumsum(law.beta)
    if law.atom_at_zero < 1e-12:
        beta_cum[m - 1] = 1.0
    rates = np.ones(w)
    rates[:m] = -np.diag(law.B)
    trans = np.ones((w, w))
    for i in range(m):
        row = law.B[i] / rates[i]
        row = np.where(np.arange(m) == i, 0.0, row)
        trans[i, :m] = np.cumsum(row)
    return m, beta_cum, rates, trans


def _run(fn, *args):
    if USE_NUMBA:
        return fn(*args)
    with np.errstate(over="ignore"):
        return fn(*args)


def adjustment_coefficient(model: LevyModel) -> float:
    """R > 0 with kappa(-R) = 0 (positive drift only)."""
    if model.drift <= 0:
        raise DomainError("adjustment coefficient needs positive drift")
    f = lambda r: float(model.kappa(-r))
    hi = model.claim.decay_rate * (1 - 1e-12)
    if model.sigma > 0:
        hi = min(hi, 2 * model.c / model.sigma**2 + hi)
    if f(hi) <= 0:
        # kappa stays negative up to the abscissa; any level cap below it is conservative
        return hi
    return optimize.brentq(f, 1e-12, hi, xtol=1e-14)


def infinite_horizon_proxy(model: LevyModel) -> tuple[float, float]:
    """(level cap, time cap) standing in for an infinite horizon.

    From above the cap ruin has probability <= e^{-30}; the time cap 30/gamma,
    gamma = -min_{s<0} kappa(s), guards paths that linger below it.
    """
    if model.drift <= 0:
        return math.inf, 1e6
    R = adjustment_coefficient(model)
    res = optimize.minimize_scalar(lambda s: float(model.kappa(-s)), bounds=(0.0, R), method="bounded")
    gamma = -float(res.fun)
    return CAP_EXPONENT / R, CAP_EXPONENT / max(gamma, 1e-9) + CAP_EXPONENT / R / model.c


def _check_scalar(model: LevyModel):
    if model.sigma != 0:
        raise DomainError("the path simulator handles sigma = 0 models only")


def scalar_rows(model: LevyModel, cfg: SimConfig, x0: float, b: float = math.inf,
                lower: int = K.LOWER_ABSORB, lower_rate: float = 0.0,
                upper: int = K.UPPER_NONE, upper_rate: float = 0.0, bail_theta: float = 0.0,
                t_max: float | None = None, level_cap: float | None = None) -> np.ndarray:
    """Raw per-path rows of the scalar kernel (see :func:`kernels.scalar_paths`)."""
    _check_scalar(model)
    if t_max is None or level_cap is None:
        cap, tcap = infinite_horizon_proxy(model) if cfg.q == 0 else (math.inf, 40.0 / cfg.q)
        if cfg.q == 0 and upper in (K.UPPER_ABSORB, K.UPPER_REFLECT):
            cap = math.inf
        t_max = min(cfg.horizon, tcap) if t_max is None else t_max
        level_cap = cap if level_cap is None else level_cap
    _, beta_cum, rates, trans = pack_law(model.claim)
    return _run(K.scalar_paths, cfg.n_paths, np.uint64(cfg.seed), float(x0), float(model.c),
                float(model.lam), beta_cum, rates, trans, float(b), int(lower), float(lower_rate),
                int(upper), float(upper_rate), float(cfg.q), float(bail_theta), float(t_max),
                float(level_cap))


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        samples = fn(*args, **kwargs)
        return SimEstimate.from_samples(samples, time.perf_counter() - t0)

    wrapper.__doc__ = fn.__doc__
    wrapper.__name__ = fn.__name__
    return wrapper


@_timed
def simulate_ruin(model: LevyModel, u: float, cfg: SimConfig):
    """P(tau_0^- < horizon) (discounted by e^{-q tau} when cfg.q > 0)."""
    rows = scalar_rows(model, cfg, u)
    hit = rows[:, 0] == K.RUIN
    return hit * np.exp(-cfg.q * rows[:, 1])


@_timed
def simulate_two_sided_exit(model: LevyModel, x: float, b: float, cfg: SimConfig):
    rows = scalar_rows(model, cfg, x, b, upper=K.UPPER_ABSORB)
    return (rows[:, 0] == K.EXIT_UP) * np.exp(-cfg.q * rows[:, 1])


@_timed
def simulate_severity(model: LevyModel, x: float, b: float, theta: float, cfg: SimConfig):
    upper = K.UPPER_ABSORB if math.isfinite(b) else K.UPPER_NONE
    rows = scalar_rows(model, cfg, x, b, upper=upper)
    return (rows[:, 0] == K.RUIN) * np.exp(-cfg.q * rows[:, 1] + theta * rows[:, 2])


@_timed
def simulate_dividends(model: LevyModel, b: float, cfg: SimConfig, x: float | None = None,
                       observation_rate: float | None = None, reflect_below: bool = False,
                       bail_theta: float = 0.0):
    """Discounted barrier-b dividends; ruin observed at Poisson epochs if ``observation_rate``."""
    if not b > 0:
        raise DomainError("barrier must be positive")
    if cfg.q == 0 and not reflect_below:
        log.warning("q = 0: dividends are truncated at the horizon proxy")
    x = b if x is None else x
    if reflect_below:
        lower, rate = K.LOWER_REFLECT, 0.0
    elif observation_rate is not None:
        lower, rate = K.LOWER_CLOCK, observation_rate
    else:
        lower, rate = K.LOWER_ABSORB, 0.0
    rows = scalar_rows(model, cfg, x, b, lower=lower, lower_rate=rate, upper=K.UPPER_REFLECT,
                       bail_theta=bail_theta)
    return rows[:, 3]


@_timed
def simulate_regulated_ruin(model: LevyModel, x: float, b: float, theta: float, cfg: SimConfig):
    """E[e^{-q tau + theta X(tau)}] at ruin for the process reflected at b."""
    rows = scalar_rows(model, cfg, x, b, upper=K.UPPER_REFLECT)
    return (rows[:, 0] == K.RUIN) * np.exp(-cfg.q * rows[:, 1] + theta * rows[:, 2])


@_timed
def simulate_parisian_severity(model: LevyModel, r: float, x: float, b: float, theta: float,
                               cfg: SimConfig):
    upper = K.UPPER_ABSORB if math.isfinite(b) else K.UPPER_NONE
    rows = scalar_rows(model, cfg, x, b, lower=K.LOWER_CLOCK, lower_rate=r, upper=upper)
    return (rows[:, 0] == K.RUIN) * np.exp(-cfg.q * rows[:, 1] + theta * rows[:, 2])


@_timed
def simulate_total_dividends(model: LevyModel, b: float, vartheta: float, cfg: SimConfig):
    """E[e^{-vartheta R_b(tau)}] from x = b (undiscounted total dividends until ruin)."""
    rows = scalar_rows(model, cfg, b, b, upper=K.UPPER_REFLECT)
    return np.exp(-vartheta * rows[:, 4])


def total_dividend_samples(model: LevyModel, b: float, cfg: SimConfig) -> np.ndarray:
    rows = scalar_rows(model, cfg, b, b, upper=K.UPPER_REFLECT)
    return rows[rows[:, 0] == K.RUIN, 4]


def simulate_ladder(model: LevyModel, n_epochs: int, seed: int, t_max: float | None = None):
    """Samples of the first descending ladder epoch from 0 and the depth below 0.

    Returns (times, depths, censored_fraction); censored paths never went below 0
    before the level/time caps.
    """
    cfg = SimConfig(n_paths=n_epochs, seed=seed)
    cap, tcap = infinite_horizon_proxy(model)
    rows = scalar_rows(model, cfg, 0.0, t_max=tcap if t_max is None else t_max, level_cap=cap)
    hit = rows[:, 0] == K.RUIN
    return rows[hit, 1], -rows[hit, 2], float(1.0 - hit.mean())


# --------------------------------------------------------------------------
# MAP paths


@dataclass(frozen=True)
class MapRows:
    code: np.ndarray
    time: np.ndarray
    level: np.ndarray
    weight: np.ndarray
    phase: np.ndarray
    start: np.ndarray
    dividends: np.ndarray

    def by_start(self, values: np.ndarray, i: int) -> SimEstimate:
        return SimEstimate.from_samples(values[self.start == i])


def simulate_map_rows(mm, cfg: SimConfig, x0: float, b: float = math.inf,
                      initial=None, lower: int = K.LOWER_ABSORB, lower_rate: float = 0.0,
                      upper: int = K.UPPER_NONE, t_max: float | None = None,
                      level_cap: float = math.inf) -> MapRows:
    """Simulate a MapModel; per-phase killing acts as a discount weight."""
    if np.any(mm.sigma > 0):
        raise DomainError("the path simulator handles sigma = 0 models only")
    n = mm.n
    init = np.full(n, 1.0 / n) if initial is None else np.asarray(initial, float)
    init_cum = np.cumsum(init / init.sum())
    init_cum[-1] = 1.0
    laws = [l for l in mm.claims if l is not None] + list(mm.jumps.values())
    width = max([l.order for l in laws], default=1)
    claim_order = np.zeros(n, dtype=np.int64)
    claim_beta = np.ones((n, width))
    claim_rates = np.ones((n, width))
    claim_trans = np.ones((n, width, width))
    for i, law in enumerate(mm.claims):
        if law is not None:
            claim_order[i], claim_beta[i], claim_rates[i], claim_trans[i] = pack_law(law, width)
    off = mm.Q - np.diag(np.diag(mm.Q))
    out_rate = off.sum(axis=1)
    trans_cum = np.ones((n, n))
    for i in range(n):
        if out_rate[i] > 0:
            trans_cum[i] = np.cumsum(off[i] / out_rate[i])
            trans_cum[i, np.nonzero(off[i])[0].max():] = 1.0
    jump_order = np.zeros((n, n), dtype=np.int64)
    jump_beta = np.ones((n, n, width))
    jump_rates = np.ones((n, n, width))
    jump_trans = np.ones((n, n, width, width))
    has_jump = np.zeros((n, n), dtype=np.bool_)
    for (i, j), law in mm.jumps.items():
        has_jump[i, j] = True
        jump_order[i, j], jump_beta[i, j], jump_rates[i, j], jump_trans[i, j] = pack_law(law, width)
    if t_max is None:
        t_max = min(cfg.horizon, 40.0 / max(float(mm.kill.min()), 1e-3))
    rows = _run(K.map_paths, cfg.n_paths, np.uint64(cfg.seed), init_cum, float(x0),
                mm.c.astype(float), mm.kill.astype(float), mm.lam.astype(float), claim_order,
                claim_beta, claim_rates, claim_trans, out_rate, trans_cum, jump_order, jump_beta,
                jump_rates, jump_trans, has_jump, float(b), int(lower), float(lower_rate),
                int(upper), float(t_max), float(level_cap))
    return MapRows(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4].astype(int),
                   rows[:, 5 + n].astype(int), rows[:, 5:5 + n])


# --------------------------------------------------------------------------
# CB networks


@dataclass(frozen=True)
class NetworkRows:
    tau_network: np.ndarray
    tau_pooled: np.ndarray


RESET_POLICIES = {"zero": 0, "fixed": 1, "uniform": 2}


def simulate_network_rows(net, cfg: SimConfig, reset: str = "zero",
                          reset_level: float = 0.5) -> NetworkRows:
    """Transfer dynamics: the CB pays k x deficit and resets the subsidiary (capped by its cash)."""
    subs = net.subsidiaries
    if net.chain:
        raise DomainError("chain networks are simulated through their reduction")
    width = max(s.claim.order for s in subs)
    I = len(subs)
    order = np.zeros(I, dtype=np.int64)
    beta = np.ones((I, width))
    rates = np.ones((I, width))
    trans = np.ones((I, width, width))
    for i, s in enumerate(subs):
        order[i], beta[i], rates[i], trans[i] = pack_law(s.claim, width)
    t_max = cfg.horizon if math.isfinite(cfg.horizon) else 1e4
    pooled_cap = math.inf
    if I == 1 and not math.isfinite(cfg.horizon):
        # one subsidiary: network ruin is ruin of the reduced process, so its level cap is exact
        from ..cb_network import reduce_deterministic_cb
        red = reduce_deterministic_cb(net)
        cap, tcap = infinite_horizon_proxy(red.model)
        pooled_cap = subs[0].k * cap
        t_max = tcap
    rows = _run(K.network_paths, cfg.n_paths, np.uint64(cfg.seed), float(net.u0), float(net.c0),
                np.array([s.u for s in subs], float), np.array([s.c for s in subs], float),
                np.array([s.k for s in subs], float), np.array([s.lam for s in subs], float),
                order, beta, rates, trans, RESET_POLICIES[reset], float(reset_level), float(t_max),
                float(pooled_cap))
    return NetworkRows(rows[:, 0], rows[:, 1])


def simulate_network_ruin(net, cfg: SimConfig, reset: str = "zero",
                          reset_level: float = 0.5) -> SimEstimate:
    t0 = time.perf_counter()
    rows = simulate_network_rows(net, cfg, reset, reset_level)
    ruined = np.isfinite(rows.tau_network) & (rows.tau_network <= cfg.horizon)
    return SimEstimate.from_samples(ruined, time.perf_counter() - t0)
