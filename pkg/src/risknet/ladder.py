"""Ladder-time law of the Cramer-Lundberg process with exponential claims.

Time is measured in the scaled unit ``t~ = c mu t``; ``rho = lam / (c mu)`` and
the scaled discount is ``delta = q / (c mu)``. The first descending ladder epoch
from 0 then has the defective density

    rho * exp(-(1 + rho) t) * 0F1(; 2; rho t^2),

with total mass min(rho, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .laplace import talbot_invert

SERIES_TOL = 1e-15
SERIES_T_MAX = 50.0


# --------------------------------------------------------------------------
# exact law


def _series_density(rho: float, t: np.ndarray) -> np.ndarray:
    z = rho * t * t
    term = np.ones_like(t)
    total = np.ones_like(t)
    k = 0
    while True:
        term = term * z / ((k + 1) * (k + 2))
        total = total + term
        k += 1
        if np.all(term <= SERIES_TOL * total):
            break
    return rho * np.exp(-(1.0 + rho) * t) * total


def _bessel_density(rho: float, t: np.ndarray) -> np.ndarray:
    # 0F1(;2;z) = I_1(2 sqrt z)/sqrt z; exponentially scaled to avoid overflow
    s = np.sqrt(rho)
    arg = 2.0 * s * t
    return s * special.ive(1, arg) * np.exp(-((1.0 - s) ** 2) * t) / t


def exact_ladder_density(rho: float, t):
    """Defective density of the first ladder epoch in scaled time."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    flat = np.atleast_1d(t).ravel()
    out = np.empty_like(flat)
    use_series = (flat <= SERIES_T_MAX) & (2.0 * np.sqrt(rho) * flat < 600.0)
    if use_series.any():
        out[use_series] = _series_density(rho, flat[use_series])
    if (~use_series).any():
        out[~use_series] = _bessel_density(rho, flat[~use_series])
    out = out.reshape(t.shape)
    return out if out.ndim else out[()]


def exact_ladder_density_by_inversion(rho: float, t: float) -> float:
    """Same density obtained by Talbot inversion of :func:`exact_ladder_lt`."""
    if t == 0:
        return float(rho)
    r = mp.mpf(rho)
    sr = mp.sqrt(r)

    def lt(d):
        s = d + r + 1
        # product of principal roots keeps both cuts on the negative real axis
        return (s - mp.sqrt(s - 2 * sr) * mp.sqrt(s + 2 * sr)) / 2

    return talbot_invert(lt, float(t))


_GL_X, _GL_W = legendre.leggauss(24)


def exact_ladder_cdf(rho: float, t, panel: float = 0.25):
    """Defective distribution function int_0^t of the exact ladder density."""
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t).ravel()
    tmax = float(flat.max()) if flat.size else 0.0
    edges = np.arange(0.0, tmax + panel, panel)
    edges = np.union1d(edges, flat)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = exact_ladder_density(rho, nodes)
    pieces = half * (vals @ _GL_W)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    out = np.interp(flat, edges, cum).reshape(t.shape)
    return out if out.ndim else out[()]


def exact_ladder_lt(rho: float, delta):
    """Laplace transform of the ladder density at scaled discount delta >= 0."""
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0):
        raise ValueError("delta must be nonnegative")
    s = d + rho + 1.0
    # rationalized smaller root of r^2 - s r + rho: no cancellation for large delta
    out = 2.0 * rho / (s + np.sqrt((s - 2 * np.sqrt(rho)) * (s + 2 * np.sqrt(rho))))
    return out if out.ndim else out[()]


# --------------------------------------------------------------------------
# continued fraction


def cf_convergent(rho: float, delta: float, n: int) -> float:
    """n-th convergent of rho / (1 + delta + rho - rho / (1 + delta + rho - ...))."""
    if n < 1:
        raise ValueError("order must be >= 1")
    s = 1.0 + delta + rho
    r = 0.0
    for _ in range(n):
        r = rho / (s - r)
    return r


def catalan_convergent_polys(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator (ascending powers of a) of the n-th Catalan convergent.

    K_0 = 1 and K_n = 1 / (1 - a K_{n-1}); K_n tends to (1 - sqrt(1 - 4a)) / (2a).
    """
    num, den = np.array([1.0]), np.array([1.0])
    for _ in range(n):
        # 1 / (1 - a num/den) = den / (den - a num)
        a_num = np.concatenate([[0.0], num])
        new_den = np.zeros(max(den.size, a_num.size))
        new_den[: den.size] += den
        new_den[: a_num.size] -= a_num
        num, den = den, new_den
    return num, den


def catalan_generating(a):
    """(1 - sqrt(1 - 4a)) / (2a), the Catalan-number generating function."""
    a = np.asarray(a, dtype=float)
    out = np.where(a == 0, 1.0, 2.0 / (1.0 + np.sqrt(1.0 - 4.0 * np.where(a == 0, 0.0, a))))
    return out if out.ndim else out[()]


# --------------------------------------------------------------------------
# hyperexponential approximations


@dataclass(frozen=True)
class HyperExpDensity:
    """Density sum_i weights_i * rates_i * exp(-rates_i t) in scaled time."""

    weights: np.ndarray
    rates: np.ndarray
    time_scale: float = 1.0

    def __post_init__(self):
        w, r = np.asarray(self.weights, float), np.asarray(self.rates, float)
        if w.shape != r.shape:
            raise ValueError("weights and rates must align")
        if np.any(w < 0) or np.any(r <= 0):
            raise ValueError("need nonnegative weights and positive rates")
        if np.unique(r).size != r.size:
            raise ValueError("rates must be pairwise distinct")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-np.multiply.outer(t, self.rates)) @ (self.weights * self.rates)
        return out if np.ndim(out) else out[()]

    def density_derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = -np.exp(-np.multiply.outer(t, self.rates)) @ (self.weights * self.rates**2)
        return out if np.ndim(out) else out[()]

    def lt(self, delta):
        d = np.asarray(delta, dtype=float)
        out = (1.0 / (self.rates + d[..., None])) @ (self.weights * self.rates)
        return out if np.ndim(out) else out[()]

    def with_time_scale(self, scale: float) -> "HyperExpDensity":
        return HyperExpDensity(self.weights, self.rates, float(scale))

    def real_rates(self) -> np.ndarray:
        """Rates in unscaled time."""
        return self.rates * self.time_scale

    def real_density(self, t):
        return self.density(np.asarray(t, dtype=float) * self.time_scale) * self.time_scale


def cf_pade3(rho: float) -> HyperExpDensity:
    """Three-term mixture whose transform is the third continued-fraction convergent."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    s = np.sqrt(2.0 * rho)
    rates = np.array([1 + rho, 1 + rho + s, 1 + rho - s])
    weights = np.array([rho / (2 * (1 + rho)), rho / (4 * rates[1]), rho / (4 * rates[2])])
    return HyperExpDensity(weights, rates)


def two_point_pade3(rho: float) -> HyperExpDensity:
    """Mixture matching the defect at delta = 0 and the expansion at delta = infinity.

    Weights come from partial fractions of
    rho/(rho+2) [(rho+1)/(delta+rho+1) + (delta+rho+1)/(delta^2 + 2(rho+1)delta + 1)].
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    s = np.sqrt(rho * (rho + 2.0))
    rates = np.array([rho + 1, rho + 1 + s, rho + 1 - s])
    weights = np.array(
        [rho / (rho + 2), rho / (2 * (rho + 2) * rates[1]), rho / (2 * (rho + 2) * rates[2])]
    )
    return HyperExpDensity(weights, rates)


def two_point_pade3_lt(rho: float, delta):
    """The rational transform itself, before partial fractions."""
    d = np.asarray(delta, dtype=float)
    return rho / (rho + 2) * ((rho + 1) / (d + rho + 1)
                              + (d + rho + 1) / (d * d + 2 * (rho + 1) * d + 1))


def approximation_report(rho: float, t_grid) -> dict:
    """Exact and approximate ladder densities on a grid with pointwise ordering."""
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("empty grid")
    exact = exact_ladder_density(rho, t)
    cf3 = cf_pade3(rho).density(t)
    tp3 = two_point_pade3(rho).density(t)
    lo, hi = np.minimum(cf3, tp3), np.maximum(cf3, tp3)
    between = (exact >= lo - 1e-15) & (exact <= hi + 1e-15)
    return {
        "t": t,
        "exact": exact,
        "cf3": cf3,
        "tp3": tp3,
        "between": between,
        "fraction_between": float(between.mean()),
        "max_err_cf3": float(np.max(np.abs(cf3 - exact))),
        "max_err_tp3": float(np.max(np.abs(tp3 - exact))),
        "mass_cf3": cf_pade3(rho).mass,
        "mass_tp3": two_point_pade3(rho).mass,
    }
