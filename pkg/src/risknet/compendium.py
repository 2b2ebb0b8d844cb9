"""First-passage identities for a scalar spectrally negative model.

Every function takes a :class:`~risknet.levy_core.ScaleEval` (or builds one
through :class:`Compendium`) and combines W, Z and Phi in closed form.
``b = INF`` selects the one-sided limiting formulas.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from .laplace import talbot_invert
from .levy_core import DomainError, LevyModel, ScaleEval

INF = math.inf
POLE_TOL = 1e-9
RICHARDSON_STEP = 1e-5


def _check_xb(x, b):
    if not b > 0:
        raise DomainError("upper level b must be positive")
    if np.any(np.asarray(x) < 0) or (math.isfinite(b) and np.any(np.asarray(x) > b)):
        raise DomainError("need 0 <= x <= b")


def _richardson(f, center, h=RICHARDSON_STEP):
    """Two-sided limit of f at a removable singularity."""
    sym = lambda s: 0.5 * (f(center + s) + f(center - s))
    return (4.0 * sym(h / 2) - sym(h)) / 3.0


class Compendium:
    """Caches scale evaluators per discount rate for one model."""

    def __init__(self, model: LevyModel):
        self.model = model
        self._cache: dict[float, ScaleEval] = {}

    def scale(self, q: float) -> ScaleEval:
        q = float(q)
        ev = self._cache.get(q)
        if ev is None:
            ev = self._cache[q] = ScaleEval(self.model, q)
        return ev

    def phi(self, q: float) -> float:
        return self.scale(q).phi

    # -- exits and severities

    def two_sided_exit(self, q, x, b):
        """E_x[e^{-q tau_b^+}; tau_b^+ < tau_0^-] = W(x)/W(b)."""
        _check_xb(x, b)
        ev = self.scale(q)
        return ev.W(x) / ev.W(b)

    def severity_of_ruin(self, q, x, b, theta):
        """E_x[e^{-q tau_0^- + theta X(tau_0^-)}; tau_0^- < tau_b^+]."""
        _check_xb(x, b)
        ev = self.scale(q)
        if math.isfinite(b):
            return ev.Z(x, theta) - ev.W(x) * ev.Z(b, theta) / ev.W(b)
        return ev.Z(x, theta) - ev.W(x) * self._one_sided_factor(ev, theta)

    def _one_sided_factor(self, ev: ScaleEval, theta):
        """(kappa(theta) - q)/(theta - Phi_q); l'Hopital value kappa'(Phi_q) at the pole."""
        if abs(theta - ev.phi) < POLE_TOL:
            return float(ev.model.kappa_prime(ev.phi))
        return (float(ev.model.kappa(theta)) - ev.q) / (theta - ev.phi)

    def ruin_probability(self, x):
        """Infinite-horizon ruin probability (q = 0, theta = 0)."""
        return self.severity_of_ruin(0.0, x, INF, 0.0)

    # -- dividends

    def definetti_dividends(self, q, x, b):
        """Expected discounted dividends under barrier b: W(x)/W'(b+)."""
        _check_xb(x, b)
        ev = self.scale(q)
        d = ev.dW(b)
        if d <= 0:
            raise DomainError("W'(b+) vanishes; barrier value degenerate")
        return ev.W(x) / d

    def poisson_dividends(self, q, nu, x, b):
        """Barrier dividends when ruin is only observed at Poisson(nu) epochs."""
        if not nu > 0:
            raise DomainError("observation rate must be positive")
        _check_xb(x, b)
        ev = self.scale(q)
        th = self.phi(q + nu)
        return ev.Z(x, th) / ev.dZ(b, th)

    def reflected_bailout_lt(self, q, theta, x, b):
        """E_x[e^{-q tau_b^+ - theta L_0(tau_b^+)}] for the process reflected at 0."""
        _check_xb(x, b)
        ev = self.scale(q)
        if math.isinf(theta):
            return ev.W(x) / ev.W(b)
        return ev.Z(x, theta) / ev.Z(b, theta)

    def dividends_with_bailout_killing(self, q, theta, x, b):
        """Dividends of the doubly reflected process until bail-outs exceed an Exp(theta) level."""
        _check_xb(x, b)
        ev = self.scale(q)
        if math.isinf(theta):
            return ev.W(x) / ev.dW(b)
        return ev.Z(x, theta) / ev.dZ(b, theta)

    def regulated_ruin_lt(self, q, x, b):
        """E_x[e^{-q tau_0^-}] under barrier-b reflection: Z(x) - q W(x) W(b)/W'(b)."""
        _check_xb(x, b)
        ev = self.scale(q)
        return ev.Zq(x) - q * ev.W(x) * ev.W(b) / ev.dW(b)

    def regulated_severity(self, q, theta, x, b):
        """Severity transform at ruin for the process reflected at b."""
        _check_xb(x, b)
        ev = self.scale(q)
        return ev.Z(x, theta) - ev.W(x) * ev.dZ(b, theta) / ev.dW(b)

    def dividends_ruin_joint_lt(self, q, theta, vartheta, x, b):
        """E_x[e^{-q tau + theta X(tau) - vartheta R_b(tau)}] at ruin tau under reflection at b."""
        _check_xb(x, b)
        ev = self.scale(q)
        num = ev.dZ(b, theta) + vartheta * ev.Z(b, theta)
        den = ev.dW(b) + vartheta * ev.W(b)
        return ev.Z(x, theta) - ev.W(x) * num / den

    def total_dividends_law(self, q, b, vartheta):
        """Laplace transform in vartheta of the total dividends paid from x = b.

        At q = 0 the total is exponential with rate W'(b+)/W(b); q > 0 uses the
        joint transform with theta = 0.
        """
        if q == 0:
            rate = self.total_dividends_rate(b)
            return rate / (rate + vartheta)
        return self.dividends_ruin_joint_lt(q, 0.0, vartheta, b, b)

    def total_dividends_rate(self, b):
        ev = self.scale(0.0)
        return float(ev.dW(b) / ev.W(b))

    # -- Parisian and Poisson-killed variants

    def parisian_severity(self, q, r, theta, x, b):
        """Severity at Parisian ruin (Exp(r) grace below 0) before passage above b."""
        if not r > 0:
            raise DomainError("Parisian rate must be positive")
        if not math.isfinite(b):
            if np.any(np.asarray(x) < 0):
                raise DomainError("need x >= 0")
        else:
            _check_xb(x, b)
        ev = self.scale(q)
        kap = float(ev.model.kappa(theta))
        if abs(q + r - kap) < POLE_TOL * max(1.0, q + r):
            raise DomainError("pole q + r = kappa(theta)")
        pr = self.phi(q + r)
        if math.isfinite(b):
            ratio = ev.Z(b, theta) / ev.Z(b, pr)
        else:
            ratio = (pr - ev.phi) * self._one_sided_factor(ev, theta) / r
        return (ev.Z(x, theta) - ev.Z(x, pr) * ratio) * r / (q + r - kap)

    def severity_with_upper_poisson_killing(self, q, varpi, theta, x, b):
        """Severity of ruin when the path is killed at rate varpi while above b."""
        if not varpi > 0:
            raise DomainError("killing rate must be positive")
        if np.any(np.asarray(x) < 0):
            raise DomainError("need x >= 0")
        ev = self.scale(q)
        pw = self.phi(q + varpi)

        def value(th):
            g = float(ev.model.kappa(th)) - q
            bracket = (g - varpi * ev.Z(b, th) / ev.Z(b, pw)) / (th - pw)
            return ev.Z(x, th) - ev.W(x) * bracket

        if abs(theta - pw) < POLE_TOL * max(1.0, pw):
            return _richardson(value, theta)
        return value(theta)

    # -- resolvents and Gerber-Shiu

    def resolvent(self, q, x, y, a, b):
        """Density of the q-potential of X killed on leaving [a, b]."""
        if math.isfinite(a) and math.isfinite(b):
            if not (a <= x <= b and a < y < b):
                raise DomainError("need a <= x <= b and a < y < b")
        ev = self.scale(q)
        if math.isinf(a):
            return np.exp(-ev.phi * (b - x)) * ev.W(b - y) - ev.W(x - y)
        return ev.W(x - a) * ev.W(b - y) / ev.W(b - a) - ev.W(x - y)

    def reflected_resolvent(self, q, x, y, b):
        """(density, atom at b) of the q-potential of the process reflected at 0 and b."""
        if q <= 0:
            raise DomainError("reflected resolvent needs q > 0")
        ev = self.scale(q)
        dz = ev.dZ(b, 0.0)
        dens = ev.Zq(x) * ev.dW(b - y) / dz - ev.W(x - y)
        atom = ev.Zq(x) * ev.W(0.0) / dz
        return dens, atom

    def gs_linear_payoffs(self, q, x):
        """(Z_0(x), Z_1(x)): Gerber-Shiu generators for payoffs 1 and y."""
        ev = self.scale(q)
        z0 = ev.Zq(x)
        z1 = ev.Zbar(x) - ev.Wbar(x) * ev.model.drift
        return z0, z1

    def gs_linear_value(self, q, x, b, power: int):
        """E_x[e^{-q tau} X(tau)^power; tau < tau_b^+] for power in {0, 1}."""
        _check_xb(x, b)
        ev = self.scale(q)
        idx = {0: 0, 1: 1}[power]
        fx = self.gs_linear_payoffs(q, x)[idx]
        if math.isinf(b):
            raise DomainError("linear payoff needs finite b")
        fb = self.gs_linear_payoffs(q, b)[idx]
        return fx - ev.W(x) * fb / ev.W(b)


# --------------------------------------------------------------------------
# finite-time ruin for exponential claims


def finite_time_ruin_exponential(model: LevyModel, u: float, t: float) -> float:
    """P(tau_0^- <= t) for exponential claims, via Talbot inversion in the discount rate.

    E_u[e^{-q tau}] = Z_q(u) - W_q(u) q / Phi_q is available in closed form with
    complex q; dividing by q and inverting gives the distribution function.
    """
    if model.claim.kind != "exponential" or model.sigma != 0:
        raise DomainError("closed-form finite-time ruin needs exponential claims and sigma = 0")
    if math.isinf(t):
        return float(Compendium(model).ruin_probability(u))
    c, lam, mu = model.c, model.lam, float(model.claim.rates[0])
    u_mp = mp.mpf(u)

    def lt(q):
        lt_, qt = lam / c, q / c
        a = qt + lt_ - mu
        # sqrt(a^2 + 4 qt mu) written with cuts on the negative q axis only
        r1 = mp.sqrt(lam / c) - mp.sqrt(mu)
        r2 = mp.sqrt(lam / c) + mp.sqrt(mu)
        sq = mp.sqrt(qt + r1**2) * mp.sqrt(qt + r2**2)
        zp, zm = (a + sq) / 2, (a - sq) / 2
        ap, am = (mu + zp) / (c * (zp - zm)), (mu + zm) / (c * (zp - zm))
        W = ap * mp.exp(zp * u_mp) - am * mp.exp(zm * u_mp)
        Wbar = ap * mp.expm1(zp * u_mp) / zp - am * mp.expm1(zm * u_mp) / zm
        Z = 1 + q * Wbar
        return (Z - W * q / zp) / q

    return talbot_invert(lt, t)
