"""One-dimensional spectrally negative risk models and their scale functions.

All claim laws are stored in a phase-type representation ``(beta, B)``;
exponential and hyperexponential laws keep their original parameters for
the fast closed forms. The discount rate ``q`` is never stored on the model;
it is fixed when a :class:`ScaleEval` is built.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .laplace import mp_polyval, talbot_invert

log = logging.getLogger(__name__)

ROOT_TOL = 1e-12
CLUSTER_TOL = 1e-8
QUAD_ABS_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the region where a transform or formula is defined."""


# --------------------------------------------------------------------------
# claim laws


@dataclass(frozen=True, eq=False)
class ClaimLaw:
    """Matrix-exponential claim-size law in phase-type form.

    Use the constructors :meth:`exponential`, :meth:`hyperexponential` and
    :meth:`phase_type` rather than the raw initializer.
    """

    kind: str
    beta: np.ndarray
    B: np.ndarray
    weights: np.ndarray | None = None
    rates: np.ndarray | None = None

    @classmethod
    def exponential(cls, rate: float) -> "ClaimLaw":
        if not rate > 0:
            raise ValueError("exponential rate must be positive")
        r = np.array([float(rate)])
        return cls("exponential", np.array([1.0]), -np.diag(r), np.array([1.0]), r)

    @classmethod
    def hyperexponential(cls, weights, rates) -> "ClaimLaw":
        p = np.asarray(weights, dtype=float).ravel()
        r = np.asarray(rates, dtype=float).ravel()
        if p.shape != r.shape or p.size == 0:
            raise ValueError("weights and rates must be non-empty and of equal length")
        if np.any(p <= 0) or np.any(r <= 0):
            raise ValueError("hyperexponential weights and rates must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("hyperexponential weights must sum to 1")
        return cls("hyperexponential", p.copy(), -np.diag(r), p.copy(), r.copy())

    @classmethod
    def phase_type(cls, beta, B) -> "ClaimLaw":
        beta = np.asarray(beta, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(B, dtype=float))
        m = beta.size
        if B.shape != (m, m):
            raise ValueError("beta and B dimensions disagree")
        if np.any(np.diag(B) >= 0):
            raise ValueError("phase-type sub-generator needs a strictly negative diagonal")
        off = B - np.diag(np.diag(B))
        if np.any(off < 0):
            raise ValueError("phase-type sub-generator needs nonnegative off-diagonal entries")
        if np.any(B.sum(axis=1) > 1e-12):
            raise ValueError("phase-type sub-generator rows must sum to <= 0")
        if np.any(beta < 0) or np.any(beta > 1) or beta.sum() > 1 + 1e-12:
            raise ValueError("initial vector must be sub-stochastic")
        if np.linalg.matrix_rank(B) < m:
            raise ValueError("phase-type sub-generator must be nonsingular")
        return cls("phasetype", beta, B)

    def scaled(self, k: float) -> "ClaimLaw":
        """Law of k * C."""
        if not k > 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "exponential":
            return ClaimLaw.exponential(float(self.rates[0]) / k)
        if self.kind == "hyperexponential":
            return ClaimLaw.hyperexponential(self.weights, self.rates / k)
        return ClaimLaw.phase_type(self.beta, self.B / k)

    # -- basic functionals

    @property
    def order(self) -> int:
        return self.beta.size

    @cached_property
    def exit_vector(self) -> np.ndarray:
        return -self.B.sum(axis=1)

    @cached_property
    def atom_at_zero(self) -> float:
        return max(0.0, 1.0 - float(self.beta.sum()))

    @cached_property
    def mean(self) -> float:
        """First moment m1."""
        if self.rates is not None:
            return float(np.sum(self.weights / self.rates))
        return float(self.beta @ np.linalg.solve(-self.B, np.ones(self.order)))

    @cached_property
    def density_at_zero(self) -> float:
        """f_C(0) = beta . b."""
        return float(self.beta @ self.exit_vector)

    @cached_property
    def decay_rate(self) -> float:
        """Abscissa of convergence: the transform is finite for Re(theta) > -decay_rate."""
        if self.rates is not None:
            return float(self.rates.min())
        return float(np.min(np.real(np.linalg.eigvals(-self.B))))

    def _check_domain(self, theta) -> None:
        re = np.real(theta)
        if np.any(re <= -self.decay_rate):
            raise DomainError(
                f"claim transform diverges for Re(theta) <= {-self.decay_rate:g}"
            )

    def transform(self, theta):
        """E[exp(-theta C)] for real or complex theta (vectorized)."""
        self._check_domain(theta)
        th = np.asarray(theta)
        if self.rates is not None:
            out = np.sum(self.weights * self.rates / (self.rates + th[..., None]), axis=-1)
            return out if out.ndim else out[()]
        vec = np.vectorize(self._ph_transform, otypes=[complex if np.iscomplexobj(th) else float])
        return vec(th)

    def transform_derivative(self, theta):
        """d/dtheta E[exp(-theta C)]."""
        self._check_domain(theta)
        th = np.asarray(theta)
        if self.rates is not None:
            out = -np.sum(self.weights * self.rates / (self.rates + th[..., None]) ** 2, axis=-1)
            return out if out.ndim else out[()]
        vec = np.vectorize(self._ph_transform_derivative,
                           otypes=[complex if np.iscomplexobj(th) else float])
        return vec(th)

    def _ph_transform(self, th):
        M = th * np.eye(self.order) - self.B
        return self.atom_at_zero + self.beta @ np.linalg.solve(M, self.exit_vector)

    def _ph_transform_derivative(self, th):
        M = th * np.eye(self.order) - self.B
        v = np.linalg.solve(M, self.exit_vector)
        return -self.beta @ np.linalg.solve(M, v)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.rates is not None:
            out = np.sum(self.weights * self.rates * np.exp(-self.rates * x[..., None]), axis=-1)
        else:
            from scipy.linalg import expm
            out = np.vectorize(lambda y: float(self.beta @ expm(self.B * y) @ self.exit_vector))(x)
        return np.where(x < 0, 0.0, out)

    def to_dict(self) -> dict:
        """Model-file form (see schemas/claim.json)."""
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": float(self.rates[0])}
        if self.kind == "hyperexponential":
            return {"kind": "hyperexponential", "weights": self.weights.tolist(),
                    "rates": self.rates.tolist()}
        return {"kind": "phasetype", "beta": self.beta.tolist(), "B": self.B.tolist()}


# --------------------------------------------------------------------------
# Levy model


@dataclass(frozen=True, eq=False)
class LevyModel:
    """Cramer-Lundberg process with optional Brownian part: premium ``c``,
    claim arrival rate ``lam``, claim law ``claim`` and Gaussian coefficient ``sigma``."""

    c: float
    lam: float
    claim: ClaimLaw
    sigma: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("premium rate c must be positive")
        if self.lam < 0:
            raise ValueError("claim arrival rate must be nonnegative")
        if self.sigma < 0:
            raise ValueError("Brownian coefficient must be nonnegative")

    @property
    def rho(self) -> float:
        """Loading factor lam * m1 / c."""
        return self.lam * self.claim.mean / self.c

    @property
    def drift(self) -> float:
        """kappa'(0) = c - lam * m1 (no killing)."""
        return self.c - self.lam * self.claim.mean

    @property
    def bounded_variation(self) -> bool:
        return self.sigma == 0.0

    def kappa(self, theta):
        """Laplace exponent c t - lam (1 - E e^{-t C}) + sigma^2 t^2 / 2."""
        th = np.asarray(theta)
        out = self.c * th - self.lam * (1.0 - self.claim.transform(th)) + 0.5 * self.sigma**2 * th**2
        return out if np.ndim(out) else out[()]

    def kappa_prime(self, theta):
        th = np.asarray(theta)
        out = self.c + self.lam * self.claim.transform_derivative(th) + self.sigma**2 * th
        return out if np.ndim(out) else out[()]

    def numerator_poly(self, q: float) -> tuple[np.ndarray, np.ndarray]:
        """Polynomials (N, D), highest degree first, with kappa(s) - q = N(s) / D(s)."""
        cl = self.claim
        D = np.poly(cl.B)
        D2 = np.poly(cl.B + np.outer(cl.exit_vector, cl.beta))
        lead = np.array([0.5 * self.sigma**2, self.c, -q + self.lam * cl.atom_at_zero])
        N = np.polysub(np.polymul(lead, D), self.lam * D2)
        N = np.trim_zeros(N, "f")
        return N, D

    def to_dict(self) -> dict:
        """Model-file form (see schemas/model.json)."""
        return {"c": self.c, "lambda": self.lam, "claim": self.claim.to_dict(), "sigma": self.sigma}


def laplace_exponent(model: LevyModel, theta):
    """kappa(theta) for theta >= 0."""
    if np.any(np.asarray(theta) < 0):
        raise DomainError("laplace_exponent is defined here for theta >= 0")
    return model.kappa(theta)


def phi_root(model: LevyModel, q: float) -> float:
    """Largest nonnegative root of kappa(s) = q (bisection, then Newton polish)."""
    if q < 0:
        raise DomainError("q must be nonnegative")
    f = lambda s: float(model.kappa(s)) - q
    if q == 0 and model.drift >= 0:
        return 0.0
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("could not bracket the root of kappa(s) = q")
    lo = 0.0
    if q == 0:
        # kappa'(0) < 0: kappa dips below zero right of the origin
        lo = hi / 2.0
        while f(lo) >= 0:
            lo /= 2.0
            if lo < 1e-300:
                return 0.0
    while hi - lo > ROOT_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    for _ in range(3):
        d = float(model.kappa_prime(s))
        if d <= 0:
            break
        step = f(s) / d
        cand = s - step
        if abs(f(cand)) <= abs(f(s)):
            s = cand
        if abs(step) < 1e-16 * max(1.0, s):
            break
    return s


# --------------------------------------------------------------------------
# scale functions


def _phi1(z):
    """(exp(z) - 1) / z, entire, complex-safe."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, np.expm1(zs) / zs)
    return out


def _phi2(z):
    """(exp(z) - 1 - z) / z^2, entire, complex-safe."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    out = np.where(small, 0.5 + z / 6 + z * z / 24 + z**3 / 120, (np.expm1(zs) - zs) / zs**2)
    return out


@dataclass(eq=False)
class ScaleEval:
    """Scale functions W_q, Z_q of ``model`` at discount ``q``.

    ``mode`` is "residue" when W is a finite exponential sum (the default for
    every matrix-exponential claim law with simple roots), "linear" for the
    exponential double-root case and "inversion" when the roots cluster.
    """

    model: LevyModel
    q: float = 0.0
    mode: str = field(init=False)
    phi: float = field(init=False)
    roots: np.ndarray = field(init=False, repr=False)
    residues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.q < 0:
            raise DomainError("q must be nonnegative")
        self.phi = phi_root(self.model, self.q)
        self.roots = np.empty(0, dtype=complex)
        self.residues = np.empty(0, dtype=complex)
        m = self.model
        if m.lam == 0 and m.sigma == 0:
            self.mode = "residue"
            self.roots = np.array([self.q / m.c], dtype=complex)
            self.residues = np.array([1.0 / m.c], dtype=complex)
            return
        if m.claim.kind == "exponential" and m.sigma == 0:
            self._exponential_closed_form()
            return
        self._partial_fractions()

    # -- construction helpers

    def _exponential_closed_form(self):
        m = self.model
        mu = float(m.claim.rates[0])
        lt, qt = m.lam / m.c, self.q / m.c
        a = qt + lt - mu
        disc = a * a + 4 * qt * mu
        sq = np.sqrt(disc)
        zp, zm = (a + sq) / 2, (a - sq) / 2
        if sq < CLUSTER_TOL:
            # ρ = 1 and q = 0: W(x) = (1 + mu x) / c
            self.mode = "linear"
            self._linear = (1.0 / m.c, mu / m.c)
            return
        self.mode = "residue"
        self.roots = np.array([zp, zm], dtype=complex)
        self.residues = np.array(
            [(mu + zp) / (m.c * (zp - zm)), -(mu + zm) / (m.c * (zp - zm))], dtype=complex
        )

    def _partial_fractions(self):
        m = self.model
        N, D = m.numerator_poly(self.q)
        self._N, self._D = N, D
        roots = np.roots(N).astype(complex)
        dN = np.polyder(N)
        for _ in range(4):
            d = np.polyval(dN, roots)
            # a vanishing derivative marks a multiple root: leave it to the cluster check
            ok = np.abs(d) > 1e-300
            step = np.zeros_like(roots)
            step[ok] = np.polyval(N, roots[ok]) / d[ok]
            roots = roots - np.where(np.isfinite(step), step, 0.0)
        # The largest real root is Phi(q). Near zero drift the polished polynomial root is
        # far more accurate than bisection on kappa (whose slope there is tiny), and the
        # residues at the two nearly merged roots are large and cancel, so adopt it as Phi.
        k = int(np.argmax(roots.real))
        if abs(roots[k] - self.phi) < 1e-6 * max(1.0, self.phi) and abs(roots[k].imag) < 1e-12:
            roots[k] = roots[k].real
            self.phi = float(roots[k].real)
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        scale = np.maximum(1.0, np.abs(roots))
        if roots.size > 1 and np.min(gaps / scale[:, None]) < CLUSTER_TOL:
            log.warning("clustered roots of kappa(s)=q; using numerical Laplace inversion")
            self.mode = "inversion"
            return
        self.mode = "residue"
        self.roots = roots
        # residue of D/N at a simple root r
        self.residues = np.polyval(D, roots) / np.polyval(dN, roots)

    # -- W and relatives

    def _expsum(self, x, weights):
        x = np.asarray(x, dtype=float)
        e = np.exp(np.multiply.outer(x, self.roots))
        return np.real(e @ weights)

    def W(self, x):
        """W_q(x), zero for x < 0."""
        x = np.asarray(x, dtype=float)
        if self.mode == "residue":
            out = self._expsum(np.maximum(x, 0.0), self.residues)
        elif self.mode == "linear":
            a, b = self._linear
            out = a + b * np.maximum(x, 0.0)
        else:
            out = np.vectorize(self._w_inversion)(np.maximum(x, 0.0))
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else out[()]

    def dW(self, x):
        """Right derivative W_q'(x+) for x >= 0."""
        x = np.asarray(x, dtype=float)
        if self.mode == "residue":
            out = self._expsum(x, self.residues * self.roots)
        elif self.mode == "linear":
            out = np.full_like(x, self._linear[1])
        else:
            out = np.vectorize(lambda y: self._w_inversion(y, order=1))(x)
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else out[()]

    def d2W(self, x):
        """Second derivative W_q''(x+) for x >= 0."""
        x = np.asarray(x, dtype=float)
        if self.mode == "residue":
            out = self._expsum(x, self.residues * self.roots**2)
        elif self.mode == "linear":
            out = np.zeros_like(x)
        else:
            h = 1e-4 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
            f = self.dW
            out = (-f(x + 2 * h) + 4 * f(x + h) - 3 * f(x)) / (2 * h)
        out = np.where(x < 0, 0.0, out)
        return out if out.ndim else out[()]

    def Wbar(self, x):
        """Integral of W_q over [0, x]."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.mode == "residue":
            z = np.multiply.outer(x, self.roots)
            out = np.real((x[..., None] * _phi1(z)) @ self.residues)
        elif self.mode == "linear":
            a, b = self._linear
            out = a * x + b * x * x / 2
        else:
            out = np.vectorize(
                lambda y: integrate.quad(self.W, 0.0, y, epsabs=QUAD_ABS_TOL)[0] if y > 0 else 0.0
            )(x)
        return out if np.ndim(out) else out[()]

    def Wbar2(self, x):
        """Double integral of W_q: int_0^x Wbar(y) dy."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.mode == "residue":
            z = np.multiply.outer(x, self.roots)
            out = np.real(((x * x)[..., None] * _phi2(z)) @ self.residues)
        elif self.mode == "linear":
            a, b = self._linear
            out = a * x * x / 2 + b * x**3 / 6
        else:
            out = np.vectorize(
                lambda y: integrate.quad(self.Wbar, 0.0, y, epsabs=QUAD_ABS_TOL)[0] if y > 0 else 0.0
            )(x)
        return out if np.ndim(out) else out[()]

    # -- Z and relatives

    def Zq(self, x):
        """Z_q(x) = 1 + q Wbar_q(x)."""
        x = np.asarray(x, dtype=float)
        out = np.where(x < 0, 1.0, 1.0 + self.q * self.Wbar(x))
        return out if out.ndim else out[()]

    def Zbar(self, x):
        """Integral of Z_q over [0, x]."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        out = x + self.q * self.Wbar2(x)
        return out if np.ndim(out) else out[()]

    def _symbol_minus_q(self, theta: float) -> float:
        return float(self.model.kappa(theta)) - self.q

    def Z(self, x, theta: float = 0.0):
        """Z_q(x, theta) = e^{theta x}(1 - (kappa(theta) - q) int_0^x e^{-theta y} W(y) dy)."""
        return self._z_family(x, theta, derivative=False)

    def dZ(self, x, theta: float = 0.0):
        """d/dx Z_q(x, theta) = theta Z - (kappa(theta) - q) W(x)."""
        return self._z_family(x, theta, derivative=True)

    def _z_family(self, x, theta, derivative):
        theta = float(theta)
        if theta < 0:
            raise DomainError("theta must be nonnegative")
        x = np.asarray(x, dtype=float)
        g = self._symbol_minus_q(theta)
        if self.mode != "residue":
            z = np.vectorize(lambda y: self._z_quad(y, theta, g))(np.maximum(x, 0.0))
            if derivative:
                z = theta * z - g * self.W(np.maximum(x, 0.0))
            out = np.where(x < 0, (theta if derivative else 1.0) * np.exp(theta * np.minimum(x, 0.0)), z)
            return out if out.ndim else out[()]
        r = self.roots
        xs = np.maximum(x, 0.0)
        near = np.min(np.abs(theta - r)) < 1e-3 * (1.0 + abs(theta))
        if near:
            # regular near a root of the symbol: e^{theta x}[1 - g sum res x phi1((r-theta)x)]
            z = np.multiply.outer(xs, r - theta)
            integral = np.real((xs[..., None] * _phi1(z)) @ self.residues)
            zval = np.exp(theta * xs) * (1.0 - g * integral)
            out = theta * zval - g * self.W(xs) if derivative else zval
        else:
            # Dickson-Hipp form: g * sum res e^{r x} / (theta - r), free of cancellation
            w = self.residues * g / (theta - r)
            if derivative:
                w = w * r
            out = self._expsum(xs, w)
        out = np.where(x < 0, (theta if derivative else 1.0) * np.exp(theta * np.minimum(x, 0.0)), out)
        return out if out.ndim else out[()]

    def _z_quad(self, x, theta, g):
        if x == 0:
            return 1.0
        val, _ = integrate.quad(lambda y: np.exp(-theta * y) * self.W(y), 0.0, x,
                                epsabs=QUAD_ABS_TOL, limit=200)
        return float(np.exp(theta * x) * (1.0 - g * val))

    # -- numerical inversion route

    def _transform_mp(self):
        m = self.model
        N, D = m.numerator_poly(self.q)
        return lambda s: mp_polyval(D, s) / mp_polyval(N, s)

    def _w_inversion(self, x: float, order: int = 0) -> float:
        m = self.model
        F = self._transform_mp()
        w0 = 1.0 / m.c if m.sigma == 0 else 0.0
        if x == 0:
            if order == 0:
                return w0
            raise DomainError("derivative at 0 via inversion: use scale_derivatives_at_zero")
        shift = self.phi + 1.0
        if order == 0:
            G = F
        else:
            G = lambda s: s * F(s) - w0
        return talbot_invert(G, x, shift=shift)

    def W_by_inversion(self, x):
        """W_q(x) through fixed-Talbot inversion of 1/(kappa(s)-q), for cross-checks."""
        return np.vectorize(self._w_inversion)(np.asarray(x, dtype=float))


def scale_w(ev: ScaleEval, x):
    return ev.W(x)


def scale_z(ev: ScaleEval, x, theta: float = 0.0):
    return ev.Z(x, theta)


def scale_derivatives_at_zero(ev: ScaleEval) -> tuple[float, float, float]:
    """(W(0), W'(0+), W''(0+)) for bounded-variation models."""
    m = ev.model
    if m.sigma > 0:
        raise DomainError("derivatives at zero are given here for sigma = 0 only")
    lt, qt = m.lam / m.c, ev.q / m.c
    fc0 = m.claim.density_at_zero
    return (1.0 / m.c, (lt + qt) / m.c, ((lt + qt) ** 2 - lt * fc0) / m.c)
