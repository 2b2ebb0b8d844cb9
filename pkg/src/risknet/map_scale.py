"""Spectrally negative Markov additive processes: symbol, G, scale matrices.

Matrix-exponential jumps are unfolded into linear stages (drift -1) and each
Brownian phase gets one auxiliary coordinate, so that

    K(s)^{-1} = top-left n x n block of (s E + F)^{-1}

for a constant pencil (E, F). With ``M = -E^{-1} F`` this gives
``W(x) = [expm(M x) E^{-1}]_{n x n}``; the residue expansion over the
eigenvalues of M is used when they are well separated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .levy_core import ClaimLaw, DomainError, LevyModel, phi_root

log = logging.getLogger(__name__)

G_TOL = 1e-12
G_MAX_ITER = 10_000
EIG_COND_MAX = 1e6


def _law_at_matrix(law: ClaimLaw | None, A: np.ndarray, left: bool = False) -> np.ndarray:
    """int e^{A x} F(dx) for a stable-enough matrix A (A = G or R)."""
    n = A.shape[0]
    if law is None:
        return np.eye(n)
    m = law.order
    I = np.eye(n)
    kron_sum = np.kron(law.B, I) + np.kron(np.eye(m), A)
    beta = np.kron(law.beta[None, :], I)
    exit_ = np.kron(law.exit_vector[:, None], I)
    out = beta @ np.linalg.solve(-kron_sum, exit_)
    return out + law.atom_at_zero * I


@dataclass(eq=False)
class MapModel:
    """n-phase spectrally negative MAP with matrix-exponential jumps.

    ``claims[i]`` is the claim law of phase i (arrival rate ``lam[i]``);
    ``jumps[(i, j)]`` is the jump law fired by the i -> j modulator transition.
    """

    Q: np.ndarray
    c: np.ndarray
    sigma: np.ndarray | None = None
    kill: np.ndarray | None = None
    lam: np.ndarray | None = None
    claims: list | None = None
    jumps: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = self.Q.shape[0]
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        self.sigma = np.zeros(n) if self.sigma is None else np.asarray(self.sigma, float).reshape(n)
        self.kill = np.zeros(n) if self.kill is None else np.asarray(self.kill, float).reshape(n)
        self.lam = np.zeros(n) if self.lam is None else np.asarray(self.lam, float).reshape(n)
        self.claims = [None] * n if self.claims is None else list(self.claims)
        if self.Q.shape != (n, n) or len(self.claims) != n:
            raise ValueError("inconsistent phase dimensions")
        off = self.Q - np.diag(np.diag(self.Q))
        if np.any(off < 0):
            raise ValueError("modulator generator needs nonnegative off-diagonal entries")
        if np.any(self.Q.sum(axis=1) > 1e-12):
            raise ValueError("modulator generator rows must sum to <= 0")
        if np.any(self.kill < 0) or np.any(self.lam < 0) or np.any(self.sigma < 0):
            raise ValueError("rates must be nonnegative")
        for i in range(n):
            if self.lam[i] > 0 and self.claims[i] is None:
                raise ValueError(f"phase {i} has claims without a claim law")
            if self.sigma[i] == 0 and self.c[i] <= 0:
                raise ValueError(f"phase {i} is a.s. non-increasing")
        for (i, j) in self.jumps:
            if i == j or self.Q[i, j] <= 0:
                raise ValueError(f"jump law attached to absent transition {i}->{j}")

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def from_levy(cls, model: LevyModel, q: float = 0.0) -> "MapModel":
        return cls(Q=np.zeros((1, 1)), c=[model.c], sigma=[model.sigma], kill=[q],
                   lam=[model.lam], claims=[model.claim])

    def phase_levy(self, i: int) -> LevyModel:
        claim = self.claims[i] if self.claims[i] is not None else ClaimLaw.exponential(1.0)
        return LevyModel(self.c[i], self.lam[i] if self.claims[i] is not None else 0.0,
                         claim, self.sigma[i])

    # -- symbol

    def symbol(self, theta) -> np.ndarray:
        """K(theta) = Diag(kappa_i(theta) - q_i) + Q o U(theta)."""
        th = complex(theta) if np.iscomplexobj(theta) else float(theta)
        n = self.n
        K = np.array(self.Q, dtype=complex if isinstance(th, complex) else float)
        for i in range(n):
            kap = self.c[i] * th + 0.5 * self.sigma[i] ** 2 * th * th - self.kill[i]
            if self.lam[i] > 0:
                kap -= self.lam[i] * (1.0 - self.claims[i].transform(th))
            K[i, i] += kap
        for (i, j), law in self.jumps.items():
            K[i, j] = self.Q[i, j] * law.transform(th)
        return K

    def symbol_right(self, G: np.ndarray) -> np.ndarray:
        """K evaluated at -G with matrix functions acting on the right (K(-G)=0 for G)."""
        n = self.n
        out = -np.diag(self.c) @ G + 0.5 * np.diag(self.sigma**2) @ G @ G - np.diag(self.kill)
        for i in range(n):
            row = np.zeros(n)
            if self.lam[i] > 0:
                row = row + self.lam[i] * (_law_at_matrix(self.claims[i], G)[i] - np.eye(n)[i])
            for j in range(n):
                if self.Q[i, j] != 0:
                    law = self.jumps.get((i, j))
                    row = row + self.Q[i, j] * _law_at_matrix(law, G)[j]
            out[i] += row
        return out

    def symbol_left(self, R: np.ndarray) -> np.ndarray:
        """K evaluated at -R with matrix functions acting on the left (K(-R)=0 for R)."""
        n = self.n
        out = -R @ np.diag(self.c) + 0.5 * R @ R @ np.diag(self.sigma**2) - np.diag(self.kill)
        for i in range(n):
            col_i = np.zeros(n)
            if self.lam[i] > 0:
                col_i = self.lam[i] * (_law_at_matrix(self.claims[i], R)[:, i] - np.eye(n)[:, i])
            out[:, i] += col_i
            for j in range(n):
                if self.Q[i, j] != 0:
                    law = self.jumps.get((i, j))
                    out[:, j] += self.Q[i, j] * _law_at_matrix(law, R)[:, i]
        return out

    # -- linearization

    def fluid_embedding(self) -> "FluidEmbedding":
        """Unfold jumps into stages with drift -1 (bounded-variation phases only)."""
        if np.any(self.sigma > 0):
            raise DomainError("fluid embedding needs sigma = 0 in every phase")
        n = self.n
        # one stage block per (destination phase, jump law); sources share it
        blocks: dict = {}
        feeds = []  # (source, destination, law, rate)
        for i in range(n):
            if self.lam[i] > 0:
                feeds.append((i, i, self.claims[i], self.lam[i]))
        for (i, j), law in sorted(self.jumps.items()):
            feeds.append((i, j, law, self.Q[i, j]))
        pos = n
        for (_, j, law, _) in feeds:
            key = (j, law.beta.tobytes(), law.B.tobytes())
            if key not in blocks:
                blocks[key] = (pos, law)
                pos += law.order
        size = pos
        T = np.zeros((size, size))
        T[:n, :n] = self.Q - np.diag(self.kill)
        for (i, j) in self.jumps:
            T[i, j] = 0.0
        for (i, j, law, rate) in feeds:
            start, _ = blocks[(j, law.beta.tobytes(), law.B.tobytes())]
            T[i, start:start + law.order] += rate * law.beta
            if i == j:
                # a claim of size zero leaves the phase unchanged
                T[i, i] -= rate * (1.0 - law.atom_at_zero)
            else:
                T[i, j] += rate * law.atom_at_zero
        for (j, _, _), (start, law) in blocks.items():
            sl = slice(start, start + law.order)
            T[sl, sl] = law.B
            T[sl, j] += law.exit_vector
        drift = np.concatenate([self.c, -np.ones(size - n)])
        return FluidEmbedding(drift=drift, T=T, n_up=n)

    def pencil(self) -> tuple[np.ndarray, np.ndarray]:
        """(E, F) with K(s)^{-1} the top-left block of (sE + F)^{-1}."""
        fl = self.fluid_embedding_general()
        N = fl.T.shape[0]
        brown = np.nonzero(self.sigma > 0)[0]
        nb = brown.size
        E = np.zeros((N + nb, N + nb))
        F = np.zeros((N + nb, N + nb))
        E[:N, :N] = np.diag(fl.drift)
        F[:N, :N] = fl.T
        for a, i in enumerate(brown):
            E[i, N + a] = 0.5 * self.sigma[i] ** 2
            E[N + a, i] = 1.0
            F[N + a, N + a] = -1.0
        return E, F

    def fluid_embedding_general(self) -> "FluidEmbedding":
        saved = self.sigma
        try:
            self.sigma = np.zeros(self.n)
            return self.fluid_embedding()
        finally:
            self.sigma = saved


@dataclass(eq=False)
class FluidEmbedding:
    """Markov-modulated linear fluid: rates ``drift``, generator ``T``; first ``n_up`` phases go up."""

    drift: np.ndarray
    T: np.ndarray
    n_up: int

    def symbol(self, s) -> np.ndarray:
        return np.diag(self.drift) * s + self.T

    def riccati_G(self, seed: np.ndarray | None = None, tol: float = G_TOL,
                  max_iter: int = G_MAX_ITER) -> tuple[np.ndarray, int]:
        """Fixed point G = C^{-1}(T_uu + T_ud Psi(G)), Psi solving T_dd Psi + Psi G = -T_du."""
        n = self.n_up
        C = self.drift[:n]
        Tuu, Tud = self.T[:n, :n], self.T[:n, n:]
        Tdu, Tdd = self.T[n:, :n], self.T[n:, n:]
        G = np.diag(np.diag(Tuu) / C) if seed is None else np.array(seed, dtype=float)
        if Tdd.size == 0:
            return Tuu / C[:, None], 0
        for it in range(1, max_iter + 1):
            Psi = linalg.solve_sylvester(Tdd, G, -Tdu)
            G_new = (Tuu + Tud @ Psi) / C[:, None]
            delta = np.linalg.norm(G_new - G, 2)
            G = G_new
            if delta < tol:
                return G, it
        raise RuntimeError(f"G iteration did not converge; last step {delta:.3e}")


# --------------------------------------------------------------------------
# scale matrices


def _phi1(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, np.expm1(zs) / zs)


class MatrixScaleSet:
    """G, H, R and evaluators for W(x), W'(x), Z(x, theta) of a MapModel."""

    def __init__(self, model: MapModel):
        self.model = model
        n = model.n
        E, F = model.pencil()
        self._E, self._F = E, F
        self._Einv = np.linalg.inv(E)
        self._M = -self._Einv @ F
        evals, V = np.linalg.eig(self._M)
        self.eigenvalues = evals
        # repeated but semisimple roots keep V well conditioned; defective ones do not
        self.eig_condition = float(np.linalg.cond(V))
        if self.eig_condition > EIG_COND_MAX:
            log.warning("ill-conditioned eigenbasis (cond %.2e); evaluating scale matrices by matrix exponential",
                        self.eig_condition)
            self.mode = "expm"
            self.residues = None
        else:
            self.mode = "residue"
            left = np.linalg.solve(V, self._Einv)
            self.residues = np.einsum("ik,kj->kij", V[:n, :], left[:, :n])
        self.G = self._compute_G()
        self.H, self.R = None, None

    # -- G

    def _compute_G(self) -> np.ndarray:
        m = self.model
        if np.all(m.sigma == 0):
            fl = m.fluid_embedding()
            seed = -np.diag([phi_root(m.phase_levy(i), m.kill[i] - m.Q[i, i])
                             for i in range(m.n)])
            try:
                G, self.g_iterations = fl.riccati_G(seed=seed)
                return G
            except RuntimeError as err:
                # the iteration slows to a crawl at zero asymptotic drift
                self.g_iterations = G_MAX_ITER
                G = self.spectral_G()
                res = float(np.linalg.norm(m.symbol_right(G), np.inf))
                if res > 1e-10:
                    raise RuntimeError(f"{err}; spectral fallback residual {res:.3e}") from err
                log.warning("%s; using the spectral solution (residual %.1e)", err, res)
                return G
        self.g_iterations = 0
        return self.spectral_G()

    def spectral_G(self) -> np.ndarray:
        """-V diag(s) V^{-1} over the n rightmost roots of det K(s) = 0."""
        n = self.model.n
        evals, V = np.linalg.eig(self._M)
        idx = np.argsort(-evals.real)[:n]
        Vu = V[:n, idx]
        G = -Vu @ np.diag(evals[idx]) @ np.linalg.inv(Vu)
        return np.real_if_close(G, tol=1e6).real

    def g_residual(self) -> float:
        return float(np.linalg.norm(self.model.symbol_right(self.G), np.inf))

    # -- W family

    def _eval(self, x, power: int):
        x = float(x)
        n = self.model.n
        if x < 0:
            return np.zeros((n, n))
        if self.mode == "residue":
            w = np.exp(self.eigenvalues * x) * self.eigenvalues**power
            return np.real(np.einsum("k,kij->ij", w, self.residues))
        P = np.linalg.matrix_power(self._M, power) @ linalg.expm(self._M * x) @ self._Einv
        return P[:n, :n]

    def W(self, x) -> np.ndarray:
        return self._eval(x, 0)

    def dW(self, x) -> np.ndarray:
        """Right derivative W'(x+)."""
        return self._eval(x, 1)

    def d2W(self, x) -> np.ndarray:
        return self._eval(x, 2)

    def _int_exp_W(self, x: float, theta: float) -> np.ndarray:
        """int_0^x e^{-theta y} W(y) dy."""
        n = self.model.n
        if self.mode == "residue":
            z = (self.eigenvalues - theta) * x
            w = x * _phi1(z)
            return np.real(np.einsum("k,kij->ij", w, self.residues))
        N = self._M.shape[0]
        A = np.zeros((2 * N, 2 * N))
        A[:N, :N] = self._M - theta * np.eye(N)
        A[:N, N:] = np.eye(N)
        block = linalg.expm(A * x)[:N, N:]
        return (block @ self._Einv)[:n, :n]

    def Wbar(self, x) -> np.ndarray:
        return self._int_exp_W(max(float(x), 0.0), 0.0)

    def Z(self, x, theta: float = 0.0) -> np.ndarray:
        """Z(x, theta) = e^{theta x}(I - int_0^x e^{-theta y} W(y) dy K(theta))."""
        x, theta = float(x), float(theta)
        n = self.model.n
        if x <= 0:
            return np.exp(theta * x) * np.eye(n)
        K = self.model.symbol(theta)
        near = np.min(np.abs(theta - self.eigenvalues)) < 1e-3 * (1 + abs(theta))
        if self.mode == "residue" and not near:
            w = np.exp(self.eigenvalues * x) / (theta - self.eigenvalues)
            S = np.real(np.einsum("k,kij->ij", w, self.residues))
            return S @ K
        return np.exp(theta * x) * (np.eye(n) - self._int_exp_W(x, theta) @ K)

    def dZ(self, x, theta: float = 0.0) -> np.ndarray:
        """d/dx Z(x, theta) = theta Z(x, theta) - W(x) K(theta)."""
        K = self.model.symbol(float(theta))
        return theta * self.Z(x, theta) - self.W(x) @ K

    # -- occupation matrix and its similarity transform

    def compute_H(self) -> np.ndarray:
        """H = lim e^{G x} W(x), read off the spectral projector of the n rightmost roots.

        Equivalent to the sum of residues at those roots; an ordered Schur form
        keeps it valid when roots cluster. Also sets R = H^{-1} G H.
        """
        self.check_h_assumption()
        n = self.model.n
        M = self._M
        cut = np.sort(self.eigenvalues.real)[-n]
        # strict ordering: a tiny offset below the n-th rightmost root
        gap = np.sort(self.eigenvalues.real)[-n] - np.sort(self.eigenvalues.real)[-n - 1]
        thresh = cut - 0.5 * gap
        T, U, k = linalg.schur(M, output="complex", sort=lambda z: z.real > thresh)
        if k != n:
            raise RuntimeError(f"rightmost invariant subspace has dimension {k}, expected {n}")
        X = linalg.solve_sylvester(T[:n, :n], -T[n:, n:], T[:n, n:])
        P = U[:, :n] @ np.hstack([np.eye(n), X]) @ U.conj().T
        H = np.real((P @ self._Einv)[:n, :n])
        self.H = H
        self.R = np.linalg.solve(H, self.G @ H)
        return H

    def H_by_limit(self, x_ref: float | None = None, tol: float = 1e-8) -> np.ndarray:
        """e^{G x} W(x) at x_ref, 2 x_ref, ... until two successive values agree.

        Only usable while e^{spread x} eps stays small, spread being the width
        of the n rightmost roots; otherwise cancellation makes the limit meaningless.
        """
        n = self.model.n
        re = np.sort(self.eigenvalues.real)
        spread = re[-1] - re[-n]
        rates = np.abs(re[np.abs(re) > 1e-8])
        if x_ref is None:
            x_ref = 10.0 / max(float(rates.min()) if rates.size else 1.0, 1e-3)
        prev = linalg.expm(self.G * x_ref) @ self.W(x_ref)
        for _ in range(20):
            x_ref *= 2
            if spread * x_ref > 20.0:
                raise RuntimeError("H limit loses all precision to cancellation")
            cur = linalg.expm(self.G * x_ref) @ self.W(x_ref)
            if np.linalg.norm(cur - prev, np.inf) < tol * max(1.0, np.linalg.norm(cur, np.inf)):
                return cur
            prev = cur
        raise RuntimeError("H(x) did not settle")

    def asymptotic_drift(self) -> float:
        """pi K'(0) 1 for a conservative model (pi the stationary law of Q)."""
        m = self.model
        n = m.n
        A = np.vstack([m.Q.T, np.ones(n)])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        pi = np.linalg.lstsq(A, rhs, rcond=None)[0]
        h = 1e-6
        dK = (m.symbol(h) - m.symbol(-h)) / (2 * h)
        return float(pi @ dK @ np.ones(n))

    def check_h_assumption(self) -> None:
        m = self.model
        conservative = np.allclose(m.Q.sum(axis=1), 0) and np.all(m.kill == 0)
        if conservative and abs(self.asymptotic_drift()) < 1e-10:
            raise DomainError("H needs Q1 != 0 or a nonzero asymptotic drift")

    def H_from_residues(self) -> np.ndarray:
        """Sum of the residues at the n rightmost roots."""
        if self.mode != "residue":
            raise DomainError("residue cache unavailable")
        idx = np.argsort(-self.eigenvalues.real)[: self.model.n]
        return np.real(self.residues[idx].sum(axis=0))

    def excursion_generator(self, a: float) -> np.ndarray:
        """Lambda(a) = -W'(a+) W(a)^{-1}."""
        if not a > 0:
            raise DomainError("a must be positive")
        Wa = self.W(a)
        if np.linalg.cond(Wa) > 1e14:
            raise DomainError("W(a) is numerically singular")
        return -np.linalg.solve(Wa.T, self.dW(a).T).T

    def drawdown_passage(self, a: float, h: float) -> np.ndarray:
        """P[reach h above the start before a drawdown larger than a; phase] from drawdown 0."""
        return linalg.expm(self.excursion_generator(a) * h)


def _right_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A B^{-1}."""
    return np.linalg.solve(B.T, A.T).T


def first_passage_generator(model: MapModel) -> np.ndarray:
    return MatrixScaleSet(model).G


def matrix_scale_w(ss: MatrixScaleSet, x) -> np.ndarray:
    return ss.W(x)


def matrix_scale_z(ss: MatrixScaleSet, x, theta: float = 0.0) -> np.ndarray:
    return ss.Z(x, theta)


def sa_symbol(A, alpha, claim: ClaimLaw, c: float):
    """Symbol of a Sparre Andersen process with phase-type(alpha, A) inter-arrival times."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    alpha = np.asarray(alpha, dtype=float).ravel()
    if np.any(alpha < 0) or alpha.sum() > 1 + 1e-12:
        raise ValueError("alpha must be sub-stochastic")
    a = -A.sum(axis=1)
    if np.any(a < -1e-12):
        raise ValueError("A must be a sub-generator")
    n = A.shape[0]
    outer = np.outer(a, alpha)

    def K(theta):
        return A + outer * claim.transform(theta) + c * theta * np.eye(n)

    return K


def sa_map(A, alpha, claim: ClaimLaw, c: float) -> MapModel:
    """The same Sparre Andersen process as a MapModel (claims fire on phase renewals)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    alpha = np.asarray(alpha, dtype=float).ravel()
    a = -A.sum(axis=1)
    n = A.shape[0]
    outer = np.outer(a, alpha)
    Q = A + outer - np.diag(np.diag(outer))
    Q = Q - np.diag(Q.sum(axis=1))
    kill = -(A + outer).sum(axis=1)
    jumps = {(i, j): claim for i in range(n) for j in range(n) if i != j and outer[i, j] > 0}
    return MapModel(Q=Q, c=np.full(n, c), kill=np.maximum(kill, 0.0),
                    lam=np.diag(outer).copy(), claims=[claim] * n, jumps=jumps)


def matrix_passage_suite(ss: MatrixScaleSet, x: float, b: float, theta: float = 0.0,
                         vartheta: float = 0.0) -> dict:
    """Matrix first-passage quantities of the compendium."""
    if not (0 <= x <= b):
        raise DomainError("need 0 <= x <= b")
    Wx, Wb, dWb = ss.W(x), ss.W(b), ss.dW(b)
    Zx, Zb, dZb = ss.Z(x, theta), ss.Z(b, theta), ss.dZ(b, theta)
    Z0x, dZ0b = ss.Z(x, 0.0), ss.dZ(b, 0.0)
    lam_b = _right_solve(dWb, Wb)
    n = ss.model.n
    out = {
        "two_sided_exit": _right_solve(Wx, Wb),
        "definetti_dividends": _right_solve(Wx, dWb),
        "severity": Zx - _right_solve(Wx, Wb) @ Zb,
        "regulated_severity": Zx - _right_solve(Wx, dWb) @ dZb,
        "regulated_ruin": Z0x - _right_solve(Wx, dWb) @ dZ0b,
        "dividend_law_lt": np.linalg.solve(lam_b + vartheta * np.eye(n), lam_b),
        "dividends_ruin_joint": Zx - _right_solve(Wx, dWb + vartheta * Wb) @ (dZb + vartheta * Zb),
    }
    try:
        out["severity_infinite"] = severity_infinite(ss, x, theta)
    except DomainError:
        out["severity_infinite"] = None
    return out


def severity_infinite(ss: MatrixScaleSet, x: float, theta: float) -> np.ndarray:
    """Z(x, theta) - W(x)(R + theta I)^{-1} K(theta), limit taken at singular R + theta I."""
    if ss.R is None:
        ss.compute_H()
    n = ss.model.n

    def value(th):
        return ss.Z(x, th) - ss.W(x) @ np.linalg.solve(ss.R + th * np.eye(n), ss.model.symbol(th))

    smin = np.linalg.svd(ss.R + theta * np.eye(n), compute_uv=False)[-1]
    if smin < 1e-7 * (1.0 + np.linalg.norm(ss.R, 2)):
        # removable singularity: symmetric Richardson limit (one-sided at theta = 0)
        h = 1e-4
        if theta >= h:
            sym = lambda s: 0.5 * (value(theta + s) + value(theta - s))
        else:
            sym = lambda s: 2 * value(theta + s) - value(theta + 2 * s)
        return (4 * sym(h / 2) - sym(h)) / 3
    return value(theta)
