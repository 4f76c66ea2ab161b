"""Newton iteration for the generating functions of the perturbed whiskers.

The unknown is ``S(q) = <xi, phi> + S_hat(z, phi)`` on a ray of the chart
variable (``z = exp(s)`` near the unstable torus at ``x = 0``, ``w = exp(-s)``
near the stable torus at ``x = 2 pi``) times the angle grid.  One Newton
step solves, with the exact Jacobian of the discretized system,

    H(dS(q), q) - c0 = 0                 Hamilton-Jacobi on the ray
    W(phi + b0) - omega - D_omega b0 = 0  torus frequency conjugacy
    mean S_hat(torus, .) = 0,  mean b0 = 0

where ``W = dH/dI`` on the torus.  Linear systems are solved by GMRES,
preconditioned by the exact inverse of the unperturbed linearization
(mode-wise transport solves plus the twist and energy balance).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
import scipy.sparse.linalg as spla

from .cylinder import CylinderField, Ray, angle_grid, angle_wavenumbers, bary_matrix, trig_eval_matrix
from .homological import Frequency, transport_modes
from .normalform import _shear, jet_to_x_axis
from .separatrix import SeparatrixMap
from .series import FourierTable, MomentumJet, StripParams

log = logging.getLogger(__name__)


class KamError(RuntimeError):
    pass


# ---------------------------------------------------------------- working Hamiltonian
class WorkingHamiltonian:
    """``H(y', I, x, phi') = H_nu(y' + lam psi(x) - <theta, I>, I, x, phi' + theta x)``.

    ``H_nu`` is a degree-2 jet in ``(y, I)`` whose tables are exact
    trigonometric polynomials; the separatrix shift and the theta shear are
    applied pointwise so that complex ``x`` never meets a truncated ``psi``.
    Values are returned as ``(c, b, A)`` with ``H = c + b.P + P.A.P / 2``.
    """

    def __init__(self, H_nu: MomentumJet, sep: SeparatrixMap, theta=None):
        self.sep = sep
        self.nv = H_nu.nvars
        n = self.nv - 1
        self.theta = np.zeros(n) if theta is None else np.atleast_1d(np.asarray(theta, float))
        Hx = jet_to_x_axis(H_nu)
        if np.any(self.theta):
            Hx = Hx.map(lambda t: _shear(t, self.theta))
        self.jet = Hx
        self._split_potential()
        self.L = np.eye(self.nv)
        self.L[0, 1:] = -self.theta
        self.lam = sep.lam

    def _split_potential(self):
        """Separate the angle-independent part of the momentum-free term.

        When the separatrix was built from it, ``U + lam**2 psi**2 / 2`` is a
        constant, and dropping the pair avoids a cancellation of O(1) terms
        at complex ``x`` that would otherwise set the residual floor.
        """
        self.exact = False
        self.E0 = 0.0
        zero = (0,) * self.nv
        t0 = self.jet.get(zero)
        if t0 is None:
            return
        ctr = tuple(k for k in t0.cutoffs[1:])
        sl = (slice(None),) + ctr
        U = FourierTable(t0.coeffs[sl].copy(), True)
        xs = np.linspace(0.05, 4 * np.pi - 0.05, 97)
        r = U(xs) + 0.5 * (self.sep.lam * self.sep.psi_at(xs)) ** 2
        scale = 1.0 + float(np.abs(U(xs)).max())
        if float(np.abs(r - r.mean()).max()) > 1e-11 * scale:
            return
        osc = t0.coeffs.copy()
        osc[sl] = 0.0
        self._osc = FourierTable(osc, True)
        self.E0 = float(np.real(U(0.0)))
        self.exact = True

    # raw coefficient arrays from the jet
    def _raw(self, evaluate: Callable, shape):
        nv = self.nv
        c = np.zeros(shape, complex)
        b = np.zeros((nv,) + shape, complex)
        A = np.zeros((nv, nv) + shape, complex)
        for m, t in self.jet.terms.items():
            if self.exact and not any(m):
                t = self._osc
            v = evaluate(t)
            idx = [i for i, e in enumerate(m) for _ in range(e)]
            if not idx:
                c = c + v
            elif len(idx) == 1:
                b[idx[0]] += v
            elif idx[0] == idx[1]:
                A[idx[0], idx[0]] += 2 * v
            else:
                A[idx[0], idx[1]] += v
                A[idx[1], idx[0]] += v
        return c, b, A

    def _transform(self, c, b, A, psi):
        a0 = self.lam * psi
        Aa = A[:, 0] * a0
        if self.exact:
            c2 = c + self.E0 + b[0] * a0 + 0.5 * (A[0, 0] - 1.0) * a0 * a0
        else:
            c2 = c + b[0] * a0 + 0.5 * A[0, 0] * a0 * a0
        b1 = b + Aa
        L = self.L
        b2 = np.einsum("ij,i...->j...", L, b1)
        A2 = np.einsum("ij,ik...,kl->jl...", L, A, L)
        return c2, b2, A2

    def on_grid(self, x: np.ndarray, K: int):
        """Coefficients on ``x`` (N,) times the uniform angle grid; shapes ``(N, M**n)``."""
        n = self.nv - 1
        g = np.arange(2 * K + 1) * 2 * np.pi / (2 * K + 1)
        shape = (len(x), (2 * K + 1) ** n)
        c, b, A = self._raw(lambda t: t.on_grid(x, *([g] * n)).reshape(shape), shape)
        psi = self.sep.psi_at(x)[:, None]
        return self._transform(c, b, A, psi)

    def at(self, x: np.ndarray, phi: np.ndarray):
        """Coefficients at scattered points ``x`` (P,), ``phi`` (P, n)."""
        x = np.asarray(x, dtype=complex)
        phi = np.atleast_2d(phi)
        c, b, A = self._raw(lambda t: t(x, *phi.T), x.shape)
        return self._transform(c, b, A, self.sep.psi_at(x))

    def check_torus(self, x_t: float, tol: float = 1e-10):
        """The torus ``y' = 0`` at ``x = x_t`` must be invariant for the unperturbed momenta."""
        n = self.nv - 1
        phis = np.linspace(0, 2 * np.pi, 7, endpoint=False)
        P = np.stack(np.meshgrid(*([phis] * n), indexing="ij"), -1).reshape(-1, n) if n else np.zeros((1, 0))
        xs = np.full(len(P), x_t, complex)
        c, b, A = self.at(xs, P)
        h = 1e-4
        cp, _, _ = self.at(xs + h, P)
        cm, _, _ = self.at(xs - h, P)
        cp2, _, _ = self.at(xs + 2 * h, P)
        cm2, _, _ = self.at(xs - 2 * h, P)
        dcx = (8 * (cp - cm) - (cp2 - cm2)) / (12 * h)
        scale = 1.0 + float(np.abs(b).max())
        bad_y = float(np.abs(b[0]).max())
        bad_x = float(np.abs(dcx).max())
        bad_c = float(np.abs(A[0, 1:]).max()) if n else 0.0
        if max(bad_y, bad_c) > tol * scale or bad_x > 1e-7 * scale:
            raise KamError(f"torus not at x = {x_t:g}: |H_y| = {bad_y:.2e}, |dH/dx| = {bad_x:.2e}, "
                           f"|H_yI| = {bad_c:.2e}")


# ---------------------------------------------------------------- transformation data
@dataclass
class AffineCanonical:
    """``Psi(P', q) = (P' + dS(q), a(q))`` with ``S = <xi, phi> + S_hat``.

    The base map is ``a = id + (b0, 0)``: the torus conjugacy ``b0`` acts
    on the angles, and no correction of the energy time is needed because
    the Hamilton-Jacobi formulation produces the whisker as a graph.
    """

    b0: FourierTable
    xi: np.ndarray
    S_hat: CylinderField
    c0: float
    c1: float
    chart: str = "unstable"
    b: FourierTable | None = None
    B: FourierTable | None = None

    @classmethod
    def identity(cls, n: int, ray: Ray, K: int, chart: str = "unstable"):
        M = 2 * K + 1
        vals = np.zeros((ray.N + 1,) + (M,) * n, complex)
        return cls(FourierTable.zeros((0,) * n), np.zeros(n), CylinderField(ray, K, n, vals, chart), 0.0, 0.0, chart)

    def compose(self, other: "AffineCanonical") -> "AffineCanonical":
        """Composition for generating functions defined on the same grid (additive in S)."""
        if other.S_hat.values.shape != self.S_hat.values.shape:
            raise KamError("compose needs transformations on the same grid")
        S = CylinderField(self.S_hat.ray, self.S_hat.K, self.S_hat.n,
                          self.S_hat.values + other.S_hat.values, self.chart)
        return AffineCanonical(self.b0 + other.b0, self.xi + other.xi, S, self.c0 + other.c0,
                               self.c1 + other.c1, self.chart)


@dataclass
class StepRecord:
    j: int
    mu: float
    nu: float
    lam: float
    M: float
    R: float
    residual: float
    gmres_iters: int
    delta: float
    budget: tuple


@dataclass
class KamDiagnostics:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    mu0: float = 0.0

    @property
    def mus(self):
        return [r.mu for r in self.records]

    def slope(self, steps: int = 3) -> float:
        """Least-squares slope of ``log mu_{j+1}`` against ``log mu_j``."""
        mus = np.array([self.mu0] + self.mus)[: steps + 1]
        if len(mus) < 3 or np.any(mus <= 0):
            return float("nan")
        a, b = np.log(mus[:-1]), np.log(mus[1:])
        return float(np.polyfit(a, b, 1)[0])


# ---------------------------------------------------------------- the Newton system
class KamProblem:
    """Discretized Hamilton-Jacobi/conjugacy system on one chart ray."""

    def __init__(self, H_nu: MomentumJet, freq: Frequency, sep: SeparatrixMap, chart: str = "unstable",
                 alpha: float = 0.0, N: int = 256, K: int = 32, theta=None, T: float | None = None,
                 segment: bool = False):
        if chart not in ("unstable", "stable"):
            raise KamError("chart must be 'unstable' or 'stable'")
        self.wh = WorkingHamiltonian(H_nu, sep, theta)
        self.freq = freq
        self.sep = sep
        self.chart = chart
        self.sigma = 1.0 if chart == "unstable" else -1.0
        self.alpha = float(alpha)
        self.n = freq.n
        self.K = int(K)
        self.M = 2 * self.K + 1
        T = sep.T if T is None else float(T)
        R = math.exp(T)
        if segment:
            # real segment through the torus: both branches at once
            self.ray = Ray(N + (N % 2), -R, R, self.alpha)
        else:
            self.ray = Ray(N, 0.0, R, self.alpha)
        self.t_index = self.ray.origin_index
        self.x_t = 0.0 if chart == "unstable" else 2 * np.pi
        self.wh.check_torus(self.x_t)
        z = self.ray.z.astype(complex)
        self.x = sep.chart_x(z, chart)
        self.J = sep.chart_jacobian(z, self.x, chart)
        self.c, self.b, self.A = self.wh.on_grid(self.x, self.K)
        self.omega = freq.vec
        # twist on the torus
        At = self.A[1:, 1:, self.t_index, :]
        self.Theta = np.real(At.mean(axis=-1))
        if self.n and abs(np.linalg.det(self.Theta)) < 1e-12:
            raise KamError("twist degeneracy: <D^2_II H> is singular")
        self.ks = [k.ravel() for k in angle_wavenumbers(self.K, self.n)]
        self.kappa = sum(w * k for w, k in zip(self.omega, self.ks)) if self.n else np.zeros(1)
        self.D = np.exp(-1j * self.alpha) * self.ray.D  # d/dz along the ray
        self.grid_phi = [g.ravel() for g in angle_grid(self.K, self.n)]
        self.size_S = (self.ray.N + 1) * self.M ** self.n
        self.size_b = self.n * self.M ** self.n

    # ---- packing
    def pack(self, S, xi, c0, b0):
        return np.concatenate([S.ravel(), xi.astype(complex), [c0], b0.ravel()])

    def unpack(self, u):
        Np, Mn, n = self.ray.N + 1, self.M ** self.n, self.n
        i = 0
        S = u[i:i + Np * Mn].reshape(Np, Mn)
        i += Np * Mn
        xi = u[i:i + n]
        i += n
        c0 = u[i]
        i += 1
        b0 = u[i:i + n * Mn].reshape(n, Mn)
        return S, xi, c0, b0

    # ---- spectral helpers on the flattened angle grid
    def _dphi(self, V):
        """Derivatives in each angle of values with the angle grid flattened in the last axis."""
        shp = V.shape[:-1] + (self.M,) * self.n
        axes = tuple(range(V.ndim - 1, V.ndim - 1 + self.n))
        hat = sfft.fftn(V.reshape(shp), axes=axes)
        out = []
        for j in range(self.n):
            kk = angle_wavenumbers(self.K, self.n)[j]
            out.append(sfft.ifftn(hat * (1j * kk), axes=axes).reshape(V.shape))
        return out

    def _Domega(self, V):
        return sum(w * d for w, d in zip(self.omega, self._dphi(V))) if self.n else np.zeros_like(V)

    def _interp_matrix(self, b0):
        pts = np.stack(self.grid_phi, -1) + b0.T  # (Mn, n)
        return trig_eval_matrix(self.K, self.n, pts)

    # ---- nonlinear map
    def momenta(self, S, xi):
        y = self.J[:, None] * (self.D @ S)
        dS = self._dphi(S)
        return [y] + [xi[j] + dS[j] for j in range(self.n)]

    def residual(self, u):
        S, xi, c0, b0 = self.unpack(u)
        P = self.momenta(S, xi)
        Pa = np.stack(P)
        AP = np.einsum("ij...,j...->i...", self.A, Pa)
        H = self.c + np.einsum("i...,i...->...", self.b, Pa) + 0.5 * np.einsum("i...,i...->...", Pa, AP)
        F_hj = H - c0
        HP = self.b + AP
        W = HP[1:, self.t_index, :]  # (n, Mn) torus frequency
        E = self._interp_matrix(b0)
        F_t = (E @ W.T).T - self.omega[:, None] - self._Domega(b0)
        F_g = S[self.t_index].mean()
        F_b = b0.mean(axis=1)
        cache = dict(HP=HP, W=W, E=E, b0=b0)
        return np.concatenate([F_hj.ravel(), F_t.ravel(), [F_g], F_b]), cache

    def jvp(self, cache, du):
        dS, dxi, dc0, db0 = self.unpack(du)
        dP = np.stack(self.momenta(dS, dxi))
        HP = cache["HP"]
        dF_hj = np.einsum("i...,i...->...", HP, dP) - dc0
        dHP = np.einsum("ij...,j...->i...", self.A, dP)
        dW = dHP[1:, self.t_index, :]
        E = cache["E"]
        dWdphi = self._dphi(cache["W"])
        dF_t = (E @ dW.T).T
        for l in range(self.n):
            dF_t = dF_t + (E @ dWdphi[l].T).T * db0[l][None, :]
        dF_t = dF_t - self._Domega(db0)
        dF_g = dS[self.t_index].mean()
        dF_b = db0.mean(axis=1)
        return np.concatenate([dF_hj.ravel(), dF_t.ravel(), [dF_g], dF_b])

    def split_residual(self, r):
        Np, Mn, n = self.ray.N + 1, self.M ** self.n, self.n
        i = 0
        rH = r[i:i + Np * Mn].reshape(Np, Mn)
        i += Np * Mn
        rT = r[i:i + n * Mn].reshape(n, Mn)
        i += n * Mn
        rg = r[i]
        rb = r[i + 1:i + 1 + n]
        return rH, rT, rg, rb

    def precondition(self, r):
        """Exact inverse of the linearization at the unperturbed whisker."""
        rH, rT, rg, rb = self.split_residual(r)
        n = self.n
        if n:
            dxi = np.linalg.solve(self.Theta, rT.mean(axis=1))
        else:
            dxi = np.zeros(0, complex)
        dc0 = (np.dot(self.omega, dxi) if n else 0.0) - rH[self.t_index].mean()
        h = rH - ((np.dot(self.omega, dxi) if n else 0.0) - dc0)
        grid = h.reshape((self.ray.N + 1,) + (self.M,) * n)
        dS = transport_modes(self.ray, self.sigma * self.wh.lam, self.freq, self.K, grid,
                             gauge_index=self.t_index).reshape(h.shape)
        dS = dS + rg
        db0 = np.zeros((n, self.M ** n), complex)
        if n:
            dS_t = self._dphi(dS[self.t_index][None, :])
            rhs = np.stack([(self.Theta @ (dxi[:, None] + np.stack([d[0] for d in dS_t])))[j] for j in range(n)])
            rhs = rhs - rT
            db0 = self._solve_Domega_grid(rhs) + rb[:, None]
        return self.pack(dS, dxi, dc0, db0)

    def _solve_Domega_grid(self, V):
        shp = (V.shape[0],) + (self.M,) * self.n
        axes = tuple(range(1, 1 + self.n))
        hat = sfft.fftn(V.reshape(shp), axes=axes)
        kap = self.kappa.reshape((self.M,) * self.n)
        with np.errstate(divide="ignore", invalid="ignore"):
            sol = np.where(kap == 0, 0.0, hat / (1j * np.where(kap == 0, 1.0, kap)))
        return sfft.ifftn(sol, axes=axes).reshape(V.shape)

    # ---- Newton step
    def newton_step(self, u, tol: float = 1e-13):
        F, cache = self.residual(u)
        nF = np.linalg.norm(F)
        if nF == 0:
            return u, 0
        op = spla.LinearOperator((F.size, F.size), dtype=complex,
                                 matvec=lambda v: self.jvp(cache, self.precondition(v)))
        counter = {"k": 0}

        def cb(_):
            counter["k"] += 1

        y, info = spla.gmres(op, F, rtol=tol, atol=0.0, restart=40, maxiter=3, callback=cb,
                             callback_type="pr_norm")
        if info < 0:
            raise KamError("GMRES breakdown")
        du = self.precondition(y)
        return u - du, counter["k"]

    def term_scale(self, u) -> float:
        """Largest term entering ``H(dS)``: roundoff of the residual is a few ulps of this."""
        S, xi, _, _ = self.unpack(u)
        P = np.abs(np.stack(self.momenta(S, xi))).max()
        return float(np.abs(self.c).max() + np.abs(self.b).max() * P + np.abs(self.A).max() * P * P)

    def hj_sup(self, u):
        F, _ = self.residual(u)
        rH, rT, _, _ = self.split_residual(F)
        return float(np.abs(rH).max()), float(np.abs(rT).max()) if self.n else 0.0

    # ---- results
    def to_affine(self, u) -> AffineCanonical:
        S, xi, c0, b0 = self.unpack(u)
        vals = S.reshape((self.ray.N + 1,) + (self.M,) * self.n)
        field_ = CylinderField(self.ray, self.K, self.n, vals, self.chart)
        b0t = FourierTable.from_grid(b0.reshape((self.n,) + (self.M,) * self.n)[0], (self.K,) * self.n) \
            if self.n == 1 else _vector_table(b0, self.K, self.n)
        lam_eff = self.effective_lambda(u)
        return AffineCanonical(b0t, np.real_if_close(xi), field_, complex(c0), lam_eff - self.sigma * self.wh.lam,
                               self.chart)

    def effective_lambda(self, u) -> float:
        """``d/dz (H_y J)`` at the torus: the transport coefficient seen by the whisker."""
        S, xi, c0, b0 = self.unpack(u)
        _, cache = self.residual(u)
        v = cache["HP"][0] * self.J[:, None]
        d = (self.D @ v)[self.t_index]
        return float(np.real(d.mean()))


def _vector_table(b0, K, n):
    M = 2 * K + 1
    return [FourierTable.from_grid(b0[j].reshape((M,) * n), (K,) * n) for j in range(n)]


# ---------------------------------------------------------------- public operations
@dataclass
class KamResult:
    problem: KamProblem
    u: np.ndarray
    psi: AffineCanonical
    diag: KamDiagnostics

    @property
    def xi(self):
        return self.psi.xi

    @property
    def c0(self):
        return self.psi.c0

    def S_hat_at(self, r, phi):
        return self.psi.S_hat.evaluate(r, phi)


def kam_step(problem: KamProblem, u, p: StripParams | None = None, delta: float = 0.0, j: int = 0):
    """One Newton step; returns ``(u_next, record)``."""
    u1, its = problem.newton_step(u)
    mu, nu = problem.hj_sup(u1)
    lam = problem.effective_lambda(u1)
    M = float(np.abs(problem.A).max())
    R = float(np.linalg.norm(np.linalg.inv(problem.Theta), 2)) if problem.n else 0.0
    budget = tuple(float(v) for v in (p.r, p.T, p.rho, p.sigma)) if p is not None else ()
    rec = StepRecord(j, mu, nu, lam, M, R, mu, its, delta, budget)
    return u1, rec


def kam_iterate(problem: KamProblem, p: StripParams | None = None, p_prime: StripParams | None = None,
                max_iter: int = 8, rel_tol: float = 1e-12) -> KamResult:
    """Newton iteration with the dyadic budget schedule ``delta_j = 2**-j delta``.

    A step is accepted when it at least halves ``mu``.  Iteration stops when
    ``mu_j < rel_tol * mu_0``, after ``max_iter`` steps, or when a step fails
    to halve ``mu`` that already sits within a thousand ulps of the
    Hamiltonian's scale (roundoff floor); a failed step above that level is
    rejected.
    """
    n = problem.n
    u = problem.pack(np.zeros((problem.ray.N + 1, problem.M ** n), complex), np.zeros(n, complex), 0.0,
                     np.zeros((n, problem.M ** n), complex))
    mu0, nu0 = problem.hj_sup(u)
    diag = KamDiagnostics(mu0=mu0)
    if mu0 == 0 and nu0 == 0:
        diag.stop_reason = "unperturbed"
        return KamResult(problem, u, problem.to_affine(u), diag)
    delta = 0.0
    if p is not None and p_prime is not None:
        delta = min(p.rho - p_prime.rho, p.sigma - p_prime.sigma)
    pj = p
    increases = 0
    prev = mu0
    for j in range(max_iter):
        dj = delta * 2.0 ** -(j + 1)
        u1, rec = kam_step(problem, u, pj, dj, j + 1)
        diag.records.append(rec)
        log.debug("kam step %d: mu=%.3e nu=%.3e gmres=%d", j + 1, rec.mu, rec.nu, rec.gmres_iters)
        increases = increases + 1 if rec.mu > prev else 0
        if increases >= 2:
            diag.stop_reason = "diverged"
            raise KamError(f"iteration diverged: mu = {diag.mus}")
        if rec.mu < 0.5 * prev:
            u, prev = u1, rec.mu
            if pj is not None and dj > 0:
                pj = pj.shrink(dj)
            if rec.mu < rel_tol * mu0:
                diag.stop_reason = "converged"
                break
            continue
        # no halving: either roundoff has been reached or the step is rejected
        diag.records.pop()
        at_floor = 1e3 * np.finfo(float).eps * problem.term_scale(u1)
        if prev <= at_floor or rec.mu <= at_floor:
            if rec.mu < prev:
                u, prev = u1, rec.mu
                diag.records.append(rec)
            diag.stop_reason = "roundoff floor"
            break
        raise KamError(f"step rejected: mu {prev:.3e} -> {rec.mu:.3e}")
    else:
        diag.stop_reason = "max_iter"
    return KamResult(problem, u, problem.to_affine(u), diag)


def hj_residual(result: KamResult, samples: int = 400, seed: int = 0) -> float:
    """``max |H(dS(q), q) - c0|`` at off-node points of the run's ray and random angles."""
    pr = result.problem
    rng = np.random.default_rng(seed)
    r = rng.uniform(pr.ray.r0, pr.ray.r1, samples)
    phi = rng.uniform(0, 2 * np.pi, (samples, pr.n))
    y, I = dS_at(result, r, phi)
    z = r * np.exp(1j * pr.alpha)
    x = pr.sep.chart_x(z, pr.chart)
    c, b, A = pr.wh.at(x, phi)
    P = np.stack([y] + I)
    H = c + np.einsum("i...,i...->...", b, P) + 0.5 * np.einsum("i...,ij...,j...->...", P, A, P)
    return float(np.abs(H - result.psi.c0).max())


def dS_at(result: KamResult, r, phi):
    """Momenta ``(dS/dx, dS/dphi)`` at radii ``r`` on the ray and angles ``phi`` (P, n)."""
    pr = result.problem
    S, xi, _, _ = pr.unpack(result.u)
    B = bary_matrix(pr.ray.r, r)
    Et = trig_eval_matrix(pr.K, pr.n, phi)
    z = np.asarray(r) * np.exp(1j * pr.alpha)
    x = pr.sep.chart_x(z, pr.chart)
    J = pr.sep.chart_jacobian(z, x, pr.chart)
    dz = np.sum((B @ (pr.D @ S)) * Et, axis=1)
    y = J * dz
    I = [xi[j] + np.sum((B @ d) * Et, axis=1) for j, d in enumerate(pr._dphi(S))]
    return y, I


def S_hat_values(result: KamResult, r, phi):
    pr = result.problem
    S, _, _, _ = pr.unpack(result.u)
    B = bary_matrix(pr.ray.r, r)
    Et = trig_eval_matrix(pr.K, pr.n, phi)
    return np.sum((B @ S) * Et, axis=1)


def pullback(result: KamResult) -> MomentumJet:
    """``H o Psi`` on the run's grid: a jet with array coefficients.

    The momentum-free part is ``H(dS) - c0`` (the new ``f``); the linear
    part is ``H_P(dS)`` minus the unperturbed transport field (the new ``g``);
    the quadratic part is unchanged.
    """
    pr = result.problem
    S, xi, c0, _ = pr.unpack(result.u)
    P = np.stack(pr.momenta(S, xi))
    AP = np.einsum("ij...,j...->i...", pr.A, P)
    f = pr.c + np.einsum("i...,i...->...", pr.b, P) + 0.5 * np.einsum("i...,i...->...", P, AP) - c0
    HP = pr.b + AP
    nv = pr.n + 1
    terms = {(0,) * nv: f}
    for i in range(nv):
        m = tuple(int(j == i) for j in range(nv))
        terms[m] = HP[i]
    for i in range(nv):
        for j in range(i, nv):
            m = [0] * nv
            m[i] += 1
            m[j] += 1
            terms[tuple(m)] = pr.A[i, j] * (0.5 if i == j else 1.0)
    return MomentumJet(nv, terms)


def symplectic_check(result: KamResult, samples: int = 20, seed: int = 0, h: float = 1e-5) -> float:
    """Max ``|J^T Omega J - Omega|`` of ``(P, q) -> (P + dS(q), q)`` by central differences.

    The base variable along the ray is the radius ``r``; the momentum
    conjugate to it is ``dS/dr``, so the Jacobian is assembled in ``(r, phi)``.
    """
    pr = result.problem
    rng = np.random.default_rng(seed)
    n = pr.n
    lo, hi = pr.ray.r0, pr.ray.r1
    span = hi - lo
    worst = 0.0
    S, xi, _, _ = pr.unpack(result.u)
    Dr = pr.ray.D @ S

    def grad(r, phi):
        B = bary_matrix(pr.ray.r, np.atleast_1d(r))
        Et = trig_eval_matrix(pr.K, n, np.atleast_2d(phi))
        gr = np.sum((B @ Dr) * Et, axis=1)[0]
        gp = [xi[j] + np.sum((B @ d) * Et, axis=1)[0] for j, d in enumerate(pr._dphi(S))]
        return np.array([gr] + gp)

    d = n + 1
    Om = np.block([[np.zeros((d, d)), np.eye(d)], [-np.eye(d), np.zeros((d, d))]])
    for _ in range(samples):
        r = lo + span * rng.uniform(0.1, 0.9)
        phi = rng.uniform(0, 2 * np.pi, n)
        q = np.concatenate([[r], phi])
        Hs = np.zeros((d, d), complex)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            Hs[:, k] = (grad(q[0] + e[0], q[1:] + e[1:]) - grad(q[0] - e[0], q[1:] - e[1:])) / (2 * h)
        # coordinates (q, P): q' = q, P' = P + grad S(q)
        Jm = np.block([[np.eye(d), np.zeros((d, d))], [Hs, np.eye(d)]])
        worst = max(worst, float(np.abs(Jm.T @ Om @ Jm - Om).max()))
    return worst


__all__ = [
    "KamError", "WorkingHamiltonian", "AffineCanonical", "KamDiagnostics", "StepRecord", "KamProblem",
    "KamResult", "kam_step", "kam_iterate", "hj_residual", "pullback", "symplectic_check", "dS_at",
    "S_hat_values",
]
