"""Splitting potential of the perturbed separatrix and its exponentially small modes.

The unstable and stable whiskers are computed on chart rays that meet the
same complex line ``Im s = zeta`` (branch ``beta = +``) or ``Im s = pi +
zeta`` (branch ``beta = -``, relabeled by ``s -> s - i pi``).  Along that
line the oscillating modes with ``<k, omega> > 0`` are enlarged by
``exp(<k, omega> zeta / lam)``, which lifts them far above roundoff.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .cylinder import angle_grid, angle_wavenumbers, bary_matrix, cheb_diff, cheb_nodes, trig_eval_matrix
from .homological import Frequency
from .kam import KamError, KamProblem, KamResult, kam_iterate
from .normalform import _shear
from .separatrix import SeparatrixMap, to_x_axis
from .series import FourierTable, MomentumJet

log = logging.getLogger(__name__)


class SplittingError(RuntimeError):
    pass


BRANCHES = ("+", "-")


@dataclass
class ManifoldRuns:
    """KAM runs of one branch: unstable whisker near x = 0, stable one near x = 2 pi."""

    beta: str
    zeta: float
    unstable: KamResult
    stable: KamResult


def _ray_angles(beta: str, zeta: float):
    shift = 0.0 if beta == "+" else math.pi
    return shift + zeta, shift - zeta


def compute_manifolds(H_nu: MomentumJet, freq: Frequency, sep: SeparatrixMap, theta=None, zeta: float = 1.2,
                      N: int = 256, K: int = 32, max_iter: int = 8, branches=BRANCHES,
                      xi_tol: float = 1e-6) -> dict:
    """Whiskers of both branches; returns ``{beta: ManifoldRuns}`` after the exactness check."""
    out = {}
    for beta in branches:
        au, as_ = _ray_angles(beta, zeta)
        try:
            ru = kam_iterate(KamProblem(H_nu, freq, sep, "unstable", au, N, K, theta), max_iter=max_iter)
            rs = kam_iterate(KamProblem(H_nu, freq, sep, "stable", as_, N, K, theta), max_iter=max_iter)
        except KamError as exc:
            raise SplittingError(f"KAM run failed on branch {beta}: {exc}") from exc
        out[beta] = ManifoldRuns(beta, zeta, ru, rs)
    xis = [np.real(r.xi) for m in out.values() for r in (m.unstable, m.stable)]
    spread = max(float(np.abs(a - b).max(initial=0.0)) for a in xis for b in xis)
    if spread > xi_tol:
        raise SplittingError(f"exactness violation: xi differs by {spread:.3e} across branches")
    return out


# ---------------------------------------------------------------- the potential on the line
@dataclass
class LineGrid:
    """Chebyshev nodes in ``t = Re s`` on ``[-T, T]`` times the angle grid."""

    T: float
    Nt: int
    K: int
    n: int

    def __post_init__(self):
        if self.Nt % 2:
            raise SplittingError("the line grid needs an even node count (t = 0 is a node)")
        self.t = cheb_nodes(self.Nt, -self.T, self.T)
        self.D = cheb_diff(self.Nt, -self.T, self.T)
        self.i0 = int(np.argmin(np.abs(self.t)))
        self.M = 2 * self.K + 1
        self.ks = [k.ravel() for k in angle_wavenumbers(self.K, self.n)]
        self.phi = [g.ravel() for g in angle_grid(self.K, self.n)]

    def fft(self, V):
        shp = V.shape[:-1] + (self.M,) * self.n
        axes = tuple(range(V.ndim - 1, V.ndim - 1 + self.n))
        return sfft.fftn(V.reshape(shp), axes=axes).reshape(V.shape) / self.M ** self.n

    def ifft(self, C):
        shp = C.shape[:-1] + (self.M,) * self.n
        axes = tuple(range(C.ndim - 1, C.ndim - 1 + self.n))
        return sfft.ifftn(C.reshape(shp), axes=axes).reshape(C.shape) * self.M ** self.n

    def dphi(self, V):
        C = self.fft(V)
        return [self.ifft(C * (1j * k)) for k in self.ks]

    def interp(self, V, t, phi):
        """Interpolant of nodal values at complex points ``t`` (P,), ``phi`` (P, n)."""
        B = bary_matrix(self.t, np.asarray(t, dtype=complex))
        E = trig_eval_matrix(self.K, self.n, phi)
        return np.sum((B @ V) * E, axis=1)


@dataclass
class LineData:
    """Whisker data sampled on the observation line of one branch."""

    beta: str
    zeta: float
    grid: LineGrid
    x: np.ndarray
    S_u: np.ndarray
    S_s: np.ndarray
    P_u: np.ndarray
    P_s: np.ndarray

    @property
    def S_frak(self):
        return self.S_u - self.S_s


def _sample(res: KamResult, r: np.ndarray):
    pr = res.problem
    S, xi, _, _ = pr.unpack(res.u)
    B = bary_matrix(pr.ray.r, r)
    z = r * np.exp(1j * pr.alpha)
    x = pr.sep.chart_x(z, pr.chart)
    J = pr.sep.chart_jacobian(z, x, pr.chart)
    y = J[:, None] * (B @ (pr.D @ S))
    I = [xi[j] + B @ d for j, d in enumerate(pr._dphi(S))]
    return B @ S, np.stack([y] + I), x


def sample_line(runs: ManifoldRuns, T: float | None = None, Nt: int = 128) -> LineData:
    ru, rs = runs.unstable, runs.stable
    pu = ru.problem
    T = pu.sep.T if T is None else float(T)
    R = min(pu.ray.r1, rs.problem.ray.r1)
    if math.exp(T) > R * (1 + 1e-12):
        raise SplittingError(f"window |Re s| <= {T:g} exceeds the chart domain")
    g = LineGrid(T, Nt, pu.K, pu.n)
    Su, Pu, x = _sample(ru, np.exp(g.t))
    Ss, Ps, _ = _sample(rs, np.exp(-g.t))
    return LineData(runs.beta, runs.zeta, g, x, Su, Ss, Pu, Ps)


def splitting_potential(runs: ManifoldRuns, T: float | None = None, Nt: int = 128) -> LineData:
    """``S_u - S_s`` on ``s = t + i zeta`` (branch ``-`` relabeled by ``s -> s - i pi``)."""
    return sample_line(runs, T, Nt)


# ---------------------------------------------------------------- transport field
@dataclass
class TransportField:
    Vt: np.ndarray
    Vphi: np.ndarray
    lam: float
    omega: np.ndarray
    residual: float
    size: tuple


def transport_coefficients(runs: ManifoldRuns, line: LineData, tol: float = 1e-7) -> TransportField:
    """Momentum gradient of H at the average of the two graphs.

    For a Hamiltonian quadratic in the momenta the difference of the two
    Hamilton-Jacobi equations is exactly ``H_P(P_avg) . d(S_u - S_s) = 0``,
    so the field ``(H_y / psi, H_I)`` annihilates the splitting potential.
    """
    pr = runs.unstable.problem
    g = line.grid
    c, b, A = pr.wh.on_grid(line.x, g.K)
    Pm = 0.5 * (line.P_u + line.P_s)
    HP = b + np.einsum("ij...,j...->i...", A, Pm)
    psi = pr.sep.psi_at(line.x)[:, None]
    Vt = HP[0] / psi
    Vphi = HP[1:]
    Sf = line.S_frak
    dS = g.dphi(Sf)
    res = Vt * (g.D @ Sf) + sum(v * d for v, d in zip(Vphi, dS))
    norm = float(np.abs(Sf - Sf.mean()).max())
    rel = float(np.abs(res).max()) / norm if norm > 0 else 0.0
    lam_mu = float(np.abs(Vt - pr.wh.lam).max())
    om_mu = float(np.abs(Vphi - pr.omega[:, None, None]).max()) if pr.n else 0.0
    log.info("transport: residual %.3e relative, |lam_mu| %.3e, |omega_mu| %.3e", rel, lam_mu, om_mu)
    if rel > tol:
        raise SplittingError(f"transport check failed: residual {rel:.3e} > {tol:g}")
    return TransportField(Vt, Vphi, pr.wh.lam, pr.omega.copy(), rel, (lam_mu, om_mu))


# ---------------------------------------------------------------- flow box
@dataclass
class FlowBox:
    """``a = id + b`` with ``(lam d_t + omega . d_phi) b = g o a`` and ``b(0, .) = 0``."""

    bt: np.ndarray
    bphi: np.ndarray
    residual: float
    iterations: int
    grid: LineGrid

    def points(self):
        g = self.grid
        Tt = np.repeat(g.t, g.M ** g.n) + self.bt.ravel()
        P = np.stack([np.tile(p, g.Nt + 1) for p in g.phi], -1) + self.bphi.reshape(g.n, -1).T
        return Tt, P


class _ModeSolver:
    """Per-mode collocation of ``lam u' + i kappa u = v`` with ``u(t = 0) = 0``."""

    def __init__(self, grid: LineGrid, lam: float, omega):
        self.g = grid
        kap = sum(w * k for w, k in zip(omega, grid.ks)) if grid.n else np.zeros(1)
        self.lu = {}
        self.kap = kap
        for kk in np.unique(np.round(kap, 12)):
            L = lam * grid.D + 1j * kk * np.eye(grid.Nt + 1)
            L[grid.i0] = 0.0
            L[grid.i0, grid.i0] = 1.0
            self.lu[kk] = sla.lu_factor(L)

    def solve(self, V):
        C = self.g.fft(V)
        out = np.empty_like(C)
        for j, kk in enumerate(np.round(self.kap, 12)):
            rhs = C[:, j].copy()
            rhs[self.g.i0] = 0.0
            out[:, j] = sla.lu_solve(self.lu[kk], rhs)
        return self.g.ifft(out)

    def apply(self, lam, omega, U):
        return lam * (self.g.D @ U) + sum(w * d for w, d in zip(omega, self.g.dphi(U)))


def flowbox_conjugate(field_: TransportField, grid: LineGrid, tol: float = 1e-9, max_iter: int = 60) -> FlowBox:
    lam, om = field_.lam, field_.omega
    gt = field_.Vt - lam
    gp = [v - w for v, w in zip(field_.Vphi, om)]
    comps = [gt] + gp
    scale = max(float(np.abs(c).max()) for c in comps)
    if scale == 0:
        z = np.zeros_like(gt)
        return FlowBox(z, np.zeros((grid.n,) + gt.shape, complex), 0.0, 0, grid)
    spread = max(float(np.abs(c - c.mean()).max()) for c in comps)
    if spread <= 1e-12 * scale:
        raise SplittingError("constant obstruction: a constant field cannot be conjugated away")
    solver = _ModeSolver(grid, lam, om)
    b = [np.zeros_like(gt) for _ in comps]
    n = grid.n
    for it in range(1, max_iter + 1):
        Tt = np.repeat(grid.t, grid.M ** n) + b[0].ravel()
        P = np.stack([np.tile(p, grid.Nt + 1) for p in grid.phi], -1)
        if n:
            P = P + np.stack([bb.ravel() for bb in b[1:]], -1)
        G = [_interp_grid(grid, c, Tt, P).reshape(gt.shape) for c in comps]
        new = [solver.solve(Gc) for Gc in G]
        step = max(float(np.abs(x - y).max()) for x, y in zip(new, b))
        b = new
        if step < 1e-15 * (1 + max(float(np.abs(x).max()) for x in b)):
            break
    else:
        raise SplittingError("flow-box failed: fixed-point iteration did not converge")
    # residual of (x0 . d) b - g o (id + b)
    Tt = np.repeat(grid.t, grid.M ** n) + b[0].ravel()
    P = np.stack([np.tile(p, grid.Nt + 1) for p in grid.phi], -1)
    if n:
        P = P + np.stack([bb.ravel() for bb in b[1:]], -1)
    res = max(float(np.abs(solver.apply(lam, om, bb) - _interp_grid(grid, c, Tt, P).reshape(gt.shape)).max())
              for bb, c in zip(b, comps))
    if res > tol:
        raise SplittingError(f"flow-box failed: conjugacy residual {res:.3e}")
    return FlowBox(b[0], np.stack(b[1:]) if n else np.zeros((0,) + gt.shape, complex), res, it, grid)


def _interp_grid(grid: LineGrid, V, Tt, P, chunk: int = 4096):
    out = np.empty(len(Tt), complex)
    for i in range(0, len(Tt), chunk):
        out[i:i + chunk] = grid.interp(V, Tt[i:i + chunk], P[i:i + chunk])
    return out


# ---------------------------------------------------------------- Fourier decay
@dataclass
class DecayFit:
    coeffs: dict
    noise: float
    constancy: float
    bound_constant: float
    slack: dict
    bound_ok: dict
    norm: float
    rho_prime: float
    sigma_prime: float


def flowbox_coefficients(Sp: np.ndarray, grid: LineGrid, lam: float, omega, zeta: float):
    """Coefficients ``F_k`` of ``S'(s, phi) = sum F_k exp(i k.phi - i kappa s / lam)``.

    Each ``F_k`` is the t-mean of ``c_k(t) exp(i kappa t / lam) exp(-kappa zeta / lam)``;
    the spread of that product in ``t`` measures departure from the flow box.
    """
    C = grid.fft(Sp)
    kap = sum(w * k for w, k in zip(omega, grid.ks)) if grid.n else np.zeros(1)
    ph = np.exp(1j * np.outer(grid.t, kap) / lam)
    prod = C * ph
    # Clenshaw-Curtis average in t
    w = _cc_weights(grid.Nt) / 2.0
    mean = w @ prod
    dev = np.abs(prod - mean).max(axis=0)
    F = mean * np.exp(np.minimum(-kap * zeta / lam, 700.0))
    return F, mean, dev, kap


def _cc_weights(N):
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N ** 2 - 1)
        for k in range(1, N // 2):
            v -= 2 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(N * theta[1:-1]) / (N ** 2 - 1)
    else:
        w[0] = w[N] = 1.0 / N ** 2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2 * v / N
    return w


def fourier_decay(line: LineData, box: FlowBox | None, lam: float, omega, rho_prime: float, sigma_prime: float,
                  snr: float = 1e3, constancy_tol: float = 1e-8) -> DecayFit:
    """Extract the flow-box modes and check ``log|F_k| <= -|kappa|/lam rho' - |k| sigma' + C``.

    Modes with ``kappa > 0`` are read off the line; their conjugates give
    ``kappa < 0``.  A mode counts as extracted when it exceeds ``snr`` times
    the noise level, taken from the suppressed ``kappa < 0`` side.
    """
    g = line.grid
    Sf = line.S_frak
    if box is not None and (np.any(box.bt) or np.any(box.bphi)):
        Tt, P = box.points()
        Sp = _interp_grid(g, Sf, Tt, P).reshape(Sf.shape)
    else:
        Sp = Sf
    F, on_line, dev, kap = flowbox_coefficients(Sp, g, lam, omega, line.zeta)
    norm = float(np.abs(Sf - Sf.mean()).max())
    pos = kap > 1e-12
    neg = kap < -1e-12
    noise = float(np.abs(on_line[neg]).max()) if np.any(neg) else 0.0
    noise = max(noise, 1e-300)
    ks = np.stack(g.ks, -1) if g.n else np.zeros((1, 0), int)
    extracted = [j for j in np.nonzero(pos)[0] if abs(on_line[j]) > snr * noise]
    constancy = float(max((dev[j] for j in extracted), default=0.0)) / norm if norm > 0 else 0.0
    if norm > 0 and constancy > constancy_tol:
        raise SplittingError(f"not in flow-box frame: spread {constancy:.3e} along characteristics")
    coeffs = {tuple(int(v) for v in ks[j]): complex(F[j]) for j in extracted}
    for k, v in list(coeffs.items()):
        coeffs[tuple(-x for x in k)] = v.conjugate()
    slack, ok = {}, {}
    Cb = 0.0
    if extracted:
        logn = math.log(norm)

        def rhs(j):
            return -abs(kap[j]) / lam * rho_prime - float(np.abs(ks[j]).sum()) * sigma_prime + logn

        jmax = max(extracted, key=lambda j: abs(F[j]))
        Cb = math.log(abs(F[jmax])) - rhs(jmax)
        for j in extracted:
            k = tuple(int(v) for v in ks[j])
            slack[k] = rhs(j) + Cb - math.log(abs(F[j]))
            ok[k] = slack[k] >= -1e-9
    return DecayFit(coeffs, noise, constancy, Cb, slack, ok, norm, rho_prime, sigma_prime)


# ---------------------------------------------------------------- critical points
def _trig_parts(coeffs: dict, n: int):
    ks = np.array([k for k in coeffs], float).reshape(-1, n)
    cs = np.array([coeffs[k] for k in coeffs], complex)
    return ks, cs


def critical_points(coeffs: dict, n: int, s: float = 0.0, lam: float = 1.0, omega=None, seeds: int = 8,
                    tol: float = 1e-12):
    """Critical points in ``phi`` of ``sum F_k exp(i k.(phi - omega s / lam))`` at real ``s``.

    Newton from a ``seeds**n`` lattice; returns ``[(phi, hessian_eigenvalues)]``
    deduplicated modulo 2 pi.
    """
    if not coeffs:
        raise SplittingError("no critical points found: empty potential")
    ks, cs = _trig_parts(coeffs, n)
    om = np.zeros(n) if omega is None else np.atleast_1d(np.asarray(omega, float))
    cs = cs * np.exp(-1j * (ks @ om) * s / lam)

    def grad_hess(p):
        e = cs * np.exp(1j * (ks @ p))
        gvec = np.real(1j * (ks.T @ e))
        H = np.real(-(ks.T * e) @ ks)
        return gvec, H

    found = []
    scale = float(np.abs(cs).max() * max(1.0, np.abs(ks).max()))
    grid1 = 2 * np.pi * np.arange(seeds) / seeds + 0.1
    for seed in itertools.product(grid1, repeat=n):
        p = np.array(seed, float)
        for _ in range(60):
            gv, H = grad_hess(p)
            try:
                dp = np.linalg.solve(H, gv)
            except np.linalg.LinAlgError:
                break
            p = p - dp
            if np.abs(dp).max() < 1e-14:
                break
        gv, H = grad_hess(p)
        if np.abs(gv).max() > tol * max(scale, 1e-300) * 1e3:
            continue
        p = np.mod(p, 2 * np.pi)
        if any(np.abs(np.angle(np.exp(1j * (p - q)))).max() < 1e-7 for q, _ in found):
            continue
        found.append((p, np.linalg.eigvalsh(H)))
    if not found:
        raise SplittingError("no critical points found")
    return found


# ---------------------------------------------------------------- Melnikov oracle
def melnikov_oracle(H1: FourierTable, sep: SeparatrixMap, freq: Frequency, theta=None, zeta: float | None = None,
                    tail: float = 40.0, points: int = 1 << 14, check: bool = True) -> dict:
    """First-order modes ``F_k = -(1/lam) int f_k(x(v)) exp(i kappa v / lam) dv``.

    ``H1`` is the momentum-free perturbation over ``(x, phi)``; only its
    oscillating part in ``phi`` contributes.  The contour is moved to
    ``Im v = zeta`` (default: just inside the analyticity strip) where the
    integrand cancels far less, and the trapezoid rule runs over
    ``|Re v| <= tail / lam``.  Returns ``{k: F_k}`` for ``kappa > 0`` and
    their conjugates.
    """
    lam = sep.lam
    if zeta is None:
        if sep.strip is None:
            raise SplittingError("Melnikov contour height needs a strip estimate")
        zeta = sep.strip.rho - 0.025
    T = to_x_axis(H1) if not H1.x_axis else H1
    if theta is not None and np.any(theta):
        T = _shear(T, np.atleast_1d(theta))
    om = freq.vec

    def quad(m):
        u = np.linspace(-tail / lam, tail / lam, m + 1)
        v = u + 1j * zeta
        xs = _separatrix_points(sep, v)
        h = u[1] - u[0]
        res = {}
        for k, c in T.items():
            kk = np.array(k[1:])
            kap = float(kk @ om)
            if kap <= 1e-12:
                continue
            # x-dependence of this angle mode
            w = c * np.exp(1j * k[0] * xs / 2) if T.x_axis else c * np.exp(1j * k[0] * xs)
            res.setdefault(tuple(int(q) for q in kk), 0j)
            res[tuple(int(q) for q in kk)] += -(1 / lam) * h * np.sum(w * np.exp(1j * kap * v / lam))
        return res

    r1 = quad(points)
    if check:
        r2 = quad(2 * points)
        for k in r1:
            if abs(r1[k] - r2[k]) > 1e-10 * max(abs(r2[k]), 1e-300):
                raise SplittingError(f"Melnikov quadrature not converged for k = {k}")
        r1 = r2
    out = {}
    for k, v in r1.items():
        out[k] = v
        out[tuple(-q for q in k)] = v.conjugate()
    return out


def _separatrix_points(sep: SeparatrixMap, s: np.ndarray) -> np.ndarray:
    """Unperturbed ``x(s)`` on a horizontal line, from the chart that keeps ``|chart| <= 1``."""
    s = np.asarray(s, dtype=complex)
    out = np.empty_like(s)
    for chart, sel, c, base, sg in (("unstable", s.real <= 0, np.exp(s), 0.0, 1.0),
                                    ("stable", s.real > 0, np.exp(-s), 2 * np.pi, -1.0)):
        # deep in the tail the chart is linear to relative accuracy |c|**2
        tiny = sel & (np.abs(c) < 1e-7)
        slope = 4 * np.exp(-sg * sep.Rint(base).real)
        out[tiny] = base + sg * slope * c[tiny]
        rest = sel & ~tiny
        if np.any(rest):
            out[rest] = sep.chart_x(c[rest], chart)
    return out


def melnikov_on_line(M: dict, grid: LineGrid, lam: float, omega, zeta: float):
    """Values of ``sum F_k exp(i k.phi - i kappa s / lam)`` on ``s = t + i zeta``."""
    out = np.zeros((grid.Nt + 1, grid.M ** grid.n), complex)
    s = grid.t + 1j * zeta
    for k, F in M.items():
        kk = np.array(k, float)
        kap = float(kk @ np.atleast_1d(omega))
        ph = sum(q * p for q, p in zip(kk, grid.phi))
        out += F * np.exp(-1j * kap * s / lam)[:, None] * np.exp(1j * ph)[None, :]
    return out


# ---------------------------------------------------------------- report
@dataclass
class SplittingReport:
    xi0: np.ndarray
    xi_beta: dict
    c0_0: complex
    c0_beta: dict
    S_frak: dict
    coeffs: dict
    decay_fit: dict
    critical_points: dict
    bound_ok: dict
    transport_residual: dict = field(default_factory=dict)
    flowbox_residual: dict = field(default_factory=dict)
    constancy: dict = field(default_factory=dict)

    @property
    def xi_mismatch(self) -> float:
        return max(float(np.abs(np.asarray(v) - self.xi0).max(initial=0.0)) for v in self.xi_beta.values())

    @property
    def c0_mismatch(self) -> float:
        return max(abs(v - self.c0_0) for v in self.c0_beta.values())

    @property
    def n_critical(self) -> int:
        return sum(len(v) for v in self.critical_points.values())

    def to_dict(self) -> dict:
        def kd(d):
            return {",".join(str(q) for q in k): [float(np.real(v)), float(np.imag(v))] for k, v in sorted(d.items())}

        return {
            "xi0": [float(np.real(v)) for v in np.atleast_1d(self.xi0)],
            "xi_beta": {b: [float(np.real(v)) for v in np.atleast_1d(x)] for b, x in self.xi_beta.items()},
            "c0_0": [float(np.real(self.c0_0)), float(np.imag(self.c0_0))],
            "c0_beta": {b: [float(np.real(v)), float(np.imag(v))] for b, v in self.c0_beta.items()},
            "coeffs": {b: kd(c) for b, c in self.coeffs.items()},
            "slack": {b: {",".join(str(q) for q in k): float(v) for k, v in sorted(f.slack.items())}
                      for b, f in self.decay_fit.items()},
            "bound_constant": {b: float(f.bound_constant) for b, f in self.decay_fit.items()},
            "noise": {b: float(f.noise) for b, f in self.decay_fit.items()},
            "bound_ok": {b: bool(all(v.values())) for b, v in self.bound_ok.items()},
            "critical_points": {b: [{"phi": [float(q) for q in p], "hessian": [float(q) for q in h]}
                                    for p, h in v] for b, v in self.critical_points.items()},
            "transport_residual": {b: float(v) for b, v in self.transport_residual.items()},
            "flowbox_residual": {b: float(v) for b, v in self.flowbox_residual.items()},
            "constancy": {b: float(v) for b, v in self.constancy.items()},
            "xi_mismatch": self.xi_mismatch,
            "c0_mismatch": float(self.c0_mismatch),
            "n_critical": self.n_critical,
        }


def analyze_splitting(runs: dict, rho_prime: float, sigma_prime: float, Nt: int = 128, T: float | None = None,
                      seeds: int = 8, constancy_tol: float = 1e-8, transport_tol: float = 1e-7):
    """Full post-processing of :func:`compute_manifolds` output."""
    any_run = next(iter(runs.values())).unstable
    lam = any_run.problem.wh.lam
    om = any_run.problem.omega
    n = any_run.problem.n
    xi0 = np.real(any_run.xi)
    c00 = complex(any_run.c0)
    xi_b, c0_b, Sf, coeffs, fits, crit, ok, tr, fb, cs = {}, {}, {}, {}, {}, {}, {}, {}, {}, {}
    lines = {}
    for beta, m in runs.items():
        xi_b[beta] = np.real(m.stable.xi)
        c0_b[beta] = complex(m.stable.c0)
        line = splitting_potential(m, T, Nt)
        lines[beta] = line
        Sf[beta] = line.S_frak
        if not np.any(line.S_frak - line.S_frak.mean()):
            # identical whiskers: nothing to conjugate or fit
            fit = DecayFit({}, 0.0, 0.0, 0.0, {}, {}, 0.0, rho_prime, sigma_prime)
            tr[beta] = fb[beta] = 0.0
        else:
            fld = transport_coefficients(m, line, transport_tol)
            box = flowbox_conjugate(fld, line.grid)
            fit = fourier_decay(line, box, lam, om, rho_prime, sigma_prime, constancy_tol=constancy_tol)
            tr[beta] = fld.residual
            fb[beta] = box.residual
        coeffs[beta] = fit.coeffs
        fits[beta] = fit
        ok[beta] = fit.bound_ok
        cs[beta] = fit.constancy
        crit[beta] = critical_points(fit.coeffs, n, 0.0, lam, om, seeds) if fit.coeffs else []
        if fit.coeffs and len(crit[beta]) < n + 1:
            log.warning("branch %s: %d critical points < n + 1", beta, len(crit[beta]))
    rep = SplittingReport(xi0, xi_b, c00, c0_b, Sf, coeffs, fits, crit, ok, tr, fb, cs)
    return rep, lines


__all__ = [
    "SplittingError", "ManifoldRuns", "compute_manifolds", "LineGrid", "LineData", "sample_line",
    "splitting_potential", "TransportField", "transport_coefficients", "FlowBox", "flowbox_conjugate",
    "DecayFit", "fourier_decay", "flowbox_coefficients", "critical_points", "melnikov_oracle",
    "melnikov_on_line", "SplittingReport", "analyze_splitting",
]
