"""Linear small-divisor solvers on tori, bi-cylinders and bounded cylinders.

``D_omega = <omega, d/dphi>`` and ``D_{lam,omega} = lam d/ds + D_omega``.
Torus equations are solved mode by mode.  Transport equations on the
bi-cylinder are solved by Chebyshev collocation in the chart variable
``z = exp(s)``: along ``z`` the operator ``lam d/ds`` is ``lam z d/dz``,
which maps ``z**j`` to ``lam j z**j``, so every Fourier mode becomes a
well-posed linear system without boundary conditions.  The real segment
``z in [-R, R]`` carries both branches of the bi-cylinder (``Im s = 0`` for
``z > 0`` and ``Im s = pi`` for ``z < 0``).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .cylinder import CylinderField, Ray, angle_wavenumbers, bary_matrix, trig_eval_matrix
from .separatrix import SeparatrixMap, to_x_axis
from .series import FourierTable, split_at_infinity

log = logging.getLogger(__name__)


class HomologicalError(ValueError):
    pass


def _lattice(n: int, K: int):
    rng = range(-K, K + 1)
    for k in itertools.product(rng, repeat=n):
        if any(k):
            yield np.array(k)


@dataclass(frozen=True)
class Frequency:
    """Rotation vector with a brute-force Diophantine margin."""

    omega: tuple
    tau: float
    gamma_floor: float
    gamma: float
    K_max: int

    @classmethod
    def build(cls, omega, tau: float | None = None, K_max: int = 32, gamma_floor: float | None = None):
        om = np.atleast_1d(np.asarray(omega, float))
        n = om.size
        tau = float(max(n - 1, 0)) if tau is None else float(tau)
        if tau < n - 1:
            raise HomologicalError(f"tau must be at least n - 1 = {n - 1}")
        gamma = math.inf
        for k in _lattice(n, 2 * K_max if n > 1 else 1):
            ak = float(np.abs(k).sum())
            val = abs(float(k @ om))
            if val < 1e-14 * max(1.0, float(np.abs(om).max())):
                raise HomologicalError(f"higher-multiplicity resonance: <k, omega> = 0 for k = {tuple(int(v) for v in k)}")
            gamma = min(gamma, val * ak ** tau)
        floor = 0.5 * gamma if gamma_floor is None else float(gamma_floor)
        return cls(tuple(float(v) for v in om), tau, floor, gamma, int(K_max))

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.omega)

    def scaled(self, factor: float) -> "Frequency":
        return Frequency(tuple(factor * w for w in self.omega), self.tau,
                         abs(factor) * self.gamma_floor, abs(factor) * self.gamma, self.K_max)

    def divisors(self, shape):
        """``<k, omega>`` on a centred coefficient grid of the given shape (angles only)."""
        ks = np.meshgrid(*[np.arange(-(s // 2), s // 2 + 1) for s in shape], indexing="ij")
        return sum(w * k for w, k in zip(self.omega, ks)), ks

    def check(self, coeffs: np.ndarray, shape):
        """Abort if a stored nonzero mode violates the Diophantine floor."""
        d, ks = self.divisors(shape)
        norm = sum(np.abs(k) for k in ks)
        nz = (np.abs(coeffs) > 0) & (norm > 0)
        with np.errstate(divide="ignore"):
            lim = self.gamma_floor * np.where(norm > 0, norm, 1.0) ** (-self.tau)
        if np.any(nz & (np.abs(d) < lim)):
            raise HomologicalError("small divisor underflow")


# ------------------------------------------------------------------ torus solvers
def _phi_axes(v: FourierTable):
    return tuple(range(1, v.dims)) if v.x_axis else tuple(range(v.dims))


def solve_Domega(v: FourierTable, freq: Frequency, tol: float = 1e-12) -> FourierTable:
    """``u`` with ``D_omega u = v`` and zero angular mean.

    With an x axis the equation is solved for every x-mode separately and
    every x-mode must have zero angular mean.
    """
    axes = _phi_axes(v)
    shape = tuple(v.coeffs.shape[a] for a in axes)
    if len(shape) != freq.n:
        raise HomologicalError("angle count does not match the frequency vector")
    d, _ = freq.divisors(shape)
    c = np.moveaxis(v.coeffs, axes, tuple(range(-len(axes), 0))) if v.x_axis else v.coeffs
    zero = tuple(s // 2 for s in shape)
    mean = c[(...,) + zero]
    if np.abs(mean).max(initial=0.0) > tol:
        raise HomologicalError("non-solvable: mean obstruction")
    freq.check(c.reshape((-1,) + shape).sum(axis=0) if v.x_axis else c, shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(d == 0, 0.0, c / (1j * np.where(d == 0, 1.0, d)))
    if v.x_axis:
        u = np.moveaxis(u, tuple(range(-len(axes), 0)), axes)
    return FourierTable(u, v.x_axis)


def solve_shifted(v0: FourierTable, lam: float, freq: Frequency) -> FourierTable:
    """``(-lam + D_omega) u = v0``; the divisors never drop below ``lam``."""
    if not lam > 0:
        raise HomologicalError("solve_shifted needs lam > 0")
    d, _ = freq.divisors(v0.coeffs.shape)
    return FourierTable(v0.coeffs / (-lam + 1j * d), v0.x_axis)


# ------------------------------------------------------------------ transport on the bi-cylinder
@dataclass
class TransportSolution:
    """``u(s, phi) = u_torus(phi) + u_field(z = e^s, phi)`` on the real segment ``[-R, R]``."""

    u_torus: FourierTable
    field: CylinderField
    c: float
    lam: float
    freq: Frequency
    sep: SeparatrixMap
    rhs: Callable  # (x, phi_list) -> values of v - c, for residual checks

    @staticmethod
    def z_of_s(s):
        return np.exp(np.asarray(s, dtype=complex))

    def evaluate(self, s, phi):
        """Values at energy times ``s`` (real, or with ``Im s = pi``) and angles ``phi`` (P, n)."""
        z = self.z_of_s(s)
        if np.abs(z.imag).max(initial=0.0) > 1e-9 * np.abs(z).max(initial=1.0):
            raise HomologicalError("points must lie on the bi-cylinder (Im s in {0, pi})")
        phi = np.atleast_2d(phi)
        return self.field.evaluate(z.real, phi) + self.u_torus(*phi.T)

    def residual(self, samples: int = 200, seed: int = 0, s_max: float | None = None) -> float:
        """Max of ``|lam u_s + D_omega u - (v - c)|`` at random off-node points.

        Derivatives are those of the spectral interpolant (Chebyshev in ``z``,
        trigonometric in ``phi``), evaluated between collocation nodes.
        """
        rng = np.random.default_rng(seed)
        R = self.field.ray.r1
        s_max = math.log(R) - 0.05 if s_max is None else s_max
        s = rng.uniform(-6.0, s_max, samples)
        branch = rng.integers(0, 2, samples)
        z = np.exp(s) * np.where(branch, -1.0, 1.0)
        n = self.freq.n
        phi = rng.uniform(0, 2 * np.pi, (samples, n))
        ray = self.field.ray
        vals = self.field.values.reshape(ray.N + 1, -1)
        B = bary_matrix(ray.r, z)
        E = trig_eval_matrix(self.field.K, n, phi)
        zu = np.sum((B @ (ray.r[:, None] * (ray.D @ vals))) * E, axis=1)
        ks = angle_wavenumbers(self.field.K, n)
        dphi_sum = 0
        hat = sfft.fftn(self.field.values, axes=tuple(range(1, 1 + n)))
        for w, kk in zip(self.freq.omega, ks):
            d = sfft.ifftn(hat * (1j * w * kk)[None], axes=tuple(range(1, 1 + n))).reshape(ray.N + 1, -1)
            dphi_sum = dphi_sum + np.sum((B @ d) * E, axis=1)
        tor = self.u_torus
        for j, w in enumerate(self.freq.omega):
            dt = FourierTable(tor.coeffs * (1j * _axis_k(tor.coeffs.shape, j)), False)
            dphi_sum = dphi_sum + w * dt(*phi.T)
        x = self.sep.chart_x(z.astype(complex))
        target = self.rhs(x, [phi[:, j] for j in range(n)])
        res = self.lam * zu + dphi_sum - target
        return float(np.abs(res).max())


def _axis_k(shape, j):
    s = [1] * len(shape)
    s[j] = -1
    return np.arange(-(shape[j] // 2), shape[j] // 2 + 1).reshape(s)


def _segment(sep: SeparatrixMap, N: int, T: float | None):
    T = sep.T if T is None else T
    R = math.exp(T)
    ray = Ray(N + (N % 2), -R, R)
    x = sep.chart_x(ray.z.astype(complex))
    return ray, x


@lru_cache(maxsize=16)
def _schur(N: int, r0: float, r1: float, scale: float):
    """Complex Schur form of ``scale * r d/dr`` on a Chebyshev segment."""
    ray = Ray(N, r0, r1)
    T, Z = sla.schur(scale * ray.r[:, None] * ray.D, output="complex")
    return T, Z


def transport_modes(ray: Ray, lam: float, freq: Frequency, K: int, v_grid: np.ndarray,
                    sign: float = 1.0, gauge_index: int | None = None):
    """Solve ``(sign*lam r d/dr + D_omega) u = v`` on a ray, mode by mode in the angles.

    ``v_grid`` has shape ``(N+1,) + (M,)*n``.  Oscillating modes reuse one
    Schur factorization, so each costs a triangular solve; for the zero mode
    the row at the origin is replaced by the gauge ``u(0) = 0``.
    """
    n = freq.n
    axes = tuple(range(1, 1 + n))
    vh = sfft.fftn(v_grid, axes=axes)
    ks = angle_wavenumbers(K, n)
    kappa = sum(w * k for w, k in zip(freq.omega, ks))
    T, Z = _schur(ray.N, ray.r0, ray.r1, sign * lam)
    g = ray.origin_index if gauge_index is None else gauge_index
    flat = vh.reshape(ray.N + 1, -1)
    kap = kappa.ravel()
    out = np.empty_like(flat)
    proj = Z.conj().T @ flat
    Y = np.zeros_like(flat)
    diag = np.diag_indices(ray.N + 1)
    gauge = []
    for j, kj in enumerate(kap):
        if abs(kj) < 1e-14:
            gauge.append(j)
            continue
        Tk = T.copy()
        Tk[diag] += 1j * kj
        Y[:, j] = sla.solve_triangular(Tk, proj[:, j], check_finite=False)
    out = Z @ Y
    if gauge:
        A = sign * lam * ray.r[:, None] * ray.D + 0j
        A[g] = 0.0
        A[g, g] = 1.0
        rhs = flat[:, gauge].copy()
        rhs[g] = 0.0
        out[:, gauge] = np.linalg.solve(A, rhs)
    return sfft.ifftn(out.reshape(vh.shape), axes=axes)


def _grid_values(table: FourierTable, x: np.ndarray, K: int, n: int):
    g = np.arange(2 * K + 1) * 2 * np.pi / (2 * K + 1)
    return table.on_grid(x, *([g] * n))


def _torus_values(table: FourierTable, K: int, n: int):
    g = np.arange(2 * K + 1) * 2 * np.pi / (2 * K + 1)
    return table.on_grid(*([g] * n))


def _default_N(v: FourierTable) -> int:
    # Chebyshev count on the real segment; high x-modes put the poles of the
    # solution closer to the segment in the chart variable
    return 2 * max(120, 96 + 8 * v.cutoffs[0])


def _solve_segment(grid_fn, lam, freq, sep, N, K, T):
    """``grid_fn(x)`` gives the data minus its torus trace on ``x`` nodes times the angle grid."""
    ray, x = _segment(sep, N, T)
    u = transport_modes(ray, lam, freq, K, grid_fn(x))
    return CylinderField(ray, K, freq.n, u, chart="unstable")


def _phi_cutoff(v: FourierTable) -> int:
    return max(v.cutoffs[1:]) if v.dims > 1 else 0


def solve_transport(v: FourierTable, lam: float, freq: Frequency, sep: SeparatrixMap,
                    N: int | None = None, K: int | None = None, T: float | None = None):
    """Bounded solution of ``D_{lam,omega} u = v - c`` on the bi-cylinder; returns ``(u, c)``.

    ``v`` is a table over ``(x, phi)`` (an x axis is added for 2*pi-periodic
    input).  ``c`` is the average at infinity; ``u`` is normalized so that
    its trace on the torus has zero angular mean.
    """
    if not lam > 0:
        raise HomologicalError("lam must be positive")
    v = v if v.x_axis else to_x_axis(v)
    if v.dims != freq.n + 1:
        raise HomologicalError("table dimension must be 1 + number of rotators")
    v0, _ = split_at_infinity(v)
    c = float(v0.coeffs[tuple(s // 2 for s in v0.coeffs.shape)].real)
    u0 = solve_Domega(v0 - c, freq)
    K = _phi_cutoff(v) if K is None else K
    N = _default_N(v) if N is None else N
    n = freq.n

    def grid(x):
        return _grid_values(v, x, K, n) - _torus_values(v0, K, n)[None]

    field = _solve_segment(grid, lam, freq, sep, N, K, T)
    return TransportSolution(u0, field, c, lam, freq, sep, lambda X, P: v(X, *P) - c), c


def eta1(sep: SeparatrixMap, x):
    """``(psi'(x) - 1) / psi(x)`` with its limit ``psi''(0)`` at the torus."""
    x = np.asarray(x, dtype=complex)
    ps = sep.psi_at(x)
    dps = sep.psi_deriv_at(x)
    small = np.abs(x) < 1e-7
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (dps - 1.0) / np.where(small, 1.0, ps)
    return np.where(small, sep.psi_dd0(), val)


def characteristic_residual(evaluate: Callable, target: Callable, lam: float, omega, s, phi,
                            h: float = 1e-3) -> np.ndarray:
    """``(lam d/ds + D_omega) u - target`` by a 4th-order difference along characteristics.

    ``evaluate(s, phi)`` and ``target(s, phi)`` take complex times ``s`` (P,)
    and angles ``phi`` (P, n).
    """
    om = np.asarray(omega, float)
    acc = 0
    for step, wt in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
        acc = acc + wt * evaluate(s + step * h * lam, phi + step * h * om[None, :])
    return acc / (12 * h) - target(s, phi)


@dataclass
class MinusSolution:
    """``u = u0 / chi + u1`` for data ``v = v0 / chi + v1``."""

    u0: FourierTable
    u1: TransportSolution
    c: float
    v0: FourierTable
    v1: FourierTable

    def evaluate(self, s, phi):
        phi = np.atleast_2d(phi)
        z = np.exp(np.asarray(s, dtype=complex))
        x = self.u1.sep.chart_x(z)
        return self.u0(*phi.T) / self.u1.sep.psi_at(x) + self.u1.evaluate(s, phi)

    def residual(self, samples: int = 100, seed: int = 0) -> float:
        """Max defect of the full equation at random points on both branches, ``|s| <= 1``."""
        rng = np.random.default_rng(seed)
        sep = self.u1.sep
        n = self.u1.freq.n
        s = rng.uniform(-1.0, 1.0, samples) + 1j * np.pi * rng.integers(0, 2, samples)
        phi = rng.uniform(0, 2 * np.pi, (samples, n))

        def target(ss, ph):
            x = sep.chart_x(np.exp(ss))
            return self.v0(*ph.T) / sep.psi_at(x) + self.v1(x, *ph.T) - self.c

        res = characteristic_residual(self.evaluate, target, self.u1.lam, self.u1.freq.vec, s, phi)
        return float(np.abs(res).max())


def solve_transport_minus(v0: FourierTable, v1: FourierTable, lam: float, freq: Frequency,
                          sep: SeparatrixMap, N: int | None = None, K: int | None = None, T: float | None = None):
    """Solve ``D_{lam,omega} u = v0/chi + v1 - c`` with ``u = u0/chi + u1``."""
    if not lam > 0:
        raise HomologicalError("lam must be positive")
    v1 = v1 if v1.x_axis else to_x_axis(v1)
    u0 = solve_shifted(v0, lam, freq)
    psi_dd0 = sep.psi_dd0()
    v1_inf, _ = split_at_infinity(v1)
    zero = tuple(s // 2 for s in v1_inf.coeffs.shape)
    zero0 = tuple(s // 2 for s in v0.coeffs.shape)
    c = float((v1_inf.coeffs[zero] - psi_dd0 * v0.coeffs[zero0]).real)
    K = max(_phi_cutoff(v1), max(v0.cutoffs)) if K is None else K
    N = _default_N(v1) if N is None else N
    n = freq.n

    def rhs(X, P):
        return v1(X, *P) + lam * eta1(sep, X) * u0(*P)

    def grid(x):
        tr = _torus_values(v1_inf, K, n) + lam * psi_dd0 * _torus_values(u0, K, n)
        e = (lam * eta1(sep, x)).reshape((-1,) + (1,) * n)
        return _grid_values(v1, x, K, n) + e * _torus_values(u0, K, n)[None] - tr[None]

    tor_table = (v1_inf + u0 * (lam * psi_dd0)) - c
    ut = solve_Domega(tor_table.real_projection() if tor_table.is_real(1e-9) else tor_table, freq)
    field = _solve_segment(grid, lam, freq, sep, N, K, T)
    sol = TransportSolution(ut, field, c, lam, freq, sep, lambda X, P: rhs(X, P) - c)
    return MinusSolution(u0, sol, c, v0, v1)


def solve_transport_vec(v: list, lam: float, freq: Frequency, sep: SeparatrixMap,
                        mean_free: bool = True, **kw):
    """Componentwise solve for an (n+1)-vector field.

    ``v[0]`` is either a table (plain transport) or a pair ``(v0, v1)`` for
    the ``1/chi`` class; the remaining components are plain tables.  Returns
    the list of solutions and the constant vector ``(c, 0, ..., 0)``.
    """
    sols, cs = [], []
    first = v[0]
    if isinstance(first, tuple):
        s = solve_transport_minus(first[0], first[1], lam, freq, sep, **kw)
        sols.append(s)
        cs.append(s.c)
    else:
        s, c = solve_transport(first, lam, freq, sep, **kw)
        sols.append(s)
        cs.append(c)
    for comp in v[1:]:
        s, c = solve_transport(comp, lam, freq, sep, **kw)
        if mean_free and abs(c) > 1e-12:
            raise HomologicalError("residual mean in angular components")
        sols.append(s)
        cs.append(c)
    return sols, np.array(cs)


# ------------------------------------------------------------------ Cauchy problem on a bounded cylinder
def _panels(a: complex, b: complex, scale: float, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on the segment from ``a`` to ``b``."""
    L = abs(b - a)
    if L == 0:
        return np.zeros(0, complex), np.zeros(0, complex)
    m = max(1, int(math.ceil(L / scale)))
    g, w = np.polynomial.legendre.leggauss(order)
    edges = a + (b - a) * np.arange(m + 1) / m
    t = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * 0.5 * (g[None, :] + 1)).ravel()
    wt = np.tile(w * 0.5, m) * (b - a) / m
    return t, wt


def solve_cauchy(v_modes: Mapping, lam: float, omega, rho_prime: float, s_points,
                 order: int = 16) -> dict:
    """Per-mode solution of ``lam u_k' + i<k,omega> u_k = v_k`` on a bounded cylinder.

    ``v_modes`` maps integer tuples ``k`` to callables ``v_k(s)`` analytic on
    the rectangle ``|Im s| <= rho_prime``.  Initial data: ``u_k(0) = 0`` for
    resonant modes, otherwise ``u_k(+-i rho_prime) = 0`` with the sign of
    ``<k, omega>``; the path runs vertically and then horizontally, so the
    kernel ``exp(i<k,omega>(t - s)/lam)`` never exceeds one.
    Returns ``{k: u_k(s_points)}``.
    """
    if not lam > 0:
        raise HomologicalError("lam must be positive")
    om = np.atleast_1d(np.asarray(omega, float))
    sp = np.atleast_1d(np.asarray(s_points, dtype=complex))
    out = {}
    for k in sorted(v_modes):
        f = v_modes[k]
        kap = float(np.dot(np.atleast_1d(k), om))
        vals = np.empty(sp.shape, complex)
        scale = min(0.5, math.pi * lam / max(abs(kap), 1e-300))
        for i, s in enumerate(sp):
            if abs(kap) < 1e-14:
                t, w = _panels(0j, s, scale, order)
                vals[i] = np.sum(f(t) * w) / lam if len(t) else 0.0
                continue
            start = 1j * rho_prime * (1 if kap > 0 else -1)
            corner = 1j * s.imag
            t1, w1 = _panels(start, corner, scale, order)
            t2, w2 = _panels(corner, s, scale, order)
            t = np.concatenate([t1, t2])
            w = np.concatenate([w1, w2])
            vals[i] = np.sum(f(t) * np.exp(1j * kap * (t - s) / lam) * w) / lam if len(t) else 0.0
        out[k] = vals
    return out


__all__ = [
    "Frequency", "HomologicalError", "solve_Domega", "solve_shifted", "solve_transport",
    "solve_transport_minus", "solve_transport_vec", "solve_cauchy", "TransportSolution",
    "MinusSolution", "transport_modes", "eta1", "characteristic_residual",
]
