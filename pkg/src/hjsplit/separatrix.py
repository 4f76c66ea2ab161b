"""Separatrix function, energy-time map and strip constants of a pendulum-like potential.

Conventions.  ``U`` is a 2*pi-periodic FourierTable in ``x`` (dims 1, no x
axis).  After normalization the maximum sits at ``x = 0`` with ``U(0) = 0``
and ``U''(0) = -lambda**2``.  The separatrix function is
``psi(x) = 2 sin(x/2) psi1(x)`` with ``psi1 = sqrt(U1 / (cos x - 1))`` and
``U1 = U / lambda**2``; it is 4*pi-periodic and changes sign under
``x -> x + 2*pi``.

The energy time is ``s(x) = log tan(x/4) + Rint(x)``: the first term is the
exact antiderivative of ``1/(2 sin(x/2))`` and ``Rint`` integrates the
regular remainder ``(1/psi1 - 1) / (2 sin(x/2))``.  It is normalized by
``s(pi) = 0``.

Strip widths are measured in the half angle: a domain of half-width ``w``
is ``{|Im x| <= 2 w}``, the same scaling used for x-weights in
:func:`hjsplit.series.weighted_norm`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .series import FourierTable, differentiate, mul, shift_angles

log = logging.getLogger(__name__)

RHO_CAP = np.pi / 2 - 1e-6


class SeparatrixError(ValueError):
    pass


@dataclass(frozen=True)
class PotentialProfile:
    U: FourierTable  # normalized, 2*pi-periodic, dims 1
    lam: float
    maximizer: float


def _as_periodic(U: FourierTable) -> FourierTable:
    if U.dims != 1:
        raise SeparatrixError("the potential must depend on x only")
    if U.x_axis:
        # stored on the 4*pi axis: only even half-frequencies are allowed
        c = U.coeffs
        K = U.cutoffs[0]
        odd = np.abs(c[(np.arange(-K, K + 1) % 2) == 1]).max(initial=0.0)
        if odd > 1e-14 * max(1.0, np.abs(c).max()):
            raise SeparatrixError("potential is not 2*pi-periodic")
        return FourierTable(c[::2] if K % 2 == 0 else c[1:-1:2], False)
    return U


def to_x_axis(u: FourierTable) -> FourierTable:
    """Re-index a 2*pi-periodic table on the 4*pi axis (first dimension)."""
    if u.x_axis:
        return u
    K = u.cutoffs[0]
    shape = (4 * K + 1,) + u.coeffs.shape[1:]
    c = np.zeros(shape, complex)
    c[::2] = u.coeffs
    return FourierTable(c, True)


def analyze_potential(U: FourierTable, grid: int = 4096) -> PotentialProfile:
    """Locate the unique non-degenerate maximum and normalize it to ``x = 0``."""
    U = _as_periodic(U).real_projection()
    xs = np.arange(grid) * 2 * np.pi / grid
    vals = U(xs).real
    top = vals.max()
    # local maxima on the periodic grid
    is_max = (vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1))
    cand = np.nonzero(is_max & (vals > top - 1e-8))[0]
    if len(cand) > 1:
        # adjacent indices belong to one flat-topped maximum only if contiguous
        groups = np.split(cand, np.nonzero(np.diff(cand) > 1)[0] + 1)
        if len(groups) > 1 and not (len(groups) == 2 and groups[0][0] == 0 and groups[-1][-1] == grid - 1):
            raise SeparatrixError("degenerate maximum: two absolute maxima")
    x0 = xs[int(np.argmax(vals))]
    d1 = differentiate(U, 0)
    d2 = differentiate(d1, 0)
    for _ in range(50):
        step = (d1(x0).real / d2(x0).real)
        x0 -= step
        if abs(step) < 1e-15:
            break
    x0 = float(np.mod(x0, 2 * np.pi))
    Us = shift_angles(U, [x0])
    Us = Us - Us(0.0).real
    upp = float(differentiate(differentiate(Us, 0), 0)(0.0).real)
    if upp >= -1e-8:
        raise SeparatrixError(f"non-hyperbolic maximum: U''(0) = {upp:.3e}")
    return PotentialProfile(Us.real_projection(), math.sqrt(-upp), x0)


def _divide_by_cos_minus_one(U1: FourierTable) -> FourierTable:
    """Exact Laurent division of ``U1`` by ``cos x - 1 = (z - 1)**2 / (2 z)``."""
    K = U1.cutoffs[0]
    # 2 z U1(z) as an ordinary polynomial times z**(-K); numpy wants highest degree first
    P = np.zeros(2 * K + 2, complex)
    P[1:] = 2 * U1.coeffs
    q, rem = np.polydiv(P[::-1], np.array([1.0, -2.0, 1.0]))
    if np.abs(rem).max(initial=0.0) > 1e-10 * max(1.0, np.abs(P).max()):
        raise SeparatrixError("potential does not vanish to second order at its maximum")
    q = q[::-1]  # ascending: coefficient of z**j for j = 0..2K-1, times z**(-K)
    coeffs = np.zeros(2 * K + 1, complex)
    coeffs[: len(q)] = q
    return FourierTable(coeffs, False).real_projection()


def _half_angle_quotient(P: FourierTable) -> FourierTable:
    """``P / (2 sin(x/2))`` for a 2*pi-periodic ``P`` vanishing at 0, as an exact x-axis table."""
    K = P.cutoffs[0]
    if K == 0:
        return FourierTable.zeros((0,), x_axis=True)
    Px = to_x_axis(P)  # polynomial in w = exp(i x/2), powers -2K..2K
    # P / (2 sin(x/2)) = i w P / (w**2 - 1)
    num = np.zeros(4 * K + 2, complex)
    num[1:] = 1j * Px.coeffs
    q, rem = np.polydiv(num[::-1], np.array([1.0, 0.0, -1.0]))
    if np.abs(rem).max(initial=0.0) > 1e-10 * max(1.0, np.abs(num).max()):
        raise SeparatrixError("half-angle division left a remainder")
    q = q[::-1]  # coefficient of w**(j - 2K)
    return FourierTable(q[1:], True).real_projection()


def _fit(func, n=2048, x_axis=True, offset=0.0, rel=2e-15):
    """Fourier fit on the 4*pi (or 2*pi) circle, truncated where coefficients reach roundoff."""
    period = 4 * np.pi if x_axis else 2 * np.pi
    xs = (np.arange(n) + offset) * period / n
    c = np.fft.fftshift(np.fft.fft(func(xs))) / n
    k = np.arange(-(n // 2), n - n // 2)
    c = c * np.exp(-2j * np.pi * k * offset / n)  # undo the sampling offset
    top = np.abs(c).max(initial=0.0)
    big = np.nonzero(np.abs(c) > rel * max(top, 1e-300))[0]
    K = int(np.abs(k[big]).max()) if len(big) and top > 1e-300 else 0
    mid = n // 2
    kept = c[mid - K: mid + K + 1]
    return FourierTable(kept, x_axis).real_projection().prune(rel)


@dataclass(frozen=True)
class StripEstimate:
    halfwidth: float
    T: float
    rho: float
    sigma2: float
    rho4: tuple
    sigma4: tuple


@dataclass(frozen=True)
class SeparatrixMap:
    """Separatrix data of a normalized potential.  Instances are immutable."""

    profile: PotentialProfile
    psi: FourierTable  # x axis (4*pi)
    psi1: FourierTable  # x axis
    R: FourierTable  # x axis, integrand of the regular part of s(x)
    Rint: FourierTable  # x axis, Rint(pi) = 0
    V: FourierTable  # 2*pi-periodic trig polynomial, psi1 = sqrt(V)
    r_psi: float = math.inf
    T_psi: float = 1.0
    strip: StripEstimate | None = None
    W: FourierTable | None = None  # x axis, (1 - V) / (2 sin(x/2)), so R = W / (psi1 (1 + psi1))

    # -------------------------------------------------------------- scalars
    @property
    def lam(self) -> float:
        return self.profile.lam

    @property
    def U(self) -> FourierTable:
        return self.profile.U

    @property
    def rho(self) -> float:
        return self.strip.rho if self.strip else float("nan")

    @property
    def sigma2(self) -> float:
        return self.strip.sigma2 if self.strip else float("nan")

    @property
    def T(self) -> float:
        return self.strip.T if self.strip else 1.5 * self.T_psi

    def psi_dd0(self) -> float:
        return float(differentiate(differentiate(self.psi, 0), 0)(0.0).real)

    def time_table(self, samples: int = 257):
        """Monotone tabulation ``(x, s)`` on the open interval (0, 2*pi)."""
        x = np.linspace(0, 2 * np.pi, samples + 2)[1:-1]
        return x, time_map(self, x)

    # -------------------------------------------------------------- complex evaluation
    @property
    def flat(self) -> bool:
        """True when psi1 is identically one (the pendulum family)."""
        return self.R.cutoffs[0] == 0 and abs(self.R.coeffs[0]) == 0

    def psi1_at(self, x):
        x = np.asarray(x, dtype=complex)
        if self.flat:
            return np.ones_like(x)
        return np.sqrt(self.V(x))

    def psi_at(self, x):
        """Pointwise ``2 sin(x/2) sqrt(V(x))``; exact off the real axis unlike the truncated table."""
        x = np.asarray(x, dtype=complex)
        return 2 * np.sin(x / 2) * self.psi1_at(x)

    def R_at(self, x):
        x = np.asarray(x, dtype=complex)
        if self.flat:
            return np.zeros_like(x)
        p1 = self.psi1_at(x)
        return self.W(x) / (p1 * (1.0 + p1))

    def rint_at(self, x, panels: int = 24, order: int = 16):
        """``Rint`` at complex ``x``: real-axis table plus a vertical Gauss-Legendre integral."""
        x = np.asarray(x, dtype=complex)
        if self.flat:
            return np.zeros_like(x)
        base = self.Rint(x.real + 0j)
        if np.all(x.imag == 0):
            return base
        g, wts = np.polynomial.legendre.leggauss(order)
        a = x.real[..., None]
        h = x.imag[..., None]
        # panel nodes in [0, 1]
        u = ((np.arange(panels)[:, None] + 0.5 * (g[None, :] + 1)) / panels).ravel()
        wu = np.tile(wts / (2 * panels), panels)
        pts = a + 1j * h * u
        return base + np.sum(self.R_at(pts) * wu, axis=-1) * 1j * x.imag

    def chart_value(self, x, chart: str):
        """``exp(s(x))`` (unstable chart) or ``exp(-s(x))`` (stable chart) at complex ``x``."""
        x = np.asarray(x, dtype=complex)
        e = np.exp(self.rint_at(x))
        if chart == "unstable":
            return np.tan(x / 4) * e
        return 1.0 / (np.tan(x / 4) * e)

    def chart_x(self, targets, chart: str = "unstable", max_newton: int = 40):
        """Solve ``chart_value(x) = target`` by continuation from the torus along rays.

        Targets may lie on several rays through the origin; each ray is
        followed outward from ``x = 0`` (unstable) or ``x = 2*pi`` (stable).
        Returns complex ``x`` with the same shape as ``targets``.
        """
        t = np.asarray(targets, dtype=complex)
        flat = t.ravel()
        out = np.empty_like(flat)
        x_base = 0.0 if chart == "unstable" else 2 * np.pi
        sgn = 1.0 if chart == "unstable" else -1.0
        slope = 4 * np.exp(-sgn * self.Rint(x_base).real)  # x - x_base ~ sgn*slope*target
        ang = np.where(np.abs(flat) > 0, np.angle(flat), 0.0)
        keys = np.round(ang, 9)
        for key in np.unique(keys):
            idx = np.nonzero(keys == key)[0]
            order = idx[np.argsort(np.abs(flat[idx]))]
            z_prev, x_prev = 0j, complex(x_base)
            for i in order:
                zt = flat[i]
                if zt == 0:
                    out[i] = x_base
                    continue
                out[i] = x_prev = self._continue(z_prev, x_prev, zt, chart, sgn, slope, max_newton)
                z_prev = zt
        return out.reshape(t.shape)

    def _continue(self, z0, x0, z1, chart, sgn, slope, max_newton):
        if z0 == 0:
            z0 = z1 * min(1.0, 1e-3 / abs(z1))
            x0 = x0 + sgn * slope * z0
            x0 = self._newton(x0, z0, chart, sgn, max_newton)
            if x0 is None:
                raise SeparatrixError("level-curve stall near the torus")
        n = 1
        while True:
            lr = np.log(abs(z1) / abs(z0)) if abs(z0) > 0 else 0.0
            n = max(n, int(np.ceil(abs(lr) / 0.05)))
            x, ok = x0, True
            for j in range(1, n + 1):
                zj = z0 * np.exp(lr * j / n) if abs(z0) > 0 else z1 * j / n
                # predictor: dx = psi dz / z (unstable) or -psi dw / w (stable)
                zp = z0 * np.exp(lr * (j - 1) / n)
                x = x + sgn * self.psi_at(x) * np.log(zj / zp)
                x = self._newton(x, zj, chart, sgn, max_newton)
                if x is None:
                    ok = False
                    break
            if ok:
                return x
            if n > 4096:
                raise SeparatrixError("level-curve stall: continuation failed")
            n *= 4

    def _newton(self, x, z, chart, sgn, max_newton):
        for _ in range(max_newton):
            E = self.chart_value(x, chart)
            ps = self.psi_at(x)
            if not np.isfinite(E) or abs(ps) < 1e-14:
                return None
            dx = (E - z) * ps / (sgn * E)
            x = x - dx
            if abs(dx) <= 1e-15 * (1 + abs(x)):
                return complex(x)
        return complex(x) if abs(dx) < 1e-11 else None

    def chart_jacobian(self, z, x, chart: str):
        """``dz/dx = z/psi`` (unstable) or ``dw/dx = -w/psi`` (stable), with the torus limit."""
        z = np.asarray(z, dtype=complex)
        x = np.asarray(x, dtype=complex)
        ps = self.psi_at(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            J = np.where(z == 0, 0.0, z / np.where(ps == 0, 1.0, ps))
        if chart == "unstable":
            J0 = 0.25 * np.exp(self.Rint(0.0).real)
        else:
            J = -J
            J0 = -0.25 * np.exp(-self.Rint(2 * np.pi).real)
        return np.where(z == 0, J0, J)

    def psi_deriv_at(self, x):
        return differentiate(self.psi, 0)(np.asarray(x, dtype=complex))


def separatrix_function(prof: PotentialProfile, grid: int = 1024) -> SeparatrixMap:
    """Build ``psi``, ``psi1`` and the time-map tables (strip constants are not estimated)."""
    U1 = prof.U / prof.lam ** 2
    V = _divide_by_cos_minus_one(U1)
    xs = np.arange(grid) * 2 * np.pi / grid
    if V(xs).real.min() <= 0:
        raise SeparatrixError("square-root branch failure: U/(cos x - 1) is not positive")

    def psi1_fn(x):
        return np.sqrt(V(x).real)

    psi1 = _fit(psi1_fn)
    s2 = FourierTable.from_modes({(1,): -0.5j}, [1], x_axis=True)  # sin(x/2)
    psi = mul(s2 * 2.0, psi1, cutoffs=(psi1.cutoffs[0] + 1,))

    W = _half_angle_quotient(1.0 - V)

    def R_fn(x):
        p1 = psi1_fn(x)
        return W(x).real / (p1 * (1.0 + p1))

    R = _fit(R_fn, offset=0.5)
    K = R.cutoffs[0]
    if abs(R.coeffs[K]) > 1e-12:
        raise SeparatrixError("time-map integrand has a secular part")
    k = np.arange(-K, K + 1) / 2.0
    ci = np.zeros_like(R.coeffs)
    nz = k != 0
    ci[nz] = R.coeffs[nz] / (1j * k[nz])
    Rint = FourierTable(ci, True)
    Rint = (Rint - complex(Rint(np.pi))).real_projection()
    sep = SeparatrixMap(prof, psi.prune(), psi1, R, Rint, V, W=W)
    r_psi = _complex_zero_radius(V)
    T_psi = max(1.0, -2 * math.log(r_psi)) if math.isfinite(r_psi) else 1.0
    return replace(sep, r_psi=r_psi, T_psi=T_psi)


def _complex_zero_radius(V: FourierTable) -> float:
    """Half the distance from 0 to the nearest complex zero of ``V`` (where psi1 branches)."""
    c = V.coeffs
    if np.abs(c[1:-1]).max(initial=0.0) == 0 and len(c) <= 1 or np.count_nonzero(np.abs(c) > 0) <= 1:
        return math.inf
    roots = np.roots(c[::-1])  # z**K V(z), z = exp(i x)
    roots = roots[np.abs(roots) > 0]
    if not len(roots):
        return math.inf
    x = -1j * np.log(roots)
    re = np.mod(x.real + np.pi, 2 * np.pi) - np.pi  # nearest periodic image
    return 0.5 * float(np.min(np.abs(re + 1j * x.imag)))


# ------------------------------------------------------------------ real time map
def time_map(sep: SeparatrixMap, x):
    """``s(x) = int_pi^x dz/psi(z)`` on the open interval (0, 2*pi)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0) or np.any(xa >= 2 * np.pi):
        raise SeparatrixError("time_map: x must lie strictly inside (0, 2*pi)")
    return np.log(np.tan(xa / 4)) + sep.Rint(xa).real


def inverse_time_map(sep: SeparatrixMap, s):
    """Invert ``s(x)`` by Newton in ``t = log tan(x/4)``."""
    sa = np.asarray(s, dtype=float)
    t = sa.copy()
    for _ in range(60):
        x = 4 * np.arctan(np.exp(t))
        F = t + sep.Rint(x).real - sa
        dF = 1.0 + sep.R(x).real / np.cosh(t) * 2.0
        step = F / dF
        t = t - step
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(t))):
            break
    return 4 * np.arctan(np.exp(t))


def chi(sep: SeparatrixMap, s):
    """``chi(s) = psi(x(s))``."""
    sa = np.asarray(s, dtype=float)
    t = sa.copy()
    for _ in range(60):
        x = 4 * np.arctan(np.exp(t))
        F = t + sep.Rint(x).real - sa
        step = F / (1.0 + sep.R(x).real * 2.0 / np.cosh(t))
        t = t - step
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(t))):
            break
    # psi = 2 sin(x/2) psi1 with sin(x/2) = sech t; avoids cancellation near x = 2*pi
    return 2.0 / np.cosh(t) * sep.psi1(4 * np.arctan(np.exp(t))).real


# ------------------------------------------------------------------ strip estimate
def _branch_height(V: FourierTable) -> float:
    """Smallest ``|Im x|`` among the complex zeros of ``V`` (inf if there are none)."""
    c = V.coeffs
    if np.count_nonzero(np.abs(c) > 0) <= 1:
        return math.inf
    roots = np.roots(c[::-1])
    roots = roots[np.abs(roots) > 0]
    if not len(roots):
        return math.inf
    return float(np.min(np.abs(np.log(np.abs(roots)))))


def _march(sep: SeparatrixMap, zetas, segs, halfwidth, T, h=1e-2, t0=-6.0):
    """March level curves ``Im s = zeta`` from the torus to ``Re s = T``.

    Each curve is followed in its chart variable ``exp(+-s)``: an Euler
    predictor along ``dx/dt = +-psi(x)`` and Newton corrections back onto the
    curve.  The branch of ``sqrt(V)`` is continued along every curve, and
    ``Rint`` is accumulated by Gauss quadrature over each displacement.
    Returns per-curve admissibility and the running sup of ``|Im x|``.
    """
    zetas = np.asarray(zetas, float)
    sgn = np.array([1.0 if c == "unstable" else -1.0 for c, _ in segs])
    side = np.array([sg for _, sg in segs], float)
    alpha = sgn * side * zetas
    un = sgn > 0
    x_base = np.where(un, 0.0, 2 * np.pi).astype(complex)
    R0 = np.where(un, sep.Rint(0.0).real, sep.Rint(2 * np.pi).real)
    x = x_base + sgn * 4 * np.exp(-sgn * R0) * np.exp(t0 + 1j * alpha)
    alive = np.ones(len(zetas), bool)
    sup_im = np.abs(x.imag)
    # psi is analytic only in the strip free of zeros of V
    limit = min(2 * halfwidth, _branch_height(sep.V) * (1 - 1e-9))
    flat = sep.flat
    g4, w4 = np.polynomial.legendre.leggauss(4)

    def root(xx, ref):
        if flat:
            return np.ones_like(xx)
        r = np.sqrt(sep.V(xx))
        return np.where(np.abs(r - ref) <= np.abs(r + ref), r, -r)

    def seg_int(xa, dx, ref):
        # integral of R along [xa, xa + dx], branch continued from ``ref``
        if flat:
            return np.zeros_like(xa)
        pts = xa[:, None] + 0.5 * dx[:, None] * (g4[None, :] + 1)
        p1 = root(pts, ref[:, None])
        return 0.5 * dx * np.sum(sep.W(pts) / (p1 * (1.0 + p1)) * w4, axis=1)

    def cv(xx, ri):
        e = np.tan(xx / 4) * np.exp(ri)
        return np.where(un, e, 1.0 / e)

    ri = sep.rint_at(x)
    p1 = root(x, np.ones_like(x))
    ts = np.append(np.arange(t0, T, h), T)
    with np.errstate(all="ignore"):
        for k, tt in enumerate(ts):
            zt = np.exp(tt + 1j * alpha)
            if k:
                dx = np.where(alive, sgn * 2 * np.sin(x / 2) * p1 * (tt - ts[k - 1]), 0)
                ri = ri + seg_int(x, dx, p1)
                x = x + dx
                p1 = root(x, p1)
            for _ in range(3):
                E = cv(x, ri)
                ps = 2 * np.sin(x / 2) * p1
                dx = (E - zt) * ps / (sgn * E)
                bad = ~np.isfinite(dx) | (np.abs(ps) < 1e-12)
                alive &= ~bad
                dx = np.where(alive, -dx, 0)
                ri = ri + seg_int(x, dx, p1)
                x = x + dx
                p1 = root(x, p1)
            res = np.abs(cv(x, ri) - zt) / np.abs(zt)
            alive &= res < 1e-8
            sup_im = np.where(alive, np.maximum(sup_im, np.abs(x.imag)), sup_im)
            alive &= sup_im <= limit
            if not alive.any():
                break
    return alive, sup_im


SEGMENTS = (("unstable", 1.0), ("unstable", -1.0), ("stable", 1.0), ("stable", -1.0))


def estimate_strip(sep: SeparatrixMap, domain_halfwidth: float, T: float | None = None,
                   tol: float = 1e-4) -> StripEstimate:
    """Largest level-curve height per segment that stays inside ``|Im x| <= 2*halfwidth``.

    The four segments (unstable/stable side, upper/lower half plane) are
    searched simultaneously by repeated 16-section; admissibility is
    assumed monotone in the height.
    """
    if not domain_halfwidth > 0:
        raise SeparatrixError("domain half-width must be positive")
    T = 1.5 * sep.T_psi if T is None else float(T)
    nseg = len(SEGMENTS)
    lo = np.full(nseg, 1e-3)
    hi = np.full(nseg, RHO_CAP)
    ok0, _ = _march(sep, lo, SEGMENTS, domain_halfwidth, T)
    if not ok0.all():
        raise SeparatrixError("level-curve stall: nearly real level curves leave the domain")
    m = 16
    while np.max(hi - lo) > tol:
        cand = lo[:, None] + (hi - lo)[:, None] * np.arange(1, m + 1)[None, :] / m
        segs = [seg for seg in SEGMENTS for _ in range(m)]
        ok, _ = _march(sep, cand.ravel(), segs, domain_halfwidth, T)
        ok = ok.reshape(nseg, m)
        for q in range(nseg):
            if ok[q].all():
                lo[q] = hi[q] = cand[q, -1]
                continue
            fb = int(np.argmin(ok[q]))
            if fb > 0:
                lo[q] = cand[q, fb - 1]
            hi[q] = cand[q, fb]
    rho4 = np.minimum(lo, RHO_CAP)
    _, sup = _march(sep, rho4, SEGMENTS, domain_halfwidth, T)
    return StripEstimate(float(domain_halfwidth), T, float(rho4.min()), float(sup.min() / 2),
                         tuple(float(v) for v in rho4), tuple(float(v / 2) for v in sup))


def with_strip(sep: SeparatrixMap, domain_halfwidth: float, T: float | None = None) -> SeparatrixMap:
    return replace(sep, strip=estimate_strip(sep, domain_halfwidth, T))


def build_separatrix(U: FourierTable, domain_halfwidth: float | None = None) -> SeparatrixMap:
    """Convenience: analyze the potential, build psi and optionally estimate the strip."""
    sep = separatrix_function(analyze_potential(U))
    if domain_halfwidth is not None:
        sep = with_strip(sep, domain_halfwidth)
    return sep


def pendulum_potential(lam: float = 1.0) -> FourierTable:
    """``lam**2 (cos x - 1)``."""
    return FourierTable.from_modes({(0,): -lam ** 2, (1,): 0.5 * lam ** 2}, [1])


__all__ = [
    "PotentialProfile", "SeparatrixMap", "SeparatrixError", "StripEstimate",
    "analyze_potential", "separatrix_function", "time_map", "inverse_time_map", "chi",
    "estimate_strip", "with_strip", "build_separatrix", "pendulum_potential", "to_x_axis",
]
