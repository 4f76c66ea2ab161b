"""From a resonant Hamiltonian to the normal form seen by the KAM engine.

Momenta are ordered ``(y, I_1..I_n)`` and base angles ``(x, phi_1..phi_n)``;
jets carry :class:`FourierTable` coefficients over those angles.  After
:func:`shift_separatrix` every table lives on the 4*pi x axis.

Chain of transformations::

    localize_and_scale -> average_out -> shift_separatrix -> eliminate_theta
                       -> to_energy_time / sputnik_branch
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .homological import Frequency, HomologicalError, solve_Domega
from .separatrix import SeparatrixMap, to_x_axis
from .series import (FourierTable, MomentumJet, SeriesError, StripParams, differentiate,
                     factor_chi, monomials, mul, shift_angles, split_at_infinity, weighted_norm)

CUTOFF_CAP = 64


class NormalFormError(ValueError):
    pass


# ---------------------------------------------------------------- lattice preliminaries
@dataclass(frozen=True)
class ResonanceFrame:
    k0: tuple
    basis: np.ndarray
    p0: tuple
    omega0: Frequency

    def __post_init__(self):
        B = np.asarray(self.basis)
        if math.gcd(*[abs(int(v)) for v in self.k0]) != 1:
            raise NormalFormError("k0 not minimal")
        if abs(round(np.linalg.det(B))) != 1:
            raise NormalFormError("basis is not unimodular")
        if tuple(int(v) for v in B[0]) != tuple(int(v) for v in self.k0):
            raise NormalFormError("first basis row must equal k0")


@dataclass(frozen=True)
class ModelParams:
    gamma0: float
    kappa0: float
    sigma0: float
    R0: float
    M0: float
    eps0: float
    lam: float
    theta: tuple
    Theta: np.ndarray

    def __post_init__(self):
        for name in ("gamma0", "kappa0", "sigma0", "R0", "M0", "eps0"):
            if not getattr(self, name) > 0:
                raise NormalFormError(f"{name} must be positive")
        if not self.kappa0 > 1:
            raise NormalFormError("kappa0 must exceed 1")
        Th = np.atleast_2d(np.asarray(self.Theta, float))
        if not np.allclose(Th, Th.T):
            raise NormalFormError("Theta must be symmetric")
        if np.linalg.eigvalsh(Th).min() < 1.0:
            raise NormalFormError("Theta must have smallest eigenvalue >= 1")


def complete_basis(k0) -> np.ndarray:
    """Unimodular integer matrix (det +1) with first row ``k0``.

    Built column-wise by extended gcd: if ``A`` is unimodular with
    ``A k0 = e_1`` then ``B = A^{-T}`` has first row ``k0``.  Remaining rows
    are reduced against ``k0`` so the result is canonical.
    """
    k0 = [int(v) for v in k0]
    m = len(k0)
    if not any(k0):
        raise NormalFormError("k0 must be nonzero")
    if math.gcd(*[abs(v) for v in k0]) != 1:
        raise NormalFormError("k0 not minimal")
    A = np.eye(m, dtype=object)
    v = list(k0)
    # reduce v to e_1 by unimodular row operations recorded in A
    for i in range(m - 1, 0, -1):
        a, b = v[i - 1], v[i]
        g, s, t = _egcd(a, b)
        if g == 0:
            continue
        # [[s, t], [-b/g, a/g]] has det 1 and maps (a, b) to (g, 0)
        M = np.array([[s, t], [-b // g, a // g]], dtype=object)
        A[[i - 1, i]] = M.dot(A[[i - 1, i]])
        v[i - 1], v[i] = g, 0
    if m == 1:
        return np.array([[k0[0]]])
    Ainv = _int_inverse(A)
    B = Ainv.T.copy()
    # reduce rows 1.. modulo k0 so the lead entry is in [0, |k0_p|)
    p = next(i for i, c in enumerate(k0) if c != 0)
    for r in range(1, m):
        q = B[r, p] // k0[p] if k0[p] > 0 else -(B[r, p] // -k0[p])
        B[r] = B[r] - q * np.array(k0, dtype=object)
    if round(float(np.linalg.det(B.astype(float)))) < 0:
        B[m - 1] = -B[m - 1]
    return B.astype(int)


def _egcd(a: int, b: int):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0) if a else (0, 1, 0)
    x0, x1, y0, y1 = 1, 0, 0, 1
    aa, bb = a, b
    while bb:
        q = aa // bb
        aa, bb = bb, aa - q * bb
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if aa < 0:
        aa, x0, y0 = -aa, -x0, -y0
    return aa, x0, y0


def _int_inverse(A) -> np.ndarray:
    inv = np.rint(np.linalg.inv(A.astype(float))).astype(int)
    if not np.array_equal(np.asarray(A.dot(inv.astype(object)), dtype=int), np.eye(len(A), dtype=int)):
        raise NormalFormError("integer inversion failed")
    return inv.astype(object)


def quotient_frequency(omega, basis) -> np.ndarray:
    """Frequencies of the rotator angles ``phi_j = <B_j, q>``, j >= 1."""
    return (np.asarray(basis, float) @ np.asarray(omega, float))[1:]


def diophantine_mod_check(omega, k0, tau: float, K: int) -> float:
    """Empirical ``gamma = min |<k, omega>| |k|^tau`` over the quotient lattice, ``0 < |k| <= K``."""
    om = np.asarray(omega, float)
    k0a = np.asarray(k0, float)
    if abs(k0a @ om) > 1e-12:
        raise NormalFormError("<k0, omega> must vanish")
    B = complete_basis(k0)
    w0 = quotient_frequency(om, B)
    n = len(w0)
    gamma = math.inf
    for m in itertools.product(range(-K, K + 1), repeat=n):
        am = sum(abs(v) for v in m)
        if am == 0 or am > K:
            continue
        val = abs(float(np.dot(m, w0)))
        if val < 1e-14:
            raise NormalFormError(f"higher-multiplicity resonance: quotient mode {m}")
        gamma = min(gamma, val * am ** tau)
    return gamma


def make_frame(k0, omega, p0=None, tau=None, K_max: int = 32) -> ResonanceFrame:
    B = complete_basis(k0)
    w0 = quotient_frequency(omega, B)
    try:
        freq = Frequency.build(w0, tau=tau, K_max=K_max)
    except HomologicalError as exc:
        raise NormalFormError(str(exc)) from None
    p0 = tuple(float(v) for v in (p0 if p0 is not None else np.zeros(len(B))))
    return ResonanceFrame(tuple(int(v) for v in k0), B, p0, freq)


# ---------------------------------------------------------------- table helpers
def lift(u: FourierTable, dims: int) -> FourierTable:
    """Append trailing singleton angle axes."""
    if u.dims > dims:
        raise NormalFormError("cannot lift to fewer dimensions")
    c = u.coeffs.reshape(u.coeffs.shape + (1,) * (dims - u.dims))
    return FourierTable(c, u.x_axis)


def const_table(value: float, dims: int, x_axis: bool = False) -> FourierTable:
    return FourierTable.constant(value, (0,) * dims, x_axis)


def _prod(a: FourierTable, b: FourierTable) -> FourierTable:
    cut = tuple(min(x + y, CUTOFF_CAP) for x, y in zip(a.cutoffs, b.cutoffs))
    return mul(a, b, cutoffs=cut)


def jet_to_x_axis(H: MomentumJet) -> MomentumJet:
    return H.map(to_x_axis)


def change_angles(u: FourierTable, M: np.ndarray) -> FourierTable:
    """Coefficients of ``u(M^{-1} q')`` for an integer unimodular ``M`` (new index ``M^{-T} k``)."""
    Minv_T = np.rint(np.linalg.inv(np.asarray(M, float)).T).astype(int)
    entries = {}
    for k, c in u.items():
        kn = tuple(int(v) for v in Minv_T @ np.array(k))
        entries[kn] = entries.get(kn, 0) + c
    cut = [max([abs(k[d]) for k in entries] + [0]) for d in range(u.dims)]
    return FourierTable.from_modes(entries, cut, u.x_axis, symmetrize=False)


def _transform_momenta(H: MomentumJet, L: np.ndarray, product: Callable = _prod) -> MomentumJet:
    """Jet of ``P' -> H(L P')`` for a constant matrix ``L`` (linear change of momenta)."""
    n = H.nvars
    terms: dict = {}
    for m, c in H.terms.items():
        factors = []
        for i, e in enumerate(m):
            factors += [i] * e
        if not factors:
            terms[m] = terms[m] + c if m in terms else c
            continue
        for choice in itertools.product(range(n), repeat=len(factors)):
            w = 1.0
            for f, j in zip(factors, choice):
                w *= L[f, j]
            if w == 0:
                continue
            mm = [0] * n
            for j in choice:
                mm[j] += 1
            mm = tuple(mm)
            terms[mm] = terms[mm] + c * w if mm in terms else c * w
    return MomentumJet(n, terms, H.remainder_bound)


# ---------------------------------------------------------------- localization and scaling
def localize_and_scale(H0_data: dict, H1: FourierTable, frame: ResonanceFrame, eps: float,
                       R0: float | None = None, eps0: float | None = None) -> MomentumJet:
    """Scaled resonant Hamiltonian ``<omega1, I> + 1/2 <Q1 P, P> + H1`` in the frame angles.

    ``H0_data`` holds ``omega`` (frequency at ``p0``, length n+1), ``Q0``
    (Hessian) and optionally ``cubic_bound`` (sup of the third-order Taylor
    remainder coefficient).  ``R0`` defaults to the ``y``-``y`` entry of the
    rotated Hessian so that ``Q1`` starts with 1.
    """
    if not eps > 0:
        raise NormalFormError("eps must be positive (the scaled frequency is infinite at eps = 0)")
    if eps0 is not None and eps > eps0:
        raise NormalFormError(f"eps = {eps:g} exceeds eps0 = {eps0:g}")
    B = np.asarray(frame.basis, float)
    Q0 = np.atleast_2d(np.asarray(H0_data["Q0"], float))
    if not np.allclose(Q0, Q0.T) or np.linalg.eigvalsh(Q0).min() <= 0:
        raise NormalFormError("Q0 must be symmetric positive definite")
    om = np.asarray(H0_data["omega"], float)
    om_new = B @ om
    if abs(om_new[0]) > 1e-12 * max(1.0, np.abs(om).max()):
        raise NormalFormError("omega is not resonant along k0")
    Qn = B @ Q0 @ B.T
    R0 = float(Qn[0, 0]) if R0 is None else float(R0)
    if not R0 > 0:
        raise NormalFormError("R0 must be positive")
    Q1 = Qn / R0
    omega1 = om_new[1:] / math.sqrt(eps * R0)
    dims = len(B)
    if H1.dims != dims:
        raise NormalFormError("perturbation must depend on all n+1 angles")
    pert = change_angles(H1, B).real_projection()
    terms = {(0,) * dims: pert}
    for j, w in enumerate(omega1):
        m = [0] * dims
        m[j + 1] = 1
        terms[tuple(m)] = const_table(w, dims)
    for m in monomials(dims, 2):
        if sum(m) != 2:
            continue
        idx = [i for i, e in enumerate(m) for _ in range(e)]
        coef = Q1[idx[0], idx[1]] * (0.5 if idx[0] == idx[1] else 1.0)
        if coef != 0:
            terms[m] = const_table(coef, dims)
    cubic = float(H0_data.get("cubic_bound", 0.0))
    rem = cubic * math.sqrt(eps) / R0 ** 1.5
    return MomentumJet(dims, terms, rem)


def quadratic_form(H: MomentumJet) -> np.ndarray:
    """Mean values of the degree-2 coefficients as a symmetric matrix."""
    n = H.nvars
    Q = np.zeros((n, n))
    for m, c in H.terms.items():
        if sum(m) != 2:
            continue
        idx = [i for i, e in enumerate(m) for _ in range(e)]
        v = float(np.real(c.coeffs[tuple(s // 2 for s in c.coeffs.shape)]))
        if idx[0] == idx[1]:
            Q[idx[0], idx[0]] = 2 * v
        else:
            Q[idx[0], idx[1]] = Q[idx[1], idx[0]] = v
    return Q


def linear_frequency(H: MomentumJet) -> np.ndarray:
    n = H.nvars
    out = np.zeros(n - 1)
    for j in range(1, n):
        m = [0] * n
        m[j] = 1
        c = H.get(m)
        if c is not None:
            out[j - 1] = float(np.real(c.coeffs[tuple(s // 2 for s in c.coeffs.shape)]))
    return out


# ---------------------------------------------------------------- averaging
@dataclass
class AveragingReport:
    U: FourierTable
    S_nu: FourierTable
    dS_norm: float
    f_norm: float
    g_norm: float


def average_out(H: MomentumJet, omega1: Frequency, delta0: float, p: StripParams | None = None):
    """Remove the angle dependence of the momentum-independent term.

    Solves ``D_omega1 S = -{H_0}`` for every x-mode and shifts the momenta by
    the exact one-form ``dS`` (a type-2 generating function depending only
    on the angles, so no angle change is involved).  Returns
    ``(H_nu, S_nu, report)``.
    """
    dims = H.nvars
    H = jet_to_x_axis(H)
    zero = (0,) * dims
    h0 = H.get(zero)
    if h0 is None:
        h0 = const_table(0.0, dims, True)
    cent = h0.cutoffs[1:]
    Ux = h0.coeffs[(slice(None),) + tuple(cent)]
    U = FourierTable(Ux, h0.x_axis)
    osc_c = h0.coeffs.copy()
    osc_c[(slice(None),) + tuple(cent)] = 0
    osc = FourierTable(osc_c, h0.x_axis)
    try:
        S = solve_Domega(-osc, omega1)
    except HomologicalError:
        raise
    p = p or StripParams(1.0, 1.0, 1.0, 0.5)
    dS = [differentiate(S, d) for d in range(dims)]
    dS_norm = max(weighted_norm(t, p) for t in dS)
    if dS_norm >= delta0:
        raise NormalFormError(f"normal form out of range: |dS_nu| = {dS_norm:.3e} >= delta0 = {delta0:g}")
    Hn = H.shift(dS, _prod)
    Hn = Hn.map(lambda t: t.real_projection().prune())
    # the mean part collapses exactly: <omega1, dS_phi> + {H_0} = 0
    terms = dict(Hn.terms)
    new0 = terms[zero]
    f = new0 - lift(U, dims) if new0.x_axis == U.x_axis else new0
    g = [Hn.get(tuple(int(i == j) for i in range(dims))) for j in range(dims)]
    f_norm = weighted_norm(f, p)
    g_norm = max(weighted_norm(gj - _mean_const(gj), p) for gj in g if gj is not None)
    rep = AveragingReport(U, S, dS_norm, f_norm, g_norm)
    return MomentumJet(dims, terms, Hn.remainder_bound), S, rep


def _mean_const(t: FourierTable) -> FourierTable:
    return FourierTable.constant(t.coeffs[tuple(s // 2 for s in t.coeffs.shape)], (0,) * t.dims, t.x_axis)


def averaging_residual(H: MomentumJet, S_nu: FourierTable, omega1) -> float:
    """``max |D_omega1 S + {H_0}|`` over the coefficients."""
    dims = H.nvars
    h0 = to_x_axis(H.get((0,) * dims))
    cent = h0.cutoffs[1:]
    osc_c = h0.coeffs.copy()
    osc_c[(slice(None),) + tuple(cent)] = 0
    lhs = sum(w * differentiate(S_nu, j + 1) for j, w in enumerate(np.atleast_1d(omega1)))
    return float(np.abs((lhs + FourierTable(osc_c, h0.x_axis)).coeffs).max())


def translate_x(H: MomentumJet, x0: float, energy_offset: float = 0.0) -> MomentumJet:
    """Move ``x = x0`` to the origin and subtract a constant energy."""
    dims = H.nvars

    def sh(t):
        return shift_angles(t, [x0] + [0.0] * (t.dims - 1))

    out = H.map(sh)
    if energy_offset:
        terms = dict(out.terms)
        terms[(0,) * dims] = terms[(0,) * dims] - energy_offset
        out = MomentumJet(dims, terms, out.remainder_bound)
    return out


# ---------------------------------------------------------------- separatrix shift and theta
def _psi_table(sep: SeparatrixMap, dims: int) -> FourierTable:
    return lift(sep.psi, dims)


def shift_separatrix(H_nu: MomentumJet, sep: SeparatrixMap) -> MomentumJet:
    """``y -> y + lam psi(x)``; the momentum-free term of the truncation cancels exactly."""
    dims = H_nu.nvars
    H = jet_to_x_axis(H_nu)
    a = [_psi_table(sep, dims) * sep.lam] + [const_table(0.0, dims, True)] * (dims - 1)
    out = H.shift(a, _prod)
    return out.map(lambda t: t.real_projection().prune(1e-15))


def eliminate_theta(H_psi: MomentumJet, theta) -> MomentumJet:
    """Remove the cross terms ``y I_j`` by ``phi = phi' + theta x``, ``y = y' - <theta, I>``.

    The angle change maps the mode ``(k_x, k)`` to ``(k_x + 2<k, theta>, k)``
    on the 4*pi axis, so ``2<k, theta>`` must be an integer for every stored
    mode (the branch shift rule then permutes sheets by ``4 pi theta``).
    """
    th = np.atleast_1d(np.asarray(theta, float))
    dims = H_psi.nvars
    if th.size != dims - 1:
        raise NormalFormError("theta length must equal the number of rotators")
    if not np.any(th):
        return H_psi
    L = np.eye(dims)
    L[0, 1:] = -th
    H1 = _transform_momenta(H_psi, L)
    return H1.map(lambda t: _shear(t, th))


def _shear(u: FourierTable, th: np.ndarray) -> FourierTable:
    if not u.x_axis:
        u = to_x_axis(u)
    entries = {}
    for k, c in u.items():
        shift = 2 * float(np.dot(k[1:], th))
        if abs(shift - round(shift)) > 1e-9:
            raise NormalFormError("2<k, theta> must be an integer for every stored mode")
        kn = (k[0] + int(round(shift)),) + tuple(k[1:])
        entries[kn] = entries.get(kn, 0) + c
    cut = [max([abs(k[d]) for k in entries] + [0]) for d in range(u.dims)]
    return FourierTable.from_modes(entries, cut, True, symmetrize=False)


def theta_branch(H_theta: MomentumJet, j: int, theta) -> MomentumJet:
    """Coefficients on the ``j``-th sheet: angles shifted by ``2 pi j theta``."""
    th = np.atleast_1d(np.asarray(theta, float))
    return H_theta.map(lambda t: shift_angles(t, [0.0] + list(2 * np.pi * j * th)))


# ---------------------------------------------------------------- energy-time form
@dataclass
class EnergyTimeHamiltonian:
    """``lam h + <omega, I> + (quadratic in (h/chi, I)) + f + g_h h + <G, I>`` over the bi-cylinder.

    ``jet`` keeps the tables of the x-representation with the transport
    term removed; its monomials are in ``(h/chi, I)``.  The ``h``-linear
    perturbation is stored in the class ``g0/chi + g1``.
    """

    jet: MomentumJet
    lam: float
    g0: FourierTable
    g1: FourierTable
    sep: SeparatrixMap

    def evaluate(self, h, I, s, phi):
        """Values at energy times ``s`` (complex allowed); ``I`` and ``phi`` are (P, n)."""
        h = np.asarray(h, dtype=complex)
        s = np.asarray(s, dtype=complex)
        I = np.atleast_2d(I)
        phi = np.atleast_2d(phi)
        x = self.sep.chart_x(np.exp(s))
        chi = self.sep.psi_at(x)
        eta = h / chi
        p = [eta] + [I[:, j] for j in range(I.shape[1])]
        return self.lam * h + self.jet.evaluate(p, lambda t: t(x, *phi.T))


def to_energy_time(H_theta: MomentumJet, sep: SeparatrixMap) -> EnergyTimeHamiltonian:
    dims = H_theta.nvars
    ey = tuple(int(i == 0) for i in range(dims))
    gy = H_theta.get(ey)
    terms = dict(H_theta.terms)
    if gy is None:
        gy = const_table(0.0, dims, True)
    gy = gy - _psi_table(sep, dims) * sep.lam
    gy = gy.real_projection().prune(1e-15)
    g0, rest = split_at_infinity(gy)
    try:
        # the part vanishing on the torus must also vanish at x = 2*pi
        g1 = factor_chi(rest, sep, 1, tol=1e-8)
    except SeriesError as exc:
        raise NormalFormError(f"not in B^(-,1): {exc}") from None
    terms[ey] = gy
    return EnergyTimeHamiltonian(MomentumJet(dims, terms, H_theta.remainder_bound), sep.lam, g0, g1, sep)


def sputnik_branch(H: MomentumJet, beta: int, theta, lam: float, sep: SeparatrixMap) -> MomentumJet:
    """``G(y, I, x, phi) = H(y + 2 lam psi(x), I, x - 2 pi beta, phi + 2 pi beta theta)``.

    The map sends the torus at ``x = 2 pi beta`` to the origin.  For a
    Hamiltonian of the separatrix-shifted shape the result has the same
    shape (the sign flip of ``lam h`` only appears in energy-time variables).
    """
    if beta not in (1, -1):
        raise NormalFormError("beta must be +1 or -1")
    dims = H.nvars
    th = np.zeros(dims - 1) if theta is None else np.atleast_1d(np.asarray(theta, float))
    Hx = jet_to_x_axis(H)
    shifted = Hx.map(lambda t: shift_angles(t, [-2 * np.pi * beta] + list(2 * np.pi * beta * th)))
    # the momentum shift is evaluated at the new x: psi(x) in the new variables
    a = [_psi_table(sep, dims) * (2 * lam)] + [const_table(0.0, dims, True)] * (dims - 1)
    return shifted.shift(a, _prod).map(lambda t: t.real_projection().prune(1e-15))


def evaluate_jet(H: MomentumJet, p, angles):
    """Pointwise value of a jet with table coefficients at momenta ``p`` and angles."""
    return H.evaluate(p, lambda t: t(*angles))


__all__ = [
    "NormalFormError", "ResonanceFrame", "ModelParams", "complete_basis", "diophantine_mod_check",
    "make_frame", "localize_and_scale", "average_out", "averaging_residual", "shift_separatrix",
    "eliminate_theta", "theta_branch", "to_energy_time", "sputnik_branch", "EnergyTimeHamiltonian",
    "translate_x", "quadratic_form", "linear_frequency", "evaluate_jet", "lift", "const_table",
    "change_angles", "quotient_frequency",
]
