"""Truncated Fourier tables, momentum jets and strip parameters.

A :class:`FourierTable` stores the coefficients of a real trigonometric
polynomial in a dense, centred array.  When ``x_axis`` is set, the first
axis is the base angle ``x`` of period 4*pi, so index ``k`` on that axis
stands for ``exp(i k x / 2)``; the remaining axes are rotator angles of
period 2*pi.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.fft as sfft

PRUNE_REL = 1e-16
DEFAULT_CUTOFF = 32


class SeriesError(ValueError):
    """Raised for malformed or incompatible series data."""


def _centre(shape):
    return tuple((s - 1) // 2 for s in shape)


class FourierTable:
    """Dense truncated Fourier series with the reality constraint."""

    __slots__ = ("coeffs", "x_axis")

    def __init__(self, coeffs, x_axis: bool = False):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1)
        if any(s % 2 == 0 for s in c.shape):
            raise SeriesError("coefficient array must have odd extent on every axis")
        c.setflags(write=False)
        self.coeffs = c
        self.x_axis = bool(x_axis)

    # ------------------------------------------------------------ builders
    @classmethod
    def zeros(cls, cutoffs, x_axis=False):
        shape = tuple(2 * int(k) + 1 for k in cutoffs)
        return cls(np.zeros(shape, complex), x_axis)

    @classmethod
    def constant(cls, value, cutoffs, x_axis=False):
        t = np.zeros(tuple(2 * int(k) + 1 for k in cutoffs), complex)
        t[_centre(t.shape)] = value
        return cls(t, x_axis)

    @classmethod
    def from_modes(cls, modes: Mapping, cutoffs, x_axis=False, symmetrize=True):
        """Build from ``{k: c}``; with ``symmetrize`` the conjugate modes are filled in."""
        t = np.zeros(tuple(2 * int(k) + 1 for k in cutoffs), complex)
        ctr = np.array(_centre(t.shape))
        for k, c in modes.items():
            k = np.atleast_1d(np.asarray(k, int))
            if np.any(np.abs(k) > ctr):
                raise SeriesError(f"mode {tuple(k)} outside cutoff box {tuple(cutoffs)}")
            t[tuple(k + ctr)] += c
            if symmetrize and np.any(k != 0):
                t[tuple(-k + ctr)] += np.conj(c)
            elif symmetrize:
                t[tuple(ctr)] = t[tuple(ctr)].real
        return cls(t, x_axis)

    @classmethod
    def from_grid(cls, values, cutoffs, x_axis=False):
        """Analyze samples on the uniform grid returned by :meth:`grid_points`."""
        v = np.asarray(values, complex)
        if any(2 * k + 1 > s for k, s in zip(cutoffs, v.shape)):
            raise SeriesError("grid too coarse for the requested cutoffs")
        c = sfft.fftshift(sfft.fftn(v), axes=range(v.ndim)) / v.size
        sl = tuple(slice(s // 2 - k, s // 2 + k + 1) for s, k in zip(v.shape, cutoffs))
        return cls(c[sl], x_axis)

    @classmethod
    def from_function(cls, func: Callable, cutoffs, x_axis=False, oversample=2):
        """Sample ``func(*angles)`` on a grid and keep the modes inside ``cutoffs``."""
        sizes = [2 * oversample * int(k) + 1 for k in cutoffs]
        pts = grid_points(sizes, x_axis)
        mesh = np.meshgrid(*pts, indexing="ij")
        return cls.from_grid(func(*mesh), cutoffs, x_axis).prune()

    # ------------------------------------------------------------ basics
    @property
    def dims(self):
        return self.coeffs.ndim

    @property
    def cutoffs(self):
        return tuple((s - 1) // 2 for s in self.coeffs.shape)

    def _scales(self):
        return [0.5 if (self.x_axis and d == 0) else 1.0 for d in range(self.dims)]

    def wavenumbers(self, dim):
        k = self.cutoffs[dim]
        return np.arange(-k, k + 1)

    def coeff(self, k):
        k = np.atleast_1d(np.asarray(k, int))
        ctr = np.array(self.cutoffs)
        if np.any(np.abs(k) > ctr):
            return 0j
        return complex(self.coeffs[tuple(k + ctr)])

    def items(self, tol=0.0):
        """Yield ``(k, c)`` for stored modes with ``|c| > tol`` in lexicographic order."""
        ctr = np.array(self.cutoffs)
        for idx in zip(*np.nonzero(np.abs(self.coeffs) > tol)):
            yield tuple(int(i) for i in np.array(idx) - ctr), complex(self.coeffs[idx])

    def copy_with(self, coeffs):
        return FourierTable(coeffs, self.x_axis)

    def resize(self, cutoffs):
        """Pad with zeros or truncate to new cutoffs."""
        cutoffs = tuple(int(k) for k in cutoffs)
        out = np.zeros(tuple(2 * k + 1 for k in cutoffs), complex)
        src, dst = [], []
        for kold, knew in zip(self.cutoffs, cutoffs):
            m = min(kold, knew)
            src.append(slice(kold - m, kold + m + 1))
            dst.append(slice(knew - m, knew + m + 1))
        out[tuple(dst)] = self.coeffs[tuple(src)]
        return FourierTable(out, self.x_axis)

    def prune(self, rel=PRUNE_REL):
        a = np.abs(self.coeffs)
        top = a.max() if a.size else 0.0
        if top == 0.0:
            return self
        c = self.coeffs.copy()
        c[a < rel * top] = 0.0
        return FourierTable(c, self.x_axis)

    def is_real(self, tol=1e-12):
        c = self.coeffs
        flipped = np.conj(c[(slice(None, None, -1),) * c.ndim])
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        return bool(np.abs(c - flipped).max(initial=0.0) <= tol * scale)

    def real_projection(self):
        c = self.coeffs
        flipped = np.conj(c[(slice(None, None, -1),) * c.ndim])
        return FourierTable(0.5 * (c + flipped), self.x_axis)

    # ------------------------------------------------------------ arithmetic
    def _check(self, other):
        if self.dims != other.dims:
            raise SeriesError(f"dimension mismatch: {self.dims} vs {other.dims}")
        if self.x_axis != other.x_axis:
            raise SeriesError("x-axis convention mismatch")

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coeffs.copy()
            c[_centre(c.shape)] += other
            return FourierTable(c, self.x_axis)
        self._check(other)
        cut = tuple(max(a, b) for a, b in zip(self.cutoffs, other.cutoffs))
        return FourierTable(self.resize(cut).coeffs + other.resize(cut).coeffs, self.x_axis)

    __radd__ = __add__

    def __neg__(self):
        return FourierTable(-self.coeffs, self.x_axis)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return FourierTable(self.coeffs * other, self.x_axis)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FourierTable(self.coeffs / scalar, self.x_axis)

    # ------------------------------------------------------------ evaluation
    def grid_points(self, sizes=None):
        sizes = sizes or [2 * k + 1 for k in self.cutoffs]
        return grid_points(sizes, self.x_axis)

    def synthesize(self, sizes=None):
        """Values on the uniform grid of the given sizes (default 2K+1)."""
        sizes = list(sizes or [2 * k + 1 for k in self.cutoffs])
        if any(s < 2 * k + 1 for s, k in zip(sizes, self.cutoffs)):
            raise SeriesError("synthesis grid would alias stored modes")
        big = np.zeros(sizes, complex)
        sl = tuple(slice(s // 2 - k, s // 2 + k + 1) for s, k in zip(sizes, self.cutoffs))
        big[sl] = self.coeffs
        return sfft.ifftn(sfft.ifftshift(big), norm="forward")

    def __call__(self, *angles):
        """Evaluate at (possibly complex) angles; arguments broadcast together."""
        if len(angles) != self.dims:
            raise SeriesError(f"expected {self.dims} angle arrays")
        arrs = np.broadcast_arrays(*[np.asarray(a, dtype=complex) for a in angles])
        shape = arrs[0].shape
        flat = [a.ravel() for a in arrs]
        acc = self.coeffs
        # contract the last axis first so the remaining ones keep their order
        out = None
        for d in reversed(range(self.dims)):
            k = self.wavenumbers(d) * self._scales()[d]
            e = np.exp(1j * np.outer(flat[d], k))  # (P, 2K+1)
            if out is None:
                out = np.tensordot(acc, e, axes=([d], [1]))  # (..., P)
            else:
                # out has shape (K0..Kd, P); contract axis d with point-wise factor
                out = np.einsum("...kp,pk->...p", out, e)
        return out.reshape(shape)

    def on_grid(self, *axes):
        """Values on the tensor product of 1-D point sets, one per angle (separable sums)."""
        if len(axes) != self.dims:
            raise SeriesError(f"expected {self.dims} point arrays")
        out = self.coeffs
        for d, pts in enumerate(axes):
            k = self.wavenumbers(d) * self._scales()[d]
            e = np.exp(1j * np.outer(np.asarray(pts, dtype=complex).ravel(), k))
            out = np.moveaxis(np.tensordot(e, out, axes=([1], [d])), 0, d)
        return out

    # ------------------------------------------------------------ serialization
    def to_dict(self):
        entries = []
        for k, c in self.items():
            if _lex_positive(k) or all(v == 0 for v in k):
                entries.append(list(k) + [float(c.real), float(c.imag)])
        return {"dims": self.dims, "cutoffs": list(self.cutoffs), "x_axis": self.x_axis,
                "entries": entries}

    @classmethod
    def from_dict(cls, d):
        allowed = {"dims", "cutoffs", "entries", "x_axis"}
        extra = set(d) - allowed
        if extra:
            raise SeriesError(f"unknown FourierTable fields: {sorted(extra)}")
        dims = int(d["dims"])
        cut = [int(k) for k in d["cutoffs"]]
        if len(cut) != dims:
            raise SeriesError("cutoffs length does not match dims")
        modes = {}
        for e in d["entries"]:
            if len(e) != dims + 2:
                raise SeriesError(f"entry {e} must hold {dims} indices plus re, im")
            k = tuple(int(v) for v in e[:dims])
            if any(k) and not _lex_positive(k):
                raise SeriesError(f"entry {k}: only lexicographically positive modes are stored "
                                  "(conjugates are implied)")
            modes[k] = modes.get(k, 0) + complex(e[dims], e[dims + 1])
        return cls.from_modes(modes, cut, bool(d.get("x_axis", False)))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"FourierTable(dims={self.dims}, cutoffs={self.cutoffs}, x_axis={self.x_axis})"


def _lex_positive(k):
    for v in k:
        if v != 0:
            return v > 0
    return False


def grid_points(sizes, x_axis=False):
    """Uniform grids; the x axis (if any) spans [0, 4*pi)."""
    out = []
    for d, s in enumerate(sizes):
        period = 4 * np.pi if (x_axis and d == 0) else 2 * np.pi
        out.append(np.arange(s) * period / s)
    return out


# ---------------------------------------------------------------- operations
def add(a: FourierTable, b: FourierTable) -> FourierTable:
    return a + b


def mul(a: FourierTable, b: FourierTable, cutoffs=None) -> FourierTable:
    """Product through a grid large enough for the full convolution, then truncated."""
    a._check(b)
    cut = cutoffs or tuple(max(x, y) for x, y in zip(a.cutoffs, b.cutoffs))
    sizes = [2 * (x + y) + 1 for x, y in zip(a.cutoffs, b.cutoffs)]
    prod = a.synthesize(sizes) * b.synthesize(sizes)
    full = FourierTable.from_grid(prod, [x + y for x, y in zip(a.cutoffs, b.cutoffs)], a.x_axis)
    return full.resize(cut).prune()


def power(a: FourierTable, j: int) -> FourierTable:
    out = FourierTable.constant(1.0, a.cutoffs, a.x_axis)
    for _ in range(j):
        out = mul(out, a)
    return out


def differentiate(u: FourierTable, dim: int) -> FourierTable:
    shape = [1] * u.dims
    shape[dim] = -1
    k = u.wavenumbers(dim) * u._scales()[dim]
    return u.copy_with(u.coeffs * (1j * k).reshape(shape))


def average(u: FourierTable) -> complex:
    return complex(u.coeffs[_centre(u.coeffs.shape)])


def shift_angles(u: FourierTable, c) -> FourierTable:
    """Return ``v(q) = u(q + c)``."""
    c = np.atleast_1d(np.asarray(c, float))
    if c.size != u.dims:
        raise SeriesError("shift vector length must equal dims")
    phase = np.zeros(u.coeffs.shape)
    for d in range(u.dims):
        shape = [1] * u.dims
        shape[d] = -1
        phase = phase + (u.wavenumbers(d) * u._scales()[d] * c[d]).reshape(shape)
    return u.copy_with(u.coeffs * np.exp(1j * phase))


def split_at_infinity(u: FourierTable):
    """Return ``(u0, u1)`` with ``u0(phi) = u(0, phi)`` and ``u1 = u - u0``."""
    if not u.x_axis:
        raise SeriesError("split_at_infinity needs a table with an x axis")
    c0 = u.coeffs.sum(axis=0)
    if u.dims == 1:
        u0 = FourierTable(np.array([c0]), False)
    else:
        u0 = FourierTable(c0, False)
    emb = np.zeros_like(u.coeffs)
    emb[u.cutoffs[0]] = c0
    u1 = u.copy_with(u.coeffs - emb)
    return u0, u1


def embed_phi(u0: FourierTable, kx: int = 0) -> FourierTable:
    """View a table over phi as an x-independent table with an x axis."""
    if u0.x_axis:
        raise SeriesError("already has an x axis")
    if u0.dims == 1 and u0.coeffs.shape == (1,):
        return FourierTable(np.full((2 * kx + 1,), 0j), True) + complex(u0.coeffs[0])
    c = np.zeros((2 * kx + 1,) + u0.coeffs.shape, complex)
    c[kx] = u0.coeffs
    return FourierTable(c, True)


def average_at_infinity(u: FourierTable) -> complex:
    u0, _ = split_at_infinity(u)
    return average(u0)


def weighted_norm(u: FourierTable, p: "StripParams", width_x=None) -> float:
    """Weighted l1 majorant of the supremum over the complex strip."""
    wx = p.sigma if width_x is None else width_x
    w = np.zeros(u.coeffs.shape)
    for d in range(u.dims):
        shape = [1] * u.dims
        shape[d] = -1
        width = wx if (u.x_axis and d == 0) else p.sigma
        w = w + (np.abs(u.wavenumbers(d)) * width).reshape(shape)
    return float(np.sum(np.abs(u.coeffs) * np.exp(w)))


def factor_chi(u: FourierTable, sep, j: int, tol=1e-10) -> FourierTable:
    """Return ``v`` with ``u = psi**j * v``.

    ``u`` must vanish to order ``j`` where ``psi`` does (x = 0 and x = 2*pi);
    otherwise the quotient is unbounded and an ``order deficit`` error is raised.
    """
    if not u.x_axis:
        raise SeriesError("factor_chi needs an x axis")
    if j == 0:
        return u
    scale = max(float(np.abs(u.coeffs).sum()), 1e-300)
    for x0 in (0.0, 2 * np.pi):
        d = u
        for order in range(j):
            val = np.abs(split_at_infinity(shift_angles(d, [x0] + [0.0] * (u.dims - 1)))[0].coeffs).max()
            if val > 1e-9 * scale * (1 + order) ** 2:
                raise SeriesError(f"order deficit: derivative {order} nonzero at x={x0:g}")
            d = differentiate(d, 0)
    pj = power(sep.psi, j)
    kx = u.cutoffs[0]
    kp = pj.cutoffs[0]
    # convolution operator in x acting on v's x-modes, applied per phi-mode
    kv = kx
    rows = 2 * (kv + kp) + 1
    conv = np.zeros((rows, 2 * kv + 1), complex)
    for a in range(2 * kv + 1):
        for b in range(2 * kp + 1):
            conv[a + b, a] += pj.coeffs[b]
    target = u.resize((kv + kp,) + u.cutoffs[1:]).coeffs.reshape(rows, -1)
    sol, *_ = np.linalg.lstsq(conv, target, rcond=None)
    v = FourierTable(sol.reshape((2 * kv + 1,) + u.coeffs.shape[1:]), True)
    err = np.abs(mul(pj, v, cutoffs=(kv + kp,) + u.cutoffs[1:]).coeffs - target.reshape(
        (rows,) + u.coeffs.shape[1:])).max()
    if err > tol * scale:
        raise SeriesError(f"order deficit: quotient residual {err:.2e}")
    return v.prune()


# ---------------------------------------------------------------- strip params
@dataclass(frozen=True)
class StripParams:
    """Analyticity parameters (r, T, rho, sigma); ``T`` may be ``math.inf``."""

    r: float
    T: float
    rho: float
    sigma: float

    def __post_init__(self):
        for name in ("r", "T", "rho", "sigma"):
            v = getattr(self, name)
            if not (v > 0):
                raise SeriesError(f"StripParams.{name} must be positive, got {v}")
        if self.rho > np.pi / 2 + 1e-12:
            raise SeriesError("rho must lie in (0, pi/2]")

    def __le__(self, other):
        return (self.r <= other.r and self.T <= other.T and self.rho <= other.rho
                and self.sigma <= other.sigma)

    def shrink(self, delta: float, factor=(1.0, 0.0, 1.0, 1.0)) -> "StripParams":
        """Componentwise loss ``delta * factor`` (T is kept unless its factor is nonzero)."""
        fr, ft, fp, fs = factor
        T = self.T if ft == 0 or math.isinf(self.T) else self.T - ft * delta
        return StripParams(self.r - fr * delta * self.r, T, self.rho - fp * delta,
                           self.sigma - fs * delta)


# ---------------------------------------------------------------- momentum jets
def monomials(nvars: int, degree: int = 2):
    """All exponent tuples of total degree <= degree, ordered by degree then lexicographically."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


class MomentumJet:
    """Polynomial of degree <= 2 in the momenta with function-valued coefficients.

    Coefficients may be :class:`FourierTable` objects or numpy arrays of grid
    values; they only need ``+``, ``*`` by scalars and products among themselves.
    The monomial ``p**m`` is the plain product of powers (no factorials).
    """

    def __init__(self, nvars: int, terms: Mapping, remainder_bound: float = 0.0):
        self.nvars = int(nvars)
        t = {}
        for m, c in terms.items():
            m = tuple(int(v) for v in m)
            if len(m) != self.nvars:
                raise SeriesError(f"exponent {m} has wrong length")
            if sum(m) > 2 or min(m) < 0:
                raise SeriesError(f"exponent {m} outside degree-2 jets")
            t[m] = c
        if not (np.isfinite(remainder_bound) and remainder_bound >= 0):
            raise SeriesError("remainder_bound must be finite and non-negative")
        self.terms = t
        self.remainder_bound = float(remainder_bound)

    @property
    def degree(self):
        return max((sum(m) for m in self.terms), default=0)

    def get(self, m, default=None):
        return self.terms.get(tuple(m), default)

    def map(self, fn) -> "MomentumJet":
        return MomentumJet(self.nvars, {m: fn(c) for m, c in self.terms.items()}, self.remainder_bound)

    def check_reality(self, tol=1e-12):
        return all(c.is_real(tol) for c in self.terms.values() if isinstance(c, FourierTable))

    def __add__(self, other):
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms[m] + c if m in terms else c
        return MomentumJet(self.nvars, terms, self.remainder_bound + other.remainder_bound)

    def evaluate(self, p, coeff_values: Callable):
        """Evaluate with momenta ``p`` (sequence of arrays) and coefficient values from ``coeff_values(c)``."""
        out = 0
        for m, c in self.terms.items():
            mono = 1
            for pi, e in zip(p, m):
                if e:
                    mono = mono * pi ** e
            out = out + coeff_values(c) * mono
        return out

    def gradient(self):
        """Jets of the partial derivatives in each momentum."""
        grads = []
        for i in range(self.nvars):
            terms = {}
            for m, c in self.terms.items():
                if m[i] == 0:
                    continue
                mm = list(m)
                mm[i] -= 1
                mm = tuple(mm)
                add_c = c * m[i]
                terms[mm] = terms[mm] + add_c if mm in terms else add_c
            grads.append(MomentumJet(self.nvars, terms))
        return grads

    def shift(self, a: Iterable, product: Callable = None) -> "MomentumJet":
        """Return the jet of ``p -> H(p + a)`` where ``a`` holds one coefficient per momentum.

        ``product`` multiplies two coefficients (defaults to ``*``).
        """
        prod = product or (lambda u, v: u * v)
        a = list(a)
        terms: dict = {}

        def acc(m, c):
            terms[m] = terms[m] + c if m in terms else c

        for m, c in self.terms.items():
            # expand prod_i (p_i + a_i)^{m_i}; degree <= 2 keeps this short
            factors = []
            for i, e in enumerate(m):
                factors += [i] * e
            for choice in itertools.product((0, 1), repeat=len(factors)):
                mm = [0] * self.nvars
                coef = c
                for f, pick in zip(factors, choice):
                    if pick:
                        mm[f] += 1
                    else:
                        coef = prod(coef, a[f])
                acc(tuple(mm), coef)
        return MomentumJet(self.nvars, terms, self.remainder_bound)

    def to_dict(self):
        terms = []
        for m in sorted(self.terms):
            c = self.terms[m]
            if not isinstance(c, FourierTable):
                raise SeriesError("only FourierTable coefficients serialize")
            terms.append({"exponent": list(m), "table": c.to_dict()})
        return {"nvars": self.nvars, "remainder_bound": self.remainder_bound, "terms": terms}

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {"nvars", "remainder_bound", "terms"}
        if extra:
            raise SeriesError(f"unknown MomentumJet fields: {sorted(extra)}")
        terms = {}
        for t in d["terms"]:
            bad = set(t) - {"exponent", "table"}
            if bad:
                raise SeriesError(f"unknown term fields: {sorted(bad)}")
            terms[tuple(t["exponent"])] = FourierTable.from_dict(t["table"])
        return cls(int(d["nvars"]), terms, float(d.get("remainder_bound", 0.0)))
