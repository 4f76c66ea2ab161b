"""Chebyshev collocation along rays times uniform angle grids.

Functions on the bi-cylinder are not periodic in the energy-time variable,
so they are stored on a chart: ``z = exp(s)`` near the unstable torus or
``w = exp(-s)`` near the stable one.  A ray ``z = r e^{i alpha}``, ``r`` in
``[r0, r1]``, is discretized by Chebyshev-Lobatto nodes; the rotator angles
use ``M = 2K + 1`` uniform points each.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft


@lru_cache(maxsize=64)
def _cheb_unit(N: int):
    """Nodes (ascending) on [-1, 1] and the differentiation matrix."""
    if N == 0:
        return np.array([0.0]), np.zeros((1, 1))
    j = np.arange(N + 1)
    x = -np.cos(np.pi * j / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    x.setflags(write=False)
    D.setflags(write=False)
    return x, D


def cheb_nodes(N: int, a: float, b: float) -> np.ndarray:
    x, _ = _cheb_unit(N)
    out = 0.5 * (a + b) + 0.5 * (b - a) * x
    if N % 2 == 0:
        out[N // 2] = 0.5 * (a + b)  # exact midpoint (used as the torus node)
    return out


def cheb_diff(N: int, a: float, b: float) -> np.ndarray:
    _, D = _cheb_unit(N)
    return D * (2.0 / (b - a))


def bary_weights(N: int) -> np.ndarray:
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def bary_matrix(nodes: np.ndarray, targets) -> np.ndarray:
    """Interpolation matrix from Chebyshev-Lobatto ``nodes`` to (complex) ``targets``."""
    nodes = np.asarray(nodes)
    t = np.atleast_1d(np.asarray(targets, dtype=complex)).ravel()
    w = bary_weights(len(nodes) - 1)
    diff = t[:, None] - nodes[None, :]
    exact = np.abs(diff) < 1e-300
    diff[exact] = 1.0
    K = w[None, :] / diff
    K /= K.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for r in rows:
        K[r] = 0.0
        K[r, np.argmax(exact[r])] = 1.0
    return K


def angle_grid(K: int, n: int):
    """Uniform grid of ``2K+1`` points per rotator, returned as broadcastable arrays."""
    M = 2 * K + 1
    g = np.arange(M) * 2 * np.pi / M
    return np.meshgrid(*([g] * n), indexing="ij") if n else []


def angle_wavenumbers(K: int, n: int):
    M = 2 * K + 1
    k = np.fft.fftfreq(M, 1.0 / M)
    return np.meshgrid(*([k] * n), indexing="ij")


def dphi(values: np.ndarray, K: int, n: int, axis_offset: int = 1):
    """Spectral derivatives in each rotator angle; angles occupy the trailing ``n`` axes."""
    axes = tuple(range(axis_offset, axis_offset + n))
    hat = sfft.fftn(values, axes=axes)
    ks = angle_wavenumbers(K, n)
    out = []
    for kk in ks:
        shape = (1,) * axis_offset + kk.shape
        out.append(sfft.ifftn(hat * (1j * kk).reshape(shape), axes=axes))
    return out


def trig_eval_matrix(K: int, n: int, points: np.ndarray) -> np.ndarray:
    """Matrix mapping grid values (flattened) to trig-interpolant values at ``points`` (P x n)."""
    M = 2 * K + 1
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    k1 = np.fft.fftfreq(M, 1.0 / M)
    E = np.ones((pts.shape[0], 1), complex)
    G = np.ones((1, 1), complex)
    for d in range(n):
        # values -> coefficients is fft/M; coefficient -> point is exp(i k p)
        E = (E[:, :, None] * np.exp(1j * np.outer(pts[:, d], k1))[:, None, :]).reshape(pts.shape[0], -1)
        F = np.exp(-2j * np.pi * np.outer(k1, np.arange(M)) / M) / M
        G = np.kron(G, F)
    return E @ G


@dataclass
class Ray:
    """Chebyshev discretization of ``z = r e^{i alpha}`` for ``r`` in ``[r0, r1]``."""

    N: int
    r0: float
    r1: float
    alpha: float = 0.0
    r: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.r = cheb_nodes(self.N, self.r0, self.r1)
        self.D = cheb_diff(self.N, self.r0, self.r1)
        if self.r0 < 0 < self.r1 and self.N % 2:
            raise ValueError("a segment through the origin needs an even node count")

    @property
    def z(self):
        return self.r * np.exp(1j * self.alpha)

    @property
    def origin_index(self) -> int:
        i = int(np.argmin(np.abs(self.r)))
        if abs(self.r[i]) > 0:
            raise ValueError("ray does not contain the origin")
        return i

    def d_dz(self, values):
        """``d/dz`` along the ray of nodal values (first axis)."""
        return np.exp(-1j * self.alpha) * np.tensordot(self.D, values, axes=(1, 0))

    def euler(self, values):
        """``z d/dz = r d/dr``."""
        return self.r.reshape((-1,) + (1,) * (np.ndim(values) - 1)) * np.tensordot(self.D, values, axes=(1, 0))

    def interp(self, values, r_targets):
        B = bary_matrix(self.r, r_targets)
        return np.tensordot(B, values, axes=(1, 0))


@dataclass
class CylinderField:
    """Nodal values ``u(r_i, phi_m)`` on a ray times the angle grid."""

    ray: Ray
    K: int
    n: int
    values: np.ndarray
    chart: str = "unstable"

    def angles(self):
        return angle_grid(self.K, self.n)

    def modes(self):
        """Fourier coefficients in the angles (fft ordering) for each node."""
        axes = tuple(range(1, 1 + self.n))
        return sfft.fftn(self.values, axes=axes) / (2 * self.K + 1) ** self.n

    def s_values(self):
        """Energy-time coordinate of each node (complex)."""
        z = self.ray.z
        with np.errstate(divide="ignore"):
            lz = np.log(z.astype(complex))
        return lz if self.chart == "unstable" else -lz

    def evaluate(self, r, phi):
        """Interpolate at radii ``r`` (P,) and angles ``phi`` (P, n)."""
        r = np.atleast_1d(r)
        phi = np.atleast_2d(phi)
        B = bary_matrix(self.ray.r, r)  # P x N
        flat = self.values.reshape(self.values.shape[0], -1)
        along = B @ flat  # P x M^n
        E = trig_eval_matrix(self.K, self.n, phi)  # P x M^n
        return np.sum(along * E, axis=1)
