import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from hjsplit.cylinder import Ray, bary_matrix, cheb_diff, cheb_nodes, trig_eval_matrix
from hjsplit.separatrix import (SeparatrixError, build_separatrix, chi, inverse_time_map, pendulum_potential,
                                time_map)
from hjsplit.series import FourierTable


@pytest.fixture(scope="module")
def pendulum():
    return build_separatrix(pendulum_potential(), 3.0)


def double_harmonic(a=0.2):
    # U = (cos x - 1) + a (cos 2x - 1): single maximum at x = 0 for small a
    return FourierTable.from_modes({(0,): -1 - a, (1,): 0.5, (2,): 0.5 * a}, (2,))


def test_chebyshev_derivative_exact_on_polynomials():
    t = cheb_nodes(12, -1.0, 2.0)
    D = cheb_diff(12, -1.0, 2.0)
    assert np.abs(D @ t**5 - 5 * t**4).max() < 1e-10


def test_barycentric_interpolation():
    r = cheb_nodes(40, 0.0, 3.0)
    tgt = np.linspace(0.01, 2.99, 33)
    assert np.abs(bary_matrix(r, tgt) @ np.exp(r) - np.exp(tgt)).max() < 1e-12


def test_trig_eval_matrix_against_direct_sum():
    K = 3
    pts = np.array([[0.3], [1.7]])
    E = trig_eval_matrix(K, 1, pts)
    vals = np.cos(2 * 2 * np.pi * np.arange(2 * K + 1) / (2 * K + 1))
    assert np.allclose(E @ vals, np.cos(2 * pts[:, 0]), atol=1e-13)


def test_ray_through_origin_needs_even_count():
    with pytest.raises(ValueError):
        Ray(5, -1.0, 1.0)
    assert Ray(6, -1.0, 1.0).origin_index == 3


def test_pendulum_time_map_closed_form(pendulum):
    x = np.linspace(0.1, 2 * np.pi - 0.1, 200)
    assert np.abs(np.real(time_map(pendulum, x)) - np.log(np.tan(x / 4))).max() < 1e-10


def test_pendulum_chi_is_twice_sech(pendulum):
    s = np.linspace(-6, 6, 121)
    assert np.abs(np.real(chi(pendulum, s)) - 2 / np.cosh(s)).max() < 1e-10


def test_inverse_time_map_round_trip(pendulum):
    x = np.linspace(0.2, 6.0, 25)
    assert np.abs(np.real(inverse_time_map(pendulum, time_map(pendulum, x))) - x).max() < 1e-11


def test_general_potential_against_quadrature():
    a = 0.2
    sep = build_separatrix(double_harmonic(a))
    # U''(0) = -1 - 4a
    assert sep.lam == pytest.approx(math.sqrt(1 + 4 * a), rel=1e-12)

    def inv_psi(x):
        U = (math.cos(x) - 1) + a * (math.cos(2 * x) - 1)
        return sep.lam / math.sqrt(-2 * U)

    for x in (0.4, 1.5, 4.0, 5.7):
        ref = quad(inv_psi, math.pi, x, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(np.real(time_map(sep, np.array([x]))[0]) - ref) < 1e-9


def test_strip_below_singularity_and_monotone():
    rhos = [build_separatrix(pendulum_potential(), w).strip.rho for w in (1.5, 2.0, 3.0)]
    assert all(r < math.pi / 2 for r in rhos)
    assert rhos[0] <= rhos[1] <= rhos[2]
    assert 1.35 <= rhos[2] < math.pi / 2


def test_time_map_is_fast(pendulum):
    t0 = time.perf_counter()
    time_map(pendulum, np.linspace(0.1, 6.1, 500))
    assert time.perf_counter() - t0 < 1.0


def test_two_maxima_rejected():
    U = FourierTable.from_modes({(0,): -1.0, (2,): 0.5}, (2,))
    with pytest.raises(SeparatrixError):
        build_separatrix(U)
