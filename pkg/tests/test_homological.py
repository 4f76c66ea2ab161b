import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from hjsplit.homological import (Frequency, HomologicalError, solve_cauchy, solve_Domega, solve_shifted,
                                 solve_transport, solve_transport_minus, solve_transport_vec)
from hjsplit.separatrix import build_separatrix, pendulum_potential
from hjsplit.series import FourierTable, differentiate

GOLD = (math.sqrt(5) - 1) / 2


@pytest.fixture(scope="module")
def sep():
    return build_separatrix(pendulum_potential())


def rand_table(rng, cut, x_axis=False, zero_mean=False):
    modes = {}
    for idx in np.ndindex(*[2 * k + 1 for k in cut]):
        k = tuple(int(i) - c for i, c in zip(idx, cut))
        modes[k] = complex(rng.normal(), rng.normal()) * 0.6 ** sum(abs(v) for v in k)
    t = FourierTable.from_modes(modes, cut, x_axis, symmetrize=False).real_projection()
    if zero_mean:
        t = t - complex(t.coeffs[tuple(s // 2 for s in t.coeffs.shape)])
    return t


def D_omega(u, freq, shift=0.0):
    out = u * shift
    for j, w in enumerate(freq.omega):
        out = out + differentiate(u, j) * w
    return out


def test_domega_single_mode():
    freq = Frequency.build([1.0], K_max=4)
    v = FourierTable.from_modes({(1,): 0.5}, (1,))
    u = solve_Domega(v, freq)
    x = np.linspace(0, 6, 13)
    assert np.abs(u(x) - np.sin(x)).max() < 1e-15


def test_domega_mean_obstruction():
    freq = Frequency.build([1.0], K_max=4)
    with pytest.raises(HomologicalError, match="mean obstruction"):
        solve_Domega(FourierTable.constant(1.0, (1,)), freq)


def test_domega_small_divisor_underflow():
    f = Frequency.build([1.0, GOLD], K_max=4)
    strict = Frequency(f.omega, f.tau, 10.0, f.gamma, f.K_max)
    v = FourierTable.from_modes({(3, -5): 0.5}, (3, 5))
    with pytest.raises(HomologicalError, match="small divisor"):
        solve_Domega(v, strict)


def test_resonant_frequency_rejected():
    with pytest.raises(HomologicalError, match="higher-multiplicity resonance"):
        Frequency.build([1.0, 2.0], K_max=4)


def test_domega_random_residual():
    rng = np.random.default_rng(11)
    freq = Frequency.build([1.0, GOLD], K_max=8)
    v = rand_table(rng, (6, 6), zero_mean=True)
    u = solve_Domega(v, freq)
    assert np.abs((D_omega(u, freq) - v).coeffs).max() < 1e-11


def test_shifted_examples():
    f1 = Frequency.build([1.0], K_max=4)
    u = solve_shifted(FourierTable.constant(1.0, (0,)), 2.0, f1)
    assert complex(u.coeffs[0]) == pytest.approx(-0.5)
    f3 = Frequency.build([3.0], K_max=4)
    v = FourierTable.from_modes({(1,): 1.0}, (1,), symmetrize=False)
    assert solve_shifted(v, 1.0, f3).coeff((1,)) == pytest.approx(1 / (-1 + 3j))
    with pytest.raises(HomologicalError):
        solve_shifted(v, 0.0, f3)


def test_shifted_random_residual():
    rng = np.random.default_rng(12)
    freq = Frequency.build([1.0, GOLD], K_max=8)
    v = rand_table(rng, (5, 5))
    u = solve_shifted(v, 0.7, freq)
    assert np.abs((D_omega(u, freq, -0.7) - v).coeffs).max() < 1e-12


def test_transport_of_chi_is_x(sep):
    # v = psi(x) independent of phi: lam u_s = chi(s) gives u = x(s)
    freq = Frequency.build([GOLD], K_max=4)
    psi = sep.psi
    v = FourierTable(np.stack([psi.coeffs], axis=1), True)
    sol, c = solve_transport(v, 1.0, freq, sep)
    assert c == pytest.approx(0.0, abs=1e-14)
    s = np.linspace(-3.0, 0.5, 15)
    got = np.real(sol.evaluate(s, np.zeros((15, 1))))
    assert np.abs(got - 4 * np.arctan(np.exp(s))).max() < 1e-9


def test_transport_trivial_cases(sep):
    freq = Frequency.build([2.0], K_max=4)
    v = FourierTable.from_modes({(0, 1): 0.5}, (0, 1))
    sol, c = solve_transport(v, 1.0, freq, sep)
    phi = np.linspace(0, 6, 7)[:, None]
    assert c == pytest.approx(0.0, abs=1e-15)
    assert np.abs(sol.evaluate(np.zeros(7), phi) - np.sin(phi[:, 0]) / 2).max() < 1e-12
    sol, c = solve_transport(FourierTable.constant(0.3, (0, 0)), 1.0, freq, sep)
    assert c == pytest.approx(0.3)
    assert np.abs(sol.evaluate(np.linspace(-2, 2, 7), phi)).max() < 1e-13


def test_transport_minus_constant(sep):
    freq = Frequency.build([GOLD], K_max=4)
    v0 = FourierTable.constant(1.0, (0,))
    ms = solve_transport_minus(v0, FourierTable.zeros((0, 0)), 1.0, freq, sep)
    assert ms.c == pytest.approx(0.0, abs=1e-14)
    assert ms.residual() < 1e-8


def test_transport_vec(sep):
    freq = Frequency.build([GOLD], K_max=4)
    z = FourierTable.zeros((1, 1))
    sols, c = solve_transport_vec([z, z], 1.0, freq, sep)
    assert np.all(c == 0)
    with pytest.raises(HomologicalError, match="residual mean"):
        solve_transport_vec([z, FourierTable.constant(1.0, (1, 1))], 1.0, freq, sep)
    v0 = FourierTable.constant(1.0, (0,))
    sols, c = solve_transport_vec([(v0, FourierTable.zeros((0, 0))), z], 1.0, freq, sep)
    assert c[1] == 0.0


def test_transport_linearity(sep):
    rng = np.random.default_rng(13)
    freq = Frequency.build([GOLD], K_max=4)
    a, b = rand_table(rng, (2, 2), True), rand_table(rng, (2, 2), True)
    sa, _ = solve_transport(a, 1.0, freq, sep)
    sb, _ = solve_transport(b, 1.0, freq, sep)
    sab, _ = solve_transport(a * 2.0 + b * (-0.5), 1.0, freq, sep)
    s = np.linspace(-2, 0.9 * sep.T, 9)
    phi = rng.uniform(0, 6, (9, 1))
    lhs = sab.evaluate(s, phi)
    rhs = 2 * sa.evaluate(s, phi) - 0.5 * sb.evaluate(s, phi)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_cauchy_examples():
    out = solve_cauchy({(1,): lambda t: 0 * t}, 1.0, [2.0], 1.0, [0.3, -0.5])
    assert np.all(out[(1,)] == 0)
    out = solve_cauchy({(0,): lambda t: 0 * t + 0.7}, 2.0, [2.0], 1.0, [0.3, -0.5])
    assert np.allclose(out[(0,)], [0.7 * 0.3 / 2, -0.7 * 0.5 / 2], atol=1e-14)
    with pytest.raises(HomologicalError):
        solve_cauchy({}, 0.0, [1.0], 1.0, [0.0])


def test_cauchy_single_mode_against_adaptive_quadrature():
    rho, kap, lam = 1.0, 2.0, 1.0
    s = 0.4 + 0.2j
    got = solve_cauchy({(1,): lambda t: np.ones_like(t)}, lam, [kap], rho, [s])[(1,)][0]

    def seg(a, b):
        def f(u, part):
            t = a + (b - a) * u
            val = cmath.exp(1j * kap * (t - s) / lam) * (b - a)
            return val.real if part == 0 else val.imag
        return complex(quad(f, 0, 1, args=(0,), epsabs=1e-14)[0], quad(f, 0, 1, args=(1,), epsabs=1e-14)[0])

    corner = 1j * s.imag
    ref = (seg(1j * rho, corner) + seg(corner, s)) / lam
    assert abs(got - ref) < 1e-10
    closed = (1 - cmath.exp(1j * kap * (1j * rho - s))) / (1j * kap)
    assert abs(got - closed) < 1e-10


def test_cauchy_deterministic():
    modes = {(1,): lambda t: np.exp(-t * t), (0,): lambda t: 1 / (t * t + 4)}
    a = solve_cauchy(modes, 1.0, [3.3], 0.8, np.linspace(-1, 1, 5))
    b = solve_cauchy(modes, 1.0, [3.3], 0.8, np.linspace(-1, 1, 5))
    assert all(np.array_equal(a[k], b[k]) for k in a)
