import itertools
import math

import numpy as np
import pytest

from hjsplit.homological import Frequency
from hjsplit.normalform import (NormalFormError, average_out, averaging_residual, change_angles, complete_basis,
                                eliminate_theta, localize_and_scale, make_frame, quadratic_form, shift_separatrix)
from hjsplit.separatrix import build_separatrix
from hjsplit.series import FourierTable, MomentumJet

GOLD = (1 + math.sqrt(5)) / 2


@pytest.mark.parametrize("k0", [(1, 0), (2, 3), (-3, 5), (1, -1, 0), (2, 3, 5), (0, 4, 7)])
def test_complete_basis_is_unimodular_with_first_row(k0):
    B = complete_basis(k0)
    assert tuple(B[0]) == k0
    assert round(np.linalg.det(B)) == 1


def test_complete_basis_rejects_non_minimal():
    with pytest.raises(NormalFormError, match="minimal"):
        complete_basis((2, 4))


def test_change_angles_values():
    rng = np.random.default_rng(3)
    u = FourierTable.from_modes({(1, 0): 0.3 + 0.1j, (1, 2): -0.2, (0, 1): 0.5j}, (1, 2))
    M = np.array([[2, 1], [1, 1]])
    v = change_angles(u, M)
    q = rng.uniform(0, 6, (2, 11))
    back = np.linalg.solve(M, q)
    assert np.abs(v(*q) - u(*back)).max() < 1e-13


def test_frame_rejects_second_resonance():
    with pytest.raises(NormalFormError, match="resonance"):
        make_frame((1, -1, 0), (1.0, 1.0, 1.0), K_max=4)
    f = make_frame((1, -1, 0), (1.0, 1.0, math.sqrt(2)), K_max=4)
    assert np.allclose(np.asarray(f.basis, float) @ (1.0, 1.0, math.sqrt(2)), [0] + list(f.omega0.omega))


def pendulum_rotor(mu=1e-3, eps=1e-2):
    frame = make_frame((1, 0), (0, GOLD))
    H1 = FourierTable.from_modes({(0, 0): -1.0, (1, 0): 0.5, (1, 1): 0.25 * mu, (1, -1): 0.25 * mu,
                                  (0, 1): -0.5 * mu}, (1, 1))
    H = localize_and_scale({"omega": (0, GOLD), "Q0": np.eye(2)}, H1, frame, eps)
    return frame, H


def test_localize_and_scale_frequencies_and_quadratic_form():
    eps = 1e-2
    _, H = pendulum_rotor(eps=eps)
    Q = quadratic_form(H)
    assert np.allclose(Q, np.eye(2))
    lin = H.get((0, 1))
    assert complex(lin.coeffs[tuple(s // 2 for s in lin.coeffs.shape)]).real == pytest.approx(GOLD / math.sqrt(eps))
    frame = make_frame((1, 0), (0, GOLD))
    with pytest.raises(NormalFormError, match="not resonant"):
        localize_and_scale({"omega": (0.1, GOLD), "Q0": np.eye(2)}, FourierTable.zeros((1, 1)), frame, eps)
    with pytest.raises(NormalFormError, match="eps"):
        localize_and_scale({"omega": (0, GOLD), "Q0": np.eye(2)}, FourierTable.zeros((1, 1)), frame, 0.0)


def test_average_out_is_a_momentum_shift():
    eps = 1e-2
    _, H = pendulum_rotor(eps=eps)
    freq = Frequency.build([GOLD / math.sqrt(eps)], tau=0, K_max=16)
    Hn, S, rep = average_out(H, freq, 0.1)
    assert averaging_residual(H, S, freq.omega) < 1e-14
    # H_nu(p, q) = H(p + dS(q), q) at random points
    rng = np.random.default_rng(5)
    x, phi = rng.uniform(0, 2 * np.pi, (2, 20))
    p = rng.normal(size=(2, 20))
    dSx = S.copy_with(S.coeffs * (0.5j * S.wavenumbers(0))[:, None])(x, phi)
    dSp = S.copy_with(S.coeffs * (1j * S.wavenumbers(1))[None, :])(x, phi)

    def ev(jet, pp):
        return jet.evaluate(pp, lambda c: c(x, phi))

    lhs = ev(Hn, p)
    rhs = ev(H, [p[0] + dSx, p[1] + dSp])
    assert np.abs(lhs - rhs).max() < 1e-12
    # remaining phi dependence of the momentum-free term is second order
    assert rep.f_norm < 10 * rep.dS_norm ** 2


def test_average_out_out_of_range():
    _, H = pendulum_rotor(mu=0.5, eps=1.0)
    freq = Frequency.build([GOLD], tau=0, K_max=8)
    with pytest.raises(NormalFormError, match="out of range"):
        average_out(H, freq, 1e-3)


def test_shift_separatrix_removes_potential():
    _, H = pendulum_rotor(mu=0.0)
    freq = Frequency.build([GOLD / 0.1], tau=0, K_max=8)
    Hn, _, rep = average_out(H, freq, 0.1)
    sep = build_separatrix(rep.U)
    Hp = shift_separatrix(Hn, sep)
    zero = Hp.get((0, 0))
    assert zero is None or np.abs(zero.coeffs).max() < 1e-13


def test_eliminate_theta_removes_cross_term():
    th = 0.5
    terms = {(0, 0): FourierTable.from_modes({(2, 0): 0.5, (0, 0): -1.0, (1, 1): 0.1}, (2, 1), True),
             (2, 0): FourierTable.constant(0.5, (0, 0), True),
             (1, 1): FourierTable.constant(th, (0, 0), True),
             (0, 2): FourierTable.constant(1.0, (0, 0), True)}
    H = MomentumJet(2, terms)
    Ht = eliminate_theta(H, [th])
    cross = Ht.get((1, 1))
    assert cross is None or np.abs(cross.coeffs).max() < 1e-15
    rng = np.random.default_rng(2)
    x, phi = rng.uniform(0, 4 * np.pi, (2, 15))
    y, I = rng.normal(size=(2, 15))

    def ev(jet, P, X, F):
        return jet.evaluate(P, lambda c: c(X, F))

    lhs = ev(Ht, [y, I], x, phi)
    rhs = ev(H, [y - th * I, I], x, phi + th * x)
    assert np.abs(lhs - rhs).max() < 1e-12
    with pytest.raises(NormalFormError, match="integer"):
        eliminate_theta(H, [0.3])


def test_frame_quotient_frequency_matches_lattice():
    k0 = (2, 3, 5)
    om = np.array([1.0, math.sqrt(2), 0.0])
    om[2] = -(k0[0] * om[0] + k0[1] * om[1]) / k0[2]
    f = make_frame(k0, om, K_max=6)
    B = np.asarray(f.basis, float)
    for m in itertools.product(range(-2, 3), repeat=2):
        k = np.array([0, *m]) @ B
        assert float(k @ om) == pytest.approx(float(np.dot(m, f.omega0.omega)), abs=1e-12)
