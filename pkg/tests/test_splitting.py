import math

import numpy as np
import pytest

from hjsplit.series import FourierTable
from hjsplit.splitting import LineGrid, SplittingError, critical_points, flowbox_coefficients, melnikov_oracle

MU = 1e-6


def arnold_first_mode(omega):
    # first-order coefficient of mu (cos x - 1) cos phi along x = 4 arctan e^s
    return MU * math.pi * omega / math.sinh(math.pi * omega / 2)


def test_melnikov_oracle_closed_form(arnold_model):
    m = arnold_model
    H1 = FourierTable.from_modes({(0, 1): -0.5 * MU, (1, 1): 0.25 * MU, (1, -1): 0.25 * MU}, (1, 1))
    M = melnikov_oracle(H1, m.sep, m.freq)
    w = m.freq.omega[0]
    assert abs(M[(1,)] - arnold_first_mode(w)) / arnold_first_mode(w) < 1e-9


def test_coefficients_match_closed_form(arnold_split):
    model, _, rep, _ = arnold_split
    ref = arnold_first_mode(model.freq.omega[0])
    for beta in ("+", "-"):
        F1 = rep.coeffs[beta][(1,)]
        assert abs(F1 - ref) / ref < 10 * MU


def test_exactness_and_energy(arnold_split):
    _, _, rep, _ = arnold_split
    assert rep.xi_mismatch < 1e-6
    assert rep.c0_mismatch < 1e-10


def test_transport_and_flowbox_quality(arnold_split):
    _, _, rep, _ = arnold_split
    for beta in ("+", "-"):
        assert rep.transport_residual[beta] < 1e-7
        assert rep.constancy[beta] < 1e-8


def test_per_mode_bound(arnold_split):
    _, _, rep, _ = arnold_split
    for beta, fit in rep.decay_fit.items():
        assert fit.coeffs and all(rep.bound_ok[beta].values())
        assert min(fit.slack.values()) >= -1e-9


def test_homoclinic_points(arnold_split):
    _, _, rep, _ = arnold_split
    for pts in rep.critical_points.values():
        assert len(pts) >= 2
    assert rep.n_critical >= 4


def test_critical_points_of_cosine():
    pts = critical_points({(1,): 0.5, (-1,): 0.5}, 1)
    phis = sorted(float(p[0]) % (2 * np.pi) for p, _ in pts)
    assert phis[0] == pytest.approx(0.0, abs=1e-9) or phis[0] == pytest.approx(2 * np.pi, abs=1e-9)
    assert any(abs(p - np.pi) < 1e-9 for p in phis)
    assert len(pts) == 2


def test_critical_points_two_angles():
    # cos a + cos b has four critical points on the torus
    co = {(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.5, (0, -1): 0.5}
    assert len(critical_points(co, 2)) == 4
    with pytest.raises(SplittingError):
        critical_points({}, 1)


def test_flowbox_coefficients_recover_plane_wave():
    g = LineGrid(2.0, 64, 4, 1)
    lam, om, zeta = 1.0, [3.0], 0.4
    F = 1e-3 + 2e-3j
    s = g.t[:, None] + 1j * zeta
    phi = g.phi[0][None, :]
    # S' = F exp(i(phi - om s / lam)) + conjugate on the complex line
    S = F * np.exp(1j * (phi - om[0] * s / lam)) + np.conj(F) * np.exp(-1j * (phi - om[0] * s / lam))
    Fk, _, dev, kap = flowbox_coefficients(S, g, lam, om, zeta)
    ks = g.ks[0]
    j = int(np.nonzero(ks == 1)[0][0])
    assert abs(Fk[j] - F) < 1e-14
    assert dev[j] < 1e-14
