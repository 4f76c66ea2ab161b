import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjsplit.series import (FourierTable, MomentumJet, SeriesError, StripParams, differentiate, mul,
                            shift_angles, split_at_infinity, weighted_norm)


def random_table(rng, cut, x_axis=False):
    modes = {}
    for idx in np.ndindex(*[2 * k + 1 for k in cut]):
        k = tuple(int(i) - c for i, c in zip(idx, cut))
        modes[k] = complex(rng.normal(), rng.normal()) * 0.5 ** sum(abs(v) for v in k)
    return FourierTable.from_modes(modes, cut, x_axis, symmetrize=False).real_projection()


def test_single_mode_values():
    u = FourierTable.from_modes({(1,): 0.5}, (1,))
    x = np.linspace(0, 6, 7)
    assert np.allclose(u(x), np.cos(x), atol=1e-15)


def test_dict_round_trip_keeps_coefficients():
    rng = np.random.default_rng(1)
    u = random_table(rng, (2, 3))
    back = FourierTable.from_dict(json.loads(u.to_json()))
    assert np.abs(back.coeffs - u.coeffs).max() < 1e-15


def test_dict_rejects_implied_half_and_unknown_fields():
    with pytest.raises(SeriesError, match="lexicographically positive"):
        FourierTable.from_dict({"dims": 1, "cutoffs": [1], "entries": [[-1, 0.5, 0]]})
    with pytest.raises(SeriesError, match="unknown"):
        FourierTable.from_dict({"dims": 1, "cutoffs": [1], "entries": [], "bogus": 1})


def test_product_matches_pointwise_values():
    rng = np.random.default_rng(2)
    a, b = random_table(rng, (3, 2)), random_table(rng, (2, 4))
    c = mul(a, b, cutoffs=(5, 6))
    pts = rng.uniform(0, 2 * np.pi, (2, 40))
    assert np.abs(c(*pts) - a(*pts) * b(*pts)).max() < 1e-13


def test_derivative_against_difference_quotient():
    rng = np.random.default_rng(3)
    u = random_table(rng, (4,), x_axis=True)
    x = rng.uniform(0, 4 * np.pi, 20)
    h = 1e-5
    fd = (u(x + h) - u(x - h)) / (2 * h)
    assert np.abs(differentiate(u, 0)(x) - fd).max() < 1e-8


def test_angle_shift():
    rng = np.random.default_rng(4)
    u = random_table(rng, (2, 2))
    c = np.array([0.3, -1.1])
    pts = rng.uniform(0, 6, (2, 10))
    assert np.abs(shift_angles(u, c)(*pts) - u(pts[0] + c[0], pts[1] + c[1])).max() < 1e-14


def test_split_at_infinity_is_value_at_torus():
    rng = np.random.default_rng(5)
    u = random_table(rng, (3, 2), x_axis=True)
    u0, u1 = split_at_infinity(u)
    phi = rng.uniform(0, 6, 9)
    assert np.abs(u0(phi) - u(np.zeros(9), phi)).max() < 1e-14
    assert np.abs(u1(np.zeros(9), phi)).max() < 1e-14


def test_weighted_norm_dominates_complex_values():
    rng = np.random.default_rng(6)
    u = random_table(rng, (3,))
    p = StripParams(1.0, 1.0, 1.0, 0.4)
    x = rng.uniform(0, 6, 50) + 1j * rng.uniform(-0.4, 0.4, 50)
    assert np.abs(u(x)).max() <= weighted_norm(u, p) + 1e-12


def test_strip_params_validation():
    with pytest.raises(SeriesError):
        StripParams(1.0, 1.0, 2.0, 0.1)
    p = StripParams(1.0, 1.0, 1.0, 0.5).shrink(0.1)
    assert p.rho == pytest.approx(0.9) and p.sigma == pytest.approx(0.4)


def test_jet_shift_matches_direct_evaluation():
    rng = np.random.default_rng(7)
    tabs = {m: random_table(rng, (2,)) for m in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}
    H = MomentumJet(2, tabs)
    a = [random_table(rng, (1,)), random_table(rng, (1,))]
    # full convolution: the default product truncates to the larger cutoff
    Hs = H.shift(a, lambda u, v: mul(u, v, cutoffs=tuple(x + y for x, y in zip(u.cutoffs, v.cutoffs))))
    q = rng.uniform(0, 6, 12)
    p = rng.normal(size=(2, 12))

    def ev(jet, pp):
        return jet.evaluate(pp, lambda c: c(q))

    direct = ev(H, [p[0] + a[0](q), p[1] + a[1](q)])
    assert np.abs(ev(Hs, p) - direct).max() < 1e-12


def test_jet_degree_limit_and_round_trip():
    with pytest.raises(SeriesError):
        MomentumJet(1, {(3,): FourierTable.constant(1.0, (0,))})
    H = MomentumJet(2, {(0, 0): FourierTable.constant(-1.0, (1, 1)), (2, 0): FourierTable.constant(0.5, (0, 0))})
    back = MomentumJet.from_dict(json.loads(json.dumps(H.to_dict())))
    assert set(back.terms) == set(H.terms)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4))
def test_product_is_commutative_and_real(seed, k1, k2):
    rng = np.random.default_rng(seed)
    a, b = random_table(rng, (k1, 2)), random_table(rng, (k2, 1))
    ab, ba = mul(a, b), mul(b, a)
    assert np.abs(ab.coeffs - ba.coeffs).max() < 1e-13
    assert ab.is_real(1e-12)
