import numpy as np
import pytest

from hjsplit.cli import build_model
from hjsplit.kam import KamError, KamProblem, hj_residual, kam_iterate, symplectic_check
from tests.conftest import load_config


@pytest.fixture(scope="module")
def unstable_run(arnold_model):
    m = arnold_model
    pr = KamProblem(m.H_nu, m.freq, m.sep, "unstable", 0.0, 256, 32)
    return kam_iterate(pr)


def test_residual_drops_to_roundoff(unstable_run):
    d = unstable_run.diag
    assert d.stop_reason in ("converged", "roundoff floor")
    assert all(b < a for a, b in zip([d.mu0] + d.mus[:-1], d.mus))
    assert hj_residual(unstable_run) < 1e-10


def test_degenerate_perturbation_keeps_torus(unstable_run):
    # the perturbation vanishes on the torus x = 0: no shift of its action or energy
    assert np.abs(unstable_run.xi).max() < 1e-12
    assert abs(unstable_run.c0) < 1e-12


def test_graph_is_lagrangian(unstable_run):
    assert symplectic_check(unstable_run) < 1e-6


def test_stable_chart_agrees(arnold_model, unstable_run):
    m = arnold_model
    pr = KamProblem(m.H_nu, m.freq, m.sep, "stable", 0.0, 128, 16)
    res = kam_iterate(pr)
    assert hj_residual(res) < 1e-10
    assert abs(res.c0 - unstable_run.c0) < 1e-10


def test_unperturbed_whisker_is_the_separatrix():
    m = build_model(load_config(mu=0.0), 1e-3)
    res = kam_iterate(KamProblem(m.H_nu, m.freq, m.sep, "unstable", 0.0, 64, 8))
    assert res.diag.stop_reason in ("unperturbed", "roundoff floor")
    assert np.abs(res.u).max() < 1e-13


def test_bad_chart_rejected(arnold_model):
    m = arnold_model
    with pytest.raises(KamError, match="chart"):
        KamProblem(m.H_nu, m.freq, m.sep, "sideways", 0.0, 64, 8)


def test_diagnostics_recorded(unstable_run):
    recs = unstable_run.diag.records
    assert recs and all(r.gmres_iters > 0 for r in recs)
    assert all(r.lam == pytest.approx(1.0, abs=1e-3) for r in recs)
