import numpy as np
import pytest

from chernflow.errors import ConfigError, ContractViolation
from chernflow.flow import FlowConfig, run_flow
from chernflow.models import HopfModel, cosine_torus, flat_torus, sample_hopf_points
from chernflow.singularity import (
    fit_blowup,
    fit_trajectory,
    format_report,
    hopf_scalar_evolution_residual,
    hopf_scalar_spread,
    locus_from_fields,
    maximal_time_proxy,
    parse_report,
    q_diagnostics,
    scalar_evolution_residual,
    singular_locus,
    sup_scalar_series,
)


@pytest.fixture(scope="module")
def flat_run():
    return run_flow(FlowConfig(flat_torus(1), "potential", N=8, dt0=0.01, t_end=0.1, checkpoint_every=1))


@pytest.fixture(scope="module")
def hopf_run():
    return run_flow(FlowConfig(HopfModel(2), "closed_form", dt0=1e-3, dt_min=1e-8, t_end=1.0, n_points=6))


def test_series_flat(flat_run):
    s = sup_scalar_series(flat_run)
    assert np.all(s.sup_R == 0) and np.all(s.inf_R == 0) and not s.monotone_tail


def test_series_hopf(hopf_run):
    s = sup_scalar_series(hopf_run)
    inside = s.t < 0.45
    np.testing.assert_allclose(s.sup_R[inside], 1 / (0.5 - s.t[inside]), rtol=1e-12)
    np.testing.assert_allclose(s.inf_R[inside], s.sup_R[inside], rtol=1e-12)
    assert s.monotone_tail


def test_fit_exact_type_one_series():
    t = np.linspace(0.3, 0.45, 40)
    fit = fit_blowup(t, 1 / (0.5 - t))
    assert fit.T_fit == pytest.approx(0.5, abs=1e-4)
    assert fit.k == pytest.approx(1.0, abs=1e-3) and fit.C == pytest.approx(1.0, abs=1e-3)
    assert fit.classification == "Type I" and not fit.low_confidence
    assert fit.window[0] < fit.window[1] < fit.T_fit


def test_fit_type_two_like_series():
    t = np.linspace(0.3, 0.45, 40)
    fit = fit_blowup(t, 2 / (0.5 - t) ** 2)
    assert fit.k == pytest.approx(2.0, abs=1e-3) and fit.classification == "undetermined"


def test_fit_window_selection():
    t = np.linspace(0.0, 0.45, 200)
    y = 1 / (0.5 - t)
    fit = fit_blowup(t, y, window=(0.2, 0.45))
    assert fit.window[0] >= 0.2 and fit.n_samples < 200


@pytest.mark.parametrize(
    "y, msg",
    [(np.ones(10), "increasing"), (-np.arange(1.0, 11.0), "positive"), (np.arange(1.0, 5.0), "at least 8")],
)
def test_fit_contract(y, msg):
    with pytest.raises(ContractViolation, match=msg):
        fit_blowup(np.linspace(0, 0.4, len(y)), y)


def test_fit_low_confidence_flag():
    t = np.linspace(0.0, 0.4, 30)
    fit = fit_blowup(t, 1 + np.floor(20 * t) + 0.01 * t)  # staircase, not a power law
    assert fit.low_confidence and fit.residual > 1e-2


def test_hopf_trajectory_fit(hopf_run):
    fit = fit_trajectory(hopf_run)
    assert abs(fit.T_fit - 0.5) < 1e-6 and abs(fit.k - 1) < 1e-4 and abs(fit.C - 1) < 1e-4


def test_scalar_evolution_flat(flat_run):
    assert np.max(scalar_evolution_residual(flat_run)) == 0


def test_scalar_evolution_contract():
    tr = run_flow(FlowConfig(flat_torus(1), "tensor", N=8, dt0=0.01, t_end=0.01))
    with pytest.raises(ContractViolation):
        scalar_evolution_residual(tr)


def test_hopf_scalar_evolution_pointwise(hopf, rng):
    z = sample_hopf_points(hopf, 10, rng)
    for t in (0.0, 0.3 / hopf.n, 0.85 / hopf.n):
        assert np.max(hopf_scalar_evolution_residual(hopf, z, t)) < 1e-8
        assert hopf_scalar_spread(hopf, z, t) < 1e-10


def test_scalar_evolution_refines_on_torus():
    def worst(N, dt):
        tr = run_flow(FlowConfig(cosine_torus(1, 0.1), "tensor", N=N, dt0=dt, t_end=0.05, checkpoint_every=1))
        return np.max(scalar_evolution_residual(tr))

    assert worst(16, 4e-3) / worst(32, 2e-3) >= 4


def test_q_diagnostics_flat(flat_run):
    q = q_diagnostics(flat_run, C_tilde=2.0, B=1.0)
    np.testing.assert_allclose(q.q1_min, -q.t, atol=1e-15)
    np.testing.assert_allclose(q.q1_max, -q.t, atol=1e-15)
    # n = 1: log tr g0^{-1} g = 0, so Q2 = 1/2 - t
    np.testing.assert_allclose(q.q2_min, 0.5 - q.t, atol=1e-15)


def test_q_diagnostics_needs_large_enough_C_tilde(flat_run):
    with pytest.raises(ConfigError, match="C_tilde"):
        q_diagnostics(flat_run, C_tilde=0.5)


def test_q1_band_stable_under_refinement():
    bands = []
    for N, dt in ((16, 4e-3), (32, 2e-3)):
        tr = run_flow(FlowConfig(cosine_torus(1, 0.1), "potential", N=N, dt0=dt, t_end=0.2, checkpoint_every=5))
        q = q_diagnostics(tr)
        bands.append((q.q1_min.min(), q.q1_max.max()))
    np.testing.assert_allclose(bands[0], bands[1], atol=1e-4)
    assert -0.21 < bands[1][0] and bands[1][1] <= 1e-12


def test_maximal_time_examples():
    eye = np.broadcast_to(np.eye(2), (3, 2, 2))
    assert maximal_time_proxy(eye, np.zeros((3, 2, 2))) == float("inf")
    assert maximal_time_proxy(eye, np.broadcast_to(np.diag([2.0, 1.0]), (3, 2, 2))) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ContractViolation):
        maximal_time_proxy(-eye, eye)


def test_locus_flat_is_empty(flat_run):
    assert singular_locus(flat_run, 1.0).count == 0


def test_locus_hopf_first_exceedance(hopf_run):
    mask = singular_locus(hopf_run, 10.0)
    assert mask.mask.all()
    # 1/(0.5 - t) = 10 at t = 0.4; checkpoints are 10 steps of 1e-3 apart
    first = mask.first_exceedance
    assert np.ptp(first) == 0
    assert 0.4 - 1e-12 <= first[0] <= 0.41 + 1e-12
    with pytest.raises(ContractViolation):
        singular_locus(hopf_run, 1.0)


def test_locus_single_point():
    R = [np.zeros((4, 4)) for _ in range(3)]
    R[2][1, 3] = 50.0
    mask = locus_from_fields([0.0, 0.1, 0.2], R, 10.0)
    assert mask.count == 1 and mask.mask[1, 3] and mask.first_exceedance[1, 3] == 0.2


def test_report_round_trip():
    R = [np.zeros((3, 5)), np.eye(3, 5) * 20]
    mask = locus_from_fields([0.0, 1.0], R, 10.0)
    text = format_report({"T_fit": 0.1, "k": 1.0, "ok": True}, mask)
    values, back = parse_report(text)
    assert float(values["T_fit"]) == 0.1 and values["ok"] == "true"
    np.testing.assert_array_equal(back, mask.mask)
