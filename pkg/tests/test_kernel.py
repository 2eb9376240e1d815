import numpy as np
import pytest

from chernflow import kernel
from chernflow.errors import ContractViolation, SingularMetricError
from chernflow.metric import MetricField, Torus, wirtinger_derivatives
from chernflow.models import HopfModel, conformal_flat_metric, hopf_exact_flow, hopf_metric

from .conftest import torus_points

Z10 = np.array([1.0 + 0j, 0.0 + 0j])


# -- Wirtinger stencils ----------------------------------------------------------------


def test_wirtinger_of_abs_z1_squared():
    p = np.array([0.3 + 0.1j, 0.2 - 0.4j])
    d, dbar = wirtinger_derivatives(lambda z: np.abs(z[..., 0]) ** 2, p, 1)
    np.testing.assert_allclose(d[0], 0.3 - 0.1j, atol=1e-11)
    np.testing.assert_allclose(dbar[0], 0.3 + 0.1j, atol=1e-11)
    np.testing.assert_allclose(d[1], 0, atol=1e-11)


def test_wirtinger_of_constant_is_zero():
    p = np.array([0.3 + 0.1j, 0.2 - 0.4j])
    d, dbar = wirtinger_derivatives(lambda z: np.full(z.shape[:-1], 3.5), p, 1)
    dd = wirtinger_derivatives(lambda z: np.full(z.shape[:-1], 3.5), p, 2)
    assert np.max(np.abs(d)) < 1e-12 and np.max(np.abs(dbar)) < 1e-12
    assert np.max(np.abs(dd)) < 1e-9


def test_ddbar_log_r2_at_unit_point():
    # -2 (delta_11/r^2 - zbar_1 z_1 / r^4) = 0 at z = (1, 0)
    f = lambda z: -2 * np.log(np.sum(np.abs(z) ** 2, axis=-1))
    dd = wirtinger_derivatives(f, Z10, 2, h=1e-3, richardson=True)
    assert abs(dd[0, 0]) < 1e-9
    np.testing.assert_allclose(dd[1, 1], -2.0, atol=1e-8)


def test_stencil_leaving_hopf_annulus_is_a_domain_error():
    from chernflow.errors import DomainError

    g = hopf_metric(HopfModel(2)).stencil(h=0.5)
    with pytest.raises(DomainError):
        g.jet(np.array([1e-3 + 0j, 0j]))


@pytest.mark.parametrize("order", [1, 2])
def test_stencil_error_drops_at_least_eightfold_when_h_halves(order, rng):
    g = hopf_exact_flow(HopfModel(2), 0.2)
    z = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    z *= 1.5 / np.linalg.norm(z, axis=-1, keepdims=True)
    exact = g.jet(z)
    want = exact.d if order == 1 else exact.ddbar

    def err(h):
        got = wirtinger_derivatives(g, z, order, h=h)
        got = got[0] if order == 1 else got
        return np.max(np.abs(got - want))

    assert err(0.02) / err(0.01) >= 8.0


# -- connection, curvature, torsion ------------------------------------------------------------


def test_flat_package_vanishes(flat2, rng):
    pkg = kernel.chern_package(flat2, torus_points(rng, 2, 5))
    for field in ("gamma", "curvature", "ricci", "scalar", "torsion", "torsion_trace"):
        assert np.max(np.abs(getattr(pkg, field))) == 0, field


def test_hopf_connection_at_unit_point(hopf2):
    gamma = kernel.chern_connection(hopf2, Z10)
    np.testing.assert_allclose(gamma[0, 0, 0], -1.0, atol=1e-14)
    expected = np.zeros((2, 2, 2), dtype=complex)
    expected[0, 0, 0] = expected[0, 1, 1] = -1.0
    np.testing.assert_allclose(gamma, expected, atol=1e-14)


def test_hopf_connection_formula(hopf, rng):
    from chernflow.models import sample_hopf_points

    z = sample_hopf_points(hopf, 20, rng)
    gamma = kernel.chern_connection(hopf_metric(hopf), z)
    r2 = np.sum(np.abs(z) ** 2, axis=-1)
    expected = -np.einsum("bi,jk->bijk", np.conj(z), np.eye(hopf.n)) / r2[:, None, None, None]
    np.testing.assert_allclose(gamma, expected, atol=1e-13)


def test_hopf_ricci_at_unit_point(hopf2):
    for method in ("trace", "logdet"):
        np.testing.assert_allclose(kernel.chern_ricci(hopf2, Z10, method), np.diag([0, 2]), atol=1e-13)


def test_hopf_curvature_trace_is_ricci(hopf2, rng):
    z = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
    z *= 1.3 / np.linalg.norm(z, axis=-1, keepdims=True)
    curv = kernel.chern_curvature(hopf2, z)
    traced = np.einsum("...ijkk->...ij", curv)
    np.testing.assert_allclose(traced, kernel.chern_ricci(hopf2, z, "logdet"), atol=1e-12)


@pytest.mark.parametrize("n,t,expected", [(2, 0.0, 2.0), (3, 0.0, 6.0), (2, 0.25, 4.0), (3, 0.2, 2 / (1 / 3 - 0.2))])
def test_hopf_scalar_values(n, t, expected, rng):
    from chernflow.models import sample_hopf_points

    m = HopfModel(n)
    z = sample_hopf_points(m, 8, rng)
    np.testing.assert_allclose(kernel.chern_scalar(hopf_exact_flow(m, t), z), expected, rtol=1e-12)


def test_hopf_torsion_at_unit_point(hopf2):
    tors, trace = kernel.torsion(hopf2, Z10)
    # T^k_{ij} stored at [i, j, k]; T^2_{12} = -1
    np.testing.assert_allclose(tors[0, 1, 1], -1.0, atol=1e-14)
    np.testing.assert_allclose(tors + np.swapaxes(tors, 0, 1), 0, atol=0)
    # (T)^p_{1p} = T^2_{12}
    np.testing.assert_allclose(trace, [-1.0, 0.0], atol=1e-14)


def test_torsion_vanishes_in_dimension_one(rng):
    from chernflow.models import cosine_torus, torus_metric

    g = torus_metric(cosine_torus(1, 0.3))
    tors, _ = kernel.torsion(g, torus_points(rng, 1, 10))
    assert np.max(np.abs(tors)) == 0


def test_kahler_torus_is_torsion_free_and_closed(rng):
    from chernflow.models import cosine_torus, torus_metric

    # A_{1 1bar} depending on x_1 only is d-closed in n = 2
    g = torus_metric(cosine_torus(2, 0.1, axis="x1"))
    z = torus_points(rng, 2, 20)
    tors, _ = kernel.torsion(g, z)
    d_res, _ = kernel.kahler_gauduchon_residuals(g, z)
    assert np.max(np.abs(tors)) < 1e-14 and d_res < 1e-14
    gamma = kernel.chern_connection(g, z)
    np.testing.assert_allclose(gamma, np.swapaxes(gamma, -3, -2), atol=1e-14)


def test_non_kahler_torus_has_torsion(wavy2, rng):
    z = torus_points(rng, 2, 20)
    tors, _ = kernel.torsion(wavy2, z)
    assert np.max(np.abs(tors)) > 1e-2


def test_curvature_conjugate_symmetry(wavy2, rng):
    z = torus_points(rng, 2, 20)
    assert kernel.curvature_symmetry_defect(wavy2, z) < 1e-12
    h = 1e-2
    assert kernel.curvature_symmetry_defect(wavy2.stencil(h), z) < 10 * h**4


def test_two_way_ricci_on_perturbed_torus_stencil(wavy2, rng):
    g = wavy2.stencil(1e-3, richardson=True)
    z = torus_points(rng, 2, 100)
    diff = kernel.chern_ricci(g, z, "trace") - kernel.chern_ricci(g, z, "logdet")
    assert np.max(np.abs(diff)) < 1e-6


def test_singular_metric_raises():
    g = MetricField(Torus(2), lambda z: np.zeros(z.shape[:-1] + (2, 2)), derivative_mode="stencil")
    with pytest.raises(SingularMetricError):
        kernel.chern_ricci(g, np.array([0.1 + 0j, 0.2 + 0j]), "logdet")


# -- Kahler / Gauduchon residuals ---------------------------------------------------------------


def test_residuals_flat(flat2, rng):
    assert kernel.kahler_gauduchon_residuals(flat2, torus_points(rng, 2, 5)) == (0.0, 0.0)


def test_residuals_hopf_gauduchon_not_kahler(hopf2, rng):
    from chernflow.models import sample_hopf_points

    d_res, dd_res = kernel.kahler_gauduchon_residuals(hopf2, sample_hopf_points(HopfModel(2), 50, rng))
    assert d_res > 0.1 and dd_res < 1e-12


def test_residuals_conformal_scaling_is_not_kahler(rng):
    g = conformal_flat_metric(2, 0.3, (1, 0, 0, 0))
    d_res, _ = kernel.kahler_gauduchon_residuals(g, torus_points(rng, 2, 10))
    assert d_res > 1e-2


# -- trace, norms, positivity ----------------------------------------------------------------------


def test_trace_and_norms_example():
    tr, nrm = kernel.trace_and_norms(np.diag([2.0, 1.0]), np.diag([4.0, 3.0]))
    assert tr == pytest.approx(5.0) and nrm == pytest.approx(13.0)


def test_trace_of_metric_is_dimension_and_zero_norm():
    g = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
    tr, _ = kernel.trace_and_norms(g, g)
    assert tr == pytest.approx(2.0)
    assert kernel.trace_and_norms(g, np.zeros((2, 2))) == (0.0, 0.0)


def test_positivity_examples():
    ok, lam = kernel.positivity(np.eye(3))
    assert ok and lam == pytest.approx(1.0)
    ok, lam = kernel.positivity(np.diag([1.0, -0.1]))
    assert not ok and lam == pytest.approx(-0.1)
    with pytest.raises(ContractViolation):
        kernel.positivity(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_hopf_alpha_degenerates_at_singular_time(rng):
    from chernflow.models import hopf_alpha_form, sample_hopf_points

    m = HopfModel(2)
    z = sample_hopf_points(m, 10, rng)
    _, lam = kernel.positivity(hopf_alpha_form(m, 0.5)(z))
    assert np.max(np.abs(lam)) < 1e-14
    ok, _ = kernel.positivity(hopf_alpha_form(m, 0.5 - 1e-6)(z))
    assert np.all(ok)


def test_hermitian_part_rejects_asymmetric():
    with pytest.raises(ContractViolation):
        kernel.hermitian_part(np.array([[1.0, 1.0], [0.0, 1.0]]))
