"""Property-based checks of the kernel invariants and the analysis helpers."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chernflow import kernel
from chernflow.models import FourierMode, HopfModel, TorusModel, hopf_exact_flow, hopf_ricci_matrix, torus_metric
from chernflow.singularity import fit_blowup, format_report, maximal_time_proxy, parse_report

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def positive_hermitian(draw, n=None):
    n = n or draw(st.integers(1, 4))
    a = draw(arrays(float, (n, n), elements=finite))
    b = draw(arrays(float, (n, n), elements=finite))
    m = a + 1j * b
    return m @ m.conj().T + (0.1 + draw(st.floats(0, 2))) * np.eye(n)


@st.composite
def hermitian_like(draw, n):
    a = draw(arrays(float, (n, n), elements=finite))
    b = draw(arrays(float, (n, n), elements=finite))
    m = a + 1j * b
    return m + m.conj().T


@st.composite
def torus_models(draw):
    n = draw(st.integers(1, 2))
    modes = []
    for _ in range(draw(st.integers(1, 2))):
        i, j = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        amp = draw(st.floats(0.01, 0.08))
        k = draw(st.lists(st.integers(-2, 2), min_size=2 * n, max_size=2 * n))
        if not any(k):
            k[0] = 1
        phase = draw(st.floats(0, 6.28))
        modes.append(FourierMode.entry(n, i, j, amp if i == j else amp * (1 + 0.5j), k, phase))
    return TorusModel(n=n, modes=tuple(modes))


def points(draw_or_rng, n, k=4):
    return draw_or_rng.uniform(0, 1, (k, n)) + 1j * draw_or_rng.uniform(0, 1, (k, n))


@SETTINGS
@given(positive_hermitian())
def test_small_matrix_fast_paths_match_lapack(g):
    np.testing.assert_allclose(kernel.inverse(g), np.linalg.inv(g), rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(kernel.logdet(g), np.linalg.slogdet(g)[1], atol=1e-9)
    np.testing.assert_allclose(kernel.min_eigenvalue(g), np.linalg.eigvalsh(g)[0], atol=1e-8 * np.abs(g).max())


@SETTINGS
@given(positive_hermitian(), st.data())
def test_trace_and_norm_invariants(g, data):
    n = g.shape[0]
    h = data.draw(hermitian_like(n))
    tr, nrm = kernel.trace_and_norms(g, g)
    assert abs(tr - n) < 1e-8 * max(1.0, np.linalg.cond(g))
    tr_h, nrm_h = kernel.trace_and_norms(g, h)
    # |h|_g^2 = |g^{-1/2} h g^{-1/2}|_F^2
    w, v = np.linalg.eigh(g)
    s = v @ np.diag(w**-0.5) @ v.conj().T
    frob = np.linalg.norm(s @ h @ s) ** 2
    assert nrm_h >= -1e-12 and abs(nrm_h - frob) <= 1e-7 * max(1.0, frob)


@SETTINGS
@given(positive_hermitian())
def test_positivity_flag_matches_eigenvalue(g):
    ok, lam = kernel.positivity(g)
    assert ok and lam > 0
    ok2, lam2 = kernel.positivity(g - (lam + 1.0) * np.eye(g.shape[0]))
    assert not ok2 and abs(lam2 + 1.0) < 1e-8 * max(1.0, np.abs(g).max())


@SETTINGS
@given(torus_models(), st.integers(0, 2**32 - 1))
def test_torus_package_invariants(model, seed):
    g = torus_metric(model)
    z = points(np.random.default_rng(seed), model.n)
    pkg = kernel.chern_package(g, z)
    np.testing.assert_allclose(pkg.ricci, np.conj(np.swapaxes(pkg.ricci, -1, -2)), atol=1e-12)
    np.testing.assert_array_equal(pkg.torsion, -np.swapaxes(pkg.torsion, -3, -2))
    two_way = kernel.chern_ricci(g, z, "trace") - kernel.chern_ricci(g, z, "logdet")
    assert np.max(np.abs(two_way)) < 1e-8
    assert kernel.curvature_symmetry_defect(g, z) < 1e-10
    r = kernel.scalar_from(g(z), pkg.ricci)
    assert np.max(np.abs(r.imag)) < 1e-12


@SETTINGS
@given(st.integers(2, 4), st.floats(0.0, 0.9), st.floats(1.2, 5.0), st.integers(0, 2**32 - 1))
def test_hopf_two_way_and_constancy(n, frac, alpha, seed):
    m = HopfModel(n, alpha)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    z = w / np.linalg.norm(w, axis=-1, keepdims=True) * rng.uniform(1, alpha, (3, 1))
    f = hopf_exact_flow(m, frac / n)
    trace = kernel.chern_ricci(f, z, "trace")
    np.testing.assert_allclose(trace, kernel.chern_ricci(f, z, "logdet"), atol=1e-8)
    np.testing.assert_allclose(trace, hopf_ricci_matrix(n, z), atol=1e-8)


@SETTINGS
@given(st.floats(0.2, 2.0), st.floats(0.5, 1.5), st.floats(1e-2, 1e3))
def test_fit_is_scale_consistent(T, k, lam):
    t = np.linspace(0.0, 0.8 * T, 30)
    y = 1.5 * (T - t) ** -k
    a = fit_blowup(t, y)
    b = fit_blowup(t, lam * y)
    assert abs(a.T_fit - b.T_fit) < 1e-6 * T
    assert abs(a.k - b.k) < 1e-6
    assert abs(b.C / a.C - lam) < 1e-6 * lam


@SETTINGS
@given(st.data())
def test_maximal_time_is_monotone(data):
    n = data.draw(st.integers(1, 3))
    g0 = np.stack([data.draw(positive_hermitian(n)) for _ in range(3)])
    ric = np.stack([data.draw(hermitian_like(n)) for _ in range(3)])
    extra = np.stack([data.draw(positive_hermitian(n)) for _ in range(3)])
    t0 = maximal_time_proxy(g0, ric)
    t1 = maximal_time_proxy(g0, ric + extra)
    assert t1 <= t0 * (1 + 1e-8) or t0 == float("inf")


@SETTINGS
@given(st.dictionaries(st.from_regex(r"[a-z][a-z_.]{0,10}", fullmatch=True), st.floats(allow_nan=False, allow_infinity=False), max_size=6))
def test_report_floats_round_trip(values):
    back, mask = parse_report(format_report(values))
    assert mask is None
    assert {k: float(v) for k, v in back.items()} == values
