"""Property suites behind ``chernflow verify``.

Each suite returns a list of :class:`Check`; a check passes when its value
is on the right side of its bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .flow import FlowConfig, _time_derivative, cross_validate, phi_dot_identity_residual, run_flow
from .models import (
    HopfModel,
    cosine_torus,
    flat_torus,
    hopf_exact_flow,
    hopf_metric,
    hopf_ricci_matrix,
    hopf_singular_time,
    sample_hopf_points,
    torus_metric,
)
from .singularity import fit_trajectory, hopf_scalar_evolution_residual, hopf_scalar_spread, scalar_evolution_residual

# the exact Hopf line is sampled on t in [0, HOPF_T_FRACTION / n)
HOPF_T_FRACTION = 0.9


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    kind: str = "below"  # or "above"

    @property
    def passed(self):
        if not np.isfinite(self.value):
            return False
        return self.value < self.bound if self.kind == "below" else self.value > self.bound

    def line(self):
        op = "<" if self.kind == "below" else ">"
        status = "pass" if self.passed else "FAIL"
        return f"{self.name} = {self.value:.17g} ({op} {self.bound:g}) {status}"


def hopf_samples(model: HopfModel, count, rng):
    t = rng.uniform(0.0, HOPF_T_FRACTION * hopf_singular_time(model), count)
    return t, sample_hopf_points(model, count, rng)


def hopf_hermitian_torsion(z):
    """T^k_{ij} = (z_i-bar delta_jk - z_j-bar delta_ik) * (-1/r^2), indexed [..., i, j, k]."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    r2 = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None, None]
    eye = np.eye(n)
    zb = np.conj(z)
    first = zb[..., :, None, None] * eye[None, :, :]
    return -(first - np.swapaxes(first, -3, -2)) / r2


# -- suites -----------------------------------------------------------------------


def flow_residuals(model, count=100, seed=0, stencil_h=1e-3):
    """Sup of |d_t g + Ric| (closed form, stencil) and |Ric(t) - Ric(0)| over random (p, t)."""
    rng = np.random.default_rng(seed)
    ts, zs = hopf_samples(model, count, rng)
    ric0 = hopf_ricci_matrix(model.n, zs)
    closed = stencil = const = 0.0
    for t, z, r0 in zip(ts, zs, ric0):
        f = hopf_exact_flow(model, t)
        dg = _time_derivative(lambda s: hopf_exact_flow(model, s, backward=True)(z), t, 1e-3)
        ric = kernel.chern_ricci(f, z, "trace")
        closed = max(closed, float(np.max(np.abs(dg + ric))))
        ric_s = kernel.chern_ricci(f.stencil(stencil_h, richardson=True), z, "trace")
        stencil = max(stencil, float(np.max(np.abs(dg + ric_s))))
        const = max(const, float(np.max(np.abs(ric - r0))))
    return closed, stencil, const


def kernel_suite(points=1000, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    flat = torus_metric(flat_torus(2))
    p = rng.uniform(0, 1, (16, 2)) + 1j * rng.uniform(0, 1, (16, 2))
    pkg = kernel.chern_package(flat, p)
    out.append(Check("kernel.flat_curvature", float(np.max(np.abs(pkg.curvature))), 1e-300))
    out.append(Check("kernel.flat_torsion", float(np.max(np.abs(pkg.torsion))), 1e-300))
    for n in (2, 3):
        m = HopfModel(n)
        g = hopf_metric(m)
        z = sample_hopf_points(m, points, rng)
        two_way = np.max(np.abs(kernel.chern_ricci(g, z, "trace") - kernel.chern_ricci(g, z, "logdet")))
        out.append(Check(f"kernel.two_way_ricci.n{n}", float(two_way), 1e-8))
        tors, _ = kernel.torsion(g, z)
        out.append(Check(f"kernel.hopf_torsion.n{n}", float(np.max(np.abs(tors - hopf_hermitian_torsion(z)))), 1e-10))
    m = HopfModel(2)
    z = sample_hopf_points(m, points, rng)
    d_res, dd_res = kernel.kahler_gauduchon_residuals(hopf_metric(m), z)
    out.append(Check("kernel.hopf_gauduchon.n2", dd_res, 1e-6))
    out.append(Check("kernel.hopf_d_omega.n2", d_res, 0.1, "above"))
    return out


def hopf_suite(count=100, seed=0):
    out = []
    for n in (2, 3):
        m = HopfModel(n)
        closed, stencil, const = flow_residuals(m, count, seed)
        out.append(Check(f"hopf.flow_residual.closed.n{n}", closed, 1e-8))
        out.append(Check(f"hopf.flow_residual.stencil.n{n}", stencil, 1e-4))
        out.append(Check(f"hopf.ricci_constancy.n{n}", const, 1e-8))
        tr = run_flow(FlowConfig(m, "closed_form", dt0=1e-3, dt_min=1e-8, t_end=1.0, n_points=16, seed=seed))
        fit = fit_trajectory(tr)
        T = hopf_singular_time(m)
        out.append(Check(f"hopf.fit_T_error.n{n}", abs(fit.T_fit - T), 1e-3))
        out.append(Check(f"hopf.fit_k_error.n{n}", abs(fit.k - 1.0), 0.05))
        out.append(Check(f"hopf.fit_C_rel_error.n{n}", abs(fit.C - (n - 1)) / (n - 1), 0.02))
        pd = phi_dot_identity_residual(tr)
        times = np.array([s.t for s in tr.checkpoints[1:]])[: len(pd)]
        inside = times < HOPF_T_FRACTION * T
        out.append(Check(f"hopf.phi_dot_identity.n{n}", float(np.max(pd[inside])), 1e-8))
    return out


def equivalence_pair(N, dt, t_end=0.2, amplitude=0.1, checkpoint_every=10):
    model = cosine_torus(1, amplitude)
    runs = [
        run_flow(FlowConfig(model, f, N=N, dt0=dt, t_end=t_end, checkpoint_every=checkpoint_every))
        for f in ("tensor", "potential")
    ]
    return runs, cross_validate(*runs)


def equivalence_suite(coarse=(32, 2e-3), fine=(64, 1e-3)):
    _, rep_c = equivalence_pair(*coarse)
    _, rep_f = equivalence_pair(*fine)
    return [
        Check("equivalence.deviation.fine", rep_f.max_deviation, 1e-5),
        Check("equivalence.refinement_ratio", rep_c.max_deviation / rep_f.max_deviation, 8.0, "above"),
    ]


def lemma_residual(N, dt, t_end=0.2, amplitude=0.1):
    tr = run_flow(FlowConfig(cosine_torus(1, amplitude), "potential", N=N, dt0=dt, t_end=t_end, checkpoint_every=1))
    return float(np.max(scalar_evolution_residual(tr)))


def lemma_suite(count=100, seed=0):
    coarse = lemma_residual(32, 2e-3)
    fine = lemma_residual(64, 1e-3)
    out = [Check("lemma.torus_refinement_ratio", coarse / fine, 4.0, "above")]
    rng = np.random.default_rng(seed)
    for n in (2, 3):
        m = HopfModel(n)
        ts, zs = hopf_samples(m, count, rng)
        worst = max(float(np.max(hopf_scalar_evolution_residual(m, z, t))) for t, z in zip(ts, zs))
        out.append(Check(f"lemma.hopf_residual.n{n}", worst, 1e-8))
        spread = max(hopf_scalar_spread(m, sample_hopf_points(m, 16, rng), t) for t in ts[:10])
        out.append(Check(f"lemma.hopf_scalar_spread.n{n}", spread, 1e-8))
    return out


SUITES = {
    "kernel": kernel_suite,
    "hopf": hopf_suite,
    "equivalence": equivalence_suite,
    "lemma": lemma_suite,
}


# -- scenario suite ---------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    config: FlowConfig
    expected: str  # trajectory label


def scenarios():
    hopf = dict(formulation="closed_form", dt0=1e-3, dt_min=1e-8, t_end=1.0, n_points=16)
    return [
        Scenario("flat_torus", FlowConfig(flat_torus(1), "tensor", N=16, t_end=1.0), "completed"),
        Scenario("cosine_torus_n1", FlowConfig(cosine_torus(1, 0.1), "tensor", N=32, t_end=0.5), "completed"),
        Scenario(
            "cosine_torus_n1_k2",
            FlowConfig(cosine_torus(1, 0.3, wavenumber=2), "potential", N=32, t_end=0.5),
            "completed",
        ),
        Scenario(
            "non_kahler_torus_n2",
            FlowConfig(cosine_torus(2, 0.1, axis="x2"), "tensor", N=8, t_end=0.1),
            "completed",
        ),
        Scenario("hopf_n2", FlowConfig(HopfModel(2), **hopf), "curvature_blowup"),
        Scenario("hopf_n3", FlowConfig(HopfModel(3), **hopf), "curvature_blowup"),
    ]


@dataclass
class ScenarioResult:
    scenario: Scenario
    label: str
    termination: str
    t_final: float
    sup_R_max: float
    monotone_tail: bool
    T_fit: float = float("nan")

    @property
    def consistent(self):
        """Label matches, and the label's own evidence holds."""
        if self.label != self.scenario.expected:
            return False
        if self.label == "curvature_blowup":
            dt = self.scenario.config.dt0
            return self.monotone_tail and abs(self.T_fit - self.t_final) <= 5 * dt
        if self.label == "completed":
            return bool(np.isfinite(self.sup_R_max))
        return False


def run_scenario(sc: Scenario) -> ScenarioResult:
    tr = run_flow(sc.config)
    sup = tr.column("sup_R")
    k = sc.config.growth_window
    tail = sup[-(k + 1):]
    res = ScenarioResult(
        scenario=sc,
        label=tr.label,
        termination=tr.termination,
        t_final=tr.t_final,
        sup_R_max=float(np.max(sup)),
        monotone_tail=len(tail) == k + 1 and bool(np.all(np.diff(tail) > 0)),
    )
    if tr.label == "curvature_blowup":
        res.T_fit = fit_trajectory(tr).T_fit
    return res


def scenario_suite():
    results = [run_scenario(sc) for sc in scenarios()]
    wrong = sum(not r.consistent for r in results)
    return results, [Check("scenarios.misclassified", float(wrong), 0.5)]
