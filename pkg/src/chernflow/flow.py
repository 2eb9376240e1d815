"""Time integration of the Chern-Ricci flow.

Three formulations share one driver (:func:`run_flow`):

``tensor``
    classical RK4 on the metric grid, ``d/dt g = -Ric^C(g)``, with the Ricci
    form taken as the trace of the Chern curvature (nested stencils);
``potential``
    RK4 on the scalar potential of the parabolic complex Monge-Ampere
    equation, ``d/dt phi = log det(alpha_t + i ddbar phi) - log det g_0``,
    with the Ricci form taken as ``-ddbar log det`` (compact stencils);
``closed_form``
    analytic stepping of the exact Hopf flow line, evaluated at sampled points.

The two grid formulations use different Ricci discretizations on purpose, so
comparing them is a check of the discretization and not a tautology.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import grid as gridops
from . import kernel
from .errors import ContractViolation, PositivityLoss, SingularTimeError
from .grid import TorusGrid
from .models import (
    HopfModel,
    TorusModel,
    hopf_exact_flow,
    hopf_metric,
    hopf_phi,
    hopf_singular_time,
    hopf_volume,
    sample_hopf_points,
    torus_metric,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t",
    "sup_R",
    "inf_R",
    "sup_ric_norm_sq",
    "min_eig",
    "sup_abs_phi",
    "sup_abs_phidot",
    "q1_min",
    "q1_max",
    "volume",
    "dbar_residual",
    "gauduchon_residual",
)

RICCI_ROUTE = {"tensor": "trace", "potential": "logdet"}
RK4_STABILITY = 2.78  # extent of the RK4 stability region on the negative real axis


@dataclass
class Reference:
    """Frozen initial data on a grid."""

    g0: np.ndarray
    ric0: np.ndarray
    logdet0: np.ndarray

    @classmethod
    def from_metric(cls, grid, g0):
        return cls(g0=g0, ric0=kernel.hermitian_part(gridops.ricci_logdet(grid, g0)), logdet0=kernel.logdet(g0))

    def alpha(self, t):
        return self.g0 - t * self.ric0


@dataclass
class FlowState:
    t: float
    formulation: str
    grid: Optional[TorusGrid] = None
    metric: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    phidot: Optional[np.ndarray] = None
    reference: Optional[Reference] = None
    model: Optional[HopfModel] = None
    points: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.grid.n if self.grid is not None else self.model.n

    @property
    def theta(self):
        return self.phidot

    def metric_values(self):
        """Metric at the state's sample set: the grid, or the Hopf sample points."""
        if self.formulation == "potential":
            return self.reference.alpha(self.t) + gridops.grid_ddbar(self.grid, self.phi)
        return self.metric


def _min_eig(G):
    lam = kernel.min_eigenvalue(G)
    idx = np.unravel_index(np.argmin(lam), lam.shape)
    return float(lam[idx]), idx


def _check_positive(G, what):
    lam, idx = _min_eig(G)
    if not lam > kernel.POSITIVITY_TOL:
        raise PositivityLoss(f"{what}: min eigenvalue {lam:.3g} at grid index {idx}", idx, lam)
    return lam


# -- grid formulations --------------------------------------------------------


def initial_grid_state(model: TorusModel, N, formulation):
    grid = TorusGrid(model.n, N, model.periods)
    g0 = torus_metric(model)(grid.points())
    g0 = kernel.hermitian_part(g0)
    ref = Reference.from_metric(grid, g0)
    zero = np.zeros(grid.shape)
    if formulation == "tensor":
        return FlowState(0.0, "tensor", grid=grid, metric=g0.copy(), phi=zero, phidot=zero.copy(), reference=ref)
    if formulation == "potential":
        return FlowState(0.0, "potential", grid=grid, phi=zero, phidot=zero.copy(), reference=ref)
    raise ValueError(f"unknown grid formulation {formulation!r}")


def _rk4(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k1)])
    k3 = rhs(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k2)])
    k4 = rhs(t + dt, [a + dt * b for a, b in zip(y, k3)])
    return [a + dt / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def _tensor_rhs(s: FlowState):
    ref = s.reference

    def rhs(t, y):
        G, _ = y
        _check_positive(G, f"tensor stage at t={t:.6g}")
        return [-gridops.ricci_trace(s.grid, G), kernel.logdet(G) - ref.logdet0]

    return rhs


def tensor_step(s: FlowState, dt, substeps=1, reverse=False) -> FlowState:
    """Advance the metric grid by one RK4 step of d/dt g = -Ric^C(g).

    ``phi`` is carried along (d/dt phi = theta) so potential diagnostics are
    available in this formulation too. ``reverse=True`` integrates backwards.
    """
    if s.formulation != "tensor":
        raise ContractViolation("tensor_step needs a tensor-formulation state")
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    sub = (-dt if reverse else dt) / substeps
    rhs = _tensor_rhs(s)
    t, G, phi = s.t, s.metric, s.phi
    for _ in range(substeps):
        G, phi = _rk4(rhs, t, [G, phi], sub)
        t = t + sub
    G = kernel.hermitian_part(G, what="metric after tensor step")
    _check_positive(G, f"tensor step to t={t:.6g}")
    return replace(s, t=t, metric=G, phi=phi, phidot=kernel.logdet(G) - s.reference.logdet0)


def _potential_theta(s: FlowState, t, phi):
    G = s.reference.alpha(t) + gridops.grid_ddbar(s.grid, phi)
    _check_positive(G, f"alpha_t + i ddbar phi at t={t:.6g}")
    return kernel.logdet(G) - s.reference.logdet0


def potential_step(s: FlowState, dt, substeps=1, reverse=False) -> FlowState:
    """Advance phi by one RK4 step of the parabolic complex Monge-Ampere equation."""
    if s.formulation != "potential":
        raise ContractViolation("potential_step needs a potential-formulation state")
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    sub = (-dt if reverse else dt) / substeps
    t, phi = s.t, s.phi
    for _ in range(substeps):
        (phi,) = _rk4(lambda tt, y: [_potential_theta(s, tt, y[0])], t, [phi], sub)
        t = t + sub
    return replace(s, t=t, phi=phi, phidot=_potential_theta(s, t, phi))


def stable_substeps(s: FlowState, dt, cfl=0.8):
    """Sub-steps per nominal step keeping RK4 inside its stability region.

    The linearized operator is ``g^{i jbar} d_i d_jbar``; with the compact
    4th-order stencil its spectral radius is bounded by
    ``sum_a (16/3) / (4 h_a^2 lambda_min(g))``.
    """
    lam, _ = _min_eig(s.metric_values())
    radius = sum(16.0 / 3.0 / (4.0 * h * h) for h in s.grid.spacing) / lam
    dt_cap = cfl * RK4_STABILITY / radius
    return max(1, math.ceil(dt / dt_cap - 1e-12))


# -- closed-form Hopf stepping -------------------------------------------------


def initial_closed_form_state(model: HopfModel, n_points=32, seed=0):
    pts = sample_hopf_points(model, n_points, seed)
    return FlowState(
        0.0,
        "closed_form",
        metric=hopf_metric(model)(pts),
        phi=np.zeros(n_points),
        phidot=np.zeros(n_points),
        model=model,
        points=pts,
    )


def closed_form_step(s: FlowState, dt, substeps=1, reverse=False) -> FlowState:
    t = s.t - dt if reverse else s.t + dt
    try:
        field_ = hopf_exact_flow(s.model, t)
    except SingularTimeError as exc:
        raise PositivityLoss(str(exc), None, 0.0) from exc
    G = field_(s.points)
    _check_positive(G, f"Hopf flow at t={t:.6g}")
    g0 = hopf_metric(s.model)(s.points)
    theta = kernel.logdet(G) - kernel.logdet(g0)
    phi = np.full(len(s.points), hopf_phi(s.model, t))
    return replace(s, t=t, metric=G, phi=phi, phidot=theta)


STEPPERS = {"tensor": tensor_step, "potential": potential_step, "closed_form": closed_form_step}


# -- diagnostics ---------------------------------------------------------------


def curvature_fields(s: FlowState):
    """(metric, Ricci form, scalar curvature) on the state's sample set."""
    if s.formulation == "closed_form":
        field_ = hopf_exact_flow(s.model, s.t)
        G = s.metric
        ric = kernel.chern_ricci(field_, s.points, "logdet")
    else:
        G = s.metric_values()
        ric = kernel.hermitian_part(gridops.ricci(s.grid, G, RICCI_ROUTE[s.formulation]), what="Ricci grid")
    R = kernel.scalar_from(G, ric).real
    return G, ric, R


def diagnostics(s: FlowState):
    G, ric, R = curvature_fields(s)
    n = s.n
    q1 = s.t * s.phidot - s.phi - n * s.t
    if s.formulation == "closed_form":
        field_ = hopf_exact_flow(s.model, s.t)
        vol = hopf_volume(s.model, s.t)
        dres, ddres = kernel.kahler_gauduchon_residuals(field_, s.points)
    else:
        vol = gridops.volume(s.grid, G)
        dres, ddres = gridops.residuals(s.grid, G)
    return {
        "t": float(s.t),
        "sup_R": float(np.max(R)),
        "inf_R": float(np.min(R)),
        "sup_ric_norm_sq": float(np.max(kernel.norm_sq(G, ric).real)),
        "min_eig": _min_eig(G)[0],
        "sup_abs_phi": float(np.max(np.abs(s.phi))),
        "sup_abs_phidot": float(np.max(np.abs(s.phidot))),
        "q1_min": float(np.min(q1)),
        "q1_max": float(np.max(q1)),
        "volume": vol,
        "dbar_residual": dres,
        "gauduchon_residual": ddres,
    }


# -- driver ----------------------------------------------------------------------


@dataclass
class FlowConfig:
    model: Union[HopfModel, TorusModel]
    formulation: str = "tensor"
    N: int = 32
    dt0: float = 1e-3
    dt_min: float = 1e-7
    t_end: float = 1.0
    checkpoint_every: int = 10
    n_points: int = 32
    seed: int = 0
    adaptive: bool = True
    substeps: Optional[int] = None
    cfl: float = 0.8
    growth_window: int = 10

    def __post_init__(self):
        if self.formulation == "closed_form" and not isinstance(self.model, HopfModel):
            raise ContractViolation("closed_form formulation needs a Hopf model")
        if self.formulation in ("tensor", "potential") and not isinstance(self.model, TorusModel):
            raise ContractViolation(f"{self.formulation} formulation needs a torus model")
        if not 0 < self.dt_min < self.dt0:
            raise ContractViolation("need 0 < dt_min < dt0")
        if self.t_end <= 0:
            raise ContractViolation("t_end must be positive")


@dataclass
class Trajectory:
    config: FlowConfig
    rows: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    termination: str = ""
    label: str = ""
    substeps: int = 1
    dt_final: float = float("nan")

    @property
    def formulation(self):
        return self.config.formulation

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    @property
    def times(self):
        return self.column("t")

    @property
    def t_final(self):
        return self.rows[-1]["t"]

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([format_float(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.csv_text())


def format_float(x):
    return f"{x:.17g}"


def _monotone_tail(values, k):
    tail = np.asarray(values[-(k + 1):])
    return len(tail) >= k + 1 and bool(np.all(np.diff(tail) > 0))


def initial_state(cfg: FlowConfig) -> FlowState:
    if cfg.formulation == "closed_form":
        return initial_closed_form_state(cfg.model, cfg.n_points, cfg.seed)
    return initial_grid_state(cfg.model, cfg.N, cfg.formulation)


def run_flow(cfg: FlowConfig) -> Trajectory:
    """Integrate until ``t_end``, positivity loss, or step underflow.

    Adaptive policy: after each accepted step the next ``dt`` is halved when
    the min metric eigenvalue falls below 10 times its last decrement; a step
    that loses positivity is retried with half the step. Falling below
    ``dt_min`` ends the run with ``step_underflow``.
    """
    state = initial_state(cfg)
    step = STEPPERS[cfg.formulation]
    substeps = 1
    if cfg.formulation != "closed_form":
        substeps = cfg.substeps or stable_substeps(state, cfg.dt0, cfg.cfl)
    traj = Trajectory(cfg, substeps=substeps)
    traj.rows.append(diagnostics(state))
    traj.checkpoints.append(state)

    dt = cfg.dt0
    lam_prev = traj.rows[-1]["min_eig"]
    n_steps = 0
    while True:
        if state.t >= cfg.t_end - 1e-12 * max(1.0, cfg.t_end):
            traj.termination = "reached_t_end"
            break
        h = min(dt, cfg.t_end - state.t)
        try:
            new = step(state, h, substeps)
        except PositivityLoss as exc:
            if not cfg.adaptive:
                traj.termination = "positivity_loss"
                log.info("positivity lost: %s", exc)
                break
            dt /= 2
            if dt < cfg.dt_min:
                traj.termination = "step_underflow"
                break
            continue
        state = new
        n_steps += 1
        row = diagnostics(state)
        traj.rows.append(row)
        if n_steps % cfg.checkpoint_every == 0:
            traj.checkpoints.append(state)
        lam = row["min_eig"]
        decrement = lam_prev - lam
        lam_prev = lam
        if cfg.adaptive and decrement > 0 and lam < 10 * decrement:
            dt /= 2
            if dt < cfg.dt_min:
                traj.termination = "step_underflow"
                break
    if traj.checkpoints[-1] is not state:
        traj.checkpoints.append(state)
    traj.dt_final = dt
    if traj.termination == "reached_t_end":
        traj.label = "completed"
    elif _monotone_tail(traj.column("sup_R"), cfg.growth_window):
        traj.label = "curvature_blowup"
    else:
        traj.label = "resolution_failure"
    log.info("%s run ended: %s (%s) at t=%.17g", cfg.formulation, traj.termination, traj.label, state.t)
    return traj


def determinant_bound_holds(traj: Trajectory, rtol=1e-8):
    """Check sup|phidot(t)| <= sup|phidot(0)| + C_R t with C_R the running sup |R|."""
    t = traj.times
    pd = traj.column("sup_abs_phidot")
    cr = np.maximum.accumulate(np.maximum(np.abs(traj.column("sup_R")), np.abs(traj.column("inf_R"))))
    bound = pd[0] + cr * t
    return bool(np.all(pd <= bound * (1 + rtol) + 1e-12))


# -- comparison and identities ----------------------------------------------------


@dataclass
class DeviationReport:
    times: np.ndarray
    deviations: np.ndarray
    tolerance: float

    @property
    def max_deviation(self):
        return float(np.max(self.deviations))

    @property
    def passed(self):
        return self.max_deviation < self.tolerance


def cross_validate(tr_a: Trajectory, tr_b: Trajectory, tol=None, C=10.0):
    """Sup-norm deviation of the metrics at matching checkpoints.

    Default tolerance is ``C (h^4 + dt^4)``; C = 10 is calibrated on the
    n = 1 cosine torus, where the ratio deviation / (h^4 + dt^4) stays near 4
    for N = 32, 64, 128.
    """
    ca, cb = tr_a.checkpoints, tr_b.checkpoints
    if len(ca) != len(cb):
        raise ContractViolation("trajectories have different checkpoint counts")
    ta = np.array([s.t for s in ca])
    tb = np.array([s.t for s in cb])
    if not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ContractViolation("checkpoint times differ")
    if ca[0].grid != cb[0].grid:
        raise ContractViolation("trajectories use different grids")
    devs = np.array([np.max(np.abs(a.metric_values() - b.metric_values())) for a, b in zip(ca, cb)])
    if tol is None:
        h = ca[0].grid.h if ca[0].grid is not None else 0.0
        tol = C * (h**4 + tr_a.config.dt0**4)
    return DeviationReport(ta, devs, tol)


def _time_derivative(f, t, h):
    """Richardson-extrapolated 4th-order central difference (6th order overall)."""

    def d(step):
        return (f(t - 2 * step) - 8 * f(t - step) + 8 * f(t + step) - f(t + 2 * step)) / (12 * step)

    return (16 * d(h / 2) - d(h)) / 15


def closed_form_time_step(model: HopfModel, t):
    return min(1e-3, (hopf_singular_time(model) - t) * 1e-2)


def phi_dot_identity_residual(traj: Trajectory):
    """sup |d(phidot)/dt + R| per checkpoint interval (grid) or per checkpoint (closed form)."""
    cps = traj.checkpoints
    if len(cps) < 3:
        raise ContractViolation("need at least 3 checkpoints")
    if traj.formulation == "closed_form":
        model = cps[0].model
        out = []
        for s in cps[1:]:
            if s.t >= hopf_singular_time(model):
                continue
            g0 = hopf_metric(model)(s.points)

            def theta(t, pts=s.points, g0=g0):
                return kernel.logdet(hopf_exact_flow(model, t, backward=True)(pts)) - kernel.logdet(g0)

            rate = _time_derivative(theta, s.t, closed_form_time_step(model, s.t))
            _, _, R = curvature_fields(s)
            out.append(float(np.max(np.abs(rate + R))))
        return np.array(out)
    Rs = [curvature_fields(s)[2] for s in cps]
    res = []
    for a, b, Ra, Rb in zip(cps[:-1], cps[1:], Rs[:-1], Rs[1:]):
        rate = (b.phidot - a.phidot) / (b.t - a.t)
        res.append(float(np.max(np.abs(rate + 0.5 * (Ra + Rb)))))
    return np.array(res)


# -- checkpoint files ---------------------------------------------------------------


def save_checkpoint(state: FlowState, path):
    """Write a state to a self-describing ``.npz`` file (bit-exact round trip)."""
    meta = {"t": state.t.hex() if isinstance(state.t, float) else float(state.t).hex(), "formulation": state.formulation}
    arrays = {}
    if state.grid is not None:
        meta["grid"] = {"n": state.grid.n, "N": state.grid.N, "periods": [p.hex() for p in state.grid.periods]}
    if state.model is not None:
        meta["model"] = {"n": state.model.n, "alpha_modulus": float(state.model.alpha_modulus).hex()}
    for name in ("metric", "phi", "phidot", "points"):
        val = getattr(state, name)
        if val is not None:
            arrays[name] = val
    if state.reference is not None:
        arrays["ref_g0"] = state.reference.g0
        arrays["ref_ric0"] = state.reference.ric0
        arrays["ref_logdet0"] = state.reference.logdet0
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> FlowState:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        arrays = {k: data[k] for k in data.files if k != "meta"}
    grid = None
    if "grid" in meta:
        gm = meta["grid"]
        grid = TorusGrid(gm["n"], gm["N"], tuple(float.fromhex(p) for p in gm["periods"]))
    model = None
    if "model" in meta:
        mm = meta["model"]
        model = HopfModel(mm["n"], float.fromhex(mm["alpha_modulus"]))
    ref = None
    if "ref_g0" in arrays:
        ref = Reference(arrays.pop("ref_g0"), arrays.pop("ref_ric0"), arrays.pop("ref_logdet0"))
    return FlowState(
        t=float.fromhex(meta["t"]),
        formulation=meta["formulation"],
        grid=grid,
        model=model,
        reference=ref,
        **arrays,
    )
