"""Blow-up detection and characterization along flow trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import grid as gridops
from . import kernel
from .errors import ConfigError, ContractViolation
from .flow import Trajectory, _time_derivative, closed_form_time_step, curvature_fields
from .models import hopf_exact_flow, hopf_singular_time

TYPE_I_BAND = (0.8, 1.2)
LOW_CONFIDENCE_RMS = 1e-2


@dataclass
class ScalarSeries:
    t: np.ndarray
    sup_R: np.ndarray
    inf_R: np.ndarray
    monotone_tail: bool


def sup_scalar_series(traj: Trajectory, tail=10) -> ScalarSeries:
    if len(traj.rows) < 2:
        raise ContractViolation("need at least 2 rows")
    sup = traj.column("sup_R")
    last = np.diff(sup[-(tail + 1):])
    return ScalarSeries(traj.times, sup, traj.column("inf_R"), bool(len(last) == tail and np.all(last > 0)))


@dataclass
class BlowupFit:
    T_fit: float
    k: float
    C: float
    residual: float
    window: tuple
    n_samples: int
    low_confidence: bool = False

    @property
    def classification(self):
        lo, hi = TYPE_I_BAND
        return "Type I" if lo <= self.k <= hi else "undetermined"

    def as_dict(self):
        return {
            "T_fit": self.T_fit,
            "k": self.k,
            "C": self.C,
            "residual": self.residual,
            "t_lo": self.window[0],
            "t_hi": self.window[1],
            "n_samples": self.n_samples,
            "low_confidence": self.low_confidence,
            "classification": self.classification,
        }


def fit_blowup(t, y, window=None, min_samples=8) -> BlowupFit:
    """Least-squares fit of ``log y = log C - k log(T - t)``.

    ``T`` is started from the last sample time plus the zero crossing of the
    linear extrapolation of ``1/y``; for fixed ``T`` the model is linear in
    ``(log C, k)``, which are solved for inside the residual so the outer
    solve is effectively one-dimensional.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if window is not None:
        lo, hi = window
        sel = (t >= lo) & (t <= hi)
        t, y = t[sel], y[sel]
    if len(t) < min_samples:
        raise ContractViolation(f"need at least {min_samples} samples in the window, got {len(t)}")
    if np.any(y <= 0):
        raise ContractViolation("series must be strictly positive on the window")
    if np.any(np.diff(t) <= 0) or np.any(np.diff(y) <= 0):
        raise ContractViolation("series must be strictly increasing on the window")
    t_lo, t_hi = float(t[0]), float(t[-1])
    span = t_hi - t_lo
    logy = np.log(y)

    inv = 1.0 / y
    slope = (inv[-1] - inv[-2]) / (t[-1] - t[-2])
    gap0 = inv[-1] / -slope if slope < 0 else span
    gap0 = min(max(gap0, 1e-6 * span), 1e3 * span)

    def linear_fit(gap):
        x = -np.log(t_hi + gap - t)
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
        return coef, A @ coef - logy

    # optimize log(T - t_hi) so that T stays beyond the window
    res = optimize.least_squares(
        lambda u: linear_fit(np.exp(u[0]))[1],
        x0=[np.log(gap0)],
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    gap = float(np.exp(res.x[0]))
    coef, r = linear_fit(gap)
    rms = float(np.sqrt(np.mean(r**2)))
    with np.errstate(over="ignore"):
        C = float(np.exp(coef[0]))
    return BlowupFit(
        T_fit=t_hi + gap,
        k=float(coef[1]),
        C=C,
        residual=rms,
        window=(t_lo, t_hi),
        n_samples=len(t),
        low_confidence=rms > LOW_CONFIDENCE_RMS or not np.isfinite(C),
    )


def tail_window(t, y, fraction=0.5, min_samples=8):
    """Window over the strictly increasing tail of ``y`` covering its last ``fraction`` in time.

    Returns None (fit everything) when that tail has fewer than ``min_samples`` points.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    start = len(y) - 1
    while start > 0 and y[start - 1] < y[start]:
        start -= 1
    if len(y) - start < min_samples:
        return None
    t0 = t[start] + (1 - fraction) * (t[-1] - t[start])
    idx = np.nonzero(t >= t0)[0]
    if len(idx) < min_samples:
        idx = np.arange(max(start, len(t) - min_samples), len(t))
    return float(t[idx[0]]), float(t[-1])


def blowup_window(traj: Trajectory, fraction=0.5, min_samples=8):
    return tail_window(traj.times, traj.column("sup_R"), fraction, min_samples)


def fit_trajectory(traj: Trajectory, window=None) -> BlowupFit:
    if window is None:
        window = blowup_window(traj)
    return fit_blowup(traj.times, traj.column("sup_R"), window)


# -- evolution of R ------------------------------------------------------------


def hopf_scalar_evolution_residual(model, z, t):
    """|dR/dt - |Ric^C|^2_g| at points z on the exact Hopf line.

    R is spatially constant along this line (see :func:`hopf_scalar_spread`),
    so the Laplacian term drops out. dR/dt is a Richardson time difference of
    the numerically evaluated scalar curvature.
    """
    z = np.asarray(z, dtype=complex)
    field_ = hopf_exact_flow(model, t)
    g = field_(z)
    ric = kernel.chern_ricci(field_, z, "logdet")
    rate = _time_derivative(
        lambda s: kernel.chern_scalar(hopf_exact_flow(model, s, backward=True), z),
        t,
        closed_form_time_step(model, t),
    )
    return np.abs(rate - kernel.norm_sq(g, ric).real)


def hopf_scalar_spread(model, z, t):
    """max R - min R over the points z, which vanishes when R is spatially constant."""
    r = kernel.chern_scalar(hopf_exact_flow(model, t), np.asarray(z, dtype=complex))
    return float(np.max(r) - np.min(r))


def _hopf_scalar_evolution(traj):
    model = traj.checkpoints[0].model
    return np.array(
        [
            float(np.max(hopf_scalar_evolution_residual(model, s.points, s.t)))
            for s in traj.checkpoints
            if s.t < hopf_singular_time(model)
        ]
    )


def scalar_evolution_residual(traj: Trajectory):
    """sup |dR/dt - Delta R - |Ric^C|^2|, with Delta f = g^{i jbar} d_i d_jbar f.

    Grid trajectories use a 5-point central difference in time at interior
    checkpoints with evenly spaced neighbours, and a midpoint difference with
    the averaged right-hand side elsewhere. Closed-form Hopf trajectories
    differentiate the exact family in time at each checkpoint and use
    Delta R = 0.
    """
    if len(traj.checkpoints) < 3:
        raise ContractViolation("need at least 3 checkpoints")
    if traj.formulation == "closed_form":
        return _hopf_scalar_evolution(traj)
    rhs, Rs = [], []
    for s in traj.checkpoints:
        G, ric, R = curvature_fields(s)
        ginv = kernel.inverse(G)
        lap = gridops.laplacian(s.grid, G, R, ginv).real
        rhs.append(lap + kernel.norm_sq(G, ric, ginv).real)
        Rs.append(R)
    t = np.array([s.t for s in traj.checkpoints])
    central = [k for k in range(2, len(t) - 2) if _evenly_spaced(t[k - 2 : k + 3])]
    if central:
        out = []
        for k in central:
            dt = t[k + 1] - t[k]
            rate = (Rs[k - 2] - 8 * Rs[k - 1] + 8 * Rs[k + 1] - Rs[k + 2]) / (12 * dt)
            out.append(float(np.max(np.abs(rate - rhs[k]))))
        return np.array(out)
    out = []
    for k in range(len(t) - 1):
        rate = (Rs[k + 1] - Rs[k]) / (t[k + 1] - t[k])
        out.append(float(np.max(np.abs(rate - 0.5 * (rhs[k] + rhs[k + 1])))))
    return np.array(out)


def _evenly_spaced(t, rtol=1e-9):
    d = np.diff(t)
    return bool(np.all(np.abs(d - d[0]) <= rtol * d[0]))


# -- Q diagnostics ---------------------------------------------------------------


@dataclass
class QSeries:
    t: np.ndarray
    q1_min: np.ndarray
    q1_max: np.ndarray
    q2_min: np.ndarray
    q2_max: np.ndarray
    C_tilde: float
    B: float


def default_C_tilde(traj: Trajectory):
    """2 + the determinant-bound projection of sup |phi| at the final time."""
    t_end = traj.t_final
    c_r = max(np.max(np.abs(traj.column("sup_R"))), np.max(np.abs(traj.column("inf_R"))))
    return 2.0 + traj.rows[0]["sup_abs_phidot"] * t_end + 0.5 * c_r * t_end**2


def q_diagnostics(traj: Trajectory, C_tilde=None, B=1.0) -> QSeries:
    """Per-checkpoint ranges of Q1 = t phidot - phi - n t and
    Q2 = log tr_{g0} g - phi + 1/(phi + C~) + B Q1."""
    if C_tilde is None:
        C_tilde = default_C_tilde(traj)
    cps = traj.checkpoints
    n = cps[0].n
    rows = []
    for s in cps:
        G = s.metric_values()
        g0 = s.reference.g0 if s.reference is not None else _closed_form_g0(s)
        if np.any(s.phi + C_tilde < 1):
            raise ConfigError(f"q.C_tilde: phi + C_tilde < 1 at t={s.t!r}; increase C_tilde")
        q1 = s.t * s.phidot - s.phi - n * s.t
        tr = kernel.trace_with(g0, G).real
        q2 = np.log(tr) - s.phi + 1.0 / (s.phi + C_tilde) + B * q1
        rows.append((s.t, q1.min(), q1.max(), q2.min(), q2.max()))
    a = np.array(rows)
    return QSeries(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], float(C_tilde), float(B))


def _closed_form_g0(s):
    from .models import hopf_metric

    return hopf_metric(s.model)(s.points)


# -- maximal time ------------------------------------------------------------------


def maximal_time_proxy(g0, ric0, tol=1e-10):
    """Largest t with g0 - t ric0 positive at every sample (psi = 0 proxy for T).

    Bisection on the pointwise minimum eigenvalue; returns ``inf`` when ric0
    has no positive direction anywhere.
    """
    g0 = np.asarray(g0)
    ric0 = np.asarray(ric0)
    ok, _ = kernel.positivity(g0)
    if not np.all(ok):
        raise ContractViolation("initial metric must be positive")

    def positive(t):
        return bool(np.all(kernel.positivity(g0 - t * ric0)[0]))

    if np.all(-kernel.min_eigenvalue(-ric0) <= 0):
        return float("inf")
    lo, hi = 0.0, 1.0
    while positive(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- singular locus ---------------------------------------------------------------------


@dataclass
class LocusMask:
    mask: np.ndarray
    threshold: float
    first_exceedance: np.ndarray
    shape: tuple = field(default=())

    @property
    def count(self):
        return int(np.count_nonzero(self.mask))


def singular_locus(traj: Trajectory, threshold) -> LocusMask:
    """Points whose running max |R| exceeds ``threshold`` before termination."""
    cps = traj.checkpoints
    return locus_from_fields([s.t for s in cps], [curvature_fields(s)[2] for s in cps], threshold)


def locus_from_fields(times, R_fields, threshold) -> LocusMask:
    Rs = [np.abs(np.asarray(R)) for R in R_fields]
    if threshold <= np.max(Rs[0]):
        raise ContractViolation("threshold must exceed sup |R(0)|")
    first = np.full(Rs[0].shape, np.inf)
    for t, R in zip(times, Rs):
        hit = (R > threshold) & np.isinf(first)
        first[hit] = t
    mask = np.isfinite(first)
    return LocusMask(mask, float(threshold), first, mask.shape)


# -- report serialization -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def format_report(values: dict, mask: LocusMask | None = None):
    """Key/value lines, then an optional ``[mask]`` bitmap block."""
    lines = [f"{k} = {_fmt(v)}" for k, v in values.items()]
    if mask is not None:
        m = np.atleast_2d(mask.mask.reshape(-1, mask.mask.shape[-1]) if mask.mask.ndim else mask.mask)
        lines.append(f"locus.threshold = {_fmt(mask.threshold)}")
        lines.append(f"locus.count = {mask.count}")
        lines.append(f"locus.shape = {','.join(str(s) for s in mask.mask.shape)}")
        lines.append("[mask]")
        lines.extend("".join("1" if b else "0" for b in row) for row in m)
        lines.append("[/mask]")
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of :func:`format_report`: (values, mask array or None)."""
    values, rows, in_mask = {}, [], False
    for line in text.splitlines():
        if line == "[mask]":
            in_mask = True
        elif line == "[/mask]":
            in_mask = False
        elif in_mask:
            rows.append([c == "1" for c in line])
        elif "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            values[k] = v
    mask = None
    if rows:
        shape = tuple(int(s) for s in values["locus.shape"].split(","))
        mask = np.array(rows, dtype=bool).reshape(shape)
    return values, mask
