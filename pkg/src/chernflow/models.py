"""Closed-form model geometries: Hopf manifolds and (perturbed) flat tori."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi

import numpy as np
from scipy import integrate

from .errors import ConfigError, SingularTimeError
from .metric import HopfAnnulus, MetricField, Torus, to_real

# -- Hopf manifolds -----------------------------------------------------------


@dataclass(frozen=True)
class HopfModel:
    n: int = 2
    alpha_modulus: float = 2.0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("model.n: Hopf model needs n >= 2")
        if not (self.alpha_modulus > 0 and self.alpha_modulus != 1.0):
            raise ConfigError("model.alpha: |alpha| must be positive and != 1")

    @property
    def domain(self):
        return HopfAnnulus(self.n, self.alpha_modulus)


def _hopf_family(z, a, b):
    """g = a delta/r^2 + b zbar_j z_l / r^4 and its exact Wirtinger jet."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    zb = np.conj(z)
    s = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None]
    eye = np.eye(n)
    outer = zb[..., :, None] * z[..., None, :]  # [j, l] = zbar_j z_l
    g = a * eye / s + b * outer / s**2

    s3 = s[..., None]
    # d[i, j, l] = d_i g_{j lbar}
    d = (
        -a * eye[None] * zb[..., :, None, None] / s3**2
        + b * zb[..., None, :, None] * eye[:, None, :] / s3**2
        - 2 * b * zb[..., :, None, None] * outer[..., None, :, :] / s3**3
    )

    s4 = s3[..., None]
    zi = zb[..., :, None, None, None]  # zbar_i
    zm = z[..., None, :, None, None]  # z_m
    zj = zb[..., None, None, :, None]  # zbar_j
    zl = z[..., None, None, None, :]  # z_l
    d_im = eye[:, :, None, None]
    d_jl = eye[None, None, :, :]
    d_jm = eye[None, :, :, None]
    d_il = eye[:, None, None, :]
    # ddbar[i, m, j, l] = d_i d_mbar g_{j lbar}
    ddbar = (
        -a * d_jl * (d_im / s4**2 - 2 * zi * zm / s4**3)
        + b * d_il * (d_jm / s4**2 - 2 * zj * zm / s4**3)
        - 2 * b * zl * (d_jm * zi / s4**3 + zj * d_im / s4**3 - 3 * zj * zi * zm / s4**4)
    )
    return g, d, ddbar


def hopf_ricci_matrix(n, z):
    """Ric^C(omega_H)_{i jbar} = (n/r^2)(delta_ij - zbar_i z_j / r^2)."""
    z = np.asarray(z, dtype=complex)
    s = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None]
    outer = np.conj(z)[..., :, None] * z[..., None, :]
    return n / s * (np.eye(n) - outer / s)


def hopf_metric(m: HopfModel) -> MetricField:
    return MetricField(
        domain=m.domain,
        evaluator=lambda z: _hopf_family(z, 1.0, 0.0)[0],
        closed_jet=lambda z: _hopf_family(z, 1.0, 0.0),
        name=f"hopf(n={m.n})",
    )


def _check_time(m, t, backward=False):
    if t < 0 and not backward:
        raise ValueError("time must be nonnegative")
    if t >= hopf_singular_time(m):
        raise SingularTimeError(f"t = {t!r} is not below the singular time 1/{m.n}")


def hopf_alpha_form(m: HopfModel, t):
    """omega_H - t Ric^C(omega_H) without any time check (for positivity probes)."""
    a, b = 1.0 - m.n * t, m.n * t
    return lambda z: _hopf_family(z, a, b)[0]


def hopf_exact_flow(m: HopfModel, t, backward=False) -> MetricField:
    """Exact Chern-Ricci flow line omega(t) = omega_H - t Ric^C(omega_H).

    The line stays positive for every t < 1/n; ``backward=True`` admits t < 0.
    """
    _check_time(m, t, backward)
    a, b = 1.0 - m.n * t, m.n * t
    return MetricField(
        domain=m.domain,
        evaluator=lambda z: _hopf_family(z, a, b)[0],
        closed_jet=lambda z: _hopf_family(z, a, b),
        name=f"hopf_flow(n={m.n}, t={t})",
    )


def hopf_flow_time_derivative(m: HopfModel, z):
    """d/dt g(t) along the exact line (independent of t)."""
    return -hopf_ricci_matrix(m.n, z)


def hopf_exact_scalar(m: HopfModel, t):
    _check_time(m, t)
    return (m.n - 1) / (1.0 / m.n - t)


def hopf_singular_time(m: HopfModel):
    return 1.0 / m.n


def hopf_theta(m: HopfModel, t):
    """log(det g(t) / det g(0)) = (n-1) log(1 - n t), spatially constant."""
    _check_time(m, t)
    return (m.n - 1) * np.log1p(-m.n * t)


def hopf_phi(m: HopfModel, t):
    """Potential with phi(0) = 0 and d/dt phi = theta; omega(t) = alpha_t exactly."""
    _check_time(m, t)
    u = 1.0 - m.n * t
    return -(m.n - 1) / m.n * (u * np.log(u) + m.n * t)


def hopf_volume(m: HopfModel, t):
    """Vol(M, g(t)) = int omega^n / n! over the fundamental annulus.

    The integrand is radial for the whole family, so this is a 1-d quadrature
    of ``det g(r e_1)`` against the sphere area.
    """
    _check_time(m, t)
    ev = hopf_alpha_form(m, t)
    n = m.n
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0

    def radial(r):
        return np.linalg.det(ev(r * e1)).real * r ** (2 * n - 1)

    lo, hi = m.domain.radii
    val, _ = integrate.quad(radial, lo, hi, epsabs=0, epsrel=1e-12, limit=200)
    sphere = 2 * pi**n / factorial(n - 1)
    return 2**n * sphere * val


def sample_hopf_points(m: HopfModel, k, rng):
    """k points with r uniform in the annulus and directions uniform on the sphere."""
    rng = np.random.default_rng(rng)
    lo, hi = m.domain.radii
    w = rng.normal(size=(k, m.n)) + 1j * rng.normal(size=(k, m.n))
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    r = rng.uniform(lo, hi, size=(k, 1))
    return r * w


def pullback_defect(g: MetricField, z, alpha):
    """max |g(alpha z)_{i jbar} alpha_i conj(alpha_j) - g(z)_{i jbar}|."""
    alpha = np.asarray(alpha, dtype=complex)
    z = np.asarray(z, dtype=complex)
    pulled = g(alpha * z) * alpha[:, None] * np.conj(alpha)[None, :]
    return float(np.max(np.abs(pulled - g(z))))


# -- tori ---------------------------------------------------------------------

_AXIS_NAMES = ("x", "y")


def parse_axis(name, n):
    """'x1' -> 0, 'y1' -> n, ... (1-based complex index)."""
    name = name.strip().lower()
    if len(name) < 2 or name[0] not in _AXIS_NAMES:
        raise ConfigError(f"model.perturbation: bad axis {name!r}")
    k = int(name[1:]) - 1
    if not 0 <= k < n:
        raise ConfigError(f"model.perturbation: axis {name!r} out of range for n={n}")
    return k if name[0] == "x" else n + k


@dataclass(frozen=True)
class FourierMode:
    """Hermitian coefficient matrix times cos(2 pi k.x / L + phase)."""

    coeff: np.ndarray
    wavevector: tuple
    phase: float = 0.0

    @classmethod
    def entry(cls, n, i, j, amplitude, wavevector, phase=0.0):
        """A_{i jbar} = amplitude * cos(...), mirrored to stay Hermitian (0-based i, j)."""
        c = np.zeros((n, n), dtype=complex)
        c[i, j] = amplitude
        c[j, i] = np.conj(amplitude)
        if i == j and np.imag(amplitude) != 0:
            raise ConfigError("model.perturbation: diagonal amplitude must be real")
        return cls(c, tuple(wavevector), phase)

    @classmethod
    def ddbar_exact(cls, n, amplitude, wavevector, periods, phase=0.0):
        """A = i d dbar (amplitude cos(...)): a Kahler perturbation of the flat metric."""
        kappa = _kappa(np.asarray(wavevector, float), np.asarray(periods, float), n)
        c = -amplitude * np.outer(kappa, np.conj(kappa))
        return cls(c, tuple(wavevector), phase)


def _kappa(k, periods, n):
    # d/dz_m of 2 pi k.x / L
    kx = k[:n] / periods[:n]
    ky = k[n:] / periods[n:]
    return pi * (kx - 1j * ky)


@dataclass(frozen=True)
class TorusModel:
    n: int = 1
    periods: tuple = None
    modes: tuple = field(default_factory=tuple)
    epsilon: float = 1.0

    @property
    def domain(self):
        return Torus(self.n, self.periods)

    @property
    def is_flat(self):
        return self.epsilon == 0 or len(self.modes) == 0


def _torus_family(model: TorusModel, z):
    z = np.asarray(z, dtype=complex)
    n = model.n
    L = np.asarray(model.domain.periods)
    x = to_real(z)
    batch = z.shape[:-1]
    g = np.broadcast_to(np.eye(n, dtype=complex), batch + (n, n)).copy()
    d = np.zeros(batch + (n, n, n), dtype=complex)
    ddbar = np.zeros(batch + (n, n, n, n), dtype=complex)
    for mode in model.modes:
        k = np.asarray(mode.wavevector, float)
        theta = 2 * pi * np.sum(k / L * x, axis=-1) + mode.phase
        c = model.epsilon * np.asarray(mode.coeff)
        kap = _kappa(k, L, n)
        cos, sin = np.cos(theta), np.sin(theta)
        g += cos[..., None, None] * c
        d += -sin[..., None, None, None] * kap[:, None, None] * c
        ddbar += -cos[..., None, None, None, None] * np.einsum("i,m,jl->imjl", kap, np.conj(kap), c)
    return g, d, ddbar


def _check_grid_size(n):
    return max(4, int(round(2e5 ** (1.0 / (2 * n)))))


def torus_metric(m: TorusModel, check_points=None) -> MetricField:
    """Periodic metric delta + eps * sum of Fourier modes; positivity checked on a grid."""
    from .kernel import positivity

    for mode in m.modes:
        if len(mode.wavevector) != 2 * m.n:
            raise ConfigError("model.perturbation: wavevector needs one entry per real axis")
        if np.max(np.abs(np.asarray(mode.coeff) - np.conj(np.asarray(mode.coeff).T))) > 0:
            raise ConfigError("model.perturbation: coefficient matrix must be Hermitian")
    field_ = MetricField(
        domain=m.domain,
        evaluator=lambda z: _torus_family(m, z)[0],
        closed_jet=lambda z: _torus_family(m, z),
        name=f"torus(n={m.n})",
    )
    if not m.is_flat:
        if check_points is None:
            from .grid import TorusGrid

            check_points = TorusGrid(m.n, _check_grid_size(m.n), m.domain.periods).points()
        ok, lam = positivity(field_(check_points))
        if not np.all(ok):
            raise ConfigError(
                f"model.perturbation: metric not positive (min eigenvalue {np.min(lam):.3g})"
            )
    return field_


def conformal_flat_metric(n, amplitude, wavevector, periods=None):
    """e^u delta with u = amplitude cos(2 pi k.x / L); stencil derivatives only."""
    dom = Torus(n, periods)
    L = np.asarray(dom.periods)
    k = np.asarray(wavevector, float)

    def ev(z):
        x = to_real(np.asarray(z, dtype=complex))
        u = amplitude * np.cos(2 * pi * np.sum(k / L * x, axis=-1))
        return np.exp(u)[..., None, None] * np.eye(n)

    return MetricField(dom, ev, derivative_mode="stencil", h=1e-3, name="conformal_flat")


def flat_torus(n=1, periods=None) -> TorusModel:
    return TorusModel(n=n, periods=periods)


def cosine_torus(n=1, amplitude=0.1, axis="x1", wavenumber=1, entry=(0, 0), periods=None):
    """Torus with a single entry perturbation A_{i jbar} = amplitude cos(2 pi k x_axis)."""
    k = [0] * (2 * n)
    k[parse_axis(axis, n)] = wavenumber
    mode = FourierMode.entry(n, entry[0], entry[1], amplitude, k)
    return TorusModel(n=n, periods=periods, modes=(mode,))
