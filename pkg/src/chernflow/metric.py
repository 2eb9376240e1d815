"""Coordinate domains, metric fields and Wirtinger derivatives.

Points are complex arrays of shape ``(..., n)``. Real coordinates are ordered
``[x_1, ..., x_n, y_1, ..., y_n]`` with ``z_k = x_k + i y_k``, and the
Wirtinger operators are ``d/dz = (d/dx - i d/dy) / 2`` and
``d/dzbar = (d/dx + i d/dy) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import DomainError

# 4th-order central weights, offsets -2..2
_D1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D2_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class Torus:
    """Flat torus C^n / lattice, with one real period per real axis."""

    n: int
    periods: tuple = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be >= 1")
        if self.periods is None:
            object.__setattr__(self, "periods", (1.0,) * (2 * self.n))
        elif np.isscalar(self.periods):
            object.__setattr__(self, "periods", (float(self.periods),) * (2 * self.n))
        else:
            object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if len(self.periods) != 2 * self.n:
            raise ValueError("need one period per real axis (2n)")

    def check_stencil(self, z, reach):
        # periodic: every stencil stays in-domain via wraparound
        return None

    def wrap(self, z):
        x = to_real(z)
        L = np.asarray(self.periods)
        return from_real(np.mod(x, L))


@dataclass(frozen=True)
class HopfAnnulus:
    """Fundamental annulus of the Hopf manifold (C^n minus 0) / (z ~ alpha z).

    Only ``|alpha|`` matters for the geometry; ``phases`` optionally record
    the arguments of the individual ``alpha_k``.
    """

    n: int
    alpha_modulus: float
    phases: tuple = None

    def __post_init__(self):
        if self.alpha_modulus <= 0 or self.alpha_modulus == 1.0:
            raise ValueError("|alpha| must be positive and different from 1")
        if self.phases is None:
            object.__setattr__(self, "phases", (0.0,) * self.n)

    @property
    def alpha(self):
        return self.alpha_modulus * np.exp(1j * np.asarray(self.phases))

    @property
    def radii(self):
        a = self.alpha_modulus
        return (1.0, a) if a > 1 else (a, 1.0)

    def check_stencil(self, z, reach):
        r = np.sqrt(np.sum(np.abs(np.asarray(z)) ** 2, axis=-1))
        if np.any(r <= reach):
            raise DomainError(
                f"stencil of reach {reach:.3g} reaches the origin (min r = {np.min(r):.3g}); "
                "no scaling identification covers z = 0"
            )

    def contains(self, z):
        r = np.sqrt(np.sum(np.abs(np.asarray(z)) ** 2, axis=-1))
        lo, hi = self.radii
        return (r >= lo) & (r < hi)


Domain = Union[Torus, HopfAnnulus]


class Jet(NamedTuple):
    """Metric and its first/mixed second Wirtinger derivatives.

    ``d[..., i, j, l] = d_i g_{j lbar}``, ``dbar[..., i, j, l] = d_ibar g_{j lbar}``,
    ``ddbar[..., i, j, k, l] = d_i d_jbar g_{k lbar}``.
    """

    g: np.ndarray
    d: np.ndarray
    dbar: np.ndarray
    ddbar: np.ndarray


def to_real(z):
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=-1)


def from_real(x):
    x = np.asarray(x)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def _real_directions(n):
    """Complex displacement of a unit step along each of the 2n real axes."""
    e = np.zeros((2 * n, n), dtype=complex)
    e[np.arange(n), np.arange(n)] = 1.0
    e[n + np.arange(n), np.arange(n)] = 1.0j
    return e


def _eval_offsets(f, p, offsets):
    """Evaluate f at p + offsets; offsets has shape (*S, n), result batch + S + out."""
    pts = p[(...,) + (None,) * (offsets.ndim - 1) + (slice(None),)] + offsets
    return np.asarray(f(pts))


def real_gradient(f, p, h):
    """4th-order central differences of f along all 2n real axes.

    Returns an array of shape ``batch + (2n,) + out``.
    """
    p = np.asarray(p, dtype=complex)
    n = p.shape[-1]
    e = _real_directions(n)
    offsets = (_D1_OFFSETS[:, None, None] * h) * e[None]  # (4, 2n, n)
    vals = _eval_offsets(f, p, offsets)
    nb = p.ndim - 1
    return np.tensordot(_D1_WEIGHTS, np.moveaxis(vals, nb, 0), axes=(0, 0)) / h


def _hessian_stencil(n, h):
    m = 2 * n
    e = _real_directions(n)
    offsets = np.zeros((m, m, 16, n), dtype=complex)
    weights = np.zeros((m, m, 16))
    for a in range(m):
        for b in range(m):
            if a == b:
                offsets[a, a, :5] = _D2_OFFSETS[:, None] * h * e[a]
                weights[a, a, :5] = _D2_WEIGHTS
            else:
                k = 0
                for s, ws in zip(_D1_OFFSETS, _D1_WEIGHTS):
                    for q, wq in zip(_D1_OFFSETS, _D1_WEIGHTS):
                        offsets[a, b, k] = (s * e[a] + q * e[b]) * h
                        weights[a, b, k] = ws * wq
                        k += 1
    return offsets, weights / h**2


def real_hessian(f, p, h):
    """4th-order Hessian of f in the 2n real coordinates, shape ``batch + (2n, 2n) + out``."""
    p = np.asarray(p, dtype=complex)
    n = p.shape[-1]
    offsets, weights = _hessian_stencil(n, h)
    vals = _eval_offsets(f, p, offsets)  # batch + (2n, 2n, 16) + out
    nb = p.ndim - 1
    out_nd = vals.ndim - nb - 3
    w = weights.reshape(weights.shape + (1,) * out_nd)
    return np.sum(vals * w, axis=nb + 2)


def _richardson(op, f, p, h):
    coarse = op(f, p, h)
    fine = op(f, p, h / 2)
    return (16.0 * fine - coarse) / 15.0


def wirtinger_from_gradient(grad, n, axis):
    gx = np.take(grad, np.arange(n), axis=axis)
    gy = np.take(grad, np.arange(n, 2 * n), axis=axis)
    return 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)


def ddbar_from_hessian(hess, n, axis):
    """d_i d_jbar from a real Hessian whose two real axes start at ``axis``."""
    hess = np.moveaxis(hess, (axis, axis + 1), (0, 1))
    xx = hess[:n, :n]
    yy = hess[n:, n:]
    xy = hess[:n, n:]
    yx = hess[n:, :n]
    out = 0.25 * (xx + yy + 1j * (xy - yx))
    return np.moveaxis(out, (0, 1), (axis, axis + 1))


def wirtinger_derivatives(f, p, order=1, h=1e-3, richardson=False, domain=None):
    """Holomorphic and antiholomorphic partials of ``f`` by central stencils.

    Parameters
    ----------
    f : callable
        Maps points of shape ``(..., n)`` to values of shape ``(...) + out``.
    p : array_like
        Complex point(s), shape ``(..., n)``.
    order : {1, 2}
        1 returns ``(df, dbarf)``, each of shape ``batch + (n,) + out``;
        2 returns ``ddbar f`` of shape ``batch + (n, n) + out`` with
        ``[..., i, j] = d_i d_jbar f``.
    h : float
        Stencil step in each real coordinate.
    richardson : bool
        Combine steps ``h`` and ``h/2`` to cancel the leading h^4 error.
    domain : Torus or HopfAnnulus, optional
        Used to reject stencils that leave the domain.
    """
    if h <= 0:
        raise ValueError("stencil step must be positive")
    p = np.asarray(p, dtype=complex)
    n = p.shape[-1]
    nb = p.ndim - 1
    if domain is not None:
        domain.check_stencil(p, 2.0 * np.sqrt(2.0) * h)
    if order == 1:
        grad = _richardson(real_gradient, f, p, h) if richardson else real_gradient(f, p, h)
        return wirtinger_from_gradient(grad, n, nb)
    if order == 2:
        hess = _richardson(real_hessian, f, p, h) if richardson else real_hessian(f, p, h)
        return ddbar_from_hessian(hess, n, nb)
    raise ValueError("order must be 1 or 2")


@dataclass(frozen=True)
class MetricField:
    """A Hermitian metric given as a callable on complex coordinates.

    ``evaluator`` maps points ``(..., n)`` to matrices ``(..., n, n)`` whose
    entry ``(j, l)`` is ``g_{j lbar}``. ``closed_jet`` (optional) returns the
    exact ``(g, d g, d dbar g)``; it backs ``derivative_mode="closed_form"``.
    """

    domain: Domain
    evaluator: Callable[[np.ndarray], np.ndarray]
    closed_jet: Callable | None = None
    derivative_mode: str = "closed_form"
    h: float = 1e-3
    richardson: bool = False
    name: str = "metric"

    def __post_init__(self):
        if self.derivative_mode not in ("closed_form", "stencil"):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.derivative_mode == "closed_form" and self.closed_jet is None:
            raise ValueError(f"{self.name}: closed_form mode needs a closed_jet")

    @property
    def n(self):
        return self.domain.n

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=complex))

    def stencil(self, h=1e-3, richardson=False):
        return replace(self, derivative_mode="stencil", h=h, richardson=richardson)

    def closed_form(self):
        return replace(self, derivative_mode="closed_form")

    def jet(self, z) -> Jet:
        z = np.asarray(z, dtype=complex)
        if self.derivative_mode == "closed_form":
            g, d, ddbar = self.closed_jet(z)
            dbar = np.conj(np.swapaxes(d, -1, -2))
            return Jet(g, d, dbar, ddbar)
        g = self.evaluator(z)
        d, dbar = wirtinger_derivatives(
            self.evaluator, z, 1, self.h, self.richardson, self.domain
        )
        ddbar = wirtinger_derivatives(self.evaluator, z, 2, self.h, self.richardson, self.domain)
        return Jet(g, d, dbar, ddbar)
