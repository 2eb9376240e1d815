"""Uniform periodic grids on the torus and 4th-order Wirtinger stencils on them.

Grid arrays put the 2n real grid axes first (ordered x_1..x_n, y_1..y_n) and
component axes last, so the batch-broadcasting jet algebra in
:mod:`chernflow.kernel` applies unchanged.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernel
from .metric import Jet, MetricField, Torus, from_real, to_real


@dataclass(frozen=True)
class TorusGrid:
    n: int
    N: int
    periods: tuple = None

    def __post_init__(self):
        if self.N < 4:
            # at N = 4 the +-2 offsets coincide under wraparound, which is still consistent
            raise ValueError("grid needs N >= 4")
        object.__setattr__(self, "periods", Torus(self.n, self.periods).periods)

    @property
    def ndim(self):
        return 2 * self.n

    @property
    def shape(self):
        return (self.N,) * self.ndim

    @property
    def spacing(self):
        return tuple(L / self.N for L in self.periods)

    @property
    def h(self):
        return min(self.spacing)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def coordinates(self):
        """Real coordinates, shape grid + (2n,)."""
        axes = [np.arange(self.N) * s for s in self.spacing]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def points(self):
        return from_real(self.coordinates())

    def refine(self):
        return TorusGrid(self.n, 2 * self.N, self.periods)


def d1(f, axis, h):
    """4th-order central first derivative along a periodic grid axis."""
    return (
        np.roll(f, 2, axis) - 8.0 * np.roll(f, 1, axis) + 8.0 * np.roll(f, -1, axis) - np.roll(f, -2, axis)
    ) / (12.0 * h)


def d2(f, axis, h):
    """4th-order central second derivative along a periodic grid axis."""
    return (
        -np.roll(f, 2, axis)
        + 16.0 * np.roll(f, 1, axis)
        - 30.0 * f
        + 16.0 * np.roll(f, -1, axis)
        - np.roll(f, -2, axis)
    ) / (12.0 * h * h)


def grid_wirtinger(grid: TorusGrid, f):
    """(d_i f, d_ibar f), each of shape grid + (n,) + comp."""
    n = grid.n
    sp = grid.spacing
    dx = [d1(f, a, sp[a]) for a in range(n)]
    dy = [d1(f, n + a, sp[n + a]) for a in range(n)]
    d = np.stack([0.5 * (dx[a] - 1j * dy[a]) for a in range(n)], axis=grid.ndim)
    dbar = np.stack([0.5 * (dx[a] + 1j * dy[a]) for a in range(n)], axis=grid.ndim)
    return d, dbar


def grid_real_hessian(grid: TorusGrid, f):
    m = grid.ndim
    sp = grid.spacing
    first = [d1(f, a, sp[a]) for a in range(m)]
    rows = []
    for a in range(m):
        row = []
        for b in range(m):
            row.append(d2(f, a, sp[a]) if a == b else d1(first[b], a, sp[a]))
        rows.append(np.stack(row, axis=m))
    return np.stack(rows, axis=m)


def grid_ddbar(grid: TorusGrid, f):
    """d_i d_jbar f, shape grid + (n, n) + comp (compact stencil on the diagonal axes)."""
    n = grid.n
    sp = grid.spacing
    out = None
    for i, j in itertools.product(range(n), range(n)):
        xi, yi, xj, yj = i, n + i, j, n + j
        if i == j:
            xx = d2(f, xi, sp[xi])
            yy = d2(f, yi, sp[yi])
            mixed = 0.0
        else:
            xx = d1(d1(f, xj, sp[xj]), xi, sp[xi])
            yy = d1(d1(f, yj, sp[yj]), yi, sp[yi])
            mixed = d1(d1(f, yj, sp[yj]), xi, sp[xi]) - d1(d1(f, xj, sp[xj]), yi, sp[yi])
        val = 0.25 * (xx + yy + 1j * mixed)
        if out is None:
            out = np.zeros(grid.shape + (n, n) + np.shape(f)[grid.ndim:], dtype=complex)
        out[(slice(None),) * grid.ndim + (i, j)] = val
    return out


def grid_jet(grid: TorusGrid, G) -> Jet:
    d, dbar = grid_wirtinger(grid, G)
    return Jet(G, d, dbar, grid_ddbar(grid, G))


def ricci_logdet(grid: TorusGrid, G):
    """-d dbar log det g with the compact second-derivative stencils."""
    return -grid_ddbar(grid, kernel.logdet(G))


def ricci_trace(grid: TorusGrid, G, ginv=None):
    """Trace of the Chern curvature, R_{i jbar k}^k = -d_jbar Gamma^k_{ik}, by nested first-derivative stencils.

    The contraction over k is taken before the outer stencil; it is linear,
    so this equals contracting the full stencil curvature tensor.
    """
    if ginv is None:
        ginv = kernel.inverse(G)
    d, _ = grid_wirtinger(grid, G)
    contracted = np.einsum("...ikm,...mk->...i", d, ginv)  # Gamma^k_{ik}
    _, dbar = grid_wirtinger(grid, contracted)  # [..., j, i]
    return -np.swapaxes(dbar, -1, -2)


def curvature_grid(grid: TorusGrid, G):
    """Full Chern curvature R_{i jbar k}^l = -d_jbar Gamma^l_{ik} on the grid."""
    ginv = kernel.inverse(G)
    d, _ = grid_wirtinger(grid, G)
    gamma = np.einsum("...ijl,...lk->...ijk", d, ginv)
    _, dbar = grid_wirtinger(grid, gamma)  # [..., j, i, k, l]
    return -np.swapaxes(dbar, -4, -3)


def ricci(grid: TorusGrid, G, route="logdet"):
    if route == "logdet":
        return ricci_logdet(grid, G)
    if route == "trace":
        return ricci_trace(grid, G)
    raise ValueError(f"unknown Ricci route {route!r}")


def laplacian(grid: TorusGrid, G, f, ginv=None):
    """Complex Laplacian g^{i jbar} d_i d_jbar f of a scalar grid function."""
    if ginv is None:
        ginv = kernel.inverse(G)
    return np.einsum("...ji,...ij->...", ginv, grid_ddbar(grid, f))


def residuals(grid: TorusGrid, G):
    """(sup |d omega|, sup |d dbar omega|) on the grid."""
    jet = grid_jet(grid, G)
    return (
        float(np.max(np.abs(kernel.d_omega_components(jet)))),
        float(np.max(np.abs(kernel.ddbar_omega_components(jet)))),
    )


def volume(grid: TorusGrid, G):
    """int omega^n / n! = int det g (2^n dx dy)."""
    det = np.exp(kernel.logdet(G))
    return float(2**grid.n * grid.cell_volume * np.sum(det))


def _spectral_frequencies(N):
    k = np.fft.fftfreq(N, 1.0 / N)
    w = np.ones(N)
    if N % 2 == 0:
        # split the Nyquist mode symmetrically so interpolants of real data stay real
        k = np.append(k, N // 2)
        w = np.append(w, 0.5)
        w[N // 2] = 0.5
        k[N // 2] = -(N // 2)
    return k, w


def grid_metric_field(grid: TorusGrid, G, derivative_mode="stencil", h=1e-3) -> MetricField:
    """Trigonometric interpolant of grid samples as a callable metric field."""
    nd = grid.ndim
    coef = np.fft.fftn(np.asarray(G), axes=tuple(range(nd))) / grid.N**nd
    k, w = _spectral_frequencies(grid.N)
    if len(k) > grid.N:
        idx = np.append(np.arange(grid.N), grid.N // 2)
        for a in range(nd):
            coef = np.take(coef, idx, axis=a)
    letters = "abcdefgh"[:nd]
    spec = ",".join(f"...{c}" for c in letters) + f",{letters}ij->...ij"

    def ev(z):
        x = to_real(np.asarray(z, dtype=complex))
        factors = [
            w * np.exp(2j * np.pi * k * x[..., a, None] / grid.periods[a]) for a in range(nd)
        ]
        return np.einsum(spec, *factors, coef)

    return MetricField(Torus(grid.n, grid.periods), ev, derivative_mode=derivative_mode, h=h, name="grid_interp")
