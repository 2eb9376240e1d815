"""Chern connection, curvature, Ricci and scalar curvature of Hermitian metrics.

Index conventions (all arrays carry arbitrary leading batch axes):

* metric ``g[..., j, l] = g_{j lbar}``; inverse ``g^{k lbar} = inv(g)[..., l, k]``
* connection ``gamma[..., i, j, k] = Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}``
* curvature ``curv[..., i, j, k, l] = R_{i jbar k}^l = -d_jbar Gamma^l_{ik}``
* torsion ``T[..., i, j, k] = T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji}``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, SingularMetricError
from .metric import Jet, MetricField, wirtinger_derivatives

HERMITIAN_TOL = 1e-6
POSITIVITY_TOL = 1e-12


def _det_small(g):
    if g.shape[-1] == 1:
        return g[..., 0, 0]
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def inverse(g):
    g = np.asarray(g)
    n = g.shape[-1]
    scale = np.max(np.abs(g), axis=(-1, -2))
    if n <= 2:
        det = _det_small(g)
        if np.any(np.abs(det) <= 1e-14 * np.maximum(scale, 1e-300) ** n):
            raise SingularMetricError("metric matrix is not invertible")
        if n == 1:
            return 1.0 / g
        inv = np.empty_like(g, dtype=np.result_type(g, float))
        inv[..., 0, 0] = g[..., 1, 1]
        inv[..., 1, 1] = g[..., 0, 0]
        inv[..., 0, 1] = -g[..., 0, 1]
        inv[..., 1, 0] = -g[..., 1, 0]
        return inv / det[..., None, None]
    ev = np.linalg.eigvalsh(0.5 * (g + np.conj(np.swapaxes(g, -1, -2))))
    if np.any(np.min(np.abs(ev), axis=-1) <= 1e-14 * np.maximum(scale, 1e-300)):
        raise SingularMetricError("metric matrix is not invertible")
    return np.linalg.inv(g)


def logdet(g):
    """Real log det of positive Hermitian matrices."""
    g = np.asarray(g)
    if g.shape[-1] <= 2:
        det = _det_small(g)
        re = np.real(det)
        if np.any(~(re > 0)) or np.any(np.abs(np.imag(det)) > 1e-8 * re):
            raise SingularMetricError("det(g) <= 0: metric is not positive")
        return np.log(re)
    sign, la = np.linalg.slogdet(g)
    if np.any(np.abs(sign - 1.0) > 1e-8):
        raise SingularMetricError("det(g) <= 0: metric is not positive")
    return la


def min_eigenvalue(g):
    """Smallest eigenvalue of Hermitian matrices (closed form for n <= 2)."""
    g = np.asarray(g)
    n = g.shape[-1]
    if n == 1:
        return np.real(g[..., 0, 0])
    if n == 2:
        a, d = np.real(g[..., 0, 0]), np.real(g[..., 1, 1])
        half = 0.5 * (a - d)
        return 0.5 * (a + d) - np.sqrt(half * half + np.abs(g[..., 0, 1]) ** 2)
    return np.linalg.eigvalsh(g)[..., 0]


def hermitian_defect(m):
    m = np.asarray(m)
    return np.abs(m - np.conj(np.swapaxes(m, -1, -2)))


def hermitian_part(m, tol=HERMITIAN_TOL, what="matrix"):
    """Check conjugate symmetry to ``tol`` (relative), then symmetrize."""
    m = np.asarray(m)
    defect = np.max(hermitian_defect(m), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if defect > tol * scale:
        raise ContractViolation(f"{what} is not Hermitian (defect {defect:.3g})")
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


# -- jet algebra --------------------------------------------------------------


def gamma_from_jet(jet: Jet, ginv=None):
    if ginv is None:
        ginv = inverse(jet.g)
    return np.einsum("...ijl,...lk->...ijk", jet.d, ginv)


def curvature_from_jet(jet: Jet, ginv=None):
    """R_{i jbar k}^l = -d_jbar(d_i g g^{-1})_{kl}."""
    if ginv is None:
        ginv = inverse(jet.g)
    second = np.einsum("...ijkm,...ml->...ijkl", jet.ddbar, ginv)
    first = np.einsum("...ikm,...ma,...jab,...bl->...ijkl", jet.d, ginv, jet.dbar, ginv)
    return first - second


def lower_curvature(curv, g):
    """R_{i jbar k lbar} = g_{m lbar} R_{i jbar k}^m."""
    return np.einsum("...ijkm,...ml->...ijkl", curv, g)


def ricci_trace_from_jet(jet: Jet, ginv=None):
    if ginv is None:
        ginv = inverse(jet.g)
    low = lower_curvature(curvature_from_jet(jet, ginv), jet.g)
    return np.einsum("...lk,...ijkl->...ij", ginv, low)


def ricci_logdet_from_jet(jet: Jet, ginv=None):
    """-d_i d_jbar log det g via Jacobi's formula on the metric jet."""
    if ginv is None:
        ginv = inverse(jet.g)
    t1 = np.einsum("...ab,...ijba->...ij", ginv, jet.ddbar)
    t2 = np.einsum("...ab,...jbc,...cd,...ida->...ij", ginv, jet.dbar, ginv, jet.d)
    return -(t1 - t2)


def torsion_from_gamma(gamma):
    return gamma - np.swapaxes(gamma, -3, -2)


def torsion_trace(tors):
    """(T)^p_{kp}, indexed by k."""
    return np.einsum("...kpp->...k", tors)


def trace_with(g_or_inv, h, inverted=False):
    ginv = g_or_inv if inverted else inverse(g_or_inv)
    return np.einsum("...ji,...ij->...", ginv, h)


def scalar_from(g, ric, ginv=None):
    if ginv is None:
        ginv = inverse(g)
    return np.einsum("...ji,...ij->...", ginv, ric)


def norm_sq(g, h, ginv=None):
    """|h|^2_g = g^{k jbar} g^{i pbar} h_{k pbar} h_{i jbar}."""
    if ginv is None:
        ginv = inverse(g)
    a = np.einsum("...ab,...bc->...ac", ginv, h)
    return np.einsum("...ab,...ba->...", a, a)


# -- pointwise operations -----------------------------------------------------


def chern_connection(g: MetricField, p):
    """Gamma^k_{ij} at p, array of shape ``(..., n, n, n)`` indexed ``[i, j, k]``."""
    return gamma_from_jet(g.jet(p))


def chern_curvature(g: MetricField, p):
    return curvature_from_jet(g.jet(p))


def chern_ricci(g: MetricField, p, method="trace", symmetrize=True):
    """Chern-Ricci form R^C_{i jbar}.

    ``method="trace"`` contracts the full Chern curvature tensor;
    ``method="logdet"`` takes -d dbar log det g directly (by stencil on the
    scalar log det in stencil mode, by Jacobi's formula in closed form).
    """
    p = np.asarray(p, dtype=complex)
    if method == "trace":
        ric = ricci_trace_from_jet(g.jet(p))
    elif method == "logdet":
        if g.derivative_mode == "closed_form":
            ric = ricci_logdet_from_jet(g.jet(p))
        else:
            logdet(g(p))
            ric = -wirtinger_derivatives(
                lambda z: logdet(g(z)), p, 2, g.h, g.richardson, g.domain
            )
    else:
        raise ValueError(f"unknown Ricci method {method!r}")
    if not symmetrize:
        return ric
    return hermitian_part(ric, _ricci_tol(g, p), "Chern-Ricci form")


def _ricci_tol(g: MetricField, p):
    if g.derivative_mode != "closed_form":
        return HERMITIAN_TOL
    # Jacobi's formula carries two factors of g^{-1}, so roundoff grows like cond(g)^2
    ev = np.linalg.eigvalsh(g(p))
    cond = float(np.max(ev[..., -1] / ev[..., 0]))
    return 1e-12 * max(1e2, cond * cond)


def chern_scalar(g: MetricField, p, method="logdet", tol=1e-8):
    """Chern scalar curvature R = g^{i jbar} R^C_{i jbar} (real)."""
    p = np.asarray(p, dtype=complex)
    ric = chern_ricci(g, p, method)
    r = scalar_from(g(p), ric)
    scale = np.maximum(1.0, np.abs(r))
    if np.any(np.abs(r.imag) > tol * scale):
        raise ContractViolation(f"scalar curvature has imaginary residue {np.max(np.abs(r.imag)):.3g}")
    return r.real


def torsion(g: MetricField, p):
    """Torsion T^k_{ij} (``[..., i, j, k]``) and its trace (T)^p_{kp}."""
    tors = torsion_from_gamma(chern_connection(g, p))
    return tors, torsion_trace(tors)


@dataclass(frozen=True)
class ChernPackage:
    gamma: np.ndarray
    curvature: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    torsion: np.ndarray
    torsion_trace: np.ndarray


def chern_package(g: MetricField, p) -> ChernPackage:
    p = np.asarray(p, dtype=complex)
    jet = g.jet(p)
    ginv = inverse(jet.g)
    gamma = gamma_from_jet(jet, ginv)
    curv = curvature_from_jet(jet, ginv)
    low = lower_curvature(curv, jet.g)
    ric = np.einsum("...lk,...ijkl->...ij", ginv, low)
    ric = hermitian_part(ric, _ricci_tol(g, p), "Chern-Ricci form")
    tors = torsion_from_gamma(gamma)
    return ChernPackage(
        gamma=gamma,
        curvature=curv,
        ricci=ric,
        scalar=scalar_from(jet.g, ric, ginv).real,
        torsion=tors,
        torsion_trace=torsion_trace(tors),
    )


def curvature_symmetry_defect(g: MetricField, p):
    """max |R_{i jbar k lbar} - conj(R_{j ibar l kbar})|."""
    jet = g.jet(p)
    low = lower_curvature(curvature_from_jet(jet), jet.g)
    return float(np.max(np.abs(low - np.conj(np.transpose(low, _swap_pairs(low.ndim))))))


def _swap_pairs(ndim):
    axes = list(range(ndim))
    axes[-4], axes[-3] = axes[-3], axes[-4]
    axes[-2], axes[-1] = axes[-1], axes[-2]
    return axes


def d_omega_components(jet: Jet):
    """d_i g_{j kbar} - d_j g_{i kbar}: coefficients of the (2,1)-form d omega."""
    return jet.d - np.swapaxes(jet.d, -3, -2)


def ddbar_omega_components(jet: Jet):
    """Coefficients of d dbar omega, antisymmetrized in both index pairs."""
    dd = jet.ddbar  # [a, b, j, k] = d_a d_bbar g_{j kbar}
    return (
        dd
        - np.einsum("...jbak->...abjk", dd)
        - np.einsum("...akjb->...abjk", dd)
        + np.einsum("...jkab->...abjk", dd)
    )


def kahler_gauduchon_residuals(g: MetricField, points):
    """(sup |d omega|, sup |d dbar omega|) over the given sample points."""
    jet = g.jet(np.asarray(points, dtype=complex))
    return (
        float(np.max(np.abs(d_omega_components(jet)), initial=0.0)),
        float(np.max(np.abs(ddbar_omega_components(jet)), initial=0.0)),
    )


def trace_and_norms(g, h):
    """(tr_g h, |h|^2_g) for Hermitian matrices."""
    g = np.asarray(g)
    h = np.asarray(h)
    ginv = inverse(g)
    tr = trace_with(ginv, h, inverted=True)
    nrm = norm_sq(g, h, ginv)
    return tr.real, nrm.real


def positivity(g, tol=POSITIVITY_TOL):
    """(is_positive, min_eigenvalue) of Hermitian matrices."""
    g = np.asarray(g)
    defect = np.max(hermitian_defect(g), initial=0.0)
    if defect > 1e-8 * max(1.0, float(np.max(np.abs(g), initial=0.0))):
        raise ContractViolation(f"positivity test needs a Hermitian matrix (defect {defect:.3g})")
    lam = min_eigenvalue(g)
    return lam > tol, lam
