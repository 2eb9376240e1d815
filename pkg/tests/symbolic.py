"""Symbolic Hopf-line oracle, built from scratch with sympy."""

import sympy as sp


def hopf_scalar_identities(n):
    """Residuals (R - (n-1)/(1/n-t), |Ric|^2 - (n-1)/(1/n-t)^2, dR/dt - |Ric|^2), simplified."""
    t = sp.symbols("t", positive=True)
    z = sp.symbols(f"z1:{n + 1}")
    w = sp.symbols(f"w1:{n + 1}")  # independent stand-ins for conj(z)
    r2 = sum(a * b for a, b in zip(z, w))
    G = sp.Matrix(n, n, lambda j, l: (1 - n * t) * sp.KroneckerDelta(j, l) / r2 + n * t * w[j] * z[l] / r2**2)
    logdet = sp.log(sp.factor(G.det()))
    ric = sp.Matrix(n, n, lambda i, j: -sp.diff(logdet, z[i], w[j]))
    Ginv = sp.simplify(G.inv())
    A = Ginv * ric
    R = sp.simplify(A.trace())
    norm = sp.simplify((A * A).trace())
    expect = (n - 1) / (sp.Rational(1, n) - t)
    return (
        sp.simplify(R - expect),
        sp.simplify(norm - expect / (sp.Rational(1, n) - t)),
        sp.simplify(sp.diff(R, t) - norm),
    )
