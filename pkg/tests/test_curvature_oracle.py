"""Symbolic Levi-Civita computation for ds^2 + phi(s)^2 g_S2, used as an oracle."""

import numpy as np
import pytest
import sympy as sp

from solitonlab.soliton_identities import curvature_fields


@pytest.fixture(scope="module")
def oracle():
    s, th, ph = sp.symbols("s theta varphi", positive=True)
    P = sp.Function("phi")(s)
    F = sp.Function("f")(s)
    x = [s, th, ph]
    g = sp.diag(1, P**2, P**2 * sp.sin(th) ** 2)
    gi = g.inv()
    n = 3
    gam = [[[sp.simplify(sum(gi[a, d] * (sp.diff(g[d, b], x[c]) + sp.diff(g[d, c], x[b]) - sp.diff(g[b, c], x[d]))
                             for d in range(n)) / 2) for c in range(n)] for b in range(n)] for a in range(n)]

    def riem(a, b, c, d):
        e = sp.diff(gam[a][b][d], x[c]) - sp.diff(gam[a][b][c], x[d])
        return e + sum(gam[a][c][k] * gam[k][b][d] - gam[a][d][k] * gam[k][b][c] for k in range(n))

    ric = sp.Matrix(n, n, lambda b, d: sp.simplify(sum(riem(a, b, a, d) for a in range(n))))
    R = sp.simplify(sum(gi[i, j] * ric[i, j] for i in range(n) for j in range(n)))
    hess = sp.Matrix(n, n, lambda i, j: sp.diff(F, x[i], x[j]) - sum(gam[k][i][j] * sp.diff(F, x[k]) for k in range(n)))
    return dict(s=s, x=x, P=P, F=F, g=g, gi=gi, gam=gam, ric=ric, R=R, hess=hess)


def _numeric(expr, o):
    """Lambdify in terms of phi, phi', phi'' values."""
    p0, p1, p2 = sp.symbols("p0 p1 p2")
    P, s = o["P"], o["s"]
    e = expr.subs(sp.Derivative(P, (s, 2)), p2).subs(sp.Derivative(P, s), p1).subs(P, p0)
    return sp.lambdify((p0, p1, p2), sp.simplify(e), "numpy")


def test_ricci_components_match_module(oracle, profile):
    rep = curvature_fields(profile)
    args = (rep.phi, rep.phi_prime, rep.phi_second)
    rad = _numeric(oracle["ric"][0, 0], oracle)(*args)
    sph = _numeric(oracle["ric"][1, 1] / oracle["P"] ** 2, oracle)(*args)
    R = _numeric(oracle["R"], oracle)(*args)
    np.testing.assert_allclose(rep.ric_rad, rad, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(rep.ric_sph, sph, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(rep.R, R, rtol=1e-12, atol=1e-15)


def test_mixed_ricci_vanishes(oracle):
    assert oracle["ric"][0, 1] == 0 and oracle["ric"][0, 2] == 0 and oracle["ric"][1, 2] == 0


def test_hessian_of_radial_function(oracle):
    P, F, s = oracle["P"], oracle["F"], oracle["s"]
    assert sp.simplify(oracle["hess"][0, 0] - F.diff(s, 2)) == 0
    assert sp.simplify(oracle["hess"][1, 1] / P**2 - P.diff(s) * F.diff(s) / P) == 0


def test_T_identity_reductions(oracle):
    """Both orthonormal reductions of 2(D_i Ric_jk - D_j Ric_ik) D^j f = T_ik |df|^2 - <dR, df> g_ik + ..."""
    o = oracle
    x, gi, gam, ric, g, R = o["x"], o["gi"], o["gam"], o["ric"], o["g"], o["R"]
    P, F, s = o["P"], o["F"], o["s"]
    n = 3

    def dric(i, j, k):
        return sp.diff(ric[j, k], x[i]) - sum(gam[l][i][j] * ric[l, k] + gam[l][i][k] * ric[j, l] for l in range(n))

    df = [sp.diff(F, v) for v in x]
    dR = [sp.diff(R, v) for v in x]
    up = [sum(gi[j, k] * df[k] for k in range(n)) for j in range(n)]
    T = 2 * ric - R * g + R * sp.Matrix(n, n, lambda i, j: df[i] * df[j])
    grad2 = sum(up[j] * df[j] for j in range(n))
    gRf = sum(gi[i, j] * dR[i] * df[j] for i in range(n) for j in range(n))
    A = -2 * P.diff(s, 2) / P
    B = -P.diff(s, 2) / P + (1 - P.diff(s) ** 2) / P**2
    fp, Rp = F.diff(s), R.diff(s)

    def sides(i, k):
        lhs = 2 * sum((dric(i, j, k) - dric(j, i, k)) * up[j] for j in range(n))
        rhs = T[i, k] * grad2 - gRf * g[i, k] + R**2 * df[i] * df[k] + dR[i] * df[k] + dR[k] * df[i]
        return lhs, rhs

    lhs, rhs = sides(0, 0)
    assert sp.simplify(lhs) == 0
    assert sp.simplify(rhs - ((2 * A - R + R * fp**2) * fp**2 - Rp * fp + R**2 * fp**2 + 2 * Rp * fp)) == 0
    lhs, rhs = sides(1, 1)
    assert sp.simplify(lhs / P**2 - 2 * fp * ((A - B) * P.diff(s) / P - B.diff(s))) == 0
    assert sp.simplify(rhs / P**2 - ((2 * B - R) * fp**2 - Rp * fp)) == 0
    lhs, rhs = sides(0, 1)
    assert sp.simplify(lhs) == 0 and sp.simplify(rhs) == 0
