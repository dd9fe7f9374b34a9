"""Harmonic analysis on the round unit sphere.

Fields live in the ambient R^3 representation: a one-form is a tangent vector
field ``V(x)`` with ``x . V = 0``, a symmetric 2-tensor is a 3x3 matrix field
with ``P chi P = chi`` where ``P = I - x x^T``.  Covariant derivatives are
tangential projections of ambient derivatives of polynomial extensions, so no
coordinate chart (and no pole singularity) is involved.

Real spherical harmonics are stored as exact homogeneous harmonic polynomials
in (x, y, z); their ambient derivatives up to third order are again
polynomials and are evaluated at the quadrature nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import roots_legendre

__all__ = [
    "ConformalMetric",
    "HarmonicBasis",
    "HodgeSplit",
    "QuadraturePrecisionError",
    "SpectralTable",
    "SphereQuadrature",
    "gauss_product_rule",
    "hodge_decompose",
    "kazdan_warner_residual",
    "load_quadrature",
    "one_form_operator_spectrum",
    "random_rotation",
    "scalar_spectrum",
    "tensor_operator_spectrum",
]

ASYMMETRY_TOL = 1e-8
CLUSTER_TOL = 1e-6

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
    _EPS3[_i, _j, _k] = 1.0
    _EPS3[_i, _k, _j] = -1.0


class QuadraturePrecisionError(RuntimeError):
    """Two quadrature orders disagree on an integral that should be resolved."""


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray  # (N, 3) unit vectors
    weights: np.ndarray  # (N,), sums to 4 pi
    degree: int  # polynomials of total degree <= degree are integrated exactly

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate samples whose first axis runs over the nodes."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def rotated(self, rotation: np.ndarray) -> "SphereQuadrature":
        return SphereQuadrature(self.nodes @ np.asarray(rotation).T, self.weights, self.degree)

    def save(self, path: str | Path) -> None:
        data = np.column_stack([self.nodes, self.weights])
        np.savetxt(path, data, fmt="%.17g", header=f"degree {self.degree}\nx y z w")


def gauss_product_rule(degree: int) -> SphereQuadrature:
    """Gauss-Legendre in z times the trapezoid rule in longitude.

    Exact for all polynomials in (x, y, z) of total degree <= ``degree``.
    """
    n_lat = degree // 2 + 1
    n_lon = degree + 1
    z, wz = roots_legendre(n_lat)
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    zz, ll = np.meshgrid(z, lon, indexing="ij")
    rho = np.sqrt(1.0 - zz**2)
    nodes = np.column_stack([(rho * np.cos(ll)).ravel(), (rho * np.sin(ll)).ravel(), zz.ravel()])
    weights = np.repeat(wz * (2.0 * np.pi / n_lon), n_lon)
    return SphereQuadrature(nodes, weights, degree)


def load_quadrature(path: str | Path) -> SphereQuadrature:
    """Read a plain-text rule: one ``x y z w`` line per node; ``# degree N`` header."""
    degree = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "degree":
                degree = int(parts[1])
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 4:
        raise ValueError("quadrature file needs four columns x y z w")
    nodes = data[:, :3] / np.linalg.norm(data[:, :3], axis=1, keepdims=True)
    if degree is None:
        raise ValueError("quadrature file lacks a '# degree N' header")
    return SphereQuadrature(nodes, data[:, 3], degree)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# Harmonic polynomials


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for (a1, b1, c1), u in p.items():
        for (a2, b2, c2), v in q.items():
            key = (a1 + a2, b1 + b2, c1 + c2)
            out[key] = out.get(key, 0) + u * v
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _r2_power(k: int) -> dict:
    if k == 0:
        return {(0, 0, 0): 1}
    return _poly_mul(_r2_power(k - 1), {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})


@lru_cache(maxsize=None)
def harmonic_polynomial(l: int, m: int) -> tuple[dict, float]:
    """Integer-coefficient homogeneous harmonic polynomial and its normalization.

    ``norm * poly`` restricted to the unit sphere is the real orthonormal
    spherical harmonic of degree ``l`` and order ``m`` (cosine type for m > 0,
    sine type for m < 0, no Condon-Shortley phase).
    """
    am = abs(m)
    # Planar part: Re or Im of (x + i y)^|m|.
    planar: dict = {}
    for p in range(am + 1):
        ph = (am - p) % 4
        if m >= 0:
            coef = {0: 1, 1: 0, 2: -1, 3: 0}[ph]
        else:
            coef = {0: 0, 1: 1, 2: 0, 3: -1}[ph]
        if coef:
            planar[(p, am - p, 0)] = coef * math.comb(am, p)
    # Polar part: sum_k (-1)^k 2^-l C(l,k) C(2l-2k,l) (l-2k)!/(l-2k-m)! r^2k z^(l-2k-m).
    polar: dict = {}
    for k in range((l - am) // 2 + 1):
        c = Fraction((-1) ** k * math.comb(l, k) * math.comb(2 * l - 2 * k, l)
                     * math.factorial(l - 2 * k) // math.factorial(l - 2 * k - am), 2**l)
        for key, v in _poly_mul(_r2_power(k), {(0, 0, l - 2 * k - am): 1}).items():
            polar[key] = polar.get(key, 0) + c * v
    poly = _poly_mul(polar, planar)
    scale = (2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am)
    norm = math.sqrt(scale * (2.0 if m else 1.0))
    return poly, norm


def _derivative(poly: dict, axis: int) -> dict:
    out = {}
    for key, v in poly.items():
        e = key[axis]
        if e:
            k = list(key)
            k[axis] -= 1
            out[tuple(k)] = out.get(tuple(k), 0) + v * e
    return out


def _eval(poly: dict, powers: np.ndarray, norm: float) -> np.ndarray:
    """Evaluate at nodes from precomputed ``powers[axis, exponent, node]``."""
    if not poly:
        return np.zeros(powers.shape[2])
    keys = np.array(list(poly.keys()))
    coefs = np.array([float(v) for v in poly.values()]) * norm
    mono = powers[0, keys[:, 0]] * powers[1, keys[:, 1]] * powers[2, keys[:, 2]]
    return coefs @ mono


def _projector(x: np.ndarray) -> np.ndarray:
    return np.eye(3)[None] - x[:, :, None] * x[:, None, :]


def _dP(x: np.ndarray) -> np.ndarray:
    """Ambient derivative ``d_c Ptilde_ab`` of ``Ptilde = |x|^2 I - x x^T``; shape (N, a, b, c)."""
    I = np.eye(3)
    return (2.0 * I[None, :, :, None] * x[:, None, None, :]
            - I[None, :, None, :] * x[:, None, :, None]
            - x[:, :, None, None] * I[None, None, :, :])


# ---------------------------------------------------------------------------
# Basis


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthonormal real spherical harmonics up to ``l_max`` sampled on a quadrature rule."""

    l_max: int
    quadrature: SphereQuadrature
    ls: np.ndarray = field(init=False)
    ms: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.quadrature.degree < 2 * self.l_max + 4:
            raise ValueError("quadrature must be exact to degree 2*l_max + 4")
        pairs = [(l, m) for l in range(self.l_max + 1) for m in range(-l, l + 1)]
        object.__setattr__(self, "ls", np.array([p[0] for p in pairs]))
        object.__setattr__(self, "ms", np.array([p[1] for p in pairs]))

    @classmethod
    def build(cls, l_max: int, degree: int | None = None, rotation: np.ndarray | None = None) -> "HarmonicBasis":
        quad = gauss_product_rule(degree if degree is not None else 2 * l_max + 8)
        if rotation is not None:
            quad = quad.rotated(rotation)
        return cls(l_max, quad)

    @property
    def size(self) -> int:
        return len(self.ls)

    @property
    def x(self) -> np.ndarray:
        return self.quadrature.nodes

    def index(self, l: int, m: int) -> int:
        if not (0 <= l <= self.l_max and -l <= m <= l):
            raise IndexError((l, m))
        return l * l + l + m

    @cached_property
    def _powers(self) -> np.ndarray:
        x = self.x
        e = np.arange(self.l_max + 1)
        return np.stack([x[:, a][None, :] ** e[:, None] for a in range(3)])

    def _derivative_table(self, order: int) -> np.ndarray:
        """Ambient derivatives of the homogeneous extensions; shape (N, 3,...,3, size)."""
        shape = (len(self.x),) + (3,) * order + (self.size,)
        out = np.zeros(shape)
        for idx, (l, m) in enumerate(zip(self.ls, self.ms)):
            poly, norm = harmonic_polynomial(int(l), int(m))
            stack = [((), poly)]
            for _ in range(order):
                stack = [(axes + (a,), _derivative(p, a)) for axes, p in stack for a in range(3)]
            for axes, p in stack:
                out[(slice(None),) + axes + (idx,)] = _eval(p, self._powers, norm)
        return out

    @cached_property
    def values(self) -> np.ndarray:
        """(N, size) samples of Y_lm."""
        return self._derivative_table(0)

    @cached_property
    def ambient_gradient(self) -> np.ndarray:
        return self._derivative_table(1)

    @cached_property
    def ambient_hessian(self) -> np.ndarray:
        return self._derivative_table(2)

    @cached_property
    def ambient_third(self) -> np.ndarray:
        return self._derivative_table(3)

    @cached_property
    def projector(self) -> np.ndarray:
        return _projector(self.x)

    @cached_property
    def gradient(self) -> np.ndarray:
        """Tangential gradients, (N, 3, size)."""
        return np.einsum("nab,nbk->nak", self.projector, self.ambient_gradient)

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.quadrature.weights[:, None] * self.values)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.values @ coeffs

    def analyze(self, samples: np.ndarray) -> np.ndarray:
        return self.values.T @ (self.quadrature.weights * samples)

    def laplacian_eigenvalues(self) -> np.ndarray:
        """``l(l+1)`` per basis element, i.e. the spectrum of ``-Delta`` on each Y_lm."""
        return (self.ls * (self.ls + 1)).astype(float)

    # -- one-form families ---------------------------------------------------

    def one_form_families(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Exact (``dY``) and coexact (``*dY``) families for l >= 1.

        Returns ``(values, covariant_derivative, labels, kind, source)``: values
        (N, 3, K), derivatives (N, 3, 3, K) indexed [component, direction], the
        degree per column, ``kind`` 0 (exact) or 1 (coexact), and the column of
        the generating scalar harmonic.
        """
        sel = np.nonzero(self.ls >= 1)[0]
        x, P = self.x, self.projector
        g = self.ambient_gradient[:, :, sel]
        H = self.ambient_hessian[:, :, :, sel]
        Y = self.values[:, sel]
        l = self.ls[sel].astype(float)
        # Exact: V = grad Y - l Y x.
        V = g - l * Y[:, None, :] * x[:, :, None]
        DV = (H - l * x[:, :, None, None] * g[:, None, :, :]
              - l * Y[:, None, None, :] * np.eye(3)[None, :, :, None])
        # Coexact: W = x cross grad Y.
        W = np.einsum("iab,na,nbk->nik", _EPS3, x, g)
        DW = np.einsum("ijb,nbk->nijk", _EPS3, g) + np.einsum("iab,na,nbjk->nijk", _EPS3, x, H)
        values = np.concatenate([np.einsum("nab,nbk->nak", P, V), W], axis=2)
        deriv = np.concatenate([DV, DW], axis=3)
        cov = np.einsum("nia,najk,njb->nibk", P, deriv, P)
        labels = np.concatenate([self.ls[sel], self.ls[sel]])
        kind = np.concatenate([np.zeros(len(sel), int), np.ones(len(sel), int)])
        source = np.concatenate([sel, sel])
        return values, cov, labels, kind, source

    # -- symmetric 2-tensor families ---------------------------------------

    def tensor_families(self):
        """Trace family ``Y g`` (l >= 0) and trace-free families from the Hessian (l >= 2).

        Returns ``(values, covariant_derivative, labels, kind, source)`` with
        values (N, 3, 3, K), derivatives (N, 3, 3, 3, K) indexed [a, b, direction],
        ``kind`` 0 (trace), 1 (trace-free gradient type), 2 (trace-free curl type).
        """
        x, P = self.x, self.projector
        dPt = _dP(x)
        n = len(x)

        # Trace family on all l.
        Y = self.values
        g = self.ambient_gradient
        tr_vals = P[:, :, :, None] * Y[:, None, None, :]
        tr_der = P[:, :, :, None, None] * g[:, None, None, :, :] + dPt[:, :, :, :, None] * Y[:, None, None, None, :]

        sel = np.nonzero(self.ls >= 2)[0]
        gs = g[:, :, sel]
        H = self.ambient_hessian[:, :, :, sel]
        T3 = self.ambient_third[:, :, :, :, sel]
        # E = Pt H Pt - (x . grad Y) Pt, evaluated on |x| = 1 where Pt = P.
        E = np.einsum("nai,nijk,njb->nabk", P, H, P) - np.einsum("na,nak->nk", x, gs)[:, None, None, :] * P[:, :, :, None]
        ds = gs + np.einsum("na,nack->nck", x, H)  # d_c (x . grad Y)
        sdot = np.einsum("na,nak->nk", x, gs)
        dE = (np.einsum("naic,nijk,njb->nabck", dPt, H, P)
              + np.einsum("nai,nijck,njb->nabck", P, T3, P)
              + np.einsum("nai,nijk,njbc->nabck", P, H, dPt)
              - P[:, :, :, None, None] * ds[:, None, None, :, :]
              - dPt[:, :, :, :, None] * sdot[:, None, None, None, :])
        trE = np.einsum("naak->nk", E)
        dtrE = np.einsum("naack->nck", dE)
        E0 = E - 0.5 * trE[:, None, None, :] * P[:, :, :, None]
        dE0 = (dE - 0.5 * dtrE[:, None, None, :, :] * P[:, :, :, None, None]
               - 0.5 * trE[:, None, None, None, :] * dPt[:, :, :, :, None])
        # Rotated copy F = (J E0 - E0 J) / 2 with J v = x cross v.
        J = np.einsum("ajk,nj->nak", _EPS3, x)
        dJ = np.broadcast_to(np.transpose(_EPS3, (0, 2, 1))[None], (n, 3, 3, 3))  # d_c J_ak = eps_{a c k}
        F = 0.5 * (np.einsum("nai,nibk->nabk", J, E0) - np.einsum("naik,nib->nabk", E0, J))
        dF = 0.5 * (np.einsum("naic,nibk->nabck", dJ, E0) + np.einsum("nai,nibck->nabck", J, dE0)
                    - np.einsum("naick,nib->nabck", dE0, J) - np.einsum("naik,nibc->nabck", E0, dJ))

        values = np.concatenate([tr_vals, E0, F], axis=3)
        deriv = np.concatenate([tr_der, dE0, dF], axis=4)
        cov = np.einsum("nai,nbj,nijck,ncd->nabdk", P, P, deriv, P)
        labels = np.concatenate([self.ls, self.ls[sel], self.ls[sel]])
        kind = np.concatenate([np.zeros(self.size, int), np.ones(len(sel), int), np.full(len(sel), 2)])
        source = np.concatenate([np.arange(self.size), sel, sel])
        return values, cov, labels, kind, source


# ---------------------------------------------------------------------------
# Spectral tables


@dataclass(frozen=True)
class SpectralTable:
    operator_kind: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, M-orthonormal coefficients in the family basis
    labels: np.ndarray  # degree l of each family column
    kind: np.ndarray
    kernel_basis: np.ndarray
    discretization_error: float
    asymmetry: float
    stiffness: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)

    def distinct(self, tol: float = CLUSTER_TOL) -> list[tuple[float, int]]:
        """(eigenvalue, multiplicity) pairs after clustering within ``tol``."""
        out: list[list] = []
        for lam in self.eigenvalues:
            if out and abs(lam - out[-1][0]) <= tol * max(1.0, abs(lam)):
                out[-1][1] += 1
            else:
                out.append([float(lam), 1])
        return [(v, m) for v, m in out]

    def clusters(self, tol: float = CLUSTER_TOL) -> list[np.ndarray]:
        idx, start = [], 0
        for value, mult in self.distinct(tol):
            idx.append(np.arange(start, start + mult))
            start += mult
        return idx

    def sector_dimensions(self, tol: float = CLUSTER_TOL) -> list[dict[int, float]]:
        """For every cluster, the weight of its eigenspace in each degree-l sector."""
        L = np.linalg.cholesky(self.mass)
        out = []
        for cols in self.clusters(tol):
            # Orthonormal coordinates of the eigenspace.
            w = (L.T @ self.eigenvectors[:, cols]) ** 2
            out.append({int(l): float(w[self.labels == l].sum()) for l in np.unique(self.labels)})
        return out

    def multiplicities_are_so3(self, tol: float = CLUSTER_TOL) -> bool:
        """Every eigenspace is a sum of complete (2l+1)-dimensional SO(3) irreducibles."""
        for dims in self.sector_dimensions(tol):
            for l, w in dims.items():
                n = round(w / (2 * l + 1))
                if abs(w - n * (2 * l + 1)) > 1e-6:
                    return False
        return True

    def shifted_singular_values(self, mu: float) -> np.ndarray:
        """Singular values of the mass-normalized operator minus ``mu``."""
        L = np.linalg.cholesky(self.mass)
        Li = linalg.solve_triangular(L, np.eye(len(L)), lower=True)
        A = Li @ self.stiffness @ Li.T
        return np.linalg.svd(A - mu * np.eye(len(A)), compute_uv=False)

    def records(self) -> list[dict]:
        return [{"operator": self.operator_kind, "eigenvalue": v, "multiplicity": m} for v, m in self.distinct()]


def _weighted_gram(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_n w_n <a_n,i , b_n,j>`` for arrays (N, ..., K)."""
    n, k = a.shape[0], a.shape[-1]
    a2 = a.reshape(n, -1, k)
    b2 = b.reshape(n, -1, b.shape[-1])
    return np.einsum("n,nck,ncj->kj", w, a2, b2, optimize=True)


def _solve(kind: str, A: np.ndarray, M: np.ndarray, labels, kinds) -> SpectralTable:
    asym = float(max(np.abs(A - A.T).max(), np.abs(M - M.T).max()) / max(1.0, np.abs(A).max()))
    if asym > ASYMMETRY_TOL:
        raise RuntimeError(f"{kind}: Galerkin matrix asymmetry {asym:.3g}")
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    lam, vec = linalg.eigh(A, M)
    table = SpectralTable(kind, lam, vec, np.asarray(labels), np.asarray(kinds), vec[:, :0], 0.0, asym, A, M)
    spread = 0.0
    for cols in table.clusters():
        spread = max(spread, float(np.ptp(lam[cols])))
    err = max(spread, asym, 64 * np.finfo(float).eps * max(1.0, float(np.abs(lam).max())))
    kernel = vec[:, np.abs(lam) <= max(10 * err, 1e-10)]
    return SpectralTable(kind, lam, vec, table.labels, table.kind, kernel, err, asym, A, M)


def scalar_spectrum(basis: HarmonicBasis) -> SpectralTable:
    """Eigenvalues of ``-Delta`` on functions from the Dirichlet form ``int <grad u, grad v>``."""
    if basis.l_max < 2:
        raise ValueError("l_max must be >= 2")
    w = basis.quadrature.weights
    A = _weighted_gram(basis.gradient, basis.gradient, w)
    M = _weighted_gram(basis.values[:, None, :], basis.values[:, None, :], w)
    return _solve("scalar_laplacian", A, M, basis.ls, np.zeros(basis.size, int))


def one_form_operator_spectrum(basis: HarmonicBasis) -> SpectralTable:
    """Eigenvalues of the rough Laplacian ``-Delta`` on one-forms.

    Galerkin space: exact forms ``dY`` and coexact forms ``*dY``; the
    bilinear form is ``int <nabla s, nabla t>``.
    """
    if basis.l_max < 3:
        raise ValueError("l_max must be >= 3")
    vals, cov, labels, kind, _ = basis.one_form_families()
    w = basis.quadrature.weights
    return _solve("one_form_rough", _weighted_gram(cov, cov, w), _weighted_gram(vals, vals, w), labels, kind)


def _trace_free(vals: np.ndarray, P: np.ndarray) -> np.ndarray:
    tr = np.einsum("naak->nk", vals)
    return vals - 0.5 * tr[:, None, None, :] * P[:, :, :, None]


def tensor_operator_spectrum(basis: HarmonicBasis) -> SpectralTable:
    """Eigenvalues of ``L chi = -Delta chi + 4 (trace-free part of chi)`` on symmetric 2-tensors."""
    if basis.l_max < 3:
        raise ValueError("l_max must be >= 3")
    vals, cov, labels, kind, _ = basis.tensor_families()
    w = basis.quadrature.weights
    tf = _trace_free(vals, basis.projector)
    A = _weighted_gram(cov, cov, w) + 4.0 * _weighted_gram(tf, tf, w)
    return _solve("tensor_tracefree_shift", A, _weighted_gram(vals, vals, w), labels, kind)


def kernel_fields(table: SpectralTable, basis: HarmonicBasis) -> np.ndarray:
    """Sample the kernel of a tensor table as fields (N, 3, 3, dim)."""
    vals, *_ = basis.tensor_families()
    return np.einsum("nabk,kj->nabj", vals, table.kernel_basis)


# ---------------------------------------------------------------------------
# Hodge decomposition


@dataclass(frozen=True)
class HodgeSplit:
    exact: np.ndarray  # (N, 3) samples of d alpha
    coexact: np.ndarray  # (N, 3) samples of d* omega
    remainder: np.ndarray
    alpha: np.ndarray  # scalar-harmonic coefficients of alpha
    omega: np.ndarray  # coefficients of omega / vol

    def norms(self, quad: SphereQuadrature) -> dict[str, float]:
        def l2(v):
            return float(np.sqrt(quad.integrate(np.sum(v * v, axis=1))))

        return {"exact": l2(self.exact), "coexact": l2(self.coexact), "remainder": l2(self.remainder)}


def hodge_decompose(samples: np.ndarray, basis: HarmonicBasis) -> HodgeSplit:
    """L2-orthogonal split of a tangent field sampled at the quadrature nodes.

    ``d* (omega vol) = *d omega`` is represented as ``x cross grad omega``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (len(basis.x), 3):
        raise ValueError("samples must have shape (nodes, 3)")
    w = basis.quadrature.weights
    grad = basis.gradient[:, :, 1:]
    rot = np.cross(basis.x[:, :, None], grad, axis=1)
    parts = []
    coeffs = []
    for fam in (grad, rot):
        M = _weighted_gram(fam, fam, w)
        b = np.einsum("n,nck,nc->k", w, fam, samples)
        c = linalg.solve(M, b, assume_a="pos")
        coeffs.append(np.concatenate([[0.0], c]))
        parts.append(np.einsum("nck,k->nc", fam, c))
    exact, coexact = parts
    return HodgeSplit(exact, coexact, samples - exact - coexact, coeffs[0], coeffs[1])


# ---------------------------------------------------------------------------
# Kazdan-Warner


@dataclass(frozen=True)
class ConformalMetric:
    """``g = exp(2u) g_S2`` with ``u = sum c_lm Y_lm``."""

    u_coeffs: dict[tuple[int, int], float]

    @property
    def degree(self) -> int:
        return max((l for l, _ in self.u_coeffs), default=0)

    def sample(self, basis: HarmonicBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(u, grad u, Delta u)`` at the nodes."""
        c = np.zeros(basis.size)
        for (l, m), v in self.u_coeffs.items():
            c[basis.index(l, m)] = v
        u = basis.values @ c
        grad = basis.gradient @ c
        lap = -basis.values @ (basis.laplacian_eigenvalues() * c)
        return u, grad, lap


def _kw_integrals(metric: ConformalMetric, basis: HarmonicBasis) -> tuple[np.ndarray, float]:
    u, _, lap = metric.sample(basis)
    conf = np.exp(2.0 * u)
    K = (1.0 - lap) / conf
    grad_K = basis.gradient @ basis.analyze(K)
    # Tangential gradients of the coordinate functions: e_j - x_j x.
    integrand = np.einsum("nc,ncj->nj", grad_K, basis.projector) * conf[:, None]
    return basis.quadrature.integrate(integrand), float(basis.quadrature.integrate(conf))


def kazdan_warner_residual(metric: ConformalMetric, basis: HarmonicBasis, check_degree: int | None = None) -> np.ndarray:
    """``int <grad K, grad x_j> exp(2u) dA`` for j = 1, 2, 3.

    K is sampled from ``exp(-2u)(1 - Delta u)``, expanded in the harmonics of
    ``basis`` and differentiated spectrally, so the residuals measure
    quadrature and truncation error.  The area ``int exp(2u)`` is recomputed
    on a rule of degree ``check_degree`` (default: 8 more) to detect an
    under-resolved conformal factor.
    """
    if metric.degree > basis.l_max - 2:
        raise ValueError(f"u has degree {metric.degree}; basis supports at most {basis.l_max - 2}")
    if not any(metric.u_coeffs.values()):
        return np.zeros(3)  # K == 1
    res, area = _kw_integrals(metric, basis)
    ref = gauss_product_rule(check_degree if check_degree is not None else basis.quadrature.degree + 8)
    u_ref, _, _ = metric.sample(HarmonicBasis(metric.degree, ref))
    area_ref = float(ref.integrate(np.exp(2.0 * u_ref)))
    if abs(area - area_ref) > 1e-8 * area_ref:
        raise QuadraturePrecisionError(
            f"quadrature degree {basis.quadrature.degree} does not resolve exp(2u): area {area!r} vs {area_ref!r}")
    return res
