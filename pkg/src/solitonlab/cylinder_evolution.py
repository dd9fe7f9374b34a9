"""Translation-invariant linear flows on the shrinking cylinder.

The background is ``gbar(t) = (2 - 2t) g_S2 + dz^2`` on ``S^2 x R``.  Fields
do not depend on z, so a vector field splits as ``xi + eta d/dz`` and a
symmetric 2-tensor as ``chi + dz*sigma + sigma*dz + beta dz^2``.  Every
component is expanded in eigenfields of the corresponding round-sphere
operator; each coefficient then obeys ``c' = -p c / (1 - t)`` and evolves as
``c(t) = c(t0) ((1 - t) / (1 - t0))^p``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .sphere_spectral import HarmonicBasis, gauss_product_rule

__all__ = [
    "Background",
    "CylinderModes",
    "CylinderTensorField",
    "CylinderVectorField",
    "GapSample",
    "ModeTrajectory",
    "ResolutionError",
    "anderson_chow_violation",
    "axial_projection_gap",
    "cylinder_background",
    "evolve_tensor",
    "evolve_vector",
    "fit_exponent",
    "gauge_norm",
    "pointwise_norm_sq",
    "random_tensor_field",
    "random_vector_field",
    "ric_projection_gap",
    "rk4_mode",
    "sigma_round_norm",
    "trajectories",
    "write_gaps_csv",
    "write_trajectories_csv",
]


class ResolutionError(RuntimeError):
    """A time step is too coarse for the requested finite difference."""


@dataclass(frozen=True)
class Background:
    t: float
    sphere_factor: float  # 2 - 2t
    ricci_sphere: float  # Ric = ricci_sphere * g_S2
    scalar_curvature: float

    @property
    def ricci_norm_sq(self) -> float:
        return 2.0 * self.ricci_sphere**2 / self.sphere_factor**2


def _check_time(t: float) -> None:
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")


def cylinder_background(t: float) -> Background:
    _check_time(t)
    return Background(t, 2.0 - 2.0 * t, 1.0, 1.0 / (1.0 - t))


# ---------------------------------------------------------------------------
# Modes


class CylinderModes:
    """Unit-L2 eigenfields of the sphere operators, sampled on a quadrature rule.

    Exponents are read off the Galerkin Rayleigh quotients of the fields, so
    they come from the same assembly as the spectral tables.
    """

    def __init__(self, l_max: int = 4, degree: int | None = None):
        if l_max < 1:
            raise ValueError("l_max must be >= 1")
        self.l_max = l_max
        # Contractions of fields of degree <= l_max are functions of degree <= 2 l_max.
        self.analysis_l = 2 * l_max
        self.basis = HarmonicBasis(l_max, gauss_product_rule(degree or 2 * self.analysis_l + 4))

    @property
    def quadrature(self):
        return self.basis.quadrature

    @cached_property
    def analysis_basis(self) -> HarmonicBasis:
        return HarmonicBasis(self.analysis_l, self.quadrature)

    def _normalize(self, vals, cov):
        w = self.quadrature.weights
        n, k = vals.shape[0], vals.shape[-1]
        mass = np.einsum("n,nck,nck->k", w, vals.reshape(n, -1, k), vals.reshape(n, -1, k))
        stiff = np.einsum("n,nck,nck->k", w, cov.reshape(n, -1, k), cov.reshape(n, -1, k))
        scale = 1.0 / np.sqrt(mass)
        return vals * scale, stiff / mass

    @cached_property
    def scalar(self) -> tuple[np.ndarray, np.ndarray]:
        """(values (N, K), eigenvalues of -Delta)."""
        return self.basis.values, self.basis.laplacian_eigenvalues()

    @cached_property
    def one_form(self) -> tuple[np.ndarray, np.ndarray]:
        """(values (N, 3, K), eigenvalues of the rough Laplacian)."""
        vals, cov, *_ = self.basis.one_form_families()
        return self._normalize(vals, cov)

    @cached_property
    def tensor(self) -> tuple[np.ndarray, np.ndarray]:
        """(values (N, 3, 3, K), eigenvalues of ``-Delta + 4 (trace-free part)``)."""
        vals, cov, _, kind, _ = self.basis.tensor_families()
        vals, rough = self._normalize(vals, cov)
        return vals, rough + 4.0 * (kind > 0)

    @cached_property
    def tensor_kind(self) -> np.ndarray:
        return self.basis.tensor_families()[3]

    # Decay exponents per block.
    def vector_exponents(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.one_form[1] - 1.0) / 2.0, self.scalar[1] / 2.0

    def tensor_exponents(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.tensor[1] / 2.0, (self.one_form[1] + 1.0) / 2.0, self.scalar[1] / 2.0

    def stationary_trace_index(self) -> int:
        """Column of the constant-trace mode (a multiple of g_S2)."""
        return int(np.nonzero((self.tensor_kind == 0))[0][0])


@dataclass(frozen=True)
class CylinderVectorField:
    xi: np.ndarray
    eta: np.ndarray
    time: float

    def __add__(self, other):
        return replace(self, xi=self.xi + other.xi, eta=self.eta + other.eta)

    def scaled(self, a: float):
        return replace(self, xi=a * self.xi, eta=a * self.eta)


@dataclass(frozen=True)
class CylinderTensorField:
    chi: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    time: float

    def __add__(self, other):
        return replace(self, chi=self.chi + other.chi, sigma=self.sigma + other.sigma, beta=self.beta + other.beta)

    def scaled(self, a: float):
        return replace(self, chi=a * self.chi, sigma=a * self.sigma, beta=a * self.beta)


@dataclass(frozen=True)
class ModeTrajectory:
    mode_id: int
    eigenvalue: float
    exponent: float
    times: np.ndarray
    coefficients: np.ndarray


def _factor(p: np.ndarray, t0: float, t1: float) -> np.ndarray:
    return ((1.0 - t1) / (1.0 - t0)) ** p


def _check_evolve(field, t1: float) -> None:
    # The power law is exact in both directions; only t = 1 is singular.
    if not 0.0 <= t1 < 1.0:
        raise ValueError("t1 must lie in [0, 1)")


def evolve_vector(field: CylinderVectorField, t1: float, modes: CylinderModes) -> CylinderVectorField:
    """Exact solution of ``d/dt xi = (Delta xi + xi)/(2-2t)``, ``d/dt eta = Delta eta/(2-2t)``."""
    _check_evolve(field, t1)
    p_xi, p_eta = modes.vector_exponents()
    return CylinderVectorField(field.xi * _factor(p_xi, field.time, t1), field.eta * _factor(p_eta, field.time, t1), t1)


def evolve_tensor(field: CylinderTensorField, t1: float, modes: CylinderModes) -> CylinderTensorField:
    """Exact solution of the Lichnerowicz heat equation split into chi, sigma, beta."""
    _check_evolve(field, t1)
    p_chi, p_sigma, p_beta = modes.tensor_exponents()
    t0 = field.time
    return CylinderTensorField(field.chi * _factor(p_chi, t0, t1), field.sigma * _factor(p_sigma, t0, t1),
                               field.beta * _factor(p_beta, t0, t1), t1)


def trajectories(field, times: np.ndarray, modes: CylinderModes) -> list[ModeTrajectory]:
    """Closed-form coefficient paths, one per mode, blocks concatenated in field order."""
    times = np.asarray(times, dtype=float)
    if isinstance(field, CylinderVectorField):
        blocks = [(field.xi, modes.one_form[1], modes.vector_exponents()[0]),
                  (field.eta, modes.scalar[1], modes.vector_exponents()[1])]
    else:
        p = modes.tensor_exponents()
        blocks = [(field.chi, modes.tensor[1], p[0]), (field.sigma, modes.one_form[1], p[1]),
                  (field.beta, modes.scalar[1], p[2])]
    out, mode_id = [], 0
    for coeffs, nu, ps in blocks:
        for c, v, p in zip(coeffs, nu, ps):
            out.append(ModeTrajectory(mode_id, float(v), float(p), times, c * _factor(p, field.time, times)))
            mode_id += 1
    return out


def rk4_mode(p: float, c0: float, t0: float, t1: float, steps: int = 20000) -> float:
    """Classical RK4 for ``c' = -p c / (1 - t)`` on a grid geometric in ``1 - t``."""
    s = 1.0 - np.geomspace(1.0 - t0, 1.0 - t1, steps + 1)
    c = float(c0)

    def rhs(t, y):
        return -p * y / (1.0 - t)

    for a, b in zip(s[:-1], s[1:]):
        h = b - a
        k1 = rhs(a, c)
        k2 = rhs(a + h / 2, c + h / 2 * k1)
        k3 = rhs(a + h / 2, c + h / 2 * k2)
        k4 = rhs(b, c + h * k3)
        c += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return c


# ---------------------------------------------------------------------------
# Norms and gaps


def _vector_parts(field: CylinderVectorField, modes: CylinderModes):
    xi = modes.one_form[0] @ field.xi  # (N, 3)
    eta = modes.scalar[0] @ field.eta
    return xi, eta


def _tensor_parts(field: CylinderTensorField, modes: CylinderModes):
    chi = modes.tensor[0] @ field.chi  # (N, 3, 3)
    sigma = modes.one_form[0] @ field.sigma
    beta = modes.scalar[0] @ field.beta
    return chi, sigma, beta


def _tensor_sq(chi, sigma, beta, a):
    return np.einsum("nab,nab->n", chi, chi) / a**2 + 2.0 * np.einsum("na,na->n", sigma, sigma) / a + beta**2


def pointwise_norm_sq(field, t: float, modes: CylinderModes) -> np.ndarray:
    """``|field|^2_gbar(t)`` at the quadrature nodes."""
    _check_time(t)
    a = 2.0 - 2.0 * t
    if isinstance(field, CylinderVectorField):
        xi, eta = _vector_parts(field, modes)
        return a * np.einsum("na,na->n", xi, xi) + eta**2
    return _tensor_sq(*_tensor_parts(field, modes), a)


def gauge_norm(field, t: float, modes: CylinderModes) -> float:
    """Sup over the nodes of ``|field|_gbar(t)``.

    Weights relative to the fixed round metric: tangent vector ``sqrt(2-2t)``,
    sphere 2-tensor ``1/(2-2t)``, mixed ``dz sigma`` term ``(2-2t)^(-1/2)``
    (counted twice), axial parts 1.
    """
    return float(np.sqrt(pointwise_norm_sq(field, t, modes).max()))


@dataclass(frozen=True)
class GapSample:
    t: float
    lambda_star: float
    gap: float


def _minimize_sup(sq_of_lambda, seed: float, scale: float) -> tuple[float, float]:
    # The sup norm is convex in lambda, so bounded Brent finds the minimizer.  It
    # is minimized unsquared: a zero gap is then a kink located to xatol.
    half = 10.0 * max(scale, 1e-300)

    def norm(lam):
        return float(np.sqrt(max(sq_of_lambda(lam), 0.0)))

    res = minimize_scalar(norm, bounds=(seed - half, seed + half), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, half)})
    return float(res.x), norm(float(res.x))


def axial_projection_gap(field: CylinderVectorField, t: float, modes: CylinderModes) -> GapSample:
    """``inf_lambda sup |V - lambda d/dz|_gbar(t)``."""
    _check_time(t)
    f = evolve_vector(field, t, modes) if field.time != t else field
    xi, eta = _vector_parts(f, modes)
    base = (2.0 - 2.0 * t) * np.einsum("na,na->n", xi, xi)
    seed = float(f.eta[0] * modes.scalar[0][0, 0])
    scale = float(np.sqrt((base + eta**2).max()))

    def sq(lam):
        return float((base + (eta - lam) ** 2).max())

    lam, gap = _minimize_sup(sq, seed, scale)
    return GapSample(t, lam, gap)


def ric_projection_gap(field: CylinderTensorField, t: float, modes: CylinderModes,
                       metric: str = "gbar") -> GapSample:
    """``inf_lambda sup |h - lambda Ric|`` with ``Ric = g_S2``.

    ``metric="gbar"`` measures in ``gbar(t)``; ``metric="round"`` measures only the
    chi block in the fixed round metric (the quantity bounded by ``N (1-t)``).
    """
    _check_time(t)
    f = evolve_tensor(field, t, modes) if field.time != t else field
    chi, sigma, beta = _tensor_parts(f, modes)
    a = 2.0 - 2.0 * t if metric == "gbar" else 1.0
    rest = 0.0 if metric == "round" else 2.0 * np.einsum("na,na->n", sigma, sigma) / a + beta**2
    k = modes.stationary_trace_index()
    seed = float(f.chi[k] * np.trace(modes.tensor[0][0, :, :, k]) / 2.0)
    P = modes.basis.projector

    def sq(lam):
        d = chi - lam * P
        return float((np.einsum("nab,nab->n", d, d) / a**2 + rest).max())

    scale = float(np.sqrt(np.einsum("nab,nab->n", chi, chi).max())) + abs(seed)
    lam, gap = _minimize_sup(sq, seed, scale)
    return GapSample(t, lam, gap)


def sigma_round_norm(field: CylinderTensorField, t: float, modes: CylinderModes) -> float:
    """Sup of ``|sigma|`` in the fixed round metric."""
    f = evolve_tensor(field, t, modes) if field.time != t else field
    sigma = modes.one_form[0] @ f.sigma
    return float(np.sqrt(np.einsum("na,na->n", sigma, sigma).max()))


def fit_exponent(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of ``log values`` against ``log(1 - t)``."""
    x = np.log(1.0 - np.asarray(times))
    y = np.log(np.asarray(values))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# Random hypothesis-normalized data

HYPOTHESIS_TIMES = np.concatenate([[1e-9], np.linspace(0.01, 0.5, 50)])


def random_vector_field(rng: np.random.Generator, modes: CylinderModes) -> CylinderVectorField:
    """Random data at t = 1/2 scaled so that ``sup_{t <= 1/2} |V(t)|_gbar = 1``."""
    f = CylinderVectorField(rng.standard_normal(modes.one_form[0].shape[-1]),
                            rng.standard_normal(modes.basis.size), 0.5)
    peak = max(gauge_norm(evolve_vector(f, t, modes), t, modes) for t in HYPOTHESIS_TIMES)
    return f.scaled(1.0 / peak)


def random_tensor_field(rng: np.random.Generator, modes: CylinderModes) -> CylinderTensorField:
    """Random data at t = 1/2 scaled so that ``sup_{t <= 1/2} (1-t) |h(t)|_gbar = 1``."""
    f = CylinderTensorField(rng.standard_normal(modes.tensor[0].shape[-1]),
                            rng.standard_normal(modes.one_form[0].shape[-1]),
                            rng.standard_normal(modes.basis.size), 0.5)
    peak = max((1.0 - t) * gauge_norm(evolve_tensor(f, t, modes), t, modes) for t in HYPOTHESIS_TIMES)
    return f.scaled(1.0 / peak)


# ---------------------------------------------------------------------------
# Anderson-Chow


def _u(field: CylinderTensorField, t: float, modes: CylinderModes) -> np.ndarray:
    return pointwise_norm_sq(evolve_tensor(field, t, modes), t, modes) * (1.0 - t) ** 2


def _violation(field, t_grid, dt, modes) -> float:
    ab = modes.analysis_basis
    lap_l = ab.laplacian_eigenvalues()
    worst = -np.inf
    for t in t_grid:
        dudt = (_u(field, t + dt, modes) - _u(field, t - dt, modes)) / (2.0 * dt)
        u = _u(field, t, modes)
        lap = -ab.values @ (lap_l * ab.analyze(u)) / (2.0 - 2.0 * t)
        worst = max(worst, float((dudt - lap).max()))
    return worst


def anderson_chow_violation(field: CylinderTensorField, t_grid, modes: CylinderModes,
                            dt: float = 1e-3, tol: float = 1e-6) -> float:
    """Max over nodes and times of ``d/dt u - Delta_gbar u`` with ``u = |h|^2 / R^2``.

    ``d/dt u`` is a centered difference with step ``dt``; the computation is
    repeated with ``dt/2`` and a disagreement above ``tol`` raises.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.min() - dt <= 0.0 or t_grid.max() + dt >= 1.0:
        raise ValueError("t_grid +- dt must stay inside (0, 1)")
    coarse = _violation(field, t_grid, dt, modes)
    fine = _violation(field, t_grid, dt / 2.0, modes)
    if abs(coarse - fine) > tol:
        raise ResolutionError(f"time step {dt} too coarse: {coarse:.3g} vs {fine:.3g}")
    return fine


# ---------------------------------------------------------------------------
# CSV output


def write_trajectories_csv(path, trajs: list[ModeTrajectory], header: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "mode_id", "coefficient"])
        for tr in trajs:
            for t, c in zip(tr.times, tr.coefficients):
                w.writerow([repr(float(t)), tr.mode_id, repr(float(c))])


def write_gaps_csv(path, samples: list[GapSample], header: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "gap", "lambda_star"])
        for s in samples:
            w.writerow([repr(float(s.t)), repr(float(s.gap)), repr(float(s.lambda_star))])
