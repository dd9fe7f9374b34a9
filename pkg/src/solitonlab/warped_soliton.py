"""Rotationally symmetric steady gradient Ricci soliton (the Bryant soliton).

The metric is ``g = ds^2 + phi(s)^2 g_S2`` on R^3 and the potential ``f(s)``
satisfies ``Ric = D^2 f``.  In the orthonormal frame {d/ds, sphere} this is

    f''  = -2 phi''/phi
    phi'' = (1 - phi'^2 - phi phi' f') / phi

normalized so that ``R + f'^2 = 1`` with ``R(0) = 1`` and ``f(0) = 1``.
The right-hand side is singular at the tip, so the integration starts from a
Taylor expansion at a small ``s_start``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import DOP853
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

__all__ = [
    "IntegrationError",
    "LevelSet",
    "SolitonProfile",
    "TipExpansion",
    "integrate_profile",
    "level_set_lookup",
    "load_profile",
    "save_profile",
    "tip_series",
]

CSV_HEADER = "s,phi,phi_prime,f,f_prime"
SPLINE_DEGREE = 7


class IntegrationError(RuntimeError):
    """Raised when the radial integration cannot be completed."""


# ---------------------------------------------------------------------------
# Tip expansion


def _mul(a: list[Fraction], b: list[Fraction], n: int) -> list[Fraction]:
    out = [Fraction(0)] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j, y in enumerate(b[: n - i]):
                out[i + j] += x * y
    return out


def _der(a: list[Fraction]) -> list[Fraction]:
    return [i * a[i] for i in range(1, len(a))] + [Fraction(0)]


def _series_residuals(phi, f, n):
    """Coefficients of phi*phi'' + phi'^2 + phi*phi'*f' - 1 and phi*f'' + 2*phi''."""
    p1 = _der(phi)
    p2 = _der(p1)
    f1 = _der(f)
    f2 = _der(f1)
    e1 = [a + b + c for a, b, c in zip(_mul(phi, p2, n), _mul(p1, p1, n), _mul(_mul(phi, p1, n), f1, n))]
    e1[0] -= 1
    e2 = [a + 2 * b for a, b in zip(_mul(phi, f2, n), p2)]
    return e1, e2


@dataclass(frozen=True)
class TipExpansion:
    """Taylor data at the tip: ``phi = s + a3 s^3 + ...``, ``f = f0 + b2 s^2 + ...``.

    ``phi_coeffs[k]`` and ``f_coeffs[k]`` are the coefficients of ``s**k``;
    ``phi`` carries odd powers up to ``order``, ``f`` even powers up to ``order - 1``.
    """

    order: int
    phi_coeffs: tuple[float, ...]
    f_coeffs: tuple[float, ...]
    f0: float
    exact_phi: tuple[Fraction, ...] = field(default=(), repr=False, compare=False)
    exact_f: tuple[Fraction, ...] = field(default=(), repr=False, compare=False)

    @property
    def a3(self) -> float:
        return self.phi_coeffs[3]

    @property
    def b2(self) -> float:
        return self.f_coeffs[2]

    def state(self, s: float) -> np.ndarray:
        """``(phi, phi', f, f')`` at arc length ``s``."""
        p = np.asarray(self.phi_coeffs)
        q = np.asarray(self.f_coeffs)
        return np.array([
            npoly.polyval(s, p),
            npoly.polyval(s, npoly.polyder(p)),
            npoly.polyval(s, q),
            npoly.polyval(s, npoly.polyder(q)),
        ])

    def second_derivatives(self, s: float) -> tuple[float, float]:
        p = np.asarray(self.phi_coeffs)
        q = np.asarray(self.f_coeffs)
        return npoly.polyval(s, npoly.polyder(p, 2)), npoly.polyval(s, npoly.polyder(q, 2))

    def ode_residual(self, s: float) -> float:
        """Max absolute residual of the two soliton equations for the truncated series."""
        phi, dphi, _, df = self.state(s)
        d2phi, d2f = self.second_derivatives(s)
        r1 = phi * d2phi + dphi**2 + phi * dphi * df - 1.0
        r2 = phi * d2f + 2.0 * d2phi
        return float(max(abs(r1), abs(r2)))

    def tip_curvatures(self) -> dict[str, float]:
        """Exact limits at ``s = 0``: both sectional curvatures equal ``-6 a3``."""
        k = -6.0 * self.a3
        return {"sec_rad": k, "sec_sph": k, "R": 6.0 * k, "f_prime": 0.0, "R_prime": 0.0}


def tip_series(order: int = 9) -> TipExpansion:
    """Solve the soliton equations order by order at the tip.

    The lowest order fixes only ``b2 = -6 a3``; the remaining scale freedom is
    spent on ``R(0) = -36 a3 = 1``.  Each higher odd order ``k`` is a 2x2 linear
    system for ``(a_k, b_{k-1})`` solved in exact rational arithmetic.
    """
    if order < 3:
        raise ValueError("order must be >= 3")
    order = order if order % 2 else order + 1
    n = order + 3
    phi = [Fraction(0)] * n
    f = [Fraction(0)] * n
    phi[1] = Fraction(1)
    f[0] = Fraction(1)
    phi[3] = Fraction(-1, 36)
    f[2] = Fraction(1, 6)
    for k in range(5, order + 1, 2):
        def residual(a, b):
            p = phi.copy()
            q = f.copy()
            p[k] = a
            q[k - 1] = b
            e1, e2 = _series_residuals(p, q, n)
            return e1[k - 1], e2[k - 2]

        r0 = residual(0, 0)
        ra = residual(1, 0)
        rb = residual(0, 1)
        m11, m12 = ra[0] - r0[0], rb[0] - r0[0]
        m21, m22 = ra[1] - r0[1], rb[1] - r0[1]
        det = m11 * m22 - m12 * m21
        phi[k] = (-r0[0] * m22 + r0[1] * m12) / det
        f[k - 1] = (-r0[1] * m11 + r0[0] * m21) / det
    phi = phi[: order + 1]
    f = f[:order]
    return TipExpansion(
        order=order,
        phi_coeffs=tuple(float(c) for c in phi),
        f_coeffs=tuple(float(c) for c in f),
        f0=float(f[0]),
        exact_phi=tuple(phi),
        exact_f=tuple(f),
    )


# ---------------------------------------------------------------------------
# Radial integration


def _rhs(s, y):
    phi, dphi, _, df = y
    d2phi = (1.0 - dphi * dphi - phi * dphi * df) / phi
    return [dphi, d2phi, df, -2.0 * d2phi / phi]


# Grid spacing is capped relative to s so that the accepted steps double as the
# output grid: values at step points carry a smooth global error, while dense
# output interpolation adds non-smooth noise that spline differentiation amplifies.
TIP_STEP = 5e-3
REL_STEP = 4e-3
DRIFT_FLOOR = 1e-9


@dataclass(frozen=True)
class SolitonProfile:
    s_grid: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray
    integrator_tolerance: float
    expansion: TipExpansion
    s_start: float

    def __post_init__(self):
        for name in ("s_grid", "phi", "phi_prime", "f", "f_prime"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    def spline(self, values: np.ndarray):
        return make_interp_spline(self.s_grid, values, k=SPLINE_DEGREE)

    @cached_property
    def phi_second(self) -> np.ndarray:
        return self.spline(self.phi_prime).derivative()(self.s_grid)

    @cached_property
    def f_second(self) -> np.ndarray:
        return self.spline(self.f_prime).derivative()(self.s_grid)

    @cached_property
    def _f_spline(self):
        return self.spline(self.f)

    def scalar_curvature(self) -> np.ndarray:
        phi, dphi = self.phi, self.phi_prime
        return -4.0 * self.phi_second / phi + 2.0 * (1.0 - dphi**2) / phi**2

    def first_integral_drift(self) -> float:
        """``max |R + f'^2 - 1|`` over the grid."""
        return float(np.max(np.abs(self.scalar_curvature() + self.f_prime**2 - 1.0)))

    def drift_bound(self) -> float:
        """Allowed first-integral drift; roundoff near the tip sets a floor."""
        return max(10.0 * self.integrator_tolerance, DRIFT_FLOOR)

    def node_near_f(self, r: float) -> int:
        return int(np.argmin(np.abs(self.f - r)))


def integrate_profile(
    expansion: TipExpansion,
    s_start: float = 1e-2,
    s_max: float = 2e4,
    tolerance: float = 1e-10,
) -> SolitonProfile:
    """Integrate the reduced soliton ODE from series data at ``s_start`` to ``s_max``.

    Embedded Runge-Kutta 8(5,3) (DOP853) with relative tolerance ``tolerance``.
    The first integral is not enforced, so it remains an error monitor.
    """
    if not 0 < s_start < s_max:
        raise ValueError("need 0 < s_start < s_max")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if expansion.ode_residual(s_start) > tolerance:
        raise ValueError(f"tip series of order {expansion.order} is not accurate at s_start={s_start}")
    rtol = max(tolerance, 100 * np.finfo(float).eps)
    y0 = expansion.state(s_start)

    # A non-finite derivative would stall the step-size control forever.
    def rhs(s, y):
        out = _rhs(s, y)
        if not np.all(np.isfinite(out)):
            raise IntegrationError(f"non-finite derivative at s={s:.6g}")
        return out

    solver = DOP853(rhs, s_start, y0, s_max, rtol=rtol, atol=rtol * np.array([1e-2, 1e-3, 1e-2, 1e-3]))
    ts = [solver.t]
    ys = [solver.y.copy()]
    while solver.status == "running":
        solver.max_step = max(TIP_STEP, REL_STEP * solver.t)
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at s={solver.t:.6g}: {message}")
        if solver.y[0] <= 0:
            raise IntegrationError(f"phi vanished near s={solver.t:.6g}")
        ts.append(solver.t)
        ys.append(solver.y.copy())
    y = np.array(ys).T
    return SolitonProfile(
        s_grid=np.array(ts), phi=y[0], phi_prime=y[1], f=y[2], f_prime=y[3],
        integrator_tolerance=tolerance, expansion=expansion, s_start=s_start,
    )


# ---------------------------------------------------------------------------
# Level sets


class LevelSet(NamedTuple):
    s: float
    phi: float
    phi_prime: float
    f_prime: float


def level_set_lookup(profile: SolitonProfile, r: float, tolerance: float | None = None) -> LevelSet:
    """Locate the level surface ``{f = r}``.

    Below the first grid node the tip series is inverted instead of the spline.
    """
    tol = profile.integrator_tolerance if tolerance is None else tolerance
    exp = profile.expansion
    f_lo, f_hi = exp.f0, float(profile.f[-1])
    if not f_lo <= r <= f_hi:
        raise ValueError(f"level r={r} outside [{f_lo}, {f_hi}]")
    if r == f_lo:
        return LevelSet(0.0, 0.0, 1.0, 0.0)
    if r == f_hi:
        s = profile.s_max
        return LevelSet(s, float(profile.phi[-1]), float(profile.phi_prime[-1]), float(profile.f_prime[-1]))
    if r <= profile.f[0]:
        s = brentq(lambda x: exp.state(x)[2] - r, 0.0, profile.s_start, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        phi, dphi, _, df = exp.state(s)
        return LevelSet(float(s), float(phi), float(dphi), float(df))
    spl = profile._f_spline
    i = int(np.searchsorted(profile.f, r))
    lo, hi = profile.s_grid[max(i - 1, 0)], profile.s_grid[min(i, len(profile.f) - 1)]
    xtol = max(tol * 1e-3, 4 * np.finfo(float).eps * hi)
    s = brentq(lambda x: spl(x) - r, lo, hi, xtol=xtol)
    return LevelSet(
        float(s),
        float(profile.spline(profile.phi)(s)),
        float(profile.spline(profile.phi_prime)(s)),
        float(profile.spline(profile.f_prime)(s)),
    )


# ---------------------------------------------------------------------------
# CSV / JSON persistence


def save_profile(profile: SolitonProfile, path: str | Path, extra: dict | None = None) -> Path:
    """Write the profile CSV and a JSON sidecar with the integration metadata."""
    path = Path(path)
    data = np.column_stack([profile.s_grid, profile.phi, profile.phi_prime, profile.f, profile.f_prime])
    np.savetxt(path, data, delimiter=",", header=CSV_HEADER, comments="", fmt="%.17g")
    meta = {
        "tolerance": profile.integrator_tolerance,
        "s_start": profile.s_start,
        "series_order": profile.expansion.order,
    }
    if extra:
        meta.update(extra)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_profile(path: str | Path) -> SolitonProfile:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header!r} in {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 5 or data.shape[0] < SPLINE_DEGREE + 1:
        raise ValueError(f"malformed profile {path}")
    if not np.all(np.isfinite(data)) or np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"malformed profile {path}")
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return SolitonProfile(
        s_grid=data[:, 0], phi=data[:, 1], phi_prime=data[:, 2], f=data[:, 3], f_prime=data[:, 4],
        integrator_tolerance=float(meta.get("tolerance", 1e-10)),
        expansion=tip_series(int(meta.get("series_order", 9))),
        s_start=float(meta.get("s_start", data[0, 0])),
    )
