"""Single-well profile, lattice potential and semiclassical quantities.

The well ``v(x) = f(|x|)`` is a non-positive radial profile supported in
``|x| < a``.  Wells sit at ``x_j = j b`` with ``b > 2a``.  The localized
modes are approximated by the harmonic Gaussian
``mu^(d/8) (pi hbar)^(-d/4) exp(-sqrt(mu) |x|^2 / (2 hbar))`` with
``mu = f''(0) / 2``, which is exactly normalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import DomainError
from .lattice import LatticeSpec
from .stationary import ModeState

__all__ = [
    "WellProfile",
    "LatticeGeometry",
    "GridSpec",
    "FieldSamples",
    "truncated_parabola",
    "bump_profile",
    "lattice_potential_eval",
    "agmon_s0",
    "harmonic_ground_energy",
    "effective_nonlinearity_c",
    "gaussian_mode",
    "reconstruct_wavefunction",
    "mass_fraction",
]

_FD_STEP = 1e-4


@dataclass(frozen=True)
class WellProfile:
    """Radial well ``f``, vectorized over ``r >= 0``.

    ``curvature`` is ``f''(0)``; when omitted it is estimated from ``f``.
    Construction checks the profile invariants unless ``validate=False``
    (meant for degenerate test fixtures only).
    """

    f: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    curvature: float | None = None
    source: str = "analytic"
    validate: bool = True

    def __post_init__(self):
        if not self.support_radius > 0:
            raise DomainError(f"support radius must be positive, got {self.support_radius}")
        if self.curvature is None:
            h = _FD_STEP * self.support_radius
            f0, f1 = self(0.0), self(h)
            object.__setattr__(self, "curvature", float(2.0 * (f1 - f0) / h ** 2))
        if self.validate:
            self.check()

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.where(r < self.support_radius, self.f(np.minimum(r, self.support_radius)), 0.0)
        return out if out.ndim else float(out)

    @classmethod
    def from_table(cls, r, values, support_radius: float | None = None) -> "WellProfile":
        """Monotone cubic (PCHIP) interpolant of sampled values.

        ``r`` must start at 0 and increase.  The support radius defaults to
        the first sample where the table reaches 0.
        """
        r = np.asarray(r, dtype=float)
        v = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4:
            raise DomainError("profile table needs at least 4 matching samples")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise DomainError("profile table radii must start at 0 and increase")
        if np.any(v > 0):
            raise DomainError("profile table has positive values")
        if np.any(np.diff(v) < 0):
            raise DomainError("profile table is not monotone non-decreasing")
        slope0 = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * (r[1] - r[0]))
        if abs(slope0) > 1e-8:
            raise DomainError(f"profile slope at r=0 is {slope0:.3g}, expected 0")
        if support_radius is None:
            zeros = np.flatnonzero(v == 0.0)
            if zeros.size == 0:
                raise DomainError("profile table never reaches 0; pass support_radius")
            support_radius = float(r[zeros[0]])
        # PCHIP slopes, with the slope at the origin pinned to 0 (still monotone)
        slopes = PchipInterpolator(r, v).derivative()(r)
        slopes[0] = 0.0
        interp = CubicHermiteSpline(r, v, slopes, extrapolate=False)
        # f(r) ~ f(0) + mu r^2 near the origin
        curvature = 2.0 * (v[1] - v[0]) / r[1] ** 2
        return cls(lambda x: np.nan_to_num(interp(x), nan=0.0), support_radius, curvature, "table")

    @property
    def v_min(self) -> float:
        return float(self(0.0))

    @property
    def mu(self) -> float:
        return 0.5 * self.curvature

    def check(self, n: int = 4001) -> None:
        """Raise :class:`DomainError` if any profile invariant fails."""
        a = self.support_radius
        r = np.linspace(0.0, 2 * a, n)
        v = self(r)
        if not self.v_min < 0:
            raise DomainError(f"well depth f(0) = {self.v_min} must be negative")
        if np.any(v > 1e-14):
            raise DomainError("profile takes positive values")
        if np.any(np.diff(v) < -1e-12):
            raise DomainError("profile is not monotone non-decreasing")
        if np.any(v[r >= a] != 0.0):
            raise DomainError("profile does not vanish beyond the support radius")
        h = _FD_STEP * a
        slope0 = (-3 * self(0.0) + 4 * self(h) - self(2 * h)) / (2 * h)
        # tables are checked on their own samples in from_table
        if self.source != "table" and abs(slope0) > 1e-8:
            raise DomainError(f"profile slope at r=0 is {slope0:.3g}, expected 0")
        if not self.curvature > 0:
            raise DomainError(f"f''(0) = {self.curvature} must be positive")


def truncated_parabola(depth: float = 1.0, a: float = 1.0) -> WellProfile:
    """``f(r) = depth ((r/a)^2 - 1)`` inside the support, 0 outside."""
    return WellProfile(lambda r: depth * ((r / a) ** 2 - 1.0), a, 2.0 * depth / a ** 2)


def bump_profile(depth: float = 1.0, a: float = 1.0) -> WellProfile:
    """Smooth compactly supported well ``-depth exp(1 - 1/(1 - (r/a)^2))``."""

    def f(r):
        s = (np.asarray(r, dtype=float) / a) ** 2
        inside = s < 1.0
        gap = np.where(inside, 1.0 - s, 1.0)
        return np.where(inside, -depth * np.exp(1.0 - 1.0 / gap), 0.0)

    return WellProfile(f, a, 2.0 * depth / a ** 2)


@dataclass(frozen=True)
class LatticeGeometry:
    spacing: float
    spec: LatticeSpec

    def __post_init__(self):
        if not self.spacing > 0:
            raise DomainError(f"lattice spacing must be positive, got {self.spacing}")

    @property
    def centers(self) -> np.ndarray:
        return self.spec.centers(self.spacing)

    def check_separation(self, profile: WellProfile) -> None:
        if not self.spacing > 2 * profile.support_radius:
            raise DomainError(f"wells overlap: spacing {self.spacing} <= 2a = {2 * profile.support_radius}")


def lattice_potential_eval(x, geom: LatticeGeometry, profile: WellProfile):
    """``sum_j f(|x - x_j|)`` at points ``x`` of shape ``(..., d)``."""
    geom.check_separation(profile)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != geom.spec.dims:
        raise DomainError(f"points have dimension {x.shape[-1]}, lattice has {geom.spec.dims}")
    dist = np.linalg.norm(x[..., None, :] - geom.centers, axis=-1)
    out = np.sum(profile(dist), axis=-1)
    return out if out.ndim else float(out)


def agmon_s0(profile: WellProfile, b: float, return_error: bool = False):
    """``2 int_0^{b/2} sqrt(f(r) - f(0)) dr`` by adaptive quadrature.

    The support edge is passed to the integrator as a breakpoint since the
    integrand is only piecewise smooth there.
    """
    if not b > 2 * profile.support_radius and profile.validate:
        raise DomainError(f"spacing {b} must exceed twice the support radius {profile.support_radius}")
    f0 = profile.v_min
    probe = profile(np.linspace(0.0, b / 2, 2001)) - f0
    if np.any(probe < -1e-14):
        raise DomainError("integrand negative: profile dips below f(0)")

    def g(r):
        return np.sqrt(max(profile(r) - f0, 0.0))

    pts = [profile.support_radius] if profile.support_radius < b / 2 else None
    val, err = quad(g, 0.0, b / 2, points=pts, epsabs=0.0, epsrel=1e-11, limit=2000)
    return (2 * val, 2 * err) if return_error else 2 * val


def harmonic_ground_energy(profile: WellProfile, hbar: float, d: int) -> float:
    """Leading semiclassical ground energy ``f(0) + d sqrt(mu) hbar``."""
    if not hbar > 0:
        raise DomainError(f"hbar must be positive, got {hbar}")
    if not profile.curvature > 0:
        raise DomainError(f"f''(0) = {profile.curvature} must be positive")
    return profile.v_min + d * np.sqrt(profile.mu) * hbar


def _gaussian_norm(mu: float, hbar: float, d: int) -> float:
    return mu ** (d / 8) * (np.pi * hbar) ** (-d / 4)


def effective_nonlinearity_c(profile: WellProfile, hbar: float, d: int, sigma: float) -> float:
    """``int |psi|^(2 sigma + 2)`` for the harmonic Gaussian mode, in closed form.

    This is the leading-order value of the nonlinearity constant ``c``.
    """
    if not hbar > 0:
        raise DomainError(f"hbar must be positive, got {hbar}")
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    p = 2 * sigma + 2
    mu = profile.mu
    return _gaussian_norm(mu, hbar, d) ** p * (2 * np.pi * hbar / (p * np.sqrt(mu))) ** (d / 2)


def gaussian_mode(x, center, mu: float, hbar: float) -> np.ndarray:
    """Normalized Gaussian mode centred at ``center``; ``x`` has shape ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r2 = np.sum((x - np.asarray(center, dtype=float)) ** 2, axis=-1)
    return _gaussian_norm(mu, hbar, d) * np.exp(-np.sqrt(mu) * r2 / (2 * hbar))


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box sampled with ``n[k]`` equally spaced points per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if not len(self.lower) == len(self.upper) == len(self.n):
            raise DomainError("grid bounds and counts must have the same dimension")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)) or any(k < 2 for k in self.n):
            raise DomainError("grid needs upper > lower and at least 2 points per axis")

    @property
    def dims(self) -> int:
        return len(self.n)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, k) for lo, hi, k in zip(self.lower, self.upper, self.n)]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (k - 1) for lo, hi, k in zip(self.lower, self.upper, self.n))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @classmethod
    def covering(cls, geom: LatticeGeometry, margin: float, n: int) -> "GridSpec":
        c = geom.centers
        lo = tuple(float(v) for v in c.min(axis=0) - margin)
        hi = tuple(float(v) for v in c.max(axis=0) + margin)
        return cls(lo, hi, (n,) * geom.spec.dims)


@dataclass
class FieldSamples:
    grid: GridSpec
    values: np.ndarray  # |psi| on the grid, shape grid.n

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.grid.spacing))

    def total_mass(self) -> float:
        return float(np.sum(self.values ** 2) * self.cell_volume)

    def argmax_point(self) -> np.ndarray:
        idx = np.unravel_index(np.argmax(self.values), self.values.shape)
        return np.array([ax[i] for ax, i in zip(self.grid.axes, idx)])


def reconstruct_wavefunction(state: ModeState, geom: LatticeGeometry, profile: WellProfile, hbar: float,
                             grid: GridSpec) -> FieldSamples:
    """``|sum_j sqrt(q_j) e^{i theta_j} phi_j(x)|`` on ``grid``."""
    geom.check_separation(profile)
    if state.q.size != geom.spec.size:
        raise DomainError(f"state has {state.q.size} sites, geometry has {geom.spec.size}")
    if grid.dims != geom.spec.dims:
        raise DomainError(f"grid dimension {grid.dims} does not match lattice dimension {geom.spec.dims}")
    c = geom.centers
    if np.any(c < np.array(grid.lower)) or np.any(c > np.array(grid.upper)):
        raise DomainError("grid does not cover every well centre")
    if not hbar > 0:
        raise DomainError(f"hbar must be positive, got {hbar}")
    x = grid.points()
    psi = np.zeros(x.shape[:-1], dtype=complex)
    for dj, cj in zip(state.coefficients, c):
        psi += dj * gaussian_mode(x, cj, profile.mu, hbar)
    return FieldSamples(grid, np.abs(psi))


def mass_fraction(field: FieldSamples, geom: LatticeGeometry, site: int, region: str = "cell") -> float:
    """Share of ``sum |psi|^2`` near well ``site``.

    ``region="cell"`` counts grid points whose nearest centre is ``site``;
    ``region="ball"`` counts points within ``b/2`` of it.
    """
    x = field.grid.points()
    dens = field.values ** 2
    c = geom.centers
    if region == "cell":
        dist = np.linalg.norm(x[..., None, :] - c, axis=-1)
        mask = np.argmin(dist, axis=-1) == site
    elif region == "ball":
        mask = np.linalg.norm(x - c[site], axis=-1) <= geom.spacing / 2
    else:
        raise DomainError(f"region must be 'cell' or 'ball', got {region!r}")
    return float(dens[mask].sum() / dens.sum())
