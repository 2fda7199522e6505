"""
Sampled representations of functions on R^N and their quadrature rules.

* `RadialProfile`: radial function φ(r) on a uniform grid 0 = r_0 < ... <
  r_{M-1} = Rmax. Ground states live here.
* `GridFunction`: complex field on the uniform periodic grid
  x_j = -L + j·(2L/n), j < n, of the 1-D box [-L, L). Evolving solutions
  live here.

Both are immutable; the arrays they hold are read-only.
"""
import math
import typing

import numpy as np
from scipy.interpolate import CubicSpline

from django.conf import settings

from apps.base.utils import frozen, is_power_of_two, weighted_sum
from apps.core_types.parameters import Parameters

TAIL_TOLERANCE = settings.NLSLAB_TAIL_TOLERANCE

# Surface measure of the unit sphere in R^N
SURFACE_MEASURE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


class RadialProfile(typing.NamedTuple):
    r: np.ndarray
    values: np.ndarray
    N: int
    tail_rate: float

    @classmethod
    def build(cls, r, values, N: int) -> "RadialProfile":
        """
        Validates the abscissae (r[0] = 0, uniform, strictly increasing),
        freezes the arrays and fits `tail_rate`.
        """
        r = frozen(r)
        values = frozen(values)
        if r.ndim != 1 or r.shape != values.shape or len(r) < 5:
            raise ValueError("r and values must be 1-D of equal length >= 5")
        if r[0] != 0:
            raise ValueError("A radial profile must start at r = 0")
        steps = np.diff(r)
        if np.any(steps <= 0):
            raise ValueError("Radial abscissae must be strictly increasing")
        if np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("Radial abscissae must be uniformly spaced")
        if N not in SURFACE_MEASURE:
            raise ValueError(f"Unsupported dimension N={N}")
        tail_rate = fit_tail_rate(r, values)
        return cls(r=r, values=values, N=N, tail_rate=tail_rate)

    @property
    def step(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def rmax(self) -> float:
        return float(self.r[-1])

    @property
    def size(self) -> int:
        return len(self.r)

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile.build(self.r, values, self.N)

    def is_positive_decreasing(self) -> bool:
        return bool(self.values[0] > 0 and np.all(np.diff(self.values) < 0))

    def tail_captured(self, tolerance: float = TAIL_TOLERANCE) -> bool:
        return bool(abs(self.values[-1]) < tolerance * abs(self.values[0]))


class GridFunction(typing.NamedTuple):
    L: float
    n: int
    values: np.ndarray
    mass: float

    @classmethod
    def from_values(cls, L: float, values) -> "GridFunction":
        """Builds a grid function and stores its mass (∫|u|² dx)"""
        values = frozen(values, dtype=complex)
        n = len(values)
        if values.ndim != 1 or not is_power_of_two(n):
            raise ValueError(f"Grid size must be a power of two (got {n})")
        if L <= 0:
            raise ValueError(f"Box half-width must be positive (got {L})")
        dx = 2.0 * L / n
        mass = weighted_sum(np.full(n, dx), np.abs(values) ** 2)
        return cls(L=float(L), n=n, values=values, mass=mass)

    @classmethod
    def from_function(
        cls, L: float, n: int, func: typing.Callable
    ) -> "GridFunction":
        return cls.from_values(L, func(grid_points(L, n)))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return grid_points(self.L, self.n)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order"""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def with_values(self, values) -> "GridFunction":
        return GridFunction.from_values(self.L, values)

    def conjugate(self) -> "GridFunction":
        return self._replace(values=frozen(np.conj(self.values), complex))


class GroundState(typing.NamedTuple):
    """
    A computed ground state φ_ω of -Δφ + ωφ - a|φ|^{p-1}φ - b|φ|^{q-1}φ = 0.

    `diagnostics` is the `apps.functionals.FunctionalReport` of `profile`.
    """

    params: Parameters
    profile: RadialProfile
    phi0: float
    diagnostics: typing.Any

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def nehari_residual(self) -> float:
        """|K_ω(φ)| / (‖∇φ‖² + ω‖φ‖²)"""
        d = self.diagnostics
        return abs(d.K_omega) / (d.grad2 + self.omega * d.mass)

    @property
    def virial_residual(self) -> float:
        """|P(φ)| / ‖∇φ‖²"""
        d = self.diagnostics
        return abs(d.P) / d.grad2


def grid_points(L: float, n: int) -> np.ndarray:
    return -L + (2.0 * L / n) * np.arange(n)


def fit_tail_rate(r: np.ndarray, values: np.ndarray) -> float:
    """
    Exponential decay rate fitted over the last decade of positive samples:
    the trailing samples whose magnitude is within a factor 10 of the last
    positive sample. Returns NaN when no decade can be identified.
    """
    positive = np.flatnonzero(values > 0)
    if len(positive) < 2:
        return float("nan")
    last = positive[-1]
    threshold = 10.0 * values[last]
    start = last
    while start > 0 and 0 < values[start - 1] <= threshold:
        start -= 1
    if last - start < 1:
        return float("nan")
    segment = slice(start, last + 1)
    slope = np.polyfit(r[segment], np.log(values[segment]), 1)[0]
    return float(-slope)


def radial_weights(r: np.ndarray, N: int) -> np.ndarray:
    """
    Composite trapezoid weights for ∫_{R^N} f dx = σ_N ∫_0^Rmax f r^{N-1} dr.

    For N = 2 the integrand f·r has a non-vanishing slope at r = 0, so the
    first Euler-Maclaurin end correction (h²/12)·f(0) is folded into w_0.
    For N = 1, 3 that slope vanishes for smooth radial f.
    """
    h = r[1] - r[0]
    weights = np.full(len(r), h) * r ** (N - 1)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    if N == 2:
        weights[0] += h * h / 12.0
    return SURFACE_MEASURE[N] * weights


def quadrature(v: typing.Union[RadialProfile, GridFunction]) -> np.ndarray:
    """
    Weights w_i with Σ w_i f(x_i) ≈ ∫ f over the whole domain.

    * RadialProfile: `radial_weights` (surface measure included)
    * GridFunction: the periodic trapezoid rule, w_j = 2L/n
    """
    if isinstance(v, GridFunction):
        return np.full(v.n, v.dx)
    return radial_weights(v.r, v.N)


def even_spline(profile: RadialProfile) -> CubicSpline:
    """Cubic spline through the even extension φ(-r) = φ(r)"""
    r = np.concatenate([-profile.r[:0:-1], profile.r])
    values = np.concatenate([profile.values[:0:-1], profile.values])
    return CubicSpline(r, values)


def sample_radial(profile: RadialProfile, radii) -> np.ndarray:
    """φ(|x|) at arbitrary radii, 0 beyond Rmax"""
    radii = np.abs(np.asarray(radii, dtype=float))
    inside = radii <= profile.rmax
    samples = even_spline(profile)(np.where(inside, radii, 0.0))
    return np.where(inside, samples, 0.0)


def profile_on_grid(profile: RadialProfile, L: float, n: int) -> GridFunction:
    """Transfers a 1-D radial profile onto the periodic grid of [-L, L)"""
    if profile.N != 1:
        raise ValueError("Only N = 1 profiles live on the periodic grid")
    return GridFunction.from_values(
        L, sample_radial(profile, grid_points(L, n))
    )
