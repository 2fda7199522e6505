"""
Shooting on the radial form of the stationary equation

    φ'' + (N-1)/r·φ' = ωφ - a|φ|^{p-1}φ - b|φ|^{q-1}φ,  φ(0) = φ0, φ'(0) = 0.

Above the ground-state amplitude the trajectory crosses zero, below it the
trajectory turns back up before decaying. The ground state separates the two.
"""
import logging
import math
import typing

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from django.conf import settings

from apps.base.exceptions import BracketingFailure, StiffnessFailure
from apps.core_types.parameters import Parameters

# Trajectory classes
CROSSES_ZERO = "CROSSES_ZERO"
DIVERGES = "DIVERGES"
DECAYS = "DECAYS"

# φ > GROWTH_LEVEL·φ0 counts as divergence
GROWTH_LEVEL = 1.5
# φ < DECAY_LEVEL·φ0 with φ' < 0 counts as decay
DECAY_LEVEL = 1e-10
# Relative size of the 1-D first integral treated as zero
FIRST_INTEGRAL_TOLERANCE = 1e-14
# Relative size of U beyond which an integrated verdict must match its sign
CROSS_CHECK_TOLERANCE = 1e-6
# Series start of the integration, in units of 1/√ω
SERIES_RADIUS = 1e-3

MAX_BRACKET_EXPANSIONS = 60

logger = logging.getLogger(__name__)


class ShootingConfig(typing.NamedTuple):
    """
    Settings of one shooting solve. Lengths left as None are derived from
    ω: Rmax = NLSLAB_RADIAL_EXTENT/√ω, step = NLSLAB_RADIAL_STEP/√ω. A None
    bracket is searched for around the amplitude balancing ω against the
    nonlinearity.
    """

    phi0_bracket: typing.Optional[typing.Tuple[float, float]] = None
    ode_tol: float = 1e-10
    Rmax: typing.Optional[float] = None
    bisect_tol: float = 1e-12
    step: typing.Optional[float] = None
    # φ level at which the shot profile is continued by the linear tail
    tail_match_level: float = 1e-3
    max_bisections: int = 200

    def radius(self, omega: float) -> float:
        if self.Rmax is not None:
            return self.Rmax
        return settings.NLSLAB_RADIAL_EXTENT / math.sqrt(omega)

    def spacing(self, omega: float) -> float:
        if self.step is not None:
            return self.step
        return settings.NLSLAB_RADIAL_STEP / math.sqrt(omega)

    def check(self) -> "ShootingConfig":
        if self.phi0_bracket is not None:
            lo, hi = self.phi0_bracket
            if not 0 < lo < hi:
                raise ValueError(
                    f"Amplitude bracket must satisfy 0 < lo < hi (got "
                    f"{self.phi0_bracket})"
                )
        if self.ode_tol <= 0 or self.bisect_tol <= 0:
            raise ValueError("Tolerances must be positive")
        if not 0 < self.tail_match_level < 1:
            raise ValueError("tail_match_level must lie in (0, 1)")
        return self


def nonlinearity(phi, params: Parameters):
    """a|φ|^{p-1}φ + b|φ|^{q-1}φ"""
    modulus = np.abs(phi)
    return (
        params.a * modulus ** (params.p - 1) * phi
        + params.b * modulus ** (params.q - 1) * phi
    )


def first_integral(phi0: float, params: Parameters) -> float:
    """
    U(φ0) = -ωφ0²/2 + aφ0^{p+1}/(p+1) + bφ0^{q+1}/(q+1).

    For N = 1 the quantity φ'²/2 - ωφ²/2 + aφ^{p+1}/(p+1) + bφ^{q+1}/(q+1)
    is conserved, so a trajectory leaving φ0 at rest reaches φ = 0 with
    φ'² = 2U(φ0): it crosses if U > 0, turns back if U < 0 and decays onto
    the origin if U = 0.
    """
    a, b, p, q = params.a, params.b, params.p, params.q
    return (
        -0.5 * params.omega * phi0 ** 2
        + a * phi0 ** (p + 1) / (p + 1)
        + b * phi0 ** (q + 1) / (q + 1)
    )


def expanding_root(func: typing.Callable, start: float) -> float:
    """Root of an increasing `func` with func(0+) < 0"""
    hi = start
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if func(hi) > 0:
            break
        hi *= 2.0
    else:
        raise BracketingFailure("Could not bracket the amplitude root")
    return brentq(func, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def balance_amplitude(params: Parameters) -> float:
    """φ_m > 0 with ω = aφ_m^{p-1} + bφ_m^{q-1}, where φ''(0) changes sign"""
    return expanding_root(
        lambda phi: params.a * phi ** (params.p - 1)
        + params.b * phi ** (params.q - 1)
        - params.omega,
        1.0,
    )


def series_start(
    phi0: float, params: Parameters
) -> typing.Tuple[float, float, float]:
    """
    (r, φ(r), φ'(r)) a short distance off the origin from the expansion
    φ = φ0 + (r²/2N)·c, c = ωφ0 - aφ0^p - bφ0^q.
    """
    r = SERIES_RADIUS / math.sqrt(params.omega)
    c = params.omega * phi0 - float(nonlinearity(phi0, params))
    return r, phi0 + r * r / (2 * params.N) * c, r / params.N * c


def _event(func, direction, terminal=True):
    func.direction = direction
    func.terminal = terminal
    return func


def integrate(
    phi0: float,
    params: Parameters,
    config: ShootingConfig,
    stop_level: typing.Optional[float] = None,
    dense_output: bool = False,
    refinement: float = 1.0,
):
    """
    Runs the radial ODE from the series start up to Rmax with the shooting
    events. `stop_level` (a fraction of φ0) replaces the decay event by a
    stop at φ = stop_level·φ0. The integrator tolerances are
    ode_tol·refinement.

    Returns the `solve_ivp` result, with `event_names` listing the events
    in the order of `result.t_events`.

    Raises `StiffnessFailure` when the integrator gives up.
    """
    N, omega = params.N, params.omega
    r0, phi_start, dphi_start = series_start(phi0, params)

    def rhs(r, y):
        phi, dphi = y
        return [
            dphi,
            -(N - 1) / r * dphi + omega * phi - nonlinearity(phi, params),
        ]

    level = DECAY_LEVEL if stop_level is None else stop_level
    events = {
        CROSSES_ZERO: _event(lambda r, y: y[0], -1),
        "turnaround": _event(lambda r, y: y[1], 1),
        "growth": _event(lambda r, y: y[0] - GROWTH_LEVEL * phi0, 1),
        "level": _event(lambda r, y: y[0] - level * phi0, -1),
    }
    result = solve_ivp(
        rhs,
        (r0, config.radius(omega)),
        [phi_start, dphi_start],
        method="RK45",
        rtol=config.ode_tol * refinement,
        atol=config.ode_tol * refinement * 1e-6 * phi0,
        events=list(events.values()),
        dense_output=dense_output,
    )
    if result.status == -1:
        raise StiffnessFailure(
            f"Radial integration failed for phi0={phi0!r}: "
            f"{result.message}",
            phi0=phi0,
        )
    result.event_names = list(events)
    return result


def fired_event(result) -> typing.Optional[str]:
    for name, times in zip(result.event_names, result.t_events):
        if len(times):
            return name
    return None


def cross_check(phi0: float, params: Parameters, verdict: str) -> str:
    """
    Reconciles an integrated 1-D verdict with the sign of the first
    integral U(φ0). Amplitudes within rounding of the root of U decay, and a
    trajectory that reached the decay level takes the class U predicts.

    Raises `StiffnessFailure` when the integrated class contradicts a U
    that is clearly signed.
    """
    energy = first_integral(phi0, params)
    scale = params.omega * phi0 ** 2
    if abs(energy) <= FIRST_INTEGRAL_TOLERANCE * scale:
        return DECAYS
    expected = CROSSES_ZERO if energy > 0 else DIVERGES
    if verdict == DECAYS:
        return expected
    if verdict != expected and abs(energy) > CROSS_CHECK_TOLERANCE * scale:
        raise StiffnessFailure(
            f"Integrated trajectory of phi0={phi0!r} is {verdict} but the "
            f"first integral {energy:.3e} predicts {expected}",
            phi0=phi0,
        )
    return verdict


def shoot(
    phi0: float, params: Parameters, config: ShootingConfig = ShootingConfig()
) -> str:
    """
    Integrates the trajectory leaving φ0 at rest and classifies it as
    CROSSES_ZERO, DIVERGES or DECAYS. For N = 1 the verdict is
    cross-checked against the first integral (`cross_check`).
    """
    if phi0 <= 0:
        raise ValueError(f"Shooting amplitude must be positive (got {phi0})")

    _, _, dphi_start = series_start(phi0, params)
    if dphi_start >= 0:
        # φ'' ≥ 0 at the origin, the trajectory climbs from the start
        verdict = DIVERGES
    else:
        event = fired_event(integrate(phi0, params, config))
        if event == CROSSES_ZERO:
            verdict = CROSSES_ZERO
        elif event in ("turnaround", "growth"):
            verdict = DIVERGES
        else:
            verdict = DECAYS

    if params.N == 1:
        return cross_check(phi0, params, verdict)
    return verdict


class Bracket(typing.NamedTuple):
    lo: float
    hi: float
    iterations: int = 0

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def cold_bracket(params: Parameters, config: ShootingConfig) -> Bracket:
    """
    Amplitude bracket found without prior knowledge: lo = φ_m/2 climbs
    (DIVERGES), hi grows from 1.5·φ_m by factors of 1.5 until it crosses.
    """
    phi_m = balance_amplitude(params)
    lo, hi = 0.5 * phi_m, 1.5 * phi_m
    for _ in range(MAX_BRACKET_EXPANSIONS):
        verdict = shoot(hi, params, config)
        if verdict == CROSSES_ZERO:
            return Bracket(lo, hi)
        if verdict == DECAYS:
            return Bracket(hi, hi)
        lo, hi = hi, 1.5 * hi
    raise BracketingFailure(
        f"No crossing amplitude found up to {hi:.6g} for omega="
        f"{params.omega}",
        params=params.as_dict(),
    )


def check_bracket(
    lo: float, hi: float, params: Parameters, config: ShootingConfig
) -> Bracket:
    """Raises `BracketingFailure` unless lo diverges and hi crosses"""
    low, high = shoot(lo, params, config), shoot(hi, params, config)
    if low == DECAYS:
        return Bracket(lo, lo)
    if high == DECAYS:
        return Bracket(hi, hi)
    if low != DIVERGES or high != CROSSES_ZERO:
        raise BracketingFailure(
            f"Bracket [{lo}, {hi}] does not separate the trajectory classes "
            f"({low} at lo, {high} at hi)",
            bracket=(lo, hi),
        )
    return Bracket(lo, hi)


def bisect(
    bracket: Bracket, params: Parameters, config: ShootingConfig
) -> Bracket:
    """Halves the amplitude bracket until (hi - lo) <= bisect_tol·hi"""
    lo, hi = bracket.lo, bracket.hi
    iterations = 0
    while hi - lo > config.bisect_tol * hi:
        if iterations >= config.max_bisections:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        verdict = shoot(mid, params, config)
        iterations += 1
        if verdict == CROSSES_ZERO:
            hi = mid
        elif verdict == DIVERGES:
            lo = mid
        else:
            lo = hi = mid
        logger.debug(f"bisection {iterations}: [{lo!r}, {hi!r}] ({verdict})")
    return Bracket(lo, hi, iterations)
