import logging
import math
import typing

import numpy as np
from scipy.special import kve

from django.conf import settings

from apps.base.columnar import read_table, write_table
from apps.base.exceptions import (
    BracketingFailure,
    MissingArtifacts,
    StiffnessFailure,
    TruncationTooSmall,
)
from apps.base.utils import map_keyed
from apps.core_types.parameters import Parameters, validate
from apps.core_types.representations import GroundState, RadialProfile
from apps.functionals.functionals import norms
from apps.groundstate.shooting import (
    Bracket,
    ShootingConfig,
    bisect,
    check_bracket,
    cold_bracket,
    expanding_root,
    fired_event,
    integrate,
    series_start,
)

IDENTITY_TOLERANCE = settings.NLSLAB_IDENTITY_TOLERANCE
TAIL_TOLERANCE = settings.NLSLAB_TAIL_TOLERANCE
THREADS = settings.NLSLAB_THREADS

# Profiles are integrated this much tighter than the classification runs:
# integration error grows like e^{√ω r} along the unstable direction
PROFILE_REFINEMENT = 1e-2

GROUND_STATE_KIND = "ground_state"
SWEEP_KIND = "omega_sweep"

logger = logging.getLogger(__name__)


# Closed-form oracles


def single_power_soliton(params: Parameters, r) -> np.ndarray:
    """
    The 1-D soliton of -φ'' + ωφ = c·φ^s, with (s, c) the surviving power:

        φ(r) = ((s+1)ω/(2c))^{1/(s-1)} sech^{2/(s-1)}((s-1)√ω r/2)
    """
    if params.N != 1:
        raise ValueError("Closed-form solitons are only known for N = 1")
    if params.a == 0 and params.b > 0:
        s, c = params.q, params.b
    elif params.b == 0 and params.a > 0:
        s, c = params.p, params.a
    else:
        raise ValueError("Exactly one of a, b must vanish")

    r = np.asarray(r, dtype=float)
    amplitude = ((s + 1) * params.omega / (2 * c)) ** (1 / (s - 1))
    argument = (s - 1) * math.sqrt(params.omega) * r / 2
    return amplitude / np.cosh(argument) ** (2 / (s - 1))


def first_integral_amplitude(params: Parameters) -> float:
    """
    The 1-D ground-state amplitude: the positive root of
    ω = (2a/(p+1))φ0^{p-1} + (2b/(q+1))φ0^{q-1}.
    """
    a, b, p, q = params.a, params.b, params.p, params.q
    return expanding_root(
        lambda phi: 2 * a / (p + 1) * phi ** (p - 1)
        + 2 * b / (q + 1) * phi ** (q - 1)
        - params.omega,
        1.0,
    )


# Profiles


def linear_tail(r, r_match: float, omega: float, N: int) -> np.ndarray:
    """
    Decaying solution r^{1-N/2}K_{N/2-1}(√ω r) of the linearized equation,
    normalized to 1 at r_match. `kve` keeps the ratio finite at large r.
    """
    order = N / 2 - 1
    root = math.sqrt(omega)
    r = np.asarray(r, dtype=float)
    return (
        (r / r_match) ** (1 - N / 2)
        * kve(order, root * r)
        / kve(order, root * r_match)
        * np.exp(-root * (r - r_match))
    )


def shot_profile(
    phi0: float, params: Parameters, config: ShootingConfig
) -> RadialProfile:
    """
    Samples the trajectory of amplitude φ0 on the uniform grid
    r_i = i·step, i·step <= Rmax. The trajectory is followed until it falls
    to tail_match_level·φ0 and continued by `linear_tail` from there.

    Raises `StiffnessFailure` when the trajectory separates (crosses or turns
    back) before the tail level and `TruncationTooSmall` when Rmax cuts the
    profile.
    """
    N, omega = params.N, params.omega
    Rmax, step = config.radius(omega), config.spacing(omega)
    r = step * np.arange(int(round(Rmax / step)) + 1)

    result = integrate(
        phi0,
        params,
        config,
        stop_level=config.tail_match_level,
        dense_output=True,
        refinement=PROFILE_REFINEMENT,
    )
    event = fired_event(result)
    if event is None:
        raise TruncationTooSmall(
            f"Profile did not fall to {config.tail_match_level}·phi0 before "
            f"Rmax={Rmax:.6g}",
            Rmax=Rmax,
        )
    if event != "level":
        raise StiffnessFailure(
            f"Trajectory of phi0={phi0!r} separated ({event}) before "
            "reaching the tail",
            phi0=phi0,
        )

    index = result.event_names.index("level")
    r_match = float(result.t_events[index][0])
    phi_match = float(result.y_events[index][0][0])
    r_start = result.t[0]
    _, _, dphi_start = series_start(phi0, params)
    curvature = dphi_start * N / r_start

    values = np.empty_like(r)
    inner = r < r_start
    shot = (r >= r_start) & (r <= r_match)
    tail = r > r_match
    values[inner] = phi0 + r[inner] ** 2 / (2 * N) * curvature
    values[shot] = result.sol(r[shot])[0]
    values[tail] = phi_match * linear_tail(r[tail], r_match, omega, N)

    if abs(values[-1]) > TAIL_TOLERANCE * phi0:
        raise TruncationTooSmall(
            f"Rmax={Rmax:.6g} cuts the profile: terminal value "
            f"{values[-1]:.3e} exceeds {TAIL_TOLERANCE}·phi0",
            Rmax=Rmax,
        )

    profile = RadialProfile.build(r, values, N)
    if not profile.is_positive_decreasing():
        raise StiffnessFailure(
            f"Shot profile of phi0={phi0!r} is not positive and decreasing",
            phi0=phi0,
        )
    return profile


# Solver


def initial_bracket(params: Parameters, config: ShootingConfig) -> Bracket:
    if config.phi0_bracket is None:
        return cold_bracket(params, config)
    lo, hi = config.phi0_bracket
    return check_bracket(lo, hi, params, config)


def solve_ground_state(
    params: Parameters,
    config: ShootingConfig = ShootingConfig(),
    bracket: typing.Optional[Bracket] = None,
) -> GroundState:
    """
    Computes the ground state φ_ω by bisection on the shooting amplitude.

    Parameters:
    * params {Parameters}: Model; a = 0 or b = 0 selects the single-power
      reduction
    * config {ShootingConfig}: Solver settings
    * bracket {Bracket}: Checked amplitude bracket, overrides
      `config.phi0_bracket`

    Returns:
    * ground {GroundState}: Profile and its `FunctionalReport`

    Raises `BracketingFailure`, `TruncationTooSmall`, `StiffnessFailure`.
    """
    validate(params, single_power=params.a == 0 or params.b == 0)
    config.check()

    if bracket is None:
        bracket = initial_bracket(params, config)
    bracket = bisect(bracket, params, config)
    phi0 = bracket.mid
    logger.debug(
        f"omega={params.omega}: phi0={phi0!r} after {bracket.iterations} "
        "bisections"
    )

    profile = shot_profile(phi0, params, config)
    ground = GroundState(
        params=params,
        profile=profile,
        phi0=phi0,
        diagnostics=norms(profile, params),
    )
    if (
        ground.nehari_residual > IDENTITY_TOLERANCE
        or ground.virial_residual > IDENTITY_TOLERANCE
    ):
        logger.warning(
            f"Ground state at omega={params.omega} misses the identities: "
            f"Nehari residual {ground.nehari_residual:.3e}, virial residual "
            f"{ground.virial_residual:.3e}"
        )
    return ground


def warm_bracket(
    previous: GroundState, params: Parameters, config: ShootingConfig
) -> typing.Optional[Bracket]:
    """
    Bracket continued from the amplitude at the previous (smaller) ω. The
    amplitude grows at most like ω^{1/(s-1)} with s the lower active power,
    which sets the upper end. Returns None when the guess fails.
    """
    power = params.p if params.a > 0 else params.q
    growth = (params.omega / previous.omega) ** (1 / (power - 1))
    lo, hi = previous.phi0, 1.5 * growth * previous.phi0
    try:
        return check_bracket(lo, hi, params, config)
    except BracketingFailure as e:
        logger.warning(
            f"Warm start rejected at omega={params.omega}, falling back to "
            f"a cold bracket: {e}"
        )
        return None


def solve_omega_sweep(
    omegas: typing.Sequence[float],
    template: Parameters,
    config: ShootingConfig = ShootingConfig(),
    threads: typing.Optional[int] = None,
) -> typing.List[GroundState]:
    """
    Ground states along an increasing list of frequencies.

    Sequential sweeps warm-start every bisection from the previous amplitude;
    with threads > 1 each point is solved independently from a cold
    bracket. The ratio ‖φ_ω‖^{p+1}_{p+1} / ‖φ_ω‖^{q+1}_{q+1} is logged per
    point (see `sweep_columns`).
    """
    omegas = [float(omega) for omega in omegas]
    if not omegas:
        raise ValueError("Sweep needs at least one frequency")
    if omegas[0] <= 0 or any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("Sweep frequencies must be positive and increasing")
    threads = THREADS if threads is None else threads
    cold = config._replace(phi0_bracket=None)

    if threads > 1:
        solved = map_keyed(
            lambda omega: solve_ground_state(template.with_omega(omega), cold),
            omegas,
            threads=threads,
        )
        grounds = [solved[omega] for omega in omegas]
    else:
        grounds = []
        for omega in omegas:
            params = template.with_omega(omega)
            bracket = None
            if grounds:
                bracket = warm_bracket(grounds[-1], params, cold)
            grounds.append(
                solve_ground_state(
                    params, config if not grounds else cold, bracket
                )
            )

    for ground in grounds:
        d = ground.diagnostics
        logger.info(
            f"omega={ground.omega:g}: phi0={ground.phi0:.10g} "
            f"E={d.E:.6e} S={d.S_omega:.6e} lp/lq={d.lp / d.lq:.6e}"
        )
    return grounds


def sweep_columns(
    grounds: typing.Sequence[GroundState],
) -> typing.Dict[str, np.ndarray]:
    """Per-ω table of the sweep, ready for `apps.base.columnar`"""

    def column(func):
        return np.array([func(ground) for ground in grounds], dtype=float)

    return {
        "omega": column(lambda g: g.omega),
        "phi0": column(lambda g: g.phi0),
        "mass": column(lambda g: g.diagnostics.mass),
        "grad2": column(lambda g: g.diagnostics.grad2),
        "lp": column(lambda g: g.diagnostics.lp),
        "lq": column(lambda g: g.diagnostics.lq),
        "lp_lq_ratio": column(lambda g: g.diagnostics.lp / g.diagnostics.lq),
        "E": column(lambda g: g.diagnostics.E),
        "S_omega": column(lambda g: g.diagnostics.S_omega),
        "K_omega": column(lambda g: g.diagnostics.K_omega),
        "P": column(lambda g: g.diagnostics.P),
    }


# Storage


def export_ground_state(ground: GroundState, path: str) -> str:
    header = dict(ground.params.as_dict())
    header.update(
        phi0=ground.phi0,
        Rmax=ground.profile.rmax,
        M=ground.profile.size,
    )
    return write_table(
        path,
        GROUND_STATE_KIND,
        {"r": ground.profile.r, "phi": ground.profile.values},
        header=header,
    )


def import_ground_state(path: str) -> GroundState:
    """Reads a table written by `export_ground_state`"""
    table = read_table(path)
    if table.kind != GROUND_STATE_KIND:
        raise MissingArtifacts(f"{path} holds a {table.kind!r} table")
    try:
        params = Parameters(
            N=int(table.header["N"]),
            **{
                name: float(table.header[name])
                for name in ("a", "b", "p", "q", "omega")
            },
        )
        phi0 = float(table.header["phi0"])
    except (KeyError, ValueError) as e:
        raise MissingArtifacts(f"{path} has an incomplete header: {e}")

    profile = RadialProfile.build(
        table.columns["r"], table.columns["phi"], params.N
    )
    return GroundState(
        params=params,
        profile=profile,
        phi0=phi0,
        diagnostics=norms(profile, params),
    )

