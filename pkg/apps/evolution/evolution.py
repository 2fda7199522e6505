"""
Time evolution of the 1-D double-power NLS and its diagnostics.

`evolve` samples the solution on a uniform time lattice and stops at the
first step-size collapse. Finite-time blowup cannot be represented on a
fixed grid; the BLOWUP verdict is a proxy combining two signals: the
nonlinear step bound has collapsed (by `collapse_ratio` from its initial
value, or below `dt_floor`) and ‖∇u‖ has grown past
blowup_gradient_factor·‖∇u₀‖.
"""
import logging
import math
import typing

import numpy as np

from django.conf import settings

from apps.base.columnar import write_table
from apps.base.exceptions import (
    BoxMassLeak,
    HypothesisFailure,
    InvariantViolation,
    TooFewSamples,
)
from apps.base.utils import map_keyed, weighted_sum
from apps.core_types.parameters import Parameters
from apps.core_types.representations import GridFunction, GroundState
from apps.evolution.splitting import (
    ORDERS,
    Propagator,
    advance,
    nonlinear_rate,
)
from apps.functionals.functionals import norms, spectral_tail_fraction
from apps.scaling_analysis.analysis import ground_reference, membership

SLACK_TOLERANCE = settings.NLSLAB_SLACK_TOLERANCE
VIRIAL_TOLERANCE = settings.NLSLAB_VIRIAL_TOLERANCE
THREADS = settings.NLSLAB_THREADS

RAN_TO_HORIZON = "RAN_TO_HORIZON"
BLOWUP = "BLOWUP"
STEP_COLLAPSE = "STEP_COLLAPSE"

# Outer share of the box watched for mass reaching the periodic boundary
BOUNDARY_LAYER = 0.05
INITIAL_LEAK_TOLERANCE = 1e-8
LEAK_TOLERANCE = 1e-6
# Samples are trusted while this band holds all but trust_tolerance of ‖u‖²
TRUST_BAND = 0.5
MIN_VIRIAL_SAMPLES = 5
TRACE_KIND = "trace"
TRACE_COLUMNS = ("t", "mass", "energy", "K_omega", "P", "grad_norm", "virial")

logger = logging.getLogger(__name__)


class EvolutionConfig(typing.NamedTuple):
    dt0: float = 1e-3
    t_end: float = 1.0
    cfl_safety: float = 0.2
    blowup_gradient_factor: float = 10.0
    conservation_tolerance: float = 1e-8
    dealias: bool = True
    sample_interval: float = 0.01
    collapse_ratio: float = 1e-3
    dt_floor: float = 1e-12
    trust_tolerance: float = 1e-8
    order: int = 2
    healthy_rotation: float = 0.1

    def check(self) -> "EvolutionConfig":
        if self.dt0 <= 0 or self.t_end <= 0:
            raise ValueError("dt0 and t_end must be positive")
        if self.blowup_gradient_factor <= 1:
            raise ValueError("blowup_gradient_factor must exceed 1")
        if self.cfl_safety <= 0 or self.sample_interval <= 0:
            raise ValueError("cfl_safety and sample_interval must be positive")
        if not 0 < self.collapse_ratio < 1:
            raise ValueError("collapse_ratio must lie in (0, 1)")
        if self.dt_floor <= 0:
            raise ValueError("dt_floor must be positive")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.healthy_rotation <= 0:
            raise ValueError("healthy_rotation must be positive")
        return self

    def check_grid(self, u0: GridFunction, grad_norm: float):
        """
        Rejects runs whose gradient threshold the grid cannot represent: on
        the grid ‖∇u‖ <= k_max·‖u‖.
        """
        ceiling = math.pi / u0.dx * math.sqrt(u0.mass)
        if self.blowup_gradient_factor * grad_norm >= ceiling:
            raise ValueError(
                f"Gradient threshold {self.blowup_gradient_factor}·"
                f"{grad_norm:.4g} exceeds the largest gradient norm "
                f"{ceiling:.4g} the grid represents"
            )


class Verdict(typing.NamedTuple):
    kind: str
    t: typing.Optional[float] = None

    @property
    def blowup(self) -> bool:
        return self.kind == BLOWUP

    def as_dict(self):
        return dict(self._asdict())


class EvolutionTrace(typing.NamedTuple):
    """
    Diagnostics on the sample lattice t_k = k·sample_interval (the last
    sample is t_end or the last lattice point before detection). `virial`
    is ‖(x - x_c)u‖² with x_c the initial mass centroid and `rate` the
    largest nonlinear phase velocity a|u|^{p-1} + b|u|^{q-1} on the grid.
    """

    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    K_omega: np.ndarray
    P: np.ndarray
    grad_norm: np.ndarray
    virial: np.ndarray
    rate: np.ndarray
    trusted: np.ndarray
    verdict: Verdict
    params: Parameters
    config: EvolutionConfig
    initial: GridFunction
    final: GridFunction
    centroid: float
    steps: int

    @property
    def size(self) -> int:
        return len(self.times)

    def columns(self) -> typing.Dict[str, np.ndarray]:
        series = (
            self.times,
            self.mass,
            self.energy,
            self.K_omega,
            self.P,
            self.grad_norm,
            self.virial,
        )
        return dict(zip(TRACE_COLUMNS, series))

    def trusted_prefix(self) -> int:
        """Number of leading samples that are trusted"""
        untrusted = np.flatnonzero(~self.trusted)
        return int(untrusted[0]) if len(untrusted) else self.size

    def uniform_prefix(self) -> int:
        """Number of leading samples on the uniform lattice"""
        expected = self.config.sample_interval * np.arange(self.size)
        off = np.flatnonzero(
            np.abs(self.times - expected)
            > 1e-9 * self.config.sample_interval
        )
        return int(off[0]) if len(off) else self.size

    def healthy_prefix(self) -> int:
        """
        Number of leading samples whose fastest phase rotation per sample
        interval stays within healthy_rotation
        """
        rotation = self.rate * self.config.sample_interval
        fast = np.flatnonzero(rotation > self.config.healthy_rotation)
        return int(fast[0]) if len(fast) else self.size


class _Sample(typing.NamedTuple):
    mass: float
    energy: float
    K_omega: float
    P: float
    grad_norm: float
    virial: float
    rate: float
    trusted: bool


def _boundary_fraction(u: GridFunction) -> float:
    density = np.abs(u.values) ** 2
    outer = np.abs(u.x) >= (1 - BOUNDARY_LAYER) * u.L
    total = weighted_sum(np.full(u.n, u.dx), density)
    if total == 0:
        return 0.0
    return weighted_sum(np.full(outer.sum(), u.dx), density[outer]) / total


def centroid(u: GridFunction) -> float:
    density = np.abs(u.values) ** 2
    weights = np.full(u.n, u.dx)
    return weighted_sum(weights, u.x * density) / weighted_sum(
        weights, density
    )


def virial(u: GridFunction, center: float = 0.0) -> float:
    """‖(x - center)u‖²"""
    weights = np.full(u.n, u.dx) * (u.x - center) ** 2
    return weighted_sum(weights, np.abs(u.values) ** 2)


def _sample(
    u: GridFunction, params: Parameters, config, center: float, t: float
) -> _Sample:
    report = norms(u, params, check_resolution=False)
    tail = spectral_tail_fraction(u, band=TRUST_BAND)
    trusted = tail <= config.trust_tolerance
    if trusted:
        leaked = _boundary_fraction(u)
        if leaked > LEAK_TOLERANCE:
            raise BoxMassLeak(
                f"{leaked:.3e} of the mass reached the box edge at t={t:.6g};"
                " enlarge the box",
                t=t,
                leaked=leaked,
            )
    return _Sample(
        mass=report.mass,
        energy=report.E,
        K_omega=report.K_omega,
        P=report.P,
        grad_norm=math.sqrt(report.grad2),
        virial=virial(u, center),
        rate=float(np.max(nonlinear_rate(u.values, params))),
        trusted=trusted,
    )


def _step_bound(values: np.ndarray, params: Parameters, cfl: float) -> float:
    """Largest dt keeping the nonlinear rotation per step below `cfl`"""
    rate = float(np.max(nonlinear_rate(values, params)))
    return math.inf if rate == 0 else cfl / rate


def evolve(
    u0: GridFunction,
    params: Parameters,
    config: EvolutionConfig = EvolutionConfig(),
) -> EvolutionTrace:
    """
    Integrates the NLS from u0 to t_end or to the first step-size collapse.

    Parameters:
    * u0 {GridFunction}: Initial datum, 1-D
    * params {Parameters}: Model (N must be 1; a = b = 0 gives free runs)
    * config {EvolutionConfig}: Step control and detection thresholds

    Returns:
    * trace {EvolutionTrace}

    Raises `BoxMassLeak` when more than 1e-8 of the mass starts in the
    boundary layer of the box, or more than 1e-6 reaches it at a trusted
    sample.
    """
    if params.N != 1:
        raise ValueError("Evolution is implemented on the 1-D grid only")
    config.check()
    leaked = _boundary_fraction(u0)
    if leaked > INITIAL_LEAK_TOLERANCE:
        raise BoxMassLeak(
            f"{leaked:.3e} of the initial mass sits at the box edge",
            t=0.0,
            leaked=leaked,
        )

    center = centroid(u0)
    samples = [_sample(u0, params, config, center, 0.0)]
    times = [0.0]
    grad0 = samples[0].grad_norm
    config.check_grid(u0, grad0)

    prop = Propagator.for_grid(u0, config.dealias)
    values = np.asarray(u0.values)
    bound0 = _step_bound(values, params, config.cfl_safety)
    interval = config.sample_interval
    t, index, steps = 0.0, 0, 0
    verdict = Verdict(RAN_TO_HORIZON)

    while t < config.t_end:
        target = min((index + 1) * interval, config.t_end)
        bound = _step_bound(values, params, config.cfl_safety)
        if bound < config.collapse_ratio * bound0 or bound < config.dt_floor:
            grad = math.sqrt(
                norms(u0.with_values(values), params, False).grad2
            )
            if grad > config.blowup_gradient_factor * grad0:
                verdict = Verdict(BLOWUP, t)
            else:
                verdict = Verdict(STEP_COLLAPSE, t)
            logger.info(
                f"{verdict.kind} at t={t:.6g}: step bound {bound:.3e}, "
                f"gradient ratio {grad / grad0:.3g}"
            )
            break

        dt = min(config.dt0, bound, target - t)
        values = advance(values, dt, params, prop, config.order)
        steps += 1
        t += dt
        if target - t <= 1e-12 * interval:
            t = target
            index += 1
            u = u0.with_values(values)
            samples.append(_sample(u, params, config, center, t))
            times.append(t)

    def column(name):
        return np.array([getattr(s, name) for s in samples], dtype=float)

    if verdict.kind == RAN_TO_HORIZON:
        logger.info(f"Ran to t={t:.6g} in {steps} steps")
    return EvolutionTrace(
        times=np.array(times),
        mass=column("mass"),
        energy=column("energy"),
        K_omega=column("K_omega"),
        P=column("P"),
        grad_norm=column("grad_norm"),
        virial=column("virial"),
        rate=column("rate"),
        trusted=np.array([s.trusted for s in samples], dtype=bool),
        verdict=verdict,
        params=params,
        config=config,
        initial=u0,
        final=u0.with_values(values),
        centroid=center,
        steps=steps,
    )


def evolve_many(
    initials: typing.Dict[typing.Any, GridFunction],
    params: Parameters,
    config: EvolutionConfig = EvolutionConfig(),
    threads: typing.Optional[int] = None,
) -> typing.Dict[typing.Any, EvolutionTrace]:
    """Independent runs keyed like `initials`"""
    threads = THREADS if threads is None else threads
    return map_keyed(
        lambda key: evolve(initials[key], params, config),
        list(initials),
        threads=threads,
    )


# Checks on traces


class ConservationReport(typing.NamedTuple):
    mass_drift: float
    energy_drift: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return max(self.mass_drift, self.energy_drift) <= self.tolerance

    def as_dict(self):
        return dict(self._asdict(), holds=self.holds)


def conservation_check(trace: EvolutionTrace) -> ConservationReport:
    """
    Largest relative drift of mass and energy per unit time,
    max_k |X(t_k) - X(0)| / (|X(0)|·max(t_k, 1)). The energy is measured
    against max(|E(u₀)|, ½‖∇u₀‖²).
    """
    clock = np.maximum(trace.times, 1.0)
    mass_drift = np.abs(trace.mass - trace.mass[0]) / (trace.mass[0] * clock)
    energy_scale = max(abs(trace.energy[0]), 0.5 * trace.grad_norm[0] ** 2)
    energy_drift = np.abs(trace.energy - trace.energy[0]) / (
        energy_scale * clock
    )
    return ConservationReport(
        mass_drift=float(mass_drift.max()),
        energy_drift=float(energy_drift.max()),
        tolerance=trace.config.conservation_tolerance,
    )


class VirialResidual(typing.NamedTuple):
    times: np.ndarray
    residual: np.ndarray
    scale: float

    @property
    def absolute(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def relative(self) -> float:
        if self.scale == 0:
            return math.inf if self.absolute > 0 else 0.0
        return self.absolute / self.scale

    def holds(self, tolerance: float = VIRIAL_TOLERANCE) -> bool:
        return self.relative <= tolerance

    def as_dict(self):
        return {
            "samples": len(self.times),
            "absolute": self.absolute,
            "relative": self.relative,
            "scale": self.scale,
        }


def _second_difference(series: np.ndarray, spacing: float) -> np.ndarray:
    return (series[2:] - 2 * series[1:-1] + series[:-2]) / spacing ** 2


def _fourth_order_second_difference(
    series: np.ndarray, spacing: float
) -> np.ndarray:
    return (
        -series[4:]
        + 16 * series[3:-1]
        - 30 * series[2:-2]
        + 16 * series[1:-3]
        - series[:-4]
    ) / (12 * spacing ** 2)


def virial_residual(trace: EvolutionTrace) -> VirialResidual:
    """
    d²/dt²‖xu‖² (five-point centered differences) minus 8P(u) on the
    leading uniform, trusted and healthy samples; `relative` is measured
    against max|8P|. A sample is healthy while the nonlinear phase turns by
    at most healthy_rotation per sample interval, so the differences
    resolve the virial.

    Raises `TooFewSamples` below five usable samples.
    """
    usable = min(
        trace.trusted_prefix(), trace.uniform_prefix(), trace.healthy_prefix()
    )
    if usable < MIN_VIRIAL_SAMPLES:
        raise TooFewSamples(
            f"Virial check needs {MIN_VIRIAL_SAMPLES} uniform trusted "
            f"healthy samples, the trace has {usable}",
            samples=usable,
        )
    virial = trace.virial[:usable]
    eight_p = 8 * trace.P[2 : usable - 2]
    residual = (
        _fourth_order_second_difference(
            virial, trace.config.sample_interval
        )
        - eight_p
    )
    return VirialResidual(
        times=trace.times[2 : usable - 2],
        residual=residual,
        scale=float(np.max(np.abs(eight_p))),
    )


class MonotonicityReport(typing.NamedTuple):
    samples: int
    bound: float
    max_P: float
    max_K_omega: float
    max_virial_curvature: float

    def as_dict(self):
        return dict(self._asdict())


def monotonicity_check(
    trace: EvolutionTrace,
    ground: GroundState,
    slack_tolerance: float = SLACK_TOLERANCE,
) -> MonotonicityReport:
    """
    Flow invariance of B_ω along a trace started inside it: at every trusted
    sample P(u) <= E(u₀) - E(φ_ω) (up to slack_tolerance·‖∇u‖²), K_ω(u) < 0,
    P(u) < 0, and the second differences of ‖xu‖² are negative.

    Raises `HypothesisFailure` when u₀ is not in B_ω and `InvariantViolation`
    at the first offending sample.
    """
    verdict = membership(trace.initial, ground)
    if not verdict.in_B:
        raise HypothesisFailure("Initial datum is not in B_omega")

    usable = trace.trusted_prefix()
    if usable == 0:
        raise TooFewSamples("The trace has no trusted samples", samples=0)
    E_ground = ground_reference(ground, like=trace.initial).E
    bound = trace.energy[0] - E_ground

    def violation(i, message):
        raise InvariantViolation(
            f"Sample {i} (t={trace.times[i]:.6g}): {message}",
            sample=i,
            t=float(trace.times[i]),
        )

    for i in range(usable):
        slack = slack_tolerance * trace.grad_norm[i] ** 2
        if trace.P[i] > bound + slack:
            violation(i, f"P={trace.P[i]:.6e} exceeds {bound:.6e}")
        if trace.K_omega[i] >= 0:
            violation(i, f"K_omega={trace.K_omega[i]:.6e} is not negative")
        if trace.P[i] >= 0:
            violation(i, f"P={trace.P[i]:.6e} is not negative")

    usable = min(usable, trace.uniform_prefix())
    curvature = np.array([-math.inf])
    if usable >= 3:
        curvature = _second_difference(
            trace.virial[:usable], trace.config.sample_interval
        )
        for i in np.flatnonzero(curvature >= 0):
            violation(i + 1, f"d²/dt² virial = {curvature[i]:.6e} >= 0")

    return MonotonicityReport(
        samples=int(usable),
        bound=float(bound),
        max_P=float(trace.P[:usable].max()),
        max_K_omega=float(trace.K_omega[:usable].max()),
        max_virial_curvature=float(curvature.max()),
    )


# Storage


def export_trace(trace: EvolutionTrace, path: str) -> str:
    header = dict(trace.params.as_dict())
    for key, value in trace.config._asdict().items():
        header[f"config_{key}"] = value
    header.update(
        L=trace.initial.L,
        n=trace.initial.n,
        centroid=trace.centroid,
        verdict=trace.verdict.kind,
        t_detect="none" if trace.verdict.t is None else trace.verdict.t,
        trusted_samples=trace.trusted_prefix(),
        healthy_samples=trace.healthy_prefix(),
        steps=trace.steps,
    )
    return write_table(path, TRACE_KIND, trace.columns(), header=header)
