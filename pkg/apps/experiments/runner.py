"""
The experiments behind `manage.py run`.

Every experiment writes its data tables into the run directory and records
one `Check` per invariant it verifies. `run` adds the summary, the manifest
(config echo, version, artifact digests) and a separate timestamp file, so
that everything except the timestamp is reproducible byte for byte.
"""
import hashlib
import json
import logging
import math
import os
import typing

import numpy as np

from django.conf import settings
from django.utils import timezone

import nlslab
from apps.base.columnar import write_table
from apps.base.exceptions import (
    ConfigParse,
    HypothesisFailure,
    InvariantViolation,
    ScalingOutOfBox,
    TooFewSamples,
)
from apps.base.utils import get_error_message
from apps.core_types.representations import GridFunction, profile_on_grid
from apps.evolution.evolution import (
    VIRIAL_TOLERANCE,
    conservation_check,
    evolve,
    evolve_many,
    export_trace,
    monotonicity_check,
    virial_residual,
)
from apps.experiments.config import ExperimentConfig
from apps.functionals.functionals import h1_distance, rescale
from apps.groundstate.solver import (
    SWEEP_KIND,
    export_ground_state,
    first_integral_amplitude,
    single_power_soliton,
    solve_ground_state,
    solve_omega_sweep,
    sweep_columns,
)
from apps.scaling_analysis.analysis import (
    annotate,
    instability_window,
    lemma2_check,
    lemma2_inputs,
    lemmaEP_check,
    locate_omega1,
    membership,
    nehari_slope,
    random_curves,
    verify_shape,
)

IDENTITY_TOLERANCE = settings.NLSLAB_IDENTITY_TOLERANCE
THREADS = settings.NLSLAB_THREADS

MANIFEST = "manifest.json"
TIMESTAMP = "timestamp.json"
SUMMARY = "summary.json"
GROUND_STATE_FILE = "ground_state.txt"

# Closed-form and first-integral oracles
SOLITON_TOLERANCE = 1e-6
AMPLITUDE_TOLERANCE = 1e-8
# Exact free-evolution variance law and its virial second difference
FREE_TOLERANCE = 1e-6
NEHARI_SLOPE_TOLERANCE = 1e-5
# Lemma inputs φ_{ω'} span [LEMMA_OMEGA_RANGE[0]·ω, LEMMA_OMEGA_RANGE[1]·ω]
LEMMA_OMEGA_RANGE = (1.25, 4.0)

logger = logging.getLogger(__name__)


class Check(typing.NamedTuple):
    """Outcome of one invariant; `invariant` names the module it belongs to"""

    invariant: str
    passed: bool
    value: typing.Optional[float] = None
    bound: typing.Optional[float] = None
    detail: str = ""

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.invariant}"
        if self.value is not None:
            text += f": {self.value:.6e}"
            if self.bound is not None:
                text += f" (bound {self.bound:.6e})"
        if self.detail:
            text += f" [{self.detail}]"
        return text

    def as_dict(self):
        return dict(self._asdict(), line=self.line)


class RunResult(typing.NamedTuple):
    config: ExperimentConfig
    run_dir: str
    checks: typing.List[Check]
    artifacts: typing.List[str]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> typing.List[Check]:
        return [check for check in self.checks if not check.passed]


class Run:
    """Run directory, collected checks and written artifacts of one run"""

    def __init__(self, config: ExperimentConfig, threads: int):
        self.config = config
        self.threads = threads
        self.run_dir = config.run_dir
        self.checks: typing.List[Check] = []
        self.artifacts: typing.List[str] = []

    def path(self, name: str) -> str:
        if name not in self.artifacts:
            self.artifacts.append(name)
        return os.path.join(self.run_dir, name)

    def table(self, name, kind, columns, header=None) -> str:
        return write_table(self.path(name), kind, columns, header=header)

    def check(self, invariant, passed, value=None, bound=None, detail=""):
        check = Check(
            invariant=invariant,
            passed=bool(passed),
            value=None if value is None else float(value),
            bound=None if bound is None else float(bound),
            detail=detail,
        )
        log = logger.info if check.passed else logger.warning
        log(check.line)
        self.checks.append(check)
        return check

    def ground_state(self, params):
        ground = solve_ground_state(params, self.config.shooting)
        export_ground_state(ground, self.path(GROUND_STATE_FILE))
        return ground


EXPERIMENTS: typing.Dict[str, typing.Callable[[Run], None]] = {}


def experiment(name: str):
    def register(func):
        EXPERIMENTS[name] = func
        return func

    return register


@experiment("ground_state")
def ground_state(run: Run):
    params = run.config.params
    ground = run.ground_state(params)
    run.check(
        "groundstate: Nehari identity K_omega(phi) = 0",
        ground.nehari_residual <= IDENTITY_TOLERANCE,
        ground.nehari_residual,
        IDENTITY_TOLERANCE,
    )
    run.check(
        "groundstate: virial identity P(phi) = 0",
        ground.virial_residual <= IDENTITY_TOLERANCE,
        ground.virial_residual,
        IDENTITY_TOLERANCE,
    )
    run.check(
        "groundstate: profile positive and decreasing",
        ground.profile.is_positive_decreasing(),
    )
    run.check(
        "core_types: tail captured at Rmax",
        ground.profile.tail_captured(),
        abs(ground.profile.values[-1] / ground.profile.values[0]),
    )
    if params.N != 1:
        return

    if params.a == 0 or params.b == 0:
        exact = single_power_soliton(params, ground.profile.r)
        error = np.max(np.abs(ground.profile.values - exact))
        run.check(
            "groundstate: closed-form soliton in L^inf",
            error <= SOLITON_TOLERANCE,
            error,
            SOLITON_TOLERANCE,
        )
    else:
        amplitude = first_integral_amplitude(params)
        error = abs(ground.phi0 - amplitude) / amplitude
        run.check(
            "groundstate: first-integral amplitude",
            error <= AMPLITUDE_TOLERANCE,
            error,
            AMPLITUDE_TOLERANCE,
        )


@experiment("omega_sweep")
def omega_sweep(run: Run):
    params = run.config.params
    grounds = solve_omega_sweep(
        run.config.sweep.omegas(),
        params,
        run.config.shooting,
        threads=run.threads,
    )
    columns = sweep_columns(grounds)
    header = {k: v for k, v in params.as_dict().items() if k != "omega"}
    run.table("omega_sweep.txt", SWEEP_KIND, columns, header=header)

    residual = max(
        max(g.nehari_residual, g.virial_residual) for g in grounds
    )
    run.check(
        "groundstate: identities along the sweep",
        residual <= IDENTITY_TOLERANCE,
        residual,
        IDENTITY_TOLERANCE,
    )
    run.check(
        "groundstate: d(omega) increasing",
        np.all(np.diff(columns["S_omega"]) > 0),
    )
    signs = np.sign(columns["E"])
    crossings = int(np.count_nonzero(signs[1:] != signs[:-1]))
    run.check(
        "scaling_analysis: E(phi_omega) changes sign once",
        crossings == 1,
        crossings,
        1,
    )
    tail = columns["lp_lq_ratio"][len(grounds) // 2 :]
    run.check(
        "groundstate: lp/lq decreasing along the sweep tail",
        np.all(np.diff(tail) < 0),
    )


def _omega1(run: Run):
    analysis = run.config.analysis
    report = locate_omega1(
        run.config.params,
        analysis.omega1_bracket,
        run.config.shooting,
        rtol=analysis.omega1_rtol,
    )
    run.check(
        "scaling_analysis: balance sign agrees with E(phi_omega)",
        report.consistent,
        detail=f"{len(report.iterates)} iterates",
    )
    lo, hi = report.bracket
    run.check(
        "scaling_analysis: omega1 bracket width",
        hi / lo - 1 <= analysis.omega1_rtol,
        hi / lo - 1,
        analysis.omega1_rtol,
    )
    iterates = report.iterates
    run.table(
        "omega1.txt",
        "omega1",
        {
            "omega": [it.omega for it in iterates],
            "E": [it.E for it in iterates],
            "balance": [it.balance for it in iterates],
            "agree": [float(it.agree) for it in iterates],
        },
        header={"omega1": report.omega1, "lo": lo, "hi": hi},
    )
    return report


@experiment("locate_omega1")
def omega1(run: Run):
    _omega1(run)


@experiment("lemma_checks")
def lemma_checks(run: Run):
    params, analysis = run.config.params, run.config.analysis

    rng = np.random.default_rng(run.config.seed)
    shapes = [
        verify_shape(annotate(curve))
        for curve in random_curves(rng, analysis.random_curves)
    ]
    failed = sum(not shape.holds for shape in shapes)
    run.check(
        "scaling_analysis: four-point shape of random curves",
        failed == 0,
        detail=f"{failed} of {len(shapes)} curves fail",
    )

    ground = run.ground_state(params)
    if ground.diagnostics.E <= 0:
        raise HypothesisFailure(
            f"E(phi_omega) = {ground.diagnostics.E:.6e} <= 0 at "
            f"omega={params.omega}; the checks need omega above omega1"
        )
    slope = nehari_slope(ground)
    run.check(
        "scaling_analysis: d/dlambda K_omega(phi^lambda) < 0 at 1",
        slope.negative and slope.relative_gap <= NEHARI_SLOPE_TOLERANCE,
        slope.relative_gap,
        NEHARI_SLOPE_TOLERANCE,
    )

    lo, hi = LEMMA_OMEGA_RANGE
    omegas = np.geomspace(
        lo * params.omega, hi * params.omega, analysis.lemma_inputs
    )
    inputs = lemma2_inputs(params, omegas, run.config.shooting)
    reports = [lemma2_check(v, ground) for v in inputs]
    margins = np.array([report.margin for report in reports])
    run.table(
        "action_bound.txt",
        "action_bound",
        {
            "omega_prime": omegas,
            "d_omega": [report.d_omega for report in reports],
            "S_omega": [report.S_omega for report in reports],
            "margin": margins,
            "lambda0": [report.lambda0 for report in reports],
        },
        header={"omega": params.omega},
    )
    run.check(
        "scaling_analysis: S_omega(v) > d(omega)",
        np.all(margins > 0),
        margins.min(),
        0.0,
    )

    window = instability_window(ground)
    lambdas = np.linspace(1.0, window, analysis.lemma_inputs + 2)[1:-1]
    ep = [
        lemmaEP_check(
            rescale(ground.profile, lam),
            ground,
            analysis.membership_tolerance,
            analysis.slack_tolerance,
        )
        for lam in lambdas
    ]
    slacks = np.array([report.slack for report in ep])
    run.table(
        "energy_virial_bound.txt",
        "energy_virial_bound",
        {
            "lambda": lambdas,
            "E": [report.E for report in ep],
            "P": [report.P for report in ep],
            "slack": slacks,
            "lambda0": [report.lambda0 for report in ep],
            "lambda3": [report.lambda3 for report in ep],
        },
        header={"omega": params.omega, "window": window},
    )
    run.check(
        "scaling_analysis: E(v) - P(v) >= E(phi_omega) on B_omega",
        all(report.holds for report in ep),
        slacks.min(),
        -analysis.slack_tolerance,
    )


def _trace_name(lam: float) -> str:
    return f"trace_lambda_{lam:.4f}.txt".replace(".", "_", 1)


@experiment("instability_demo")
def instability_demo(run: Run):
    config = run.config
    params, analysis, grid = config.params, config.analysis, config.grid
    if config.sweep.omega_factor is not None:
        report = _omega1(run)
        params = params.with_omega(config.sweep.omega_factor * report.omega1)
        logger.info(
            f"Running at omega={params.omega:.6g} "
            f"({config.sweep.omega_factor:g} x omega1)"
        )

    ground = run.ground_state(params)
    if ground.profile.rmax > grid.L:
        raise ScalingOutOfBox(
            f"Profile support {ground.profile.rmax:.4g} exceeds the box "
            f"half-width {grid.L}"
        )
    phi = profile_on_grid(ground.profile, grid.L, grid.n)
    lambdas = sorted(analysis.lambdas)
    initials = {
        lam: profile_on_grid(rescale(ground.profile, lam), grid.L, grid.n)
        for lam in lambdas
    }

    rows = []
    traces = evolve_many(initials, params, config.evolution, run.threads)
    for lam in lambdas:
        u0, trace = initials[lam], traces[lam]
        export_trace(trace, run.path(_trace_name(lam)))
        label = f"lambda={lam:g}"

        verdict = membership(
            u0, ground, tolerance=analysis.membership_tolerance
        )
        run.check(
            f"scaling_analysis: {label} in B_omega",
            verdict.in_B,
            detail=", ".join(
                name for name, c in verdict.checks.items() if not c.holds
            ),
        )
        slack = math.nan
        if verdict.in_B:
            ep = lemmaEP_check(
                u0,
                ground,
                analysis.membership_tolerance,
                analysis.slack_tolerance,
            )
            slack = ep.slack
            run.check(
                f"scaling_analysis: {label} energy-virial bound",
                ep.holds,
                ep.slack,
                -ep.slack_tolerance,
            )

        run.check(
            f"evolution: {label} blows up",
            trace.verdict.blowup,
            trace.verdict.t,
            detail=trace.verdict.kind,
        )
        try:
            bound = monotonicity_check(
                trace, ground, analysis.slack_tolerance
            )
            run.check(
                f"evolution: {label} stays in B_omega along the flow",
                True,
                bound.max_P,
                bound.bound,
                detail=f"{bound.samples} trusted samples",
            )
        except (HypothesisFailure, InvariantViolation, TooFewSamples) as e:
            run.check(
                f"evolution: {label} stays in B_omega along the flow",
                False,
                detail=get_error_message(e),
            )
        try:
            residual = virial_residual(trace)
            run.check(
                f"evolution: {label} virial identity",
                residual.holds(),
                residual.relative,
                VIRIAL_TOLERANCE,
                detail=f"{len(residual.times)} residual points",
            )
        except TooFewSamples as e:
            run.check(
                f"evolution: {label} virial identity",
                False,
                detail=get_error_message(e),
            )

        rows.append(
            (
                lam,
                float(verdict.in_B),
                slack,
                float(trace.verdict.blowup),
                math.nan if trace.verdict.t is None else trace.verdict.t,
                h1_distance(u0, phi),
            )
        )

    table = np.array(rows)
    run.table(
        "instability.txt",
        "instability",
        dict(
            zip(
                ("lambda", "in_B", "slack", "blowup", "t_detect", "h1"),
                table.T,
            )
        ),
        header={"omega": params.omega, "L": grid.L, "n": grid.n},
    )
    times = table[:, 4]
    if np.all(table[:, 3] == 1) and len(times) > 1:
        run.check(
            "evolution: t_detect decreases as lambda grows",
            np.all(np.diff(times) < 0),
        )


@experiment("free_benchmark")
def free_benchmark(run: Run):
    config = run.config
    free = config.params._replace(N=1, a=0.0, b=0.0)
    u0 = GridFunction.from_function(
        config.grid.L, config.grid.n, lambda x: np.exp(-(x ** 2) / 2)
    )
    trace = evolve(u0, free, config.evolution)
    export_trace(trace, run.path("trace_free.txt"))

    exact = math.sqrt(math.pi) / 2 * (1 + 4 * trace.times ** 2)
    error = np.max(np.abs(trace.virial - exact) / exact)
    run.table(
        "variance.txt",
        "variance",
        {"t": trace.times, "virial": trace.virial, "exact": exact},
    )
    run.check(
        "evolution: free variance law",
        error <= FREE_TOLERANCE,
        error,
        FREE_TOLERANCE,
    )
    residual = virial_residual(trace)
    run.check(
        "evolution: virial identity on the free run",
        residual.relative <= FREE_TOLERANCE,
        residual.relative,
        FREE_TOLERANCE,
    )
    conservation = conservation_check(trace)
    run.check(
        "evolution: mass and energy conservation",
        conservation.holds,
        max(conservation.mass_drift, conservation.energy_drift),
        conservation.tolerance,
    )


# Orchestration


def _dump(path: str, document: typing.Any):
    with open(path, "w") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def _digest(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def write_manifest(result: RunResult, threads: int) -> str:
    """Config echo, versions and artifact digests; no timestamp"""
    echo = result.config.as_dict()
    echo.pop("output_dir")
    manifest = {
        "version": nlslab.__version__,
        "format_version": settings.NLSLAB_FORMAT_VERSION,
        "config": echo,
        "threads": threads,
        "artifacts": {
            name: _digest(os.path.join(result.run_dir, name))
            for name in result.artifacts
        },
    }
    path = os.path.join(result.run_dir, MANIFEST)
    _dump(path, manifest)
    return path


def run(
    config: ExperimentConfig, threads: typing.Optional[int] = None
) -> RunResult:
    """
    Runs `config.experiment` and writes its artifacts, summary and manifest
    into `config.run_dir`.

    Returns:
    * result {RunResult}: `result.passed` is the conjunction of all checks

    Raises `ConfigParse` when the run directory cannot be created and lets
    the errors of the experiment itself propagate.
    """
    threads = THREADS if threads is None else threads
    try:
        os.makedirs(config.run_dir, exist_ok=True)
    except OSError as e:
        raise ConfigParse(f"Cannot create {config.run_dir}: {e}")
    if not os.access(config.run_dir, os.W_OK):
        raise ConfigParse(f"Output directory {config.run_dir} is not writable")

    context = Run(config, threads)
    logger.info(f"Running {config.experiment} into {context.run_dir}")
    try:
        EXPERIMENTS[config.experiment](context)
    except Exception:
        logger.error(f"Experiment {config.experiment} failed", exc_info=True)
        raise

    result = RunResult(
        config=config,
        run_dir=context.run_dir,
        checks=context.checks,
        artifacts=context.artifacts,
    )
    _dump(
        os.path.join(result.run_dir, SUMMARY),
        {
            "experiment": config.experiment,
            "passed": result.passed,
            "checks": [check.as_dict() for check in result.checks],
        },
    )
    result.artifacts.append(SUMMARY)
    write_manifest(result, threads)
    _dump(
        os.path.join(result.run_dir, TIMESTAMP),
        {"finished": timezone.now().isoformat()},
    )
    logger.info(
        f"{config.experiment}: {len(result.checks) - len(result.failures)} "
        f"of {len(result.checks)} checks passed"
    )
    return result
