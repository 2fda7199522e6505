"""
Structure of the scaling curve λ ↦ E(v^λ) and the numerical checks built on
it: membership in the blowup set

    B_ω = {v : 0 < E(v) < E(φ_ω), ‖v‖² = ‖φ_ω‖², P(v) < 0, K_ω(v) < 0},

the action lower bound d(ω) < S_ω(v) for P(v) = 0, K_ω(v) < 0, the bound
E(φ_ω) <= E(v) - P(v) on B_ω, and the frequency ω₁ where E(φ_ω) turns
positive.
"""
import logging
import math
import typing

import numpy as np
from scipy.optimize import brentq

from django.conf import settings

from apps.base.exceptions import (
    HypothesisFailure,
    NoSignChange,
    NotFourPoint,
    NotPositiveEnergy,
)
from apps.core_types.curves import ScalingCurve
from apps.core_types.parameters import Parameters
from apps.core_types.representations import (
    GridFunction,
    GroundState,
    RadialProfile,
    profile_on_grid,
)
from apps.functionals.functionals import (
    FunctionalReport,
    norms,
    rescale,
    scaling_curve,
)
from apps.groundstate.shooting import ShootingConfig
from apps.groundstate.solver import solve_ground_state, solve_omega_sweep

IDENTITY_TOLERANCE = settings.NLSLAB_IDENTITY_TOLERANCE
MEMBERSHIP_TOLERANCE = settings.NLSLAB_MEMBERSHIP_TOLERANCE
SLACK_TOLERANCE = settings.NLSLAB_SLACK_TOLERANCE

# Log-spaced λ scan preceding the bracketed root refinement
SCAN_RANGE = (1e-4, 1e4)
SCAN_POINTS = 4096
ROOT_RTOL = 1e-12
# Relative mass mismatch accepted by the B_ω mass condition
MASS_TOLERANCE = 1e-8
# Step of the centered λ-difference for ∂_λK_ω
SLOPE_STEP = 1e-5

logger = logging.getLogger(__name__)

Sampled = typing.Union[RadialProfile, GridFunction]


class AnalysisConfig(typing.NamedTuple):
    """Tolerances and test corpora of the scaling experiments"""

    membership_tolerance: float = MEMBERSHIP_TOLERANCE
    slack_tolerance: float = SLACK_TOLERANCE
    omega1_bracket: typing.Tuple[float, float] = (1.0, 16.0)
    omega1_rtol: float = 1e-3
    # Scalings λ of the instability family φ_ω^λ
    lambdas: typing.Tuple[float, ...] = (1.01, 1.05, 1.1, 1.15, 1.2)
    random_curves: int = 100
    lemma_inputs: int = 20

    def check(self) -> "AnalysisConfig":
        if self.membership_tolerance < 0 or self.slack_tolerance < 0:
            raise ValueError("Tolerances must be non-negative")
        lo, hi = self.omega1_bracket
        if not 0 < lo < hi:
            raise ValueError(
                f"omega1_bracket must satisfy 0 < lo < hi (got {lo}, {hi})"
            )
        if not 0 < self.omega1_rtol < 1:
            raise ValueError("omega1_rtol must lie in (0, 1)")
        if any(lam <= 1 for lam in self.lambdas):
            raise ValueError("Instability scalings must exceed 1")
        if self.random_curves < 1 or self.lemma_inputs < 1:
            raise ValueError("Test corpora must not be empty")
        return self


# Scaling curve structure


def _roots(func: typing.Callable, grid: np.ndarray) -> typing.List[float]:
    """Brackets every sign change of `func` on `grid` and refines it"""
    values = func(grid)
    signs = np.sign(values)
    roots = []
    for i in np.flatnonzero(signs[:-1] * signs[1:] < 0):
        roots.append(
            brentq(func, grid[i], grid[i + 1], xtol=1e-300, rtol=ROOT_RTOL)
        )
    for i in np.flatnonzero(values == 0):
        roots.append(float(grid[i]))
    return sorted(roots)


def critical_points(curve: ScalingCurve) -> typing.Tuple[float, ...]:
    """
    (λ₁, λ₂, λ₃, λ₄): λ₁ < λ₃ the zeros of ∂_λE(v^λ), λ₂ < λ₄ the zeros of
    E(v^λ). Both functions are divided by λ^α before the scan so that the
    sign survives the full range.

    Raises `NotFourPoint` for curves without the four-point structure (a
    vanishing power term, roots outside the scan range) and
    `NotPositiveEnergy` when E(v) <= 0.
    """
    if curve.c_alpha <= 0 or curve.c_beta <= 0:
        raise NotFourPoint(
            "Both power terms are needed for the four-point structure "
            f"(c_alpha={curve.c_alpha}, c_beta={curve.c_beta})"
        )
    energy = float(curve.energy(1.0))
    if energy <= 0:
        raise NotPositiveEnergy(
            f"E(v) = {energy:.6e} is not positive", energy=energy
        )

    alpha = curve.alpha
    grid = np.logspace(*np.log10(SCAN_RANGE), SCAN_POINTS)
    flat = _roots(lambda lam: curve.denergy(lam) / lam ** (alpha - 1), grid)
    zeros = _roots(lambda lam: curve.energy(lam) / lam ** alpha, grid)
    if len(flat) != 2 or len(zeros) != 2:
        raise NotFourPoint(
            f"Expected two critical points and two zeros, found {flat} and "
            f"{zeros}"
        )

    points = (flat[0], zeros[0], flat[1], zeros[1])
    if not all(a < b for a, b in zip(points, points[1:])):
        raise NotFourPoint(f"Points {points} do not interlace")
    return points


def annotate(curve: ScalingCurve) -> ScalingCurve:
    """`curve` with lambda1..lambda4 filled in"""
    lambda1, lambda2, lambda3, lambda4 = critical_points(curve)
    return curve._replace(
        lambda1=lambda1, lambda2=lambda2, lambda3=lambda3, lambda4=lambda4
    )


class ShapeReport(typing.NamedTuple):
    sign_pattern: bool
    monotonicity: bool
    maximum: bool
    samples: int

    @property
    def holds(self) -> bool:
        return self.sign_pattern and self.monotonicity and self.maximum

    def as_dict(self):
        return dict(self._asdict(), holds=self.holds)


def verify_shape(curve: ScalingCurve, samples: int = 100_000) -> ShapeReport:
    """
    Checks the shape of an annotated curve on dense log-spaced samples:
    E < 0 on (0,λ₂)∪(λ₄,∞) and > 0 on (λ₂,λ₄); E decreasing on
    (0,λ₁)∪(λ₃,∞) and increasing on (λ₁,λ₃); E(v^λ) < E(v^{λ₃}) for
    λ ≠ λ₃. Samples within 1e-9 (relative) of a marker are skipped.
    """
    lam = np.logspace(*np.log10(SCAN_RANGE), samples)
    markers = np.array(curve.critical_points)
    near = np.any(
        np.abs(lam[:, None] - markers[None, :]) <= 1e-9 * markers[None, :],
        axis=1,
    )
    lam = lam[~near]
    energy = curve.energy(lam)
    slope = curve.denergy(lam) / lam ** (curve.alpha - 1)
    l1, l2, l3, l4 = markers

    positive = (lam > l2) & (lam < l4)
    rising = (lam > l1) & (lam < l3)
    sign_pattern = bool(
        np.all(energy[positive] > 0) and np.all(energy[~positive] < 0)
    )
    monotonicity = bool(
        np.all(slope[rising] > 0) and np.all(slope[~rising] < 0)
    )
    maximum = bool(np.all(energy < curve.energy(l3)))
    return ShapeReport(sign_pattern, monotonicity, maximum, len(lam))


def random_curves(
    rng: np.random.Generator, count: int
) -> typing.List[ScalingCurve]:
    """
    Curves with c2 = 1, α ∈ (0.5, 1.5), β ∈ (2.5, 6) and c_alpha, c_beta ∈
    (0.1, 0.4), so E(1) > 0.
    """
    curves = []
    for _ in range(count):
        alpha = rng.uniform(0.5, 1.5)
        beta = rng.uniform(2.5, 6.0)
        curves.append(
            ScalingCurve(
                c2=1.0,
                c_alpha=rng.uniform(0.1, 0.4),
                c_beta=rng.uniform(0.1, 0.4),
                alpha=alpha,
                beta=beta,
                # N = 1 exponents matching α, β
                p=2 * alpha + 1,
                q=2 * beta + 1,
                omega=1.0,
                mass=1.0,
            )
        )
    return curves


# Blowup set


class Condition(typing.NamedTuple):
    """`margin` is the signed distance to violation (>= 0 when it holds)"""

    value: float
    bound: float
    margin: float
    holds: bool


class BMembership(typing.NamedTuple):
    in_B: bool
    checks: typing.Dict[str, Condition]

    def as_dict(self):
        return {
            "in_B": self.in_B,
            "checks": {
                name: condition._asdict()
                for name, condition in self.checks.items()
            },
        }


def ground_reference(
    ground: GroundState, like: typing.Optional[Sampled] = None
) -> FunctionalReport:
    """
    The ground-state functionals evaluated in the representation of `like`
    (the profile's own report for radial functions, the profile transferred
    onto the same periodic grid otherwise).
    """
    if like is None or isinstance(like, RadialProfile):
        return ground.diagnostics
    on_grid = profile_on_grid(ground.profile, like.L, like.n)
    return norms(on_grid, ground.params)


def _strictly_below(value, bound, slack) -> Condition:
    margin = bound - value - slack
    return Condition(value, bound, margin, margin > 0)


def membership(
    v: Sampled,
    ground: GroundState,
    report: typing.Optional[FunctionalReport] = None,
    tolerance: float = MEMBERSHIP_TOLERANCE,
) -> BMembership:
    """
    Evaluates the four conditions of B_ω with relative margins:

    * energy: tolerance·‖∇v‖² < E(v) < E(φ_ω) - same
    * mass: |‖v‖² - ‖φ_ω‖²| <= 1e-8·‖φ_ω‖²
    * virial: P(v) < -tolerance·‖∇v‖²
    * nehari: K_ω(v) < -tolerance·(‖∇v‖² + ω‖v‖²)

    Raises `HypothesisFailure` when E(φ_ω) <= 0.
    """
    params = ground.params
    reference = ground_reference(ground, like=v)
    if reference.E <= 0:
        raise HypothesisFailure(
            f"E(phi_omega) = {reference.E:.6e} is not positive at omega="
            f"{params.omega}",
            energy=reference.E,
        )
    if report is None:
        report = norms(v, params)

    energy_scale = tolerance * report.grad2
    mass_gap = abs(report.mass - reference.mass)
    mass_bound = MASS_TOLERANCE * reference.mass
    checks = {
        "energy_positive": _strictly_below(-report.E, 0.0, energy_scale),
        "energy_below_ground": _strictly_below(
            report.E, reference.E, energy_scale
        ),
        "mass": Condition(
            report.mass,
            reference.mass,
            mass_bound - mass_gap,
            mass_gap <= mass_bound,
        ),
        "virial_negative": _strictly_below(report.P, 0.0, energy_scale),
        "nehari_negative": _strictly_below(
            report.K_omega,
            0.0,
            tolerance * (report.grad2 + params.omega * report.mass),
        ),
    }
    in_B = all(condition.holds for condition in checks.values())
    logger.debug(f"B_omega membership: {in_B} ({checks})")
    return BMembership(in_B=in_B, checks=checks)


# Inequality checks


class Lemma2Report(typing.NamedTuple):
    d_omega: float
    S_omega: float
    margin: float
    lambda0: float
    K_at_lambda0: float

    @property
    def holds(self) -> bool:
        return self.margin > 0

    def as_dict(self):
        return dict(self._asdict(), holds=self.holds)


def _nehari_root(curve: ScalingCurve) -> float:
    """λ₀ ∈ (0, 1) with K_ω(v^{λ₀}) = 0, given K_ω(v) < 0"""
    return brentq(
        lambda lam: float(curve.nehari(lam)),
        0.0,
        1.0,
        xtol=1e-300,
        rtol=ROOT_RTOL,
    )


def lemma2_check(v: Sampled, ground: GroundState) -> Lemma2Report:
    """
    For E(v) > 0, K_ω(v) < 0 and P(v) = 0 (up to IDENTITY_TOLERANCE·‖∇v‖²)
    reports d(ω) = S_ω(φ_ω), S_ω(v) and the margin S_ω(v) - d(ω), together
    with the λ₀ ∈ (0, 1) where K_ω(v^λ) vanishes.

    Raises `HypothesisFailure` when a hypothesis fails.
    """
    params = ground.params
    report = norms(v, params)
    failures = []
    if report.E <= 0:
        failures.append(f"E(v) = {report.E:.6e} <= 0")
    # K_ω inside the identity band counts as the Nehari manifold
    if report.K_omega >= -IDENTITY_TOLERANCE * (
        report.grad2 + params.omega * report.mass
    ):
        failures.append(f"K_omega(v) = {report.K_omega:.6e} is not negative")
    if abs(report.P) > IDENTITY_TOLERANCE * report.grad2:
        failures.append(f"P(v) = {report.P:.6e} is not zero")
    if failures:
        raise HypothesisFailure(
            "Action bound hypotheses fail: " + "; ".join(failures),
            failures=failures,
        )

    curve = scaling_curve(v, params, report=report)
    lambda0 = _nehari_root(curve)
    d_omega = ground_reference(ground, like=v).S_omega
    return Lemma2Report(
        d_omega=d_omega,
        S_omega=report.S_omega,
        margin=report.S_omega - d_omega,
        lambda0=lambda0,
        K_at_lambda0=float(curve.nehari(lambda0)),
    )


def lemma2_inputs(
    params: Parameters,
    omegas: typing.Sequence[float],
    config: ShootingConfig = ShootingConfig(),
) -> typing.List[RadialProfile]:
    """
    Ground-state profiles φ_{ω'} for ω' > ω. They satisfy P = 0 and
    K_ω(φ_{ω'}) = (ω - ω')‖φ_{ω'}‖² < 0, and E > 0 once ω' > ω₁.
    """
    if any(omega <= params.omega for omega in omegas):
        raise ValueError(
            f"Action bound inputs need frequencies above omega={params.omega}"
        )
    return [
        ground.profile
        for ground in solve_omega_sweep(sorted(omegas), params, config)
    ]


def virial_projection(v: Sampled, params: Parameters) -> Sampled:
    """v^{λ₃}: the rescaling of v (with E(v) > 0) that has P = 0"""
    curve = annotate(scaling_curve(v, params))
    return rescale(v, curve.lambda3)


class LemmaEPReport(typing.NamedTuple):
    E_ground: float
    E: float
    P: float
    slack: float
    lambda0: float
    E_lambda0: float
    lambda3: float
    E_lambda3: float
    slack_tolerance: float = SLACK_TOLERANCE

    @property
    def holds(self) -> bool:
        return self.slack >= -self.slack_tolerance

    @property
    def chain(self) -> typing.Tuple[float, ...]:
        """E(φ_ω) <= E(v^{λ₀}) <= E(v^{λ₃}) <= E(v) - P(v)"""
        return (self.E_ground, self.E_lambda0, self.E_lambda3, self.E - self.P)

    def as_dict(self):
        return dict(self._asdict(), holds=self.holds, chain=self.chain)


def lemmaEP_check(
    v: Sampled,
    ground: GroundState,
    tolerance: float = MEMBERSHIP_TOLERANCE,
    slack_tolerance: float = SLACK_TOLERANCE,
) -> LemmaEPReport:
    """
    For v ∈ B_ω reports the slack E(v) - P(v) - E(φ_ω) (>= -slack_tolerance
    expected) and the intermediate values of the chain
    E(φ_ω) <= E(v^{λ₀}) <= E(v^{λ₃}) <= E(v) - P(v), where λ₀ ∈ (0, 1) is
    the zero of K_ω(v^λ).

    Raises `HypothesisFailure` when v is not in B_ω.
    """
    params = ground.params
    report = norms(v, params)
    verdict = membership(v, ground, report=report, tolerance=tolerance)
    if not verdict.in_B:
        failed = [name for name, c in verdict.checks.items() if not c.holds]
        raise HypothesisFailure(
            f"v is not in B_omega (fails {', '.join(failed)})",
            failed=failed,
        )

    curve = annotate(scaling_curve(v, params, report=report))
    lambda0 = _nehari_root(curve)
    E_ground = ground_reference(ground, like=v).E
    return LemmaEPReport(
        E_ground=E_ground,
        E=report.E,
        P=report.P,
        slack=report.E - report.P - E_ground,
        lambda0=lambda0,
        E_lambda0=float(curve.energy(lambda0)),
        lambda3=curve.lambda3,
        E_lambda3=float(curve.energy(curve.lambda3)),
        slack_tolerance=slack_tolerance,
    )


# The scaling family of the ground state


def instability_window(ground: GroundState) -> float:
    """
    λ_max such that φ_ω^λ ∈ B_ω for λ ∈ (1, λ_max): the smaller of λ₄ of
    φ_ω and the first λ > 1 where K_ω(φ_ω^λ) turns non-negative.

    Raises `NotPositiveEnergy` when E(φ_ω) <= 0.
    """
    curve = annotate(scaling_curve(ground.profile, ground.params))
    grid = np.logspace(0, math.log10(curve.lambda4), SCAN_POINTS)[1:]
    nehari = curve.nehari(grid)
    turning = np.flatnonzero(nehari >= 0)
    if len(turning) == 0:
        return curve.lambda4
    i = turning[0]
    if i == 0:
        return float(grid[0])
    return brentq(
        lambda lam: float(curve.nehari(lam)),
        grid[i - 1],
        grid[i],
        xtol=1e-300,
        rtol=ROOT_RTOL,
    )


class NehariSlope(typing.NamedTuple):
    analytic: float
    curve: float
    finite_difference: float

    @property
    def relative_gap(self) -> float:
        return abs(self.analytic - self.finite_difference) / abs(
            self.finite_difference
        )

    @property
    def negative(self) -> bool:
        return self.analytic < 0 and self.finite_difference < 0

    def as_dict(self):
        return dict(
            self._asdict(),
            relative_gap=self.relative_gap,
            negative=self.negative,
        )


def nehari_slope(ground: GroundState) -> NehariSlope:
    """
    ∂_λK_ω(φ_ω^λ) at λ = 1 three ways:

    * analytic: -(p-1)aα/(p+1)·lp - (q-1)bβ/(q+1)·lq, which uses P(φ_ω) = 0
    * curve: the exact λ-derivative of the scaling curve
    * finite_difference: centered difference of K_ω(φ_ω^λ) in λ
    """
    params, d = ground.params, ground.diagnostics
    a, b, p, q = params.a, params.b, params.p, params.q
    analytic = (
        -(p - 1) * a * params.alpha / (p + 1) * d.lp
        - (q - 1) * b * params.beta / (q + 1) * d.lq
    )
    curve = scaling_curve(ground.profile, params, report=d)
    step = SLOPE_STEP
    finite_difference = float(
        (curve.nehari(1 + step) - curve.nehari(1 - step)) / (2 * step)
    )
    return NehariSlope(
        analytic=analytic,
        curve=float(curve.nehari_slope(1.0)),
        finite_difference=finite_difference,
    )


# ω₁


class Omega1Iterate(typing.NamedTuple):
    omega: float
    E: float
    energy_sign: float
    balance: float
    balance_sign: float
    agree: bool


class Omega1Report(typing.NamedTuple):
    omega1: float
    bracket: typing.Tuple[float, float]
    iterates: typing.List[Omega1Iterate]
    ode_tol: float
    bisect_tol: float

    @property
    def consistent(self) -> bool:
        return all(iterate.agree for iterate in self.iterates)

    def as_dict(self):
        return {
            "omega1": self.omega1,
            "bracket": list(self.bracket),
            "iterates": [iterate._asdict() for iterate in self.iterates],
            "ode_tol": self.ode_tol,
            "bisect_tol": self.bisect_tol,
            "consistent": self.consistent,
        }


def energy_balance(report: FunctionalReport, params: Parameters) -> float:
    """
    (β-2)b/(q+1)·lq - (2-α)a/(p+1)·lp, which equals 2E(φ_ω) when
    P(φ_ω) = 0
    """
    return (params.beta - 2) * params.b / (params.q + 1) * report.lq - (
        2 - params.alpha
    ) * params.a / (params.p + 1) * report.lp


def _iterate(omega, template, config) -> Omega1Iterate:
    params = template.with_omega(omega)
    ground = solve_ground_state(params, config)
    d = ground.diagnostics
    balance = energy_balance(d, params)
    energy_sign, balance_sign = float(np.sign(d.E)), float(np.sign(balance))
    # inside the identity band the two signs are allowed to differ
    agree = (
        energy_sign == balance_sign
        or abs(d.E) <= IDENTITY_TOLERANCE * d.grad2
    )
    if not agree:
        logger.warning(
            f"omega={omega}: sign of E ({d.E:.3e}) and of the balance "
            f"({balance:.3e}) differ"
        )
    return Omega1Iterate(
        omega=omega,
        E=d.E,
        energy_sign=energy_sign,
        balance=balance,
        balance_sign=balance_sign,
        agree=agree,
    )


def locate_omega1(
    template: Parameters,
    omega_bracket: typing.Tuple[float, float],
    config: ShootingConfig = ShootingConfig(),
    rtol: float = 1e-3,
) -> Omega1Report:
    """
    Bisection (geometric) on ω of the sign of `energy_balance`, to `rtol`
    relative. Each iterate also records the sign of E(φ_ω) computed
    directly.

    Raises `NoSignChange` if the bracket does not straddle the crossing.
    """
    lo, hi = (float(omega) for omega in omega_bracket)
    if not 0 < lo < hi:
        raise NoSignChange(f"Degenerate frequency bracket [{lo}, {hi}]")

    iterates = [_iterate(lo, template, config), _iterate(hi, template, config)]
    low_sign = iterates[0].balance_sign
    if low_sign == iterates[1].balance_sign or low_sign == 0:
        raise NoSignChange(
            f"E(phi_omega) has the same sign at omega={lo} and omega={hi}",
            bracket=(lo, hi),
        )

    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        iterate = _iterate(mid, template, config)
        iterates.append(iterate)
        if iterate.balance_sign == 0:
            lo = hi = mid
            break
        if iterate.balance_sign == low_sign:
            lo = mid
        else:
            hi = mid
        logger.info(f"omega1 bracket [{lo:.6g}, {hi:.6g}]")

    return Omega1Report(
        omega1=math.sqrt(lo * hi),
        bracket=(lo, hi),
        iterates=iterates,
        ode_tol=config.ode_tol,
        bisect_tol=config.bisect_tol,
    )
