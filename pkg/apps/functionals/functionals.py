"""
The functionals of the double-power NLS evaluated on sampled functions:

    E(v)   = ½‖∇v‖² - a/(p+1)‖v‖^{p+1}_{p+1} - b/(q+1)‖v‖^{q+1}_{q+1}
    S_ω(v) = E(v) + (ω/2)‖v‖²
    K_ω(v) = ‖∇v‖² + ω‖v‖² - a‖v‖^{p+1}_{p+1} - b‖v‖^{q+1}_{q+1}
    P(v)   = ‖∇v‖² - aα/(p+1)‖v‖^{p+1}_{p+1} - bβ/(q+1)‖v‖^{q+1}_{q+1}

and the L²-invariant scaling v^λ(x) = λ^{N/2} v(λx).
"""
import typing

import numpy as np
from scipy.signal import czt

from django.conf import settings

from apps.base.exceptions import ResolutionTooCoarse, ScalingOutOfBox
from apps.base.utils import weighted_sum
from apps.core_types.curves import ScalingCurve
from apps.core_types.parameters import Parameters
from apps.core_types.representations import (
    GridFunction,
    RadialProfile,
    quadrature,
    radial_weights,
    sample_radial,
)

RESOLUTION_TOLERANCE = settings.NLSLAB_RESOLUTION_TOLERANCE
# Relative mass allowed to leave the truncated domain under v -> v^λ
SCALING_TAIL_TOLERANCE = 1e-8
# Fraction of the resolved band kept by the 2/3 rule
DEALIAS_FRACTION = 2.0 / 3.0

Sampled = typing.Union[RadialProfile, GridFunction]


class FunctionalReport(typing.NamedTuple):
    mass: float
    grad2: float
    lp: float
    lq: float
    E: float
    S_omega: float
    K_omega: float
    P: float

    def as_dict(self) -> typing.Dict[str, float]:
        return dict(self._asdict())


def assemble(
    mass: float, grad2: float, lp: float, lq: float, params: Parameters
) -> FunctionalReport:
    """Builds the report from the four base norms, exactly as defined"""
    a, b, p, q = params.a, params.b, params.p, params.q
    E = 0.5 * grad2 - a / (p + 1) * lp - b / (q + 1) * lq
    S_omega = E + (params.omega / 2) * mass
    K_omega = grad2 + params.omega * mass - a * lp - b * lq
    P = (
        grad2
        - (a * params.alpha / (p + 1)) * lp
        - (b * params.beta / (q + 1)) * lq
    )
    return FunctionalReport(
        mass=mass,
        grad2=grad2,
        lp=lp,
        lq=lq,
        E=E,
        S_omega=S_omega,
        K_omega=K_omega,
        P=P,
    )


# Differentiation


def radial_derivative(r: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    4th order centered differences of a radial function. The stencil is
    closed at r = 0 by the even reflection φ(-r) = φ(r) and at Rmax by the
    one-sided 4th order formulas.
    """
    h = r[1] - r[0]
    f = np.concatenate([values[2:0:-1], values])
    d = np.empty_like(values)
    d[:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    f4, f3, f2, f1, fn = values[-5:]
    d[-1] = (25 * fn - 48 * f1 + 36 * f2 - 16 * f3 + 3 * f4) / (12 * h)
    d[-2] = (3 * fn + 10 * f1 - 18 * f2 + 6 * f3 - f4) / (12 * h)
    return d


def spectral_derivative(u: GridFunction) -> np.ndarray:
    ik = 1j * u.k
    ik[u.n // 2] = 0  # Nyquist mode has no odd derivative
    return np.fft.ifft(ik * np.fft.fft(u.values))


def spectral_tail_fraction(
    u: GridFunction, band: float = DEALIAS_FRACTION
) -> float:
    """Share of ‖u‖² carried by modes outside `band` (default the 2/3 band)"""
    spectrum = np.abs(np.fft.fft(u.values)) ** 2
    total = spectrum.sum()
    if total == 0:
        return 0.0
    outside = np.abs(u.k) > band * np.pi / u.dx
    return float(spectrum[outside].sum() / total)


def _radial_grad2(r: np.ndarray, values: np.ndarray, N: int) -> float:
    dv = radial_derivative(r, values)
    return weighted_sum(radial_weights(r, N), dv * dv)


def _grid_grad2(u: GridFunction, band: float = 1.0) -> float:
    spectrum = np.fft.fft(u.values)
    if band < 1.0:
        spectrum = np.where(
            np.abs(u.k) <= band * np.pi / u.dx, spectrum, 0.0
        )
    ik = 1j * u.k
    ik[u.n // 2] = 0
    du = np.fft.ifft(ik * spectrum)
    return weighted_sum(quadrature(u), np.abs(du) ** 2)


def gradient_norm2(v: Sampled, check_resolution: bool = True) -> float:
    """
    ‖∇v‖² with a Richardson-style resolution check: the value is recomputed
    on the coarser half grid (radial) or on the 2/3 band (periodic grid) and
    `ResolutionTooCoarse` is raised when both disagree by more than
    NLSLAB_RESOLUTION_TOLERANCE (relative).
    """
    if isinstance(v, GridFunction):
        grad2 = _grid_grad2(v)
        coarse = grad2
        if check_resolution:
            coarse = _grid_grad2(v, band=DEALIAS_FRACTION)
    else:
        grad2 = _radial_grad2(v.r, v.values, v.N)
        coarse = grad2
        if check_resolution and v.size >= 10:
            coarse = _radial_grad2(v.r[::2], v.values[::2], v.N)

    if check_resolution and grad2 > 0:
        disagreement = abs(grad2 - coarse) / grad2
        if disagreement > RESOLUTION_TOLERANCE:
            raise ResolutionTooCoarse(
                f"Derivative underresolved: refinement changes ‖∇v‖² by "
                f"{disagreement:.3e} (relative)",
                disagreement=disagreement,
            )
    return grad2


def _dimension(v: Sampled) -> int:
    return 1 if isinstance(v, GridFunction) else v.N


def norms(
    v: Sampled, params: Parameters, check_resolution: bool = True
) -> FunctionalReport:
    """
    Evaluates mass, ‖∇v‖², ‖v‖^{p+1}_{p+1}, ‖v‖^{q+1}_{q+1} with the
    `apps.core_types` quadrature and assembles E, S_ω, K_ω and P.

    Raises `ResolutionTooCoarse` when the derivative is underresolved and
    `check_resolution` is set.
    """
    if _dimension(v) != params.N:
        raise ValueError(
            f"Function lives in N={_dimension(v)} but params have "
            f"N={params.N}"
        )
    weights = quadrature(v)
    modulus = np.abs(v.values)
    mass = weighted_sum(weights, modulus ** 2)
    grad2 = gradient_norm2(v, check_resolution=check_resolution)
    lp = weighted_sum(weights, modulus ** (params.p + 1))
    lq = weighted_sum(weights, modulus ** (params.q + 1))
    return assemble(mass, grad2, lp, lq, params)


def h1_distance(v: Sampled, w: Sampled) -> float:
    """‖v - w‖_{H¹} for two functions sampled on the same grid"""
    if isinstance(v, GridFunction):
        if not isinstance(w, GridFunction) or (v.L, v.n) != (w.L, w.n):
            raise ValueError("H¹ distance needs functions on the same grid")
        diff = v.with_values(v.values - w.values)
    else:
        if isinstance(w, GridFunction) or not np.array_equal(v.r, w.r):
            raise ValueError("H¹ distance needs profiles on the same grid")
        diff = v.with_values(v.values - w.values)
    mass = weighted_sum(quadrature(diff), np.abs(diff.values) ** 2)
    return float(np.sqrt(gradient_norm2(diff, False) + mass))


# Scaling


def _tail_mass_fraction(v: Sampled, lam: float) -> float:
    """Share of ‖v‖² sitting where v^λ is pushed outside the domain"""
    weights = quadrature(v)
    density = np.abs(v.values) ** 2
    total = weighted_sum(weights, density)
    if total == 0:
        return 0.0
    if isinstance(v, GridFunction):
        outside = np.abs(v.x) >= lam * v.L
    else:
        outside = v.r > lam * v.rmax
    return weighted_sum(weights[outside], density[outside]) / total


def _rescale_radial(v: RadialProfile, lam: float) -> RadialProfile:
    return v.with_values(lam ** (v.N / 2) * sample_radial(v, lam * v.r))


def _rescale_grid(v: GridFunction, lam: float) -> GridFunction:
    """
    Band-limited (trigonometric) interpolation of v at the points λx_j,
    evaluated for all j at once as a chirp z-transform.
    """
    n, L = v.n, v.L
    coeffs = np.empty(n + 1, dtype=complex)
    coeffs[:n] = np.fft.fftshift(np.fft.fft(v.values))
    # split the Nyquist mode symmetrically so real data stay real
    coeffs[0] *= 0.5
    coeffs[n] = coeffs[0]
    modes = np.arange(-n // 2, n // 2 + 1)
    k = np.pi * modes / L
    coeffs *= np.exp(1j * k * L * (1.0 - lam))

    samples = czt(coeffs, m=n, w=np.exp(2j * np.pi * lam / n), a=1.0)
    samples *= np.exp(-1j * np.pi * lam * np.arange(n)) / n
    # points pushed past the box edge would pick up periodic images
    samples[np.abs(lam * v.x) > L] = 0
    return v.with_values(np.sqrt(lam) * samples)


def rescale(v: Sampled, lam: float) -> Sampled:
    """
    v^λ(x) = λ^{N/2} v(λx) on the same grid as v (mass preserving).

    Raises `ScalingOutOfBox` when λ < 1 would push more than 1e-8 of the
    mass outside the truncated domain.
    """
    if lam <= 0:
        raise ValueError(f"Scaling factor must be positive (got {lam})")
    if lam == 1:
        return v
    if lam < 1:
        leaked = _tail_mass_fraction(v, lam)
        if leaked > SCALING_TAIL_TOLERANCE:
            raise ScalingOutOfBox(
                f"Scaling by λ={lam} pushes {leaked:.3e} of the mass out of "
                "the truncated domain",
                leaked=leaked,
            )
    if isinstance(v, GridFunction):
        return _rescale_grid(v, lam)
    return _rescale_radial(v, lam)


def scaling_curve(
    v: Sampled,
    params: Parameters,
    report: typing.Optional[FunctionalReport] = None,
) -> ScalingCurve:
    """
    Coefficients of E(v^λ) = c2·λ² - c_alpha·λ^α - c_beta·λ^β.

    P(v^λ) and K_ω(v^λ) are available on the returned curve as
    `curve.virial(λ)` and `curve.nehari(λ)`.
    """
    if report is None:
        report = norms(v, params)
    return ScalingCurve(
        c2=0.5 * report.grad2,
        c_alpha=params.a / (params.p + 1) * report.lp,
        c_beta=params.b / (params.q + 1) * report.lq,
        alpha=params.alpha,
        beta=params.beta,
        p=params.p,
        q=params.q,
        omega=params.omega,
        mass=report.mass,
    )
