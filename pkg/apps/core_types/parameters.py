import math
import typing

from apps.base.exceptions import (
    BadDimension,
    ExponentOrdering,
    NonPositiveCoefficient,
)

SUPPORTED_DIMENSIONS = (1, 2, 3)


class Parameters(typing.NamedTuple):
    """
    Model constants of i u_t = -Δu - a|u|^{p-1}u - b|u|^{q-1}u and the
    frequency ω of the standing wave e^{iωt}φ_ω.

    `alpha` and `beta` are the exponents of the L²-invariant scaling
    v^λ(x) = λ^{N/2} v(λx) acting on the two power norms.
    """

    N: int
    a: float
    b: float
    p: float
    q: float
    omega: float

    @property
    def alpha(self) -> float:
        return self.N * (self.p - 1) / 2

    @property
    def beta(self) -> float:
        return self.N * (self.q - 1) / 2

    @property
    def critical_exponent(self) -> float:
        """The mass-critical power 1 + 4/N"""
        return 1 + 4 / self.N

    @property
    def sobolev_exponent(self) -> float:
        """2* - 1, infinite for N = 1, 2"""
        if self.N <= 2:
            return float("inf")
        return (self.N + 2) / (self.N - 2)

    def with_omega(self, omega: float) -> "Parameters":
        return self._replace(omega=float(omega))

    def as_dict(self) -> typing.Dict[str, float]:
        return dict(self._asdict())


def validate(params: Parameters, single_power: bool = False) -> Parameters:
    """
    Checks the admissible window and returns `params` unchanged.

    Window: a, b, ω > 0 and 1 < p < 1 + 4/N < q < 2* - 1 with N in {1, 2, 3}.

    With `single_power=True` exactly one of a, b may be 0 (the closed-form
    soliton reductions); the exponent window is still enforced on both
    exponents.

    Raises `BadDimension`, `NonPositiveCoefficient` or `ExponentOrdering`.
    """
    N = params.N
    if isinstance(N, bool) or int(N) != N or N not in SUPPORTED_DIMENSIONS:
        raise BadDimension(
            f"Dimension N={N} is not supported, use one of "
            f"{SUPPORTED_DIMENSIONS}",
            params=params,
        )

    if not (math.isfinite(params.omega) and params.omega > 0):
        raise NonPositiveCoefficient(
            f"Frequency omega={params.omega} must be positive and finite",
            params=params,
        )

    if not (math.isfinite(params.a) and math.isfinite(params.b)):
        raise NonPositiveCoefficient(
            f"Coefficients must be finite (got a={params.a}, b={params.b})",
            params=params,
        )

    if single_power:
        if params.a < 0 or params.b < 0 or (params.a == 0) == (
            params.b == 0
        ):
            raise NonPositiveCoefficient(
                "Single-power mode needs exactly one of a, b equal to 0 and "
                f"the other positive (got a={params.a}, b={params.b})",
                params=params,
            )
    elif not (params.a > 0 and params.b > 0):
        raise NonPositiveCoefficient(
            f"Coefficients must be positive (got a={params.a}, "
            f"b={params.b})",
            params=params,
        )

    p, q = params.p, params.q
    critical = params.critical_exponent
    if not (1 < p < critical < q < params.sobolev_exponent):
        raise ExponentOrdering(
            f"Exponents must satisfy 1 < p < 1+4/N < q < 2*-1; got p={p}, "
            f"q={q}, 1+4/N={critical:g}, 2*-1={params.sobolev_exponent:g}",
            params=params,
        )

    return params
