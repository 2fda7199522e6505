import typing

import numpy as np


class ScalingCurve(typing.NamedTuple):
    """
    λ ↦ E(v^λ) = c2·λ² - c_alpha·λ^α - c_beta·λ^β for the L²-invariant
    scaling v^λ(x) = λ^{N/2} v(λx), together with the norms needed for
    P(v^λ) and K_ω(v^λ).

    c2 = ½‖∇v‖², c_alpha = a‖v‖^{p+1}_{p+1}/(p+1),
    c_beta = b‖v‖^{q+1}_{q+1}/(q+1); `mass` is ‖v‖².

    lambda1..lambda4 are filled in by
    `apps.scaling_analysis.analysis.annotate` when E(v) > 0.
    """

    c2: float
    c_alpha: float
    c_beta: float
    alpha: float
    beta: float
    p: float
    q: float
    omega: float
    mass: float
    lambda1: typing.Optional[float] = None
    lambda2: typing.Optional[float] = None
    lambda3: typing.Optional[float] = None
    lambda4: typing.Optional[float] = None

    def energy(self, lam):
        """E(v^λ)"""
        lam = np.asarray(lam, dtype=float)
        return (
            self.c2 * lam ** 2
            - self.c_alpha * lam ** self.alpha
            - self.c_beta * lam ** self.beta
        )

    def denergy(self, lam):
        """∂_λ E(v^λ)"""
        lam = np.asarray(lam, dtype=float)
        return (
            2 * self.c2 * lam
            - self.alpha * self.c_alpha * lam ** (self.alpha - 1)
            - self.beta * self.c_beta * lam ** (self.beta - 1)
        )

    def virial(self, lam):
        """P(v^λ) = λ ∂_λ E(v^λ)"""
        lam = np.asarray(lam, dtype=float)
        return (
            2 * self.c2 * lam ** 2
            - self.alpha * self.c_alpha * lam ** self.alpha
            - self.beta * self.c_beta * lam ** self.beta
        )

    def nehari(self, lam):
        """K_ω(v^λ)"""
        lam = np.asarray(lam, dtype=float)
        return (
            2 * self.c2 * lam ** 2
            + self.omega * self.mass
            - (self.p + 1) * self.c_alpha * lam ** self.alpha
            - (self.q + 1) * self.c_beta * lam ** self.beta
        )

    def action(self, lam):
        """S_ω(v^λ) = E(v^λ) + (ω/2)‖v‖²"""
        return self.energy(lam) + 0.5 * self.omega * self.mass

    def nehari_slope(self, lam=1.0):
        """∂_λ K_ω(v^λ)"""
        lam = np.asarray(lam, dtype=float)
        alpha_term = (self.p + 1) * self.alpha * self.c_alpha
        beta_term = (self.q + 1) * self.beta * self.c_beta
        return (
            4 * self.c2 * lam
            - alpha_term * lam ** (self.alpha - 1)
            - beta_term * lam ** (self.beta - 1)
        )

    @property
    def critical_points(self) -> typing.Optional[typing.Tuple[float, ...]]:
        if self.lambda1 is None:
            return None
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)
