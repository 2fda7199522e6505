from django.core.exceptions import ValidationError


class LabError(Exception):
    """
    Root of every numerical failure raised by the nlslab apps.

    Carries a human readable `message` (so `apps.base.utils.get_error_message`
    picks it up) and a short machine `code`, the same pair Django's
    `ValidationError` exposes.
    """

    code = "lab_error"

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code
        self.details = details

    def __str__(self):
        return self.message


# Parameter validation


class ParameterError(ValidationError):
    """Parameters outside the admissible window"""

    default_code = "invalid_parameters"

    def __init__(self, message, code=None, params=None):
        super().__init__(message, code=code or self.default_code, params=None)
        self.parameters = params


class ExponentOrdering(ParameterError):
    default_code = "exponent_ordering"


class NonPositiveCoefficient(ParameterError):
    default_code = "non_positive_coefficient"


class BadDimension(ParameterError):
    default_code = "bad_dimension"


# Functionals


class ResolutionTooCoarse(LabError):
    code = "resolution_too_coarse"


class ScalingOutOfBox(LabError):
    code = "scaling_out_of_box"


# Ground states


class StiffnessFailure(LabError):
    code = "stiffness_failure"


class BracketingFailure(LabError):
    code = "bracketing_failure"


class TruncationTooSmall(LabError):
    code = "truncation_too_small"


# Scaling analysis


class NotPositiveEnergy(LabError):
    code = "not_positive_energy"


class NotFourPoint(LabError):
    code = "not_four_point"


class HypothesisFailure(LabError):
    code = "hypothesis_failure"


class NoSignChange(LabError):
    code = "no_sign_change"


# Evolution


class BoxMassLeak(LabError):
    code = "box_mass_leak"


class TooFewSamples(LabError):
    code = "too_few_samples"


class InvariantViolation(LabError):
    code = "invariant_violation"


# Experiments


class ConfigParse(LabError):
    code = "config_parse"


class MissingArtifacts(LabError):
    code = "missing_artifacts"
