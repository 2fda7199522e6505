"""
Validation of experiment config documents.

A config is a JSON object whose sections map onto the run configs of the
apps. Each section is checked by a form; keys a form does not declare are
rejected instead of ignored.
"""
import typing

from django import forms

from apps.base.exceptions import ConfigParse

EXPERIMENTS = (
    "ground_state",
    "omega_sweep",
    "locate_omega1",
    "lemma_checks",
    "instability_demo",
    "free_benchmark",
)


class FloatListField(forms.Field):
    """A JSON array of numbers, cleaned to a tuple of floats"""

    def __init__(self, *, length=None, **kwargs):
        self.length = length
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError(
                "Expected a list of numbers", code="invalid"
            )
        try:
            values = tuple(float(item) for item in value)
        except (TypeError, ValueError):
            raise forms.ValidationError(
                "Expected a list of numbers", code="invalid"
            )
        if self.length is not None and len(values) != self.length:
            raise forms.ValidationError(
                f"Expected {self.length} numbers, got {len(values)}",
                code="invalid",
            )
        return values


class SectionForm(forms.Form):
    """
    Every field is optional: keys missing from the section keep the
    defaults of the run config.
    """

    def __init__(self, section: str, data: typing.Any):
        if not isinstance(data, dict):
            raise ConfigParse(f"Section {section!r} must be an object")
        super().__init__(data=data)
        self.section = section
        for field in self.fields.values():
            field.required = False

    def values(self) -> typing.Dict[str, typing.Any]:
        """Cleaned values of the keys present in the section"""
        unknown = sorted(set(self.data) - set(self.fields))
        if unknown:
            raise ConfigParse(
                f"Unknown keys in section {self.section!r}: "
                + ", ".join(unknown),
                section=self.section,
                keys=unknown,
            )
        if not self.is_valid():
            messages = [
                f"{name}: {message}"
                for name, errors in self.errors.items()
                for message in errors
            ]
            raise ConfigParse(
                f"Invalid section {self.section!r}: " + "; ".join(messages),
                section=self.section,
            )
        return {name: self.cleaned_data[name] for name in self.data}


class ParametersForm(SectionForm):
    N = forms.IntegerField()
    a = forms.FloatField(min_value=0)
    b = forms.FloatField(min_value=0)
    p = forms.FloatField()
    q = forms.FloatField()
    omega = forms.FloatField()


class ShootingForm(SectionForm):
    phi0_bracket = FloatListField(length=2)
    ode_tol = forms.FloatField()
    Rmax = forms.FloatField()
    bisect_tol = forms.FloatField()
    step = forms.FloatField()
    tail_match_level = forms.FloatField()
    max_bisections = forms.IntegerField(min_value=1)


class EvolutionForm(SectionForm):
    dt0 = forms.FloatField()
    t_end = forms.FloatField()
    cfl_safety = forms.FloatField()
    blowup_gradient_factor = forms.FloatField()
    conservation_tolerance = forms.FloatField()
    dealias = forms.BooleanField()
    sample_interval = forms.FloatField()
    collapse_ratio = forms.FloatField()
    dt_floor = forms.FloatField()
    trust_tolerance = forms.FloatField()
    order = forms.IntegerField()
    healthy_rotation = forms.FloatField()


class AnalysisForm(SectionForm):
    membership_tolerance = forms.FloatField()
    slack_tolerance = forms.FloatField()
    omega1_bracket = FloatListField(length=2)
    omega1_rtol = forms.FloatField()
    lambdas = FloatListField()
    random_curves = forms.IntegerField()
    lemma_inputs = forms.IntegerField()


class GridForm(SectionForm):
    L = forms.FloatField()
    n = forms.IntegerField()


class SweepForm(SectionForm):
    omega_min = forms.FloatField()
    omega_max = forms.FloatField()
    points = forms.IntegerField()
    omega_factor = forms.FloatField()


class ExperimentForm(SectionForm):
    experiment = forms.ChoiceField(choices=[(e, e) for e in EXPERIMENTS])
    output_dir = forms.CharField()
    seed = forms.IntegerField(min_value=0)

    def __init__(self, data):
        super().__init__("top level", data)
        self.fields["experiment"].required = True


SECTION_FORMS = {
    "params": ParametersForm,
    "shooting": ShootingForm,
    "evolution": EvolutionForm,
    "analysis": AnalysisForm,
    "grid": GridForm,
    "sweep": SweepForm,
}


def clean_document(
    document: typing.Any,
) -> typing.Tuple[typing.Dict, typing.Dict[str, typing.Dict]]:
    """
    Splits a parsed config document into its top-level values and the
    cleaned values of every section.

    Raises `ConfigParse` for unknown sections or keys and invalid values.
    """
    if not isinstance(document, dict):
        raise ConfigParse("A config document must be a JSON object")
    top = {
        key: value
        for key, value in document.items()
        if key not in SECTION_FORMS
    }
    sections = {
        name: SECTION_FORMS[name](name, document[name]).values()
        for name in SECTION_FORMS
        if name in document
    }
    top = ExperimentForm(top).values()
    return top, sections
