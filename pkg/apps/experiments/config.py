import json
import logging
import os
import typing

import numpy as np

from django.conf import settings
from django.core.exceptions import ValidationError

from apps.base.exceptions import ConfigParse
from apps.base.utils import get_error_messages, is_power_of_two
from apps.core_types.parameters import Parameters, validate
from apps.evolution.evolution import EvolutionConfig
from apps.experiments.forms import clean_document
from apps.groundstate.shooting import ShootingConfig
from apps.scaling_analysis.analysis import AnalysisConfig

OUTPUT_DIR = settings.NLSLAB_OUTPUT_DIR

# The desk-scale instance every experiment defaults to
CANONICAL = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)

logger = logging.getLogger(__name__)


class GridConfig(typing.NamedTuple):
    """Periodic box [-L, L) with n points for the evolution experiments"""

    L: float = settings.NLSLAB_BOX_HALF_WIDTH
    n: int = settings.NLSLAB_GRID_POINTS

    def check(self) -> "GridConfig":
        if self.L <= 0:
            raise ValueError(f"Box half-width must be positive (got {self.L})")
        if not is_power_of_two(self.n):
            raise ValueError(f"Grid size must be a power of two ({self.n})")
        return self


class SweepConfig(typing.NamedTuple):
    omega_min: float = 0.5
    omega_max: float = 64.0
    points: int = 25
    # The instability demo runs at omega_factor·ω₁; None keeps params.omega
    omega_factor: typing.Optional[float] = 4.0

    def omegas(self) -> np.ndarray:
        return np.geomspace(self.omega_min, self.omega_max, self.points)

    def check(self) -> "SweepConfig":
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError(
                "Sweep needs 0 < omega_min < omega_max (got "
                f"{self.omega_min}, {self.omega_max})"
            )
        if self.points < 2:
            raise ValueError("Sweep needs at least two points")
        if self.omega_factor is not None and self.omega_factor <= 1:
            raise ValueError("omega_factor must exceed 1")
        return self


class ExperimentConfig(typing.NamedTuple):
    experiment: str
    params: Parameters = CANONICAL
    shooting: ShootingConfig = ShootingConfig()
    evolution: EvolutionConfig = EvolutionConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    grid: GridConfig = GridConfig()
    sweep: SweepConfig = SweepConfig()
    output_dir: typing.Optional[str] = None
    seed: int = 0

    @property
    def run_dir(self) -> str:
        if self.output_dir is not None:
            return self.output_dir
        return os.path.join(OUTPUT_DIR, self.experiment)

    def check(self) -> "ExperimentConfig":
        """
        Validates every sub-config. The model parameters may drop one power
        (the closed-form reductions); free runs ignore them.
        """
        params = self.params
        single_power = params.a == 0 or params.b == 0
        if self.experiment != "free_benchmark":
            validate(params, single_power=single_power)
        for sub in (
            self.shooting,
            self.evolution,
            self.analysis,
            self.grid,
            self.sweep,
        ):
            sub.check()
        return self

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        """JSON-ready echo of the config"""

        def plain(value):
            if hasattr(value, "_asdict"):
                return {k: plain(v) for k, v in value._asdict().items()}
            if isinstance(value, tuple):
                return [plain(v) for v in value]
            return value

        return plain(self)


def parse_config(document: typing.Any) -> ExperimentConfig:
    """
    Builds an `ExperimentConfig` from a parsed JSON document. Sections and
    keys left out keep their defaults.

    Raises `ConfigParse` for unknown keys, malformed values and sub-configs
    that fail their checks.
    """
    top, sections = clean_document(document)
    kwargs = dict(top)
    for name, values in sections.items():
        default = ExperimentConfig._field_defaults[name]
        kwargs[name] = default._replace(**values)
    if kwargs.get("output_dir") == "":
        kwargs["output_dir"] = None

    config = ExperimentConfig(**kwargs)
    try:
        return config.check()
    except ValidationError as e:
        raise ConfigParse(
            f"Invalid parameters: {'; '.join(get_error_messages(e))}"
        )
    except ValueError as e:
        raise ConfigParse(str(e))


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigParse(f"Config file {path} does not exist")
    except json.JSONDecodeError as e:
        raise ConfigParse(f"{path} is not valid JSON: {e}")
    logger.debug(f"Loaded config {path}")
    return parse_config(document)
