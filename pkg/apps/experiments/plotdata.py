"""
Plot-ready columnar files derived from the tables of a finished run. Nothing
is rendered.
"""
import logging
import math
import os
import typing

import numpy as np

from apps.base.columnar import Table, read_table, write_table
from apps.base.exceptions import (
    MissingArtifacts,
    NotFourPoint,
    NotPositiveEnergy,
)
from apps.core_types.representations import GroundState
from apps.evolution.evolution import TRACE_KIND
from apps.experiments.runner import MANIFEST
from apps.functionals.functionals import scaling_curve
from apps.groundstate.solver import (
    GROUND_STATE_KIND,
    SWEEP_KIND,
    import_ground_state,
)
from apps.scaling_analysis.analysis import annotate

PLOT_DIR = "plotdata"
CURVE_SAMPLES = 2001
# Sampled λ range around the markers, as factors of λ₁ and λ₄
CURVE_MARGIN = 4.0

logger = logging.getLogger(__name__)


def scaling_columns(
    ground: GroundState,
) -> typing.Tuple[typing.Dict[str, np.ndarray], typing.Dict[str, typing.Any]]:
    """
    (λ, E(φ^λ), P(φ^λ), K_ω(φ^λ)) on a log grid, with λ₁..λ₄ in the header.
    Curves without the four-point structure (E(φ_ω) <= 0) are sampled on
    [1e-2, 1e2] and carry no markers.
    """
    curve = scaling_curve(ground.profile, ground.params, ground.diagnostics)
    header = {"omega": ground.omega, "E": ground.diagnostics.E}
    try:
        curve = annotate(curve)
    except (NotPositiveEnergy, NotFourPoint) as e:
        logger.info(f"Scaling curve at omega={ground.omega} has no markers")
        lam = np.geomspace(1e-2, 1e2, CURVE_SAMPLES)
        header.update(markers="none", reason=e.code)
    else:
        lam = np.geomspace(
            curve.lambda1 / CURVE_MARGIN,
            curve.lambda4 * CURVE_MARGIN,
            CURVE_SAMPLES,
        )
        header.update(
            markers="lambda1 lambda2 lambda3 lambda4",
            lambda1=curve.lambda1,
            lambda2=curve.lambda2,
            lambda3=curve.lambda3,
            lambda4=curve.lambda4,
        )
    columns = {
        "lambda": lam,
        "E": curve.energy(lam),
        "P": curve.virial(lam),
        "K_omega": curve.nehari(lam),
    }
    return columns, header


def crossing_columns(table: Table):
    """(ω, E(φ_ω), S_ω(φ_ω)) and the log-interpolated sign change of E"""
    omega, energy = table.columns["omega"], table.columns["E"]
    header: typing.Dict[str, typing.Any] = {"omega1": "none"}
    signs = np.sign(energy)
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    if len(changes):
        i = changes[0]
        weight = energy[i] / (energy[i] - energy[i + 1])
        log_omega = (1 - weight) * math.log(omega[i]) + weight * math.log(
            omega[i + 1]
        )
        header["omega1"] = math.exp(log_omega)
    columns = {
        "omega": omega,
        "E": energy,
        "S_omega": table.columns["S_omega"],
    }
    return columns, header


def trace_columns(table: Table):
    """The trace diagnostics plus drifts relative to the first sample"""
    columns = dict(table.columns)
    mass, energy = columns["mass"], columns["energy"]
    columns["mass_drift"] = mass / mass[0] - 1
    columns["energy_drift"] = energy - energy[0]
    header = {
        key: table.header[key]
        for key in ("verdict", "t_detect", "trusted_samples", "omega")
        if key in table.header
    }
    return columns, header


def data_tables(run_dir: str) -> typing.Iterator[typing.Tuple[str, Table]]:
    """(file name, table) for every data table of a run directory"""
    if not os.path.isfile(os.path.join(run_dir, MANIFEST)):
        raise MissingArtifacts(f"{run_dir} holds no completed run")
    for name in sorted(os.listdir(run_dir)):
        path = os.path.join(run_dir, name)
        if name.endswith(".txt") and os.path.isfile(path):
            yield name, read_table(path)


def emit_plotdata(run_dir: str) -> typing.List[str]:
    """
    Writes plot-ready tables into `<run_dir>/plotdata`:

    * scaling_<name>.txt for every ground-state table
    * omega_crossing.txt for an ω sweep
    * <name>.txt for every evolution trace

    Returns the written paths. Raises `MissingArtifacts` when the directory
    has no completed run or nothing to plot.
    """
    out_dir = os.path.join(run_dir, PLOT_DIR)
    jobs = []
    for name, table in data_tables(run_dir):
        stem = name[: -len(".txt")]
        if table.kind == GROUND_STATE_KIND:
            ground = import_ground_state(os.path.join(run_dir, name))
            columns = scaling_columns(ground)
            jobs.append((f"scaling_{stem}.txt", "scaling_curve", columns))
        elif table.kind == SWEEP_KIND:
            columns = crossing_columns(table)
            jobs.append(("omega_crossing.txt", "omega_crossing", columns))
        elif table.kind == TRACE_KIND:
            jobs.append((f"{stem}.txt", "trace_plot", trace_columns(table)))
    if not jobs:
        raise MissingArtifacts(f"{run_dir} has no tables to plot")

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, kind, (columns, header) in jobs:
        path = os.path.join(out_dir, name)
        written.append(write_table(path, kind, columns, header=header))
    logger.info(f"Wrote {len(written)} plot files to {out_dir}")
    return written
