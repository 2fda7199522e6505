"""
Versioned, self-describing columnar text tables.

Layout:

    # nlslab-columnar 1
    # kind = ground_state
    # <key> = <value>          (one line per header entry)
    # columns = r phi
    0.00000000000000000e+00 1.25992104989487319e+00
    ...

Values are written with 17 significant digits, so a table round-trips
bit-exactly and two runs with identical inputs produce identical bytes.
"""
import logging
import typing

import numpy as np

from django.conf import settings

from apps.base.exceptions import MissingArtifacts

FORMAT_VERSION = settings.NLSLAB_FORMAT_VERSION
MAGIC = "nlslab-columnar"
ROW_FORMAT = "%.17e"

logger = logging.getLogger(__name__)


class Table(typing.NamedTuple):
    kind: str
    header: typing.Dict[str, str]
    columns: typing.Dict[str, np.ndarray]


def format_value(value: typing.Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(
    path: str,
    kind: str,
    columns: typing.Dict[str, typing.Sequence[float]],
    header: typing.Optional[typing.Dict[str, typing.Any]] = None,
) -> str:
    """
    Writes `columns` (equal length, real valued) as a columnar table.

    Parameters:
    * path {str}: Destination file, overwritten
    * kind {str}: Table kind recorded in the header (e.g. "trace")
    * columns {Dict[str, Sequence[float]]}: Ordered column name -> values
    * header {Dict[str, Any]}: Extra `key = value` metadata lines

    Returns:
    * path {str}
    """
    names = list(columns)
    for name in names:
        if not name.isidentifier():
            raise ValueError(f"Column name {name!r} is not an identifier")

    data = np.column_stack(
        [np.asarray(columns[name], dtype=float) for name in names]
    )
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"kind = {kind}"]
    for key, value in (header or {}).items():
        lines.append(f"{key} = {format_value(value)}")
    lines.append("columns = " + " ".join(names))

    np.savetxt(
        path, data, fmt=ROW_FORMAT, header="\n".join(lines), comments="# "
    )
    logger.debug(f"Wrote {kind} table with {len(data)} rows to {path}")
    return path


def read_table(path: str) -> Table:
    """Reads a table written by `write_table`"""
    header = {}
    names = None
    try:
        with open(path) as f:
            first = f.readline()
            if not first.startswith(f"# {MAGIC} "):
                raise MissingArtifacts(f"{path} is not an nlslab table")
            version = int(first.split()[-1])
            if version > FORMAT_VERSION:
                raise MissingArtifacts(
                    f"{path} has format version {version}, "
                    f"this build reads up to {FORMAT_VERSION}"
                )
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition(" = ")
                if key == "columns":
                    names = value.split()
                else:
                    header[key] = value
    except FileNotFoundError:
        raise MissingArtifacts(f"Missing table {path}")

    if names is None:
        raise MissingArtifacts(f"{path} has no columns line")

    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(names)))
    columns = {name: data[:, i].copy() for i, name in enumerate(names)}
    return Table(kind=header.pop("kind", ""), header=header, columns=columns)
