"""CSV/JSON output with a reproducibility header, and the matching parsers.

CSV layout::

    # switchlab <version>
    # command: <name>
    # param <key> = <json value>      (one line per parameter, sorted by key)
    col_a,col_b,...
    1.23456789012,...

Floats are written with 12 significant digits, complex numbers as two
columns (``re_*``, ``im_*``) chosen by the caller; empty cells mean "no
value".  JSON files hold ``{"switchlab": version, "command": name,
"parameters": {...}, "data": ...}`` with the same float formatting.
Nothing time- or host-dependent is written, so identical inputs produce
byte-identical files.
"""
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__

OUTPUT_DIR_ENV = "SWITCHLAB_OUTPUT_DIR"


def fmt(value):
    """12 significant digits for floats; integers and strings unchanged."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(value)


def _round(obj):
    """Floats rounded to 12 significant digits, recursively (for JSON)."""
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(obj, complex):
        return [_round(obj.real), _round(obj.imag)]
    return obj


@dataclass
class Table:
    command: str
    parameters: dict
    columns: list
    rows: list = field(default_factory=list)
    version: str = __version__

    def column(self, name):
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


def dump_csv(table):
    buf = io.StringIO()
    buf.write(f"# switchlab {table.version}\n")
    buf.write(f"# command: {table.command}\n")
    for key in sorted(table.parameters):
        buf.write(f"# param {key} = {json.dumps(_round(table.parameters[key]), sort_keys=True)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError(f"row has {len(row)} cells, header has {len(table.columns)}")
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(text):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_csv(text):
    """Inverse of :func:`dump_csv`; numeric cells become int/float, empty cells None."""
    lines = text.splitlines()
    version, command, params = None, None, {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        body = lines[k][1:].strip()
        if body.startswith("switchlab "):
            version = body.split(" ", 1)[1]
        elif body.startswith("command:"):
            command = body.split(":", 1)[1].strip()
        elif body.startswith("param "):
            key, _, val = body[len("param "):].partition(" = ")
            params[key] = json.loads(val)
        k += 1
    if version is None or command is None:
        raise ValueError("missing reproducibility header")
    if k >= len(lines):
        raise ValueError("missing column header")
    columns = lines[k].split(",")
    rows = []
    for line in lines[k + 1:]:
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ValueError(f"row {line!r} does not match {len(columns)} columns")
        rows.append([_cell(c) for c in cells])
    return Table(command, params, columns, rows, version)


def dump_json(command, parameters, data):
    doc = {"switchlab": __version__, "command": command, "parameters": _round(parameters), "data": _round(data)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_json(text):
    doc = json.loads(text)
    for key in ("switchlab", "command", "parameters", "data"):
        if key not in doc:
            raise ValueError(f"missing key {key!r}")
    return doc


def read_table(path):
    with open(path) as fh:
        return parse_csv(fh.read())


def read_json(path):
    with open(path) as fh:
        return parse_json(fh.read())


def write_text(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def output_path(explicit, default_name):
    """``explicit`` if given, else ``default_name`` inside $SWITCHLAB_OUTPUT_DIR (or the cwd)."""
    if explicit:
        return explicit
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), default_name)


def parse_grid(spec):
    """``start:end:step`` (end included within step/1e6), ``start:end`` (step 1) or one value."""
    parts = spec.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"bad grid {spec!r}: expected start:end[:step]") from None
    if len(nums) == 1:
        return np.array(nums)
    if len(nums) > 3:
        raise ValueError(f"bad grid {spec!r}: expected start:end[:step]")
    start, end = nums[0], nums[1]
    step = nums[2] if len(nums) == 3 else 1.0
    if step <= 0 or end < start:
        raise ValueError(f"bad grid {spec!r}: need step > 0 and end >= start")
    n = int(math.floor((end - start) / step + 1e-6))
    # multiply rather than accumulate so grid values do not drift
    return np.array([round(start + i * step, 12) for i in range(n + 1)])
