"""Figure specs and deterministic SVG rendering of algorithm trace CSVs.

Each trace CSV is expected to carry the run-trace schema written by the
dvrlab harness: a header row followed by numeric rows, including at least
the columns needed for the requested x-axes plus ``subopt_node0``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# x-axis selector -> (trace CSV column, panel label)
AXIS_CHOICES = {
    "n_grads": ("n_grads_per_node", "gradient evaluations per node"),
    "n_comms": ("n_comms", "communications"),
    "sim_time": ("sim_time", "simulated time"),
}
DEFAULT_AXES = ("n_grads", "n_comms", "sim_time")
SUBOPT_COLUMN = "subopt_node0"
SUBOPT_FLOOR = 1e-14


class PlotSpecError(ValueError):
    """A figure spec or one of its input CSVs is invalid."""


@dataclass(frozen=True)
class Curve:
    label: str
    csv: str


@dataclass(frozen=True)
class FigureSpec:
    out: str
    curves: tuple
    axes: tuple = DEFAULT_AXES
    title: str = ""


def load_spec(path):
    """Parse and validate a figure-spec JSON file into a FigureSpec."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise PlotSpecError(f"{path}: cannot read spec file ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise PlotSpecError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise PlotSpecError(f"{path}: spec must be a JSON object")

    errors = []
    allowed = {"out", "curves", "axes", "title"}
    for key in sorted(set(raw) - allowed):
        errors.append(f"unknown key {key!r}")

    out = raw.get("out")
    if not isinstance(out, str) or not out:
        errors.append("'out' must be a non-empty output path")

    axes = raw.get("axes", list(DEFAULT_AXES))
    if (not isinstance(axes, list) or not axes
            or any(a not in AXIS_CHOICES for a in axes)):
        errors.append(f"'axes' must be a non-empty list drawn from "
                      f"{sorted(AXIS_CHOICES)}")
        axes = list(DEFAULT_AXES)

    curves = raw.get("curves")
    parsed = []
    if not isinstance(curves, list) or not curves:
        errors.append("'curves' must be a non-empty list")
    else:
        for k, item in enumerate(curves):
            if (not isinstance(item, dict)
                    or not isinstance(item.get("label"), str)
                    or not isinstance(item.get("csv"), str)):
                errors.append(f"curves[{k}] must be an object with string "
                              f"'label' and 'csv'")
                continue
            parsed.append(Curve(label=item["label"], csv=item["csv"]))

    title = raw.get("title", "")
    if not isinstance(title, str):
        errors.append("'title' must be a string")
        title = ""

    if errors:
        raise PlotSpecError(f"{path}: " + "; ".join(errors))
    return FigureSpec(out=out, curves=tuple(parsed), axes=tuple(axes),
                      title=title)


def read_trace(path, columns):
    """Read the named numeric columns from a trace CSV.

    Returns a dict column -> list of floats. Raises PlotSpecError naming the
    file and the offending column on schema mismatch, and on empty files.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise PlotSpecError(f"{path}: cannot read trace CSV ({exc})") from exc
    if not rows:
        raise PlotSpecError(f"{path}: empty trace CSV")
    header = [c.strip() for c in rows[0]]
    for col in columns:
        if col not in header:
            raise PlotSpecError(f"{path}: missing column {col!r} "
                                f"(header has {header})")
    if len(rows) == 1:
        raise PlotSpecError(f"{path}: trace CSV has a header but no data rows")
    idx = {col: header.index(col) for col in columns}
    data = {col: [] for col in columns}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PlotSpecError(f"{path}: line {lineno} has {len(row)} fields, "
                                f"header has {len(header)}")
        for col in columns:
            tok = row[idx[col]]
            try:
                data[col].append(float(tok))
            except ValueError:
                raise PlotSpecError(f"{path}: line {lineno}, column {col!r}: "
                                    f"not a number: {tok!r}") from None
    return data


def render(spec):
    """Render the figure described by spec to an SVG file.

    One panel per x-axis selector, log-scale suboptimality (clipped below at
    1e-14), one curve per input trace, legend from the per-curve labels.
    All inputs are validated before any output is written, and the SVG bytes
    are a pure function of the inputs (re-rendering is byte-identical).
    """
    if not isinstance(spec, FigureSpec):
        raise PlotSpecError("render() expects a FigureSpec")
    columns = [AXIS_CHOICES[a][0] for a in spec.axes] + [SUBOPT_COLUMN]
    # validate every input before the output file is touched
    traces = [(c.label, read_trace(c.csv, columns)) for c in spec.curves]

    with plt.rc_context({"svg.hashsalt": "dvrplots", "svg.fonttype": "path"}):
        n_panels = len(spec.axes)
        fig, axes = plt.subplots(1, n_panels,
                                 figsize=(4.0 * n_panels, 3.4),
                                 squeeze=False)
        for ax, selector in zip(axes[0], spec.axes):
            column, xlabel = AXIS_CHOICES[selector]
            for label, data in traces:
                y = [max(v, SUBOPT_FLOOR) for v in data[SUBOPT_COLUMN]]
                ax.plot(data[column], y, label=label, linewidth=1.4)
            ax.set_yscale("log")
            ax.set_xlabel(xlabel)
            ax.grid(True, which="both", alpha=0.3)
        axes[0][0].set_ylabel("suboptimality")
        axes[0][-1].legend(loc="upper right", fontsize="small")
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        out_dir = os.path.dirname(os.path.abspath(spec.out))
        os.makedirs(out_dir, exist_ok=True)
        fig.savefig(spec.out, format="svg", metadata={"Date": None})
        plt.close(fig)
    return spec.out
