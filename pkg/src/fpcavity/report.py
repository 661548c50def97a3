"""Delimited output and figure rendering for the command-line tool.

CSV files follow RFC 4180 for the record section, preceded by ``#`` comment
lines carrying provenance (configuration hash, mode ordering, conventions,
basis size, convergence deltas).  Complex-valued columns are split into
``name_re`` / ``name_im`` pairs.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def split_complex(columns: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Split complex columns into _re/_im pairs, pass real ones through."""
    out: dict[str, np.ndarray] = {}
    for name, values in columns.items():
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            out[f"{name}_re"] = arr.real
            out[f"{name}_im"] = arr.imag
        else:
            out[name] = arr
    return out


def write_csv(path: str | Path, columns: Mapping[str, np.ndarray],
              comments: Sequence[str] = ()) -> None:
    """Write columns as CSV with leading ``#`` provenance comments."""
    cols = split_complex(columns)
    names = list(cols)
    if not names:
        raise ValueError("no columns to write")
    length = len(np.atleast_1d(cols[names[0]]))
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(names)
    for i in range(length):
        writer.writerow([repr(float(np.atleast_1d(cols[n])[i]))
                         for n in names])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def render_plot(path: str | Path, x_name: str,
                columns: Mapping[str, np.ndarray],
                title: str = "", logy: bool = False) -> Path:
    """Render the columns against ``x_name`` as a PNG next to the CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = split_complex(columns)
    x = np.atleast_1d(np.asarray(cols[x_name], dtype=float))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name, values in cols.items():
        if name == x_name:
            continue
        y = np.atleast_1d(np.asarray(values, dtype=float))
        if logy:
            y = np.abs(y)
        ax.plot(x, y, label=name)
    if logy:
        ax.set_yscale("log")
        if np.all(x > 0):
            ax.set_xscale("log")
    ax.set_xlabel(x_name)
    ax.set_title(title)
    if len(cols) <= 13:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    out = Path(path).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
