"""Readers and writers for the toolkit's file artifacts.

Numeric tables are CSV with `#` comment headers, configs and metrics are
JSON, and density maps can additionally be rasterized to grayscale PNG.
Every writer embeds a toolkit version line plus caller-supplied metadata
(config hash, seed, ...) so artifacts identify themselves.
"""

from __future__ import annotations

import json

import numpy as np
from PIL import Image

from . import __version__


def _header(meta=None):
    lines = [f"photon-fabric {__version__}"]
    for key, value in (meta or {}).items():
        lines.append(f"{key}={value}")
    return lines


def write_density_csv(path, level, meta=None):
    """Density or permittivity-level map; rows follow the x index,
    columns the y index."""
    arr = np.asarray(level, dtype=float)
    header = _header(meta) + [f"shape={arr.shape[0]}x{arr.shape[1]}; "
                              "row=x column=y"]
    np.savetxt(path, arr, delimiter=",", fmt="%.10g",
               header="\n".join(header))


def read_density_csv(path):
    arr = np.loadtxt(path, delimiter=",", comments="#")
    return np.atleast_2d(np.asarray(arr, dtype=float))


def write_table_csv(path, columns, meta=None):
    """Ordered name -> 1D array mapping as a CSV with one header row."""
    names = list(columns)
    arrays = [np.asarray(columns[n]).ravel() for n in names]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise ValueError("columns differ in length")
    header = "\n".join(_header(meta) + [",".join(names)])
    np.savetxt(path, np.column_stack(arrays), delimiter=",", fmt="%.10g",
               header=header)


def read_table_csv(path):
    """Return (column names, 2D data) from a CSV written by this module."""
    names = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                names = line[1:].strip()
            else:
                break
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if names is None:
        raise ValueError(f"{path} lacks the header comment block")
    return names.split(","), data


def write_history_csv(path, history, meta=None):
    """Optimization trajectory; one row per iteration."""
    if not history:
        raise ValueError("history is empty")
    lead = ["iteration", "objective", "beta"]
    extra = sorted(set().union(*(set(row) for row in history)) - set(lead))
    cols = {name: np.array([row.get(name, np.nan) for row in history])
            for name in lead + extra}
    write_table_csv(path, cols, meta=meta)


def write_spectra_csv(path, wavelength_nm, ports, meta=None):
    """Per-port transmission spectra, wavelength first."""
    cols = {"wavelength_nm": wavelength_nm}
    cols.update(ports)
    write_table_csv(path, cols, meta=meta)


def write_json(path, payload, meta=None):
    doc = {"toolkit": f"photon-fabric {__version__}"}
    doc.update(meta or {})
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_density_png(path, level):
    """Grayscale raster of a density map: core bright, x to the right,
    y upward."""
    arr = np.clip(np.asarray(level, dtype=float), 0.0, 1.0)
    img = np.round(255.0 * arr.T[::-1, :]).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)
