"""Plain-text formats for snapshots, bases, reduced systems, ensembles and PCEs.

Every float is written with 17 significant digits so that a write/read
cycle reproduces the binary value exactly.
"""

from pathlib import Path
import re

import numpy as np

from .enkf import Ensemble
from .fom import SnapshotMatrix
from .pce import PceExpansion, build_multiindex
from .pod import PodBasis
from .rom import ReducedSystem


def fmt(x):
    return format(float(x), ".17g")


def _row(values):
    return " ".join(fmt(v) for v in np.ravel(values))


def _header(kind, **fields):
    return "# " + kind + " v1 " + " ".join(f"{k}={v}" for k, v in fields.items())


def _parse_header(line, kind):
    match = re.fullmatch(r"#\s*" + kind + r"\s+v1((?:\s+\w+=\S+)*)\s*", line)
    if not match:
        raise ValueError(f"expected a '# {kind} v1' header, got {line!r}")
    return dict(item.split("=", 1) for item in match.group(1).split())


def _read_lines(path):
    with open(path, encoding="ascii") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _floats(line):
    return np.array([float(tok) for tok in line.split()], dtype=float)


def _write(path, lines):
    path = Path(path)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _matrix_lines(kind, header, first, weights, values):
    return [_header(kind, **header), _row(first), _row(weights)] + [_row(r) for r in values]


def write_snapshots(path, snapshots):
    n_cells, n_times = snapshots.values.shape
    return _write(
        path,
        _matrix_lines(
            "snapshot",
            {"n_cells": n_cells, "n_times": n_times},
            snapshots.times,
            snapshots.weights,
            snapshots.values,
        ),
    )


def read_snapshots(path):
    lines = _read_lines(path)
    head = _parse_header(lines[0], "snapshot")
    n_cells, n_times = int(head["n_cells"]), int(head["n_times"])
    times, weights = _floats(lines[1]), _floats(lines[2])
    values = np.array([_floats(l) for l in lines[3:]])
    if values.shape != (n_cells, n_times):
        raise ValueError(f"{path}: expected {n_cells} x {n_times} values, found {values.shape}")
    return SnapshotMatrix(values, times, weights)


def write_basis(path, basis):
    """Same layout as snapshots with singular values in place of times.

    A mean-centred basis stores its mean as one extra trailing column.
    """
    values = basis.modes
    fields = {"n_cells": basis.n_cells, "n_modes": basis.n_modes, "centered": int(basis.mean is not None)}
    if basis.mean is not None:
        values = np.column_stack([values, basis.mean])
    return _write(path, _matrix_lines("basis", fields, basis.singular_values, basis.weights, values))


def read_basis(path):
    lines = _read_lines(path)
    head = _parse_header(lines[0], "basis")
    sv, weights = _floats(lines[1]), _floats(lines[2])
    values = np.array([_floats(l) for l in lines[3:]])
    mean = None
    if int(head.get("centered", 0)):
        values, mean = values[:, :-1], values[:, -1]
    if values.shape != (int(head["n_cells"]), int(head["n_modes"])):
        raise ValueError(f"{path}: basis shape does not match its header")
    return PodBasis(values, sv, weights, mean)


def write_rom(path, system):
    lines = [_header("rom", n_modes=system.n_modes, nu=fmt(system.nu))]
    for arr in (system.gram, system.diffusion, system.convection):
        lines.extend(fmt(v) for v in arr.ravel())
    return _write(path, lines)


def read_rom(path):
    lines = _read_lines(path)
    head = _parse_header(lines[0], "rom")
    n = int(head["n_modes"])
    values = np.array([float(l) for l in lines[1:]])
    if values.size != 2 * n * n + n**3:
        raise ValueError(f"{path}: expected {2 * n * n + n**3} entries, found {values.size}")
    gram = values[: n * n].reshape(n, n)
    diffusion = values[n * n : 2 * n * n].reshape(n, n)
    convection = values[2 * n * n :].reshape(n, n, n)
    return ReducedSystem(gram, diffusion, convection, float(head["nu"]))


def write_ensemble(path, ensemble):
    """One member per row after the header."""
    z, s = ensemble.members.shape
    lines = [_header("ensemble", n_members=z, n_params=s, seed=ensemble.seed)]
    lines.extend(_row(m) for m in ensemble.members)
    return _write(path, lines)


def read_ensemble(path):
    lines = _read_lines(path)
    head = _parse_header(lines[0], "ensemble")
    members = np.array([_floats(l) for l in lines[1:]])
    if members.shape != (int(head["n_members"]), int(head["n_params"])):
        raise ValueError(f"{path}: ensemble shape does not match its header")
    return Ensemble(members, int(head["seed"]))


def write_pce(path, expansion):
    iset = expansion.index_set
    lines = [_header("pce", m=iset.m, p=iset.p, d=expansion.dim)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in iset.indices)
    lines.extend(_row(r) for r in expansion.coefficients)
    return _write(path, lines)


def read_pce(path):
    lines = _read_lines(path)
    head = _parse_header(lines[0], "pce")
    m, p, d = int(head["m"]), int(head["p"]), int(head["d"])
    iset = build_multiindex(m, p)
    stored = np.array([[int(v) for v in l.split()] for l in lines[1 : 1 + iset.size]])
    if not np.array_equal(stored.reshape(iset.size, m), iset.indices):
        raise ValueError(f"{path}: multi-index list is not the canonical order")
    coeffs = np.array([_floats(l) for l in lines[1 + iset.size :]])
    if coeffs.shape != (d, iset.size):
        raise ValueError(f"{path}: coefficient matrix does not match its header")
    return PceExpansion(iset, coeffs)


def write_csv(path, header, rows):
    """CSV with a fixed column order; floats at 17 significant digits."""

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return str(int(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if v is None:
            return ""
        return fmt(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    return _write(path, lines)


def read_csv(path):
    """Header and a float array (empty cells become NaN)."""
    lines = _read_lines(path)
    header = lines[0].split(",")
    rows = [[float(c) if c else np.nan for c in l.split(",")] for l in lines[1:]]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))
