"""Legacy ASCII VTK snapshots and CSV time series, plus readers used for checks."""
from __future__ import annotations

import csv
import os

import numpy as np

from .diagnostics import CSV_COLUMNS, StepRecord
from .mesh import StructuredMesh

__all__ = ["write_vtk", "read_vtk", "write_csv", "read_csv", "VTK_CELL_TYPES", "snapshot_name"]

VTK_CELL_TYPES = {2: 5, 3: 10}  # triangle, tetrahedron


def _g(x) -> str:
    return format(float(x), ".17g")


def snapshot_name(step: int) -> str:
    return f"state_{step:06d}.vtk"


def write_vtk(mesh: StructuredMesh, state, path) -> None:
    """Write nodes, simplices and the fields phi, mu, sigma as an UNSTRUCTURED_GRID.

    Points always carry three coordinates; 2D meshes get z = 0.
    """
    n, d = mesh.nodes.shape
    pts = np.zeros((n, 3))
    pts[:, :d] = mesh.nodes
    k = mesh.elements.shape[1]
    ne = mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", f"microemulsion t={_g(state.time)} step={state.step}",
             "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines.extend(" ".join(_g(c) for c in p) for p in pts)
    lines.append(f"CELLS {ne} {ne * (k + 1)}")
    lines.extend(f"{k} " + " ".join(str(int(v)) for v in e) for e in mesh.elements)
    lines.append(f"CELL_TYPES {ne}")
    lines.extend([str(VTK_CELL_TYPES[mesh.dim])] * ne)
    lines.append(f"POINT_DATA {n}")
    for name in ("phi", "mu", "sigma"):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_g(v) for v in getattr(state, name))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {os.fspath(path)!r}: {exc.strerror}") from exc


def read_vtk(path) -> dict:
    """Parse a file produced by :func:`write_vtk`.

    Returns a dict with ``points`` (n, 3), ``cells`` (list of int arrays),
    ``cell_types`` and ``point_data`` (name -> array). Structural
    inconsistencies raise ``ValueError``.
    """
    with open(path) as fh:
        tokens_by_line = [ln.split() for ln in fh.read().splitlines()]
    if not tokens_by_line or not tokens_by_line[0][:2] == ["#", "vtk"]:
        raise ValueError("missing VTK header")
    if tokens_by_line[2] != ["ASCII"] or tokens_by_line[3] != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise ValueError("not an ASCII unstructured grid")
    i = 4
    out = {"point_data": {}}

    def take(count):
        nonlocal i
        block = tokens_by_line[i:i + count]
        if len(block) != count:
            raise ValueError("truncated VTK file")
        i += count
        return block

    while i < len(tokens_by_line):
        head = tokens_by_line[i]
        i += 1
        if not head:
            continue
        key = head[0]
        if key == "POINTS":
            n = int(head[1])
            out["points"] = np.array(take(n), dtype=float).reshape(n, 3)
        elif key == "CELLS":
            ne, size = int(head[1]), int(head[2])
            cells = [np.array(t, dtype=np.int64) for t in take(ne)]
            if sum(len(c) for c in cells) != size or any(c[0] != len(c) - 1 for c in cells):
                raise ValueError("CELLS size mismatch")
            out["cells"] = [c[1:] for c in cells]
        elif key == "CELL_TYPES":
            out["cell_types"] = np.array([t[0] for t in take(int(head[1]))], dtype=int)
        elif key == "POINT_DATA":
            npd = int(head[1])
            if npd != len(out.get("points", ())):
                raise ValueError("POINT_DATA count differs from POINTS")
        elif key == "SCALARS":
            name = head[1]
            if tokens_by_line[i][:1] == ["LOOKUP_TABLE"]:
                i += 1
            vals = take(len(out["points"]))
            out["point_data"][name] = np.array([v[0] for v in vals], dtype=float)
        else:
            raise ValueError(f"unexpected VTK keyword {key!r}")
    n = len(out.get("points", ()))
    for c in out.get("cells", []):
        if c.min() < 0 or c.max() >= n:
            raise ValueError("cell refers to a missing point")
    return out


def write_csv(records, path) -> None:
    """One row per :class:`StepRecord`, floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
                        for v in r.as_tuple()])


def read_csv(path) -> list:
    """Inverse of :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for row in rows[1:]:
        vals = dict(zip(CSV_COLUMNS, row))
        out.append(StepRecord(
            step=int(vals["step"]), time=float(vals["time"]), energy=float(vals["energy"]),
            mass=float(vals["mass"]), phi_min=float(vals["phi_min"]), phi_max=float(vals["phi_max"]),
            picard_iters=int(vals["picard_iters"]), grad_mu_sq=float(vals["grad_mu_sq"]),
            energy_law_residual=float(vals["energy_law_residual"])))
    return out
