"""Temporal convergence studies against a fine-step reference solution.

Every run shares the mesh and parameters of the base configuration, so the
difference between a ladder run and the reference at the final time isolates
the time-discretization error. Rates between consecutive ladder entries are

    r = log(e / e_next) / log(dt / dt_next).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import get_space
from .errors import InvalidArgument, NonConvergence
from .initial import two_droplet_ic
from .stepper import RunConfig, divides, run_simulation

__all__ = [
    "FIELDS",
    "DEFAULT_LADDER",
    "DEFAULT_REFERENCE_DT",
    "EocRow",
    "EocReport",
    "compute_rates",
    "field_errors",
    "run_eoc_study",
    "two_droplet_ic",
]

FIELDS = ("phi", "mu", "sigma")
DEFAULT_LADDER = tuple(1e-6 / k for k in (1, 2, 3, 4, 5))
DEFAULT_REFERENCE_DT = 1e-8


def compute_rates(dts, errors):
    """Rates between consecutive entries; ``None`` for the first entry.

    A rate is also ``None`` when either error is zero or not finite.
    """
    dts = [float(d) for d in dts]
    errors = [float(e) for e in errors]
    if len(dts) != len(errors):
        raise InvalidArgument("dts and errors must have the same length")
    rates = [None]
    for (d0, e0), (d1, e1) in zip(zip(dts, errors), zip(dts[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and math.isfinite(e0) and math.isfinite(e1) and d0 != d1:
            rates.append(math.log(e0 / e1) / math.log(d0 / d1))
        else:
            rates.append(None)
    return rates


def field_errors(space, reference, state):
    """``{field: (e2, e1)}``: L2 and H1 norms of the nodal differences."""
    out = {}
    for name in FIELDS:
        d = getattr(state, name) - getattr(reference, name)
        out[name] = (space.l2_norm(d), space.h1_norm(d))
    return out


@dataclass(frozen=True)
class EocRow:
    dt: float
    field: str
    e2: float
    e1: float
    r2: float | None
    r1: float | None


@dataclass
class EocReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    CSV_COLUMNS = ("dt", "field", "e2", "r2", "e1", "r1")

    def dts(self):
        return sorted({r.dt for r in self.rows}, reverse=True)

    def rows_for(self, field_name):
        return sorted((r for r in self.rows if r.field == field_name), key=lambda r: -r.dt)

    def rates(self, field_name, norm="r2"):
        """Defined rates for one field, in ladder order."""
        return [getattr(r, norm) for r in self.rows_for(field_name) if getattr(r, norm) is not None]

    def to_text(self) -> str:
        def fmt(v):
            return "      -" if v is None else f"{v:7.4f}"

        lines = []
        for name in FIELDS:
            rows = self.rows_for(name)
            if not rows:
                continue
            lines.append(f"[{name}]")
            lines.append(f"{'dt':>12} {'e2':>12} {'r2':>7} {'e1':>12} {'r1':>7}")
            for r in rows:
                lines.append(f"{r.dt:12.5e} {r.e2:12.5e} {fmt(r.r2)} {r.e1:12.5e} {fmt(r.r1)}")
            lines.append("")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        def cell(v):
            return "" if v is None else repr(float(v))

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.CSV_COLUMNS)
            for name in FIELDS:
                for r in self.rows_for(name):
                    w.writerow([repr(r.dt), r.field, cell(r.e2), cell(r.r2), cell(r.e1), cell(r.r1)])


def _default_runner(space):
    def run(cfg: RunConfig):
        return run_simulation(cfg, space=space).state
    return run


def run_eoc_study(base_cfg: RunConfig, dt_ladder, dt_reference: float, runner=None,
                  error_fn=None) -> EocReport:
    """Reference run at ``dt_reference`` followed by one run per ladder step.

    Parameters
    ----------
    base_cfg : RunConfig
        Mesh, parameters, final time and initial condition shared by all runs.
    dt_ladder : sequence of float
        Strictly decreasing time steps, each dividing ``base_cfg.t_end``.
    dt_reference : float
        Step of the reference run, smaller than every ladder entry.
    runner : callable, optional
        ``runner(cfg) -> State``; defaults to a full simulation on a shared space.
    error_fn : callable, optional
        ``error_fn(reference, state) -> {field: (e2, e1)}``; defaults to
        :func:`field_errors` on the run's space.

    Raises
    ------
    InvalidArgument
        Ladder not decreasing, a step not dividing ``t_end`` or the
        reference step not below the ladder.
    NonConvergence
        Any run failed; the message names the offending step.
    """
    ladder = [float(d) for d in dt_ladder]
    if not ladder:
        raise InvalidArgument("the dt ladder is empty")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidArgument("the dt ladder must be strictly decreasing")
    if not dt_reference < min(ladder):
        raise InvalidArgument(f"reference dt {dt_reference:g} must be below every ladder dt")
    t_end = base_cfg.t_end
    for d in ladder + [dt_reference]:
        if not divides(t_end, d):
            raise InvalidArgument(f"dt={d:g} does not divide t_end={t_end:g}")

    space = None
    if runner is None or error_fn is None:
        space = get_space(base_cfg.mesh.build())
    if runner is None:
        runner = _default_runner(space)
    if error_fn is None:
        def error_fn(ref, st):
            return field_errors(space, ref, st)

    def run(dt):
        try:
            return runner(replace(base_cfg, dt=dt))
        except NonConvergence as exc:
            err = NonConvergence(f"run with dt={dt:g} failed: {exc}", exc.history, exc.step)
            err.dt = dt
            raise err from exc

    reference = run(float(dt_reference))
    errs = [error_fn(reference, run(d)) for d in ladder]

    rows = []
    for name in FIELDS:
        e2 = [e[name][0] for e in errs]
        e1 = [e[name][1] for e in errs]
        r2, r1 = compute_rates(ladder, e2), compute_rates(ladder, e1)
        rows.extend(EocRow(d, name, a, b, c, f) for d, a, b, c, f in zip(ladder, e2, e1, r2, r1))

    meta = {"t_end": t_end, "dt_reference": float(dt_reference), "ladder": tuple(ladder),
            "divisions": tuple(base_cfg.mesh.divisions), "bounds": tuple(base_cfg.mesh.bounds),
            "params": base_cfg.params.as_dict(), "picard_tol": base_cfg.picard.tol}
    return EocReport(rows, meta)
