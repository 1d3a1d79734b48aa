"""Time marching with the Picard-linearised midpoint/secant scheme."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assembly import P1Space, State, assemble_picard_system, get_space, project_initial
from .diagnostics import StepRecord, initial_record, record_step
from .errors import InvalidArgument, NonConvergence
from .initial import IcSpec
from .mesh import build_mesh, nested_dissection
from .model import ModelParams, dt_safety_bound
from .sparse import ReusableLU, solve_linear

__all__ = [
    "PicardSettings",
    "MeshSpec",
    "OutputSpec",
    "RunConfig",
    "Sink",
    "RunResult",
    "DtSafetyWarning",
    "picard_step",
    "block_solver",
    "run_simulation",
    "check_dt_safety",
    "step_count",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-7
    max_iter: int = 50
    extrapolate: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgument(f"Picard tolerance must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgument(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass(frozen=True)
class MeshSpec:
    bounds: tuple
    divisions: tuple

    def build(self):
        return build_mesh(self.bounds, self.divisions)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "output"
    snapshot_every: int = 0
    csv_path: str = "records.csv"


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSpec
    params: ModelParams
    dt: float
    t_end: float
    ic: IcSpec
    picard: PicardSettings = field(default_factory=PicardSettings)
    output: OutputSpec = field(default_factory=OutputSpec)
    solver: str = "lu"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt * (1 - 1e-12):
            raise InvalidArgument(f"t_end ({self.t_end}) must be at least dt ({self.dt})")
        if self.solver not in ("lu", "gmres"):
            raise InvalidArgument(f"unknown linear solver {self.solver!r}")


class Sink:
    """Receiver for run output; override what you need."""

    def on_start(self, space: P1Space, state: State) -> None:
        pass

    def on_record(self, record: StepRecord) -> None:
        pass

    def on_snapshot(self, space: P1Space, state: State) -> None:
        pass


@dataclass
class RunResult:
    state: State
    records: list
    metadata: dict


class DtSafetyWarning(UserWarning):
    """Time step above the bound that guarantees a uniquely solvable Picard iteration."""


def step_count(t_end: float, dt: float) -> int:
    """``ceil(t_end / dt)``, ignoring round-off in the ratio."""
    r = t_end / dt
    n = round(r)
    if abs(r - n) <= 1e-9 * max(1.0, r):
        return max(int(n), 1)
    return math.ceil(r)


def divides(t_end: float, dt: float) -> bool:
    r = t_end / dt
    return abs(r - round(r)) <= 1e-9 * max(1.0, r) and round(r) >= 1


def _product_norm(space, phi, mu, sigma):
    m = space.mass
    return math.sqrt(max(phi @ (m @ phi) + mu @ (m @ mu) + sigma @ (m @ sigma), 0.0))


def block_solver(space: P1Space) -> ReusableLU:
    """Reusable LU for the Picard systems of ``space``.

    Unknowns are grouped per node, three at a time, and nodes follow a
    nested-dissection order of the lattice.
    """
    nd = nested_dissection(space.mesh)
    perm = (np.arange(3)[None, :] * space.n + nd[:, None]).ravel()
    return ReusableLU(perm=perm)


def picard_step(space: P1Space, p: ModelParams, state_n: State, dt: float,
                settings: PicardSettings = PicardSettings(), guess: np.ndarray | None = None,
                solver: str = "lu", lu: ReusableLU | None = None):
    """Advance one time step.

    Iterates from ``(phi^n, mu^n, sigma^n)`` (or from ``guess`` for phi)
    until the increment, measured in the root-sum-square of the three L2
    norms, falls below ``settings.tol`` relative to the new iterate. Each
    iteration solves for the correction ``A(u^{l+1} - u^l) = b - A u^l``,
    which keeps the iterates free of the solver's round-off floor.

    ``lu`` lets callers share one factorization across iterations and steps;
    with ``solver="gmres"`` it is ignored.

    Returns ``(state_np1, iterations, history)`` where ``history`` lists the
    relative increments.
    """
    n = space.n
    phi_l = state_n.phi if guess is None else np.asarray(guess, dtype=float)
    u = np.concatenate([phi_l, state_n.mu, state_n.sigma])
    if solver == "lu" and lu is None:
        lu = block_solver(space)
    history = []
    for it in range(1, settings.max_iter + 1):
        a, rhs = assemble_picard_system(space, p, state_n, u[:n], dt)
        r = rhs - a @ u
        if not np.isfinite(r).all():
            raise NonConvergence(f"non-finite residual in Picard iteration {it}", history, state_n.step + 1)
        if solver == "lu":
            du = lu.solve(a, r)
        else:
            du = solve_linear(a, r, method=solver)
        u = u + du
        if not np.isfinite(u).all():
            raise NonConvergence(f"non-finite values in Picard iteration {it}", history, state_n.step + 1)
        diff = _product_norm(space, du[:n], du[n:2 * n], du[2 * n:])
        size = _product_norm(space, u[:n], u[n:2 * n], u[2 * n:])
        rel = diff / size if size > 0 else diff
        history.append(rel)
        if rel <= settings.tol:
            out = State(u[:n].copy(), u[n:2 * n].copy(), u[2 * n:].copy(),
                        (state_n.step + 1) * dt, state_n.step + 1)
            return out, it, history
    raise NonConvergence(
        f"Picard iteration did not reach tol={settings.tol:g} in {settings.max_iter} iterations "
        f"(last increment {history[-1]:.3e})", history, state_n.step + 1)


def check_dt_safety(cfg: RunConfig):
    """Compare ``cfg.dt`` with the unique-solvability bound.

    Returns ``(bound, exceeded)`` and issues a :class:`DtSafetyWarning` when
    ``dt`` is strictly above the bound.
    """
    bound = dt_safety_bound(cfg.params)
    exceeded = cfg.dt > bound
    if exceeded:
        warnings.warn(DtSafetyWarning(
            f"dt={cfg.dt:g} exceeds the Picard unique-solvability bound {bound:.15g}"), stacklevel=2)
    return bound, exceeded


def run_simulation(cfg: RunConfig, sinks=(), space: P1Space | None = None,
                   state0: State | None = None) -> RunResult:
    """March from the configured initial condition to ``t_end``.

    One :class:`StepRecord` per step goes to every sink, snapshots every
    ``cfg.output.snapshot_every`` steps (and at the first and last step).
    If a step fails the exception propagates with the partial series
    attached as ``exc.records``.
    """
    bound, exceeded = check_dt_safety(cfg)
    if space is None:
        space = get_space(cfg.mesh.build())
    p = cfg.params
    state = state0 if state0 is not None else project_initial(space, p, cfg.ic.build(p.lambda_))
    n_steps = step_count(cfg.t_end, cfg.dt)
    every = cfg.output.snapshot_every
    meta = {"dt_safety_bound": bound, "dt_exceeds_bound": exceeded, "n_steps": n_steps,
            "n_nodes": space.n, "n_elements": space.mesh.n_elements, "h": space.mesh.h,
            "initial_record": initial_record(space, p, state)}

    for s in sinks:
        s.on_start(space, state)
    if every:
        for s in sinks:
            s.on_snapshot(space, state)
    lu = block_solver(space) if cfg.solver == "lu" else None
    records = []
    energy = None
    prev_phi = None
    for k in range(n_steps):
        guess = None
        if cfg.picard.extrapolate and prev_phi is not None:
            guess = 2.0 * state.phi - prev_phi
        try:
            nxt, iters, _ = picard_step(space, p, state, cfg.dt, cfg.picard, guess, cfg.solver, lu)
        except NonConvergence as exc:
            exc.records = records
            log.error("step %d failed: %s", k + 1, exc)
            raise
        rec = record_step(space, p, state, nxt, iters, cfg.dt, energy_prev=energy)
        energy = rec.energy
        records.append(rec)
        for s in sinks:
            s.on_record(rec)
        prev_phi = state.phi
        state = nxt
        if every and (nxt.step % every == 0 or k == n_steps - 1):
            for s in sinks:
                s.on_snapshot(space, state)
        log.debug("step %d t=%.6g E=%.10g iters=%d", nxt.step, nxt.time, rec.energy, iters)
    if lu is not None:
        meta["lu_factorizations"] = lu.n_factorizations
    return RunResult(state, records, meta)
