"""Finite-element simulator for the sixth-order Cahn-Hilliard microemulsion model.

The order parameter, chemical potential and ``sigma = -lap(phi)`` are
discretized with continuous P1 elements and advanced with an energy-stable
midpoint/secant scheme whose nonlinear step is solved by Picard iteration.
"""
from .assembly import P1Space, State, get_space, nonlinear_residual, project_initial, total_energy
from .config import load_config, parse_config, serialize_config
from .diagnostics import StepRecord, extrema, record_step
from .eoc import EocReport, compute_rates, run_eoc_study, two_droplet_ic
from .errors import ConfigError, InvalidArgument, NonConvergence, SolverFailure
from .initial import Droplet, IcSpec
from .mesh import StructuredMesh, build_box_mesh, build_mesh, build_rect_mesh
from .model import ModelParams, dt_safety_bound, f0, f0_prime, f0_secant
from .output import read_csv, read_vtk, write_csv, write_vtk
from .stepper import (DtSafetyWarning, MeshSpec, OutputSpec, PicardSettings, RunConfig,
                      check_dt_safety, picard_step, run_simulation)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Droplet", "DtSafetyWarning", "EocReport", "IcSpec", "InvalidArgument",
    "MeshSpec", "ModelParams", "NonConvergence", "OutputSpec", "P1Space", "PicardSettings",
    "RunConfig", "SolverFailure", "State", "StepRecord", "StructuredMesh",
    "build_box_mesh", "build_mesh", "build_rect_mesh", "check_dt_safety", "compute_rates",
    "dt_safety_bound", "extrema", "f0", "f0_prime", "f0_secant", "get_space", "load_config",
    "nonlinear_residual", "parse_config", "picard_step", "project_initial", "read_csv",
    "read_vtk", "record_step", "run_eoc_study", "run_simulation", "serialize_config",
    "total_energy", "two_droplet_ic", "write_csv", "write_vtk",
]
