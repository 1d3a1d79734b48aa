"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``CRITERION <n>: PASS|FAIL ...`` line (collected again in the
terminal summary) before asserting, so a failing criterion is reported with
its measured value. Tolerances are pinned as module constants.
"""
import os
from fractions import Fraction
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from microemulsion.assembly import get_space, nonlinear_residual, project_initial, quadrature_points
from microemulsion.cli import main
from microemulsion.config import load_config, serialize_config
from microemulsion.eoc import DEFAULT_LADDER, DEFAULT_REFERENCE_DT, FIELDS, run_eoc_study
from microemulsion.initial import AnalyticField
from microemulsion.mesh import build_rect_mesh
from microemulsion.model import ModelParams, dt_safety_bound, f0, f0_prime, f0_secant
from microemulsion.output import read_csv
from microemulsion.stepper import MeshSpec, PicardSettings, picard_step, run_simulation

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

RATE_BAND = (1.85, 2.15)
ENERGY_LAW_TOL = 1e-7
MASS_TOL = 1e-10
MONOTONE_SLACK = 1e-8
FIXED_POINT_RATIO = 1e-9
SECANT_RTOL = 1e-12
SECANT_DIAG_TOL = 1e-13
SIGMA_ORDER = 1.8
BOUND_STANDARD = 0.00234375


def _report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _standard():
    return load_config(os.path.join(CONFIGS, "standard.ini"))


def _energy_law_violation(records):
    """Largest |residual| / max(1, |E^n|) over all steps (records[0] is the initial row)."""
    return max(abs(r.energy_law_residual) / max(1.0, abs(prev.energy))
               for prev, r in zip(records, records[1:]))


def _mass_drift(records):
    return max(abs(r.mass - records[0].mass) for r in records)


def _energy_increase(records):
    e = np.array([r.energy for r in records])
    return float(np.max(np.diff(e))), abs(e[0])


# -- criteria 2, 3 and 11 share the 16x16 standard run, driven through the CLI


def _small_config(tmp_path, name):
    cfg = _standard()
    cfg = replace(cfg, mesh=MeshSpec(cfg.mesh.bounds, (16, 16)), dt=1e-5, t_end=5e-4,
                  picard=replace(cfg.picard, tol=1e-10),
                  output=replace(cfg.output, directory=str(tmp_path / name), snapshot_every=0))
    path = tmp_path / f"{name}.ini"
    path.write_text(serialize_config(cfg))
    return str(path), tmp_path / name / cfg.output.csv_path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("small")
    cfg, csv_path = _small_config(tmp, "first")
    assert main(["run", cfg, "--quiet"]) == 0
    return tmp, csv_path, read_csv(csv_path)


def test_criterion_02_discrete_energy_law(small_run):
    _, _, recs = small_run
    assert len(recs) == 51
    worst = _energy_law_violation(recs)
    _report(2, worst <= ENERGY_LAW_TOL, f"energy-law residual {worst:.3e} <= {ENERGY_LAW_TOL:g}*max(1,|E|)")


def test_criterion_03_mass_conservation(small_run):
    _, _, recs = small_run
    drift, area = _mass_drift(recs), 100.0
    _report(3, drift <= MASS_TOL * area, f"mass drift {drift:.3e} <= {MASS_TOL:g}*|Omega|")


def test_criterion_11_determinism(small_run):
    tmp, first_csv, _ = small_run
    cfg, second_csv = _small_config(tmp, "second")
    assert main(["run", cfg, "--quiet"]) == 0
    same = first_csv.read_bytes() == second_csv.read_bytes()
    _report(11, same, "two runs give bitwise-identical CSV files")


# -- criteria 4 and 5 share the 64x64 standard run


@pytest.fixture(scope="module")
def standard_run():
    cfg = _standard()
    cfg = replace(cfg, mesh=MeshSpec(cfg.mesh.bounds, (64, 64)), dt=1e-5, t_end=0.05)
    return run_simulation(cfg)


@pytest.mark.slow
def test_criterion_04_energy_monotone(standard_run):
    recs = [standard_run.metadata["initial_record"]] + standard_run.records
    assert len(recs) == 5001
    rise, e0 = _energy_increase(recs)
    slack = MONOTONE_SLACK * e0
    _report(4, rise <= slack, f"largest energy increase {rise:.3e} <= slack {slack:.3e} "
                              f"(E0={recs[0].energy:.6g}, E_end={recs[-1].energy:.6g})")


@pytest.mark.slow
def test_criterion_05_phi_leaves_interval(standard_run):
    top = max(r.phi_max for r in standard_run.records)
    _report(5, top > 1.0, f"max phi over the run = {top:.6f} > 1")


# -- remaining criteria


@pytest.mark.slow
def test_criterion_01_temporal_order_two():
    cfg = load_config(os.path.join(CONFIGS, "eoc.ini"))
    assert cfg.mesh.divisions == (64, 64) and cfg.t_end == 1e-5
    assert cfg.params == ModelParams(M=1, lambda_=0.5, beta=1, h0=0.5, g0=-1, g2=1)
    rep = run_eoc_study(cfg, DEFAULT_LADDER, DEFAULT_REFERENCE_DT)
    print(rep.to_text())
    rates = {(f, k): rep.rates(f, k) for f in FIELDS for k in ("r2", "r1")}
    assert all(len(v) == 4 for v in rates.values())
    checked = [r for v in rates.values() for r in v[1:]]  # the first pair is pre-asymptotic
    lo, hi = min(checked), max(checked)
    _report(1, RATE_BAND[0] <= lo and hi <= RATE_BAND[1],
            f"rates in [{lo:.4f}, {hi:.4f}] within [{RATE_BAND[0]}, {RATE_BAND[1]}]")


def test_criterion_06_picard_fixed_point():
    cfg = _standard()
    p = cfg.params
    space = get_space(build_rect_mesh(cfg.mesh.bounds, 8, 8))
    state = project_initial(space, p, cfg.ic.build(p.lambda_))
    worst = 0.0
    for _ in range(5):
        start = max(np.abs(r).max() for r in nonlinear_residual(space, p, state, state, 1e-5))
        nxt, _, _ = picard_step(space, p, state, 1e-5, PicardSettings(tol=1e-12))
        end = max(np.abs(r).max() for r in nonlinear_residual(space, p, nxt, state, 1e-5))
        worst = max(worst, end / start)
        state = nxt
    _report(6, worst <= FIXED_POINT_RATIO, f"accepted/initial residual ratio {worst:.3e} <= {FIXED_POINT_RATIO:g}")


def test_criterion_07_secant_consistency():
    rng = np.random.default_rng(2024)
    a, b = rng.uniform(-2.0, 2.0, (2, 1000))
    h0 = 0.5
    lhs = f0_secant(a, b, h0) * (a - b)
    rhs = f0(a, h0) - f0(b, h0)
    rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), np.finfo(float).tiny)
    diag = np.abs(f0_secant(a, a, h0) - f0_prime(a, h0)) / np.maximum(np.abs(f0_prime(a, h0)), 1.0)
    _report(7, rel.max() <= SECANT_RTOL and diag.max() <= SECANT_DIAG_TOL,
            f"secant identity rel err {rel.max():.2e}, diagonal err {diag.max():.2e}")


def test_criterion_08_initial_sigma_order():
    def value(x):
        return np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])

    def gradient(x):
        return -np.pi * np.column_stack([np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]),
                                         np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])])

    phi0 = AnalyticField(value, gradient)
    p = ModelParams(M=1, lambda_=1, beta=1, h0=0.5, g0=-1, g2=1)
    errs = []
    for n in (16, 32, 64):
        space = get_space(build_rect_mesh([(0, 1), (0, 1)], n, n))
        sigma = project_initial(space, p, phi0).sigma
        x = quadrature_points(space).reshape(-1, 2)
        exact = (2 * np.pi ** 2 * value(x)).reshape(space.mesh.n_elements, -1)
        errs.append(np.sqrt(space.integrate((space.at_quadrature(sigma) - exact) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    _report(8, bool((orders >= SIGMA_ORDER).all()),
            f"sigma0 L2 orders {', '.join(f'{o:.3f}' for o in orders)} >= {SIGMA_ORDER}")


def test_criterion_09_dt_bound(tmp_path, capsys):
    cfg = _standard()
    bound = dt_safety_bound(cfg.params)
    base = replace(cfg, mesh=MeshSpec(cfg.mesh.bounds, (2, 2)),
                   output=replace(cfg.output, directory=str(tmp_path / "o"), snapshot_every=0))

    def warnings_for(c):
        path = tmp_path / "c.ini"
        path.write_text(serialize_config(c))
        capsys.readouterr()
        assert main(["run", str(path), "--quiet"]) == 0
        return capsys.readouterr().err.count("warning:")

    path = tmp_path / "info.ini"
    path.write_text(serialize_config(base))
    capsys.readouterr()
    assert main(["info", str(path)]) == 0
    printed = capsys.readouterr().out
    # the float inputs 0.1 are not exact, so the correctly rounded bound sits one ulp above
    # 0.00234375; the printed report must read exactly 0.00234375
    exact = Fraction(3) * Fraction(0.1) ** 2 / (2 * Fraction(4) ** 3 * Fraction(0.1))
    ok_info = f"dt_safety_bound = {BOUND_STANDARD}\n" in printed and bound == float(exact)
    above = float(np.nextafter(bound, 1.0))
    counts = [warnings_for(replace(base, dt=d, t_end=d)) for d in (1e-5, bound, above, 0.01)]
    zero_g0 = replace(base, params=replace(cfg.params, g0=0.0), dt=10.0, t_end=10.0)
    zero_count = warnings_for(zero_g0)
    _report(9, ok_info and counts == [0, 0, 1, 1] and zero_count == 0,
            f"info bound {bound!r}; warnings below/at/above/0.01 = {counts}; g0=0 warnings = {zero_count}")


@pytest.mark.slow
def test_criterion_10_three_dimensional_smoke():
    cfg = load_config(os.path.join(CONFIGS, "box_3d.ini"))
    assert cfg.mesh.divisions == (24, 24, 6)
    assert cfg.params == ModelParams(M=0.1, lambda_=0.01, beta=5, h0=0.5, g0=-4, g2=1)
    cfg = replace(cfg, dt=1e-5, t_end=2e-3, picard=replace(cfg.picard, tol=1e-10))
    res = run_simulation(cfg)
    recs = [res.metadata["initial_record"]] + res.records
    assert len(recs) == 201
    law = _energy_law_violation(recs)
    drift = _mass_drift(recs)
    rise, e0 = _energy_increase(recs)
    ok = law <= ENERGY_LAW_TOL and drift <= MASS_TOL * 25.0 and rise <= MONOTONE_SLACK * e0
    _report(10, ok, f"energy-law {law:.3e}, mass drift {drift:.3e}, largest energy increase {rise:.3e}")
