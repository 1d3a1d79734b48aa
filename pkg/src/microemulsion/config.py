"""INI-style run configuration.

Example::

    [domain]
    bounds = -5 5 -5 5          ; xmin xmax ymin ymax [zmin zmax]
    divisions = 64 64

    [params]
    M = 0.1
    lambda = 0.1
    beta = 1
    h0 = 0.5
    g0 = -4
    g2 = 1

    [time]
    dt = 1e-5
    t_end = 0.05

    [picard]                    ; optional
    tol = 1e-7
    max_iter = 50

    [ic]
    preset = droplet_array
    droplets = -2 -2 1.5 1; 2 2 1.5 -1   ; center..., radius, phase per droplet

    [output]                    ; optional
    directory = output
    snapshot_every = 100
    csv_path = records.csv

Unknown sections and keys are rejected. Errors carry the line number of
the offending entry.
"""
from __future__ import annotations

import configparser
import math
import re

from .errors import ConfigError, InvalidArgument
from .initial import Droplet, IcSpec, PRESETS
from .model import ModelParams
from .stepper import MeshSpec, OutputSpec, PicardSettings, RunConfig

__all__ = ["parse_config", "load_config", "serialize_config", "SCHEMA"]

SCHEMA = {
    "domain": {"bounds", "divisions"},
    "params": {"M", "lambda", "beta", "h0", "g0", "g2"},
    "time": {"dt", "t_end"},
    "picard": {"tol", "max_iter", "extrapolate", "linear_solver"},
    "ic": {"preset", "lambda", "droplets", "value", "mean", "amplitude", "seed"},
    "output": {"directory", "snapshot_every", "csv_path"},
}
REQUIRED = ("domain", "params", "time", "ic")


class _Locator:
    """Line numbers of section headers and keys in the source text."""

    _section = re.compile(r"^\s*\[([^\]]+)\]")
    _key = re.compile(r"^\s*([^=:;#\s][^=:]*?)\s*[=:]")

    def __init__(self, text):
        self.sections, self.keys = {}, {}
        current = None
        for no, line in enumerate(text.splitlines(), start=1):
            m = self._section.match(line)
            if m:
                current = m.group(1).strip()
                self.sections.setdefault(current, no)
                continue
            m = self._key.match(line)
            if m and current is not None and not line[:1].isspace():
                self.keys.setdefault((current, m.group(1)), no)

    def line(self, section, key=None):
        if key is not None and (section, key) in self.keys:
            return self.keys[(section, key)]
        return self.sections.get(section)


def _numbers(raw, kind, where, line):
    try:
        vals = [kind(tok) for tok in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {raw!r}", line) from None
    if kind is float and not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{where}: values must be finite", line)
    return vals


def _bool(raw, where, line):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}", line)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        Syntax errors, unknown or missing entries, and violated invariants,
        with the line of the offending entry when it can be located.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"),
                                   default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry outside any section", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed entry", line) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"[{exc.section}] {exc.option} given twice", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"section [{exc.section}] given twice", exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    loc = _Locator(text)

    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", loc.line(section))
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", loc.line(section, key))
    for section in REQUIRED:
        if not cp.has_section(section):
            raise ConfigError(f"missing section [{section}]")

    def get(section, key, required=True):
        if cp.has_section(section) and key in cp[section]:
            return cp[section][key], loc.line(section, key)
        if required:
            raise ConfigError(f"missing key {key!r} in [{section}]", loc.line(section))
        return None, None

    def number(section, key, kind=float, required=True, default=None):
        raw, line = get(section, key, required)
        if raw is None:
            return default
        vals = _numbers(raw, kind, f"[{section}] {key}", line)
        if len(vals) != 1:
            raise ConfigError(f"[{section}] {key}: expected a single value", line)
        return vals[0]

    # domain
    raw, bline = get("domain", "bounds")
    flat = _numbers(raw, float, "[domain] bounds", bline)
    if len(flat) not in (4, 6):
        raise ConfigError("[domain] bounds: expected 4 (2D) or 6 (3D) numbers", bline)
    bounds = tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))
    raw, dline = get("domain", "divisions")
    divisions = tuple(_numbers(raw, int, "[domain] divisions", dline))
    if len(divisions) != len(bounds):
        raise ConfigError(f"[domain] divisions: expected {len(bounds)} counts", dline)
    try:
        mesh = MeshSpec(bounds, divisions)
        mesh.build()
    except InvalidArgument as exc:
        raise ConfigError(f"[domain] {exc}", dline) from None

    # params
    names = {"M": "M", "lambda": "lambda_", "beta": "beta", "h0": "h0", "g0": "g0", "g2": "g2"}
    values = {attr: number("params", key) for key, attr in names.items()}
    try:
        params = ModelParams(**values)
    except InvalidArgument as exc:
        bad = next((k for k in names if re.search(rf"\b{re.escape(k)}\b", str(exc))), None)
        raise ConfigError(f"[params] {exc}", loc.line("params", bad)) from None

    dt = number("time", "dt")
    t_end = number("time", "t_end")

    try:
        picard = PicardSettings(
            tol=number("picard", "tol", required=False, default=1e-7),
            max_iter=number("picard", "max_iter", int, required=False, default=50),
            extrapolate=_bool(*get("picard", "extrapolate", False), "[picard] extrapolate")
            if get("picard", "extrapolate", False)[0] is not None else False,
        )
    except InvalidArgument as exc:
        raise ConfigError(f"[picard] {exc}", loc.line("picard")) from None
    solver = (get("picard", "linear_solver", False)[0] or "lu").strip()

    ic = _parse_ic(get, number, loc, len(bounds))

    out = OutputSpec(
        directory=(get("output", "directory", False)[0] or "output").strip(),
        snapshot_every=number("output", "snapshot_every", int, required=False, default=0),
        csv_path=(get("output", "csv_path", False)[0] or "records.csv").strip(),
    )
    if out.snapshot_every < 0:
        raise ConfigError("[output] snapshot_every must be non-negative", loc.line("output", "snapshot_every"))

    try:
        return RunConfig(mesh, params, dt, t_end, ic, picard, out, solver)
    except InvalidArgument as exc:
        key = "linear_solver" if "solver" in str(exc) else ("t_end" if "t_end" in str(exc) else "dt")
        section = "picard" if key == "linear_solver" else "time"
        raise ConfigError(str(exc), loc.line(section, key)) from None


def _parse_ic(get, number, loc, dim):
    raw, line = get("ic", "preset")
    preset = raw.strip()
    if preset not in PRESETS:
        raise ConfigError(f"[ic] unknown preset {preset!r}; choose from {', '.join(PRESETS)}", line)
    opts = {}
    lam = number("ic", "lambda", required=False)
    if lam is not None:
        opts["lambda"] = lam
    for key in ("value", "mean", "amplitude"):
        v = number("ic", key, required=False)
        if v is not None:
            opts[key] = v
    seed = number("ic", "seed", int, required=False)
    if seed is not None:
        opts["seed"] = seed
    raw, dline = get("ic", "droplets", False)
    if raw is not None:
        droplets = []
        for chunk in filter(None, (c.strip() for c in raw.split(";"))):
            vals = _numbers(chunk, float, "[ic] droplets", dline)
            if len(vals) != dim + 2:
                raise ConfigError(f"[ic] droplets: each droplet needs {dim} coordinates, a radius "
                                  f"and a phase, got {chunk!r}", dline)
            phase = vals[-1]
            if phase not in (-1.0, 1.0):
                raise ConfigError(f"[ic] droplets: phase must be -1 or 1, got {phase:g}", dline)
            try:
                droplets.append(Droplet(tuple(vals[:dim]), vals[dim], int(phase)))
            except InvalidArgument as exc:
                raise ConfigError(f"[ic] {exc}", dline) from None
        opts["droplets"] = tuple(droplets)
    try:
        return IcSpec(preset, opts)
    except InvalidArgument as exc:
        raise ConfigError(f"[ic] {exc}", loc.line("ic", "preset")) from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config`` of the result gives back ``cfg``."""
    r = repr
    p = cfg.params
    lines = [
        "[domain]",
        "bounds = " + " ".join(f"{r(float(a))} {r(float(b))}" for a, b in cfg.mesh.bounds),
        "divisions = " + " ".join(str(int(n)) for n in cfg.mesh.divisions),
        "",
        "[params]",
        f"M = {r(float(p.M))}",
        f"lambda = {r(float(p.lambda_))}",
        f"beta = {r(float(p.beta))}",
        f"h0 = {r(float(p.h0))}",
        f"g0 = {r(float(p.g0))}",
        f"g2 = {r(float(p.g2))}",
        "",
        "[time]",
        f"dt = {r(float(cfg.dt))}",
        f"t_end = {r(float(cfg.t_end))}",
        "",
        "[picard]",
        f"tol = {r(float(cfg.picard.tol))}",
        f"max_iter = {int(cfg.picard.max_iter)}",
        f"extrapolate = {'true' if cfg.picard.extrapolate else 'false'}",
        f"linear_solver = {cfg.solver}",
        "",
        "[ic]",
        f"preset = {cfg.ic.preset}",
    ]
    o = cfg.ic.options
    for key in ("lambda", "value", "mean", "amplitude"):
        if key in o:
            lines.append(f"{key} = {r(float(o[key]))}")
    if "seed" in o:
        lines.append(f"seed = {int(o['seed'])}")
    if o.get("droplets"):
        parts = [" ".join([*(r(float(c)) for c in d.center), r(float(d.radius)), str(d.phase)])
                 for d in o["droplets"]]
        lines.append("droplets = " + "; ".join(parts))
    lines += [
        "",
        "[output]",
        f"directory = {cfg.output.directory}",
        f"snapshot_every = {int(cfg.output.snapshot_every)}",
        f"csv_path = {cfg.output.csv_path}",
        "",
    ]
    return "\n".join(lines)
