"""Run configuration: strict key=value files with [section] headers.

Every key has a documented default except the gas state and the force kind.
Unknown sections or keys, duplicates and malformed lines are rejected with a
ParseError (carrying the line number) or a ValidationError (carrying the
dotted key path).

Example::

    [gas]
    gamma = 1.4
    rho0 = 1.0
    u0 = 0.5
    L0 = -2.0
    L1 = 1.0

    [force]
    kind = linear
    slope = 1.0
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from math import isfinite

from .errors import ParseError, ValidationError

FORMATS = ("csv", "json", "dat", "svg")


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _words(text: str) -> tuple:
    return tuple(v.strip().lower() for v in text.replace(",", " ").split())


# section -> key -> (parser, default); a default of ... marks a required key
SCHEMA: dict[str, dict[str, tuple]] = {
    "gas": {
        "gamma": (_float, ...),
        "rho0": (_float, ...),
        "u0": (_float, ...),
        "l0": (_float, ...),
        "l1": (_float, ...),
    },
    "force": {
        "kind": (str.strip, ...),          # linear | polynomial | table
        "slope": (_float, 1.0),            # linear: f = slope * x1 before calibration
        "coefficients": (_floats, ()),     # polynomial: ascending coefficients
        "coefficients_right": (_floats, ()),
        "table_x": (_floats, ()),
        "table_f": (_floats, ()),
        "calibrate": (_bool, True),
    },
    "discretization": {
        "n_modes": (_int, 12),
        "q_nodes": (_int, 96),
        "m_x1": (_int, 160),
    },
    "sigma": {
        "sigma0": (_float, 1e-2),
        "levels": (_int, 40),
        "tol_sigma": (_float, 1e-8),
    },
    "fixed_point": {
        "eps": (_float, 1e-3),
        "eps_max": (_float, 2e-3),
        "tol_fp": (_float, 1e-10),
        "max_iter": (_int, 20),
        "damping": (_float, 1.0),
        "delta0_override": (_optional_float, None),
        "sweep_eps": (_floats, (1e-3, 5e-4, 2.5e-4)),
    },
    "inlet": {
        "kind": (str.strip, "polynomial_bump"),
        "amplitude": (_float, 1e-3),
        "power": (_int, 8),
        "beta0": (_float, 0.2),
    },
    "outputs": {
        "directory": (str.strip, "out"),
        "formats": (_words, FORMATS),
    },
}


@dataclass(frozen=True)
class GasSection:
    gamma: float
    rho0: float
    u0: float
    L0: float
    L1: float


@dataclass(frozen=True)
class ForceSection:
    kind: str
    slope: float = 1.0
    coefficients: tuple = ()
    coefficients_right: tuple = ()
    table_x: tuple = ()
    table_f: tuple = ()
    calibrate: bool = True


@dataclass(frozen=True)
class Discretization:
    N_modes: int = 12
    Q_nodes: int = 96
    M_x1: int = 160


@dataclass(frozen=True)
class SigmaSection:
    sigma0: float = 1e-2
    levels: int = 40
    tol_sigma: float = 1e-8


@dataclass(frozen=True)
class FixedPointSection:
    eps: float = 1e-3
    eps_max: float = 2e-3
    tol_fp: float = 1e-10
    max_iter: int = 20
    damping: float = 1.0
    delta0_override: float | None = None
    sweep_eps: tuple = (1e-3, 5e-4, 2.5e-4)


@dataclass(frozen=True)
class InletSection:
    kind: str = "polynomial_bump"
    amplitude: float = 1e-3
    power: int = 8
    beta0: float = 0.2


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple = FORMATS


@dataclass(frozen=True)
class RunConfig:
    gas: GasSection
    force: ForceSection
    discretization: Discretization = field(default_factory=Discretization)
    sigma: SigmaSection = field(default_factory=SigmaSection)
    fixed_point: FixedPointSection = field(default_factory=FixedPointSection)
    inlet: InletSection = field(default_factory=InletSection)
    outputs: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {"l0": "L0", "l1": "L1", "n_modes": "N_modes", "q_nodes": "Q_nodes", "m_x1": "M_x1"}


def _reader() -> configparser.ConfigParser:
    return configparser.ConfigParser(strict=True, interpolation=None, delimiters=("=",),
                                     comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                     empty_lines_in_values=False, default_section="\x00none")


def _read(text: str) -> configparser.ConfigParser:
    parser = _reader()
    try:
        parser.read_string(text)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).split(": ", 1)[-1], exc.lineno) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside any [section]", exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError("expected key = value", line) from exc
    return parser


def _section_values(parser, name: str) -> dict:
    schema = SCHEMA[name]
    given = dict(parser.items(name)) if parser.has_section(name) else {}
    out = {}
    for key in given:
        if key not in schema:
            raise ValidationError("unknown key", f"{name}.{key}")
    for key, (convert, default) in schema.items():
        path = f"{name}.{key}"
        if key in given:
            try:
                value = convert(given[key])
            except ValueError as exc:
                raise ValidationError(f"cannot parse {given[key]!r}: {exc}", path) from exc
        elif default is ...:
            raise ValidationError("required key is missing", path)
        else:
            value = default
        out[_FIELD_NAMES.get(key, key)] = value
    return out


def _check(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise ValidationError(message, path)


def _validate(cfg: RunConfig) -> None:
    g = cfg.gas
    for name in ("gamma", "rho0", "u0", "L0", "L1"):
        _check(isfinite(getattr(g, name)), "must be finite", f"gas.{name}")
    _check(g.gamma > 1.0, "gamma must exceed 1", "gas.gamma")
    _check(g.rho0 > 0.0, "rho0 must be positive", "gas.rho0")
    _check(g.u0 > 0.0, "u0 must be positive", "gas.u0")
    _check(g.L0 < 0.0, "L0 must be negative", "gas.L0")
    _check(g.L1 > 0.0, "L1 must be positive", "gas.L1")
    _check(g.u0**2 < g.gamma * g.rho0 ** (g.gamma - 1.0), "inlet state must be subsonic", "gas.u0")

    f = cfg.force
    _check(f.kind in ("linear", "polynomial", "table"), "kind must be linear, polynomial or table", "force.kind")
    if f.kind == "linear":
        _check(f.slope > 0.0, "slope must be positive", "force.slope")
    if f.kind == "polynomial":
        _check(len(f.coefficients) >= 2, "need at least two coefficients", "force.coefficients")
    if f.kind == "table":
        _check(len(f.table_x) >= 4 and len(f.table_x) == len(f.table_f),
               "table_x and table_f need equal lengths of at least 4", "force.table_x")

    d = cfg.discretization
    _check(1 <= d.N_modes <= 256, "N_modes must lie in 1..256", "discretization.N_modes")
    _check(d.Q_nodes >= 4 * d.N_modes, "Q_nodes must be at least 4 N_modes", "discretization.Q_nodes")
    _check(d.M_x1 >= 16, "M_x1 must be at least 16", "discretization.M_x1")

    s = cfg.sigma
    _check(s.sigma0 > 0.0, "sigma0 must be positive", "sigma.sigma0")
    _check(1 <= s.levels <= 200, "levels must lie in 1..200", "sigma.levels")
    _check(s.tol_sigma > 0.0, "tol_sigma must be positive", "sigma.tol_sigma")

    p = cfg.fixed_point
    _check(p.eps >= 0.0, "eps must be non-negative", "fixed_point.eps")
    _check(p.eps_max > 0.0, "eps_max must be positive", "fixed_point.eps_max")
    _check(p.tol_fp > 0.0, "tol_fp must be positive", "fixed_point.tol_fp")
    _check(p.max_iter >= 1, "max_iter must be at least 1", "fixed_point.max_iter")
    _check(0.0 < p.damping <= 1.0, "damping must lie in (0, 1]", "fixed_point.damping")
    _check(p.delta0_override is None or p.delta0_override > 0.0, "delta0_override must be positive",
           "fixed_point.delta0_override")
    _check(all(e > 0.0 for e in p.sweep_eps) and len(p.sweep_eps) >= 2,
           "sweep_eps needs at least two positive values", "fixed_point.sweep_eps")

    i = cfg.inlet
    _check(i.kind == "polynomial_bump", "only polynomial_bump is supported", "inlet.kind")
    _check(0.0 < i.beta0 < 1.0, "beta0 must lie in (0, 1)", "inlet.beta0")
    _check(i.power >= 5, "power must be at least 5", "inlet.power")
    _check(isfinite(i.amplitude), "amplitude must be finite", "inlet.amplitude")

    o = cfg.outputs
    _check(bool(o.directory), "directory must not be empty", "outputs.directory")
    for fmt in o.formats:
        _check(fmt in FORMATS, f"unknown format {fmt!r}", "outputs.formats")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration text."""
    parser = _read(text)
    for name in parser.sections():
        if name not in SCHEMA:
            raise ValidationError("unknown section", name)
    for name in ("gas", "force"):
        if not parser.has_section(name):
            raise ValidationError("required section is missing", name)
    cfg = RunConfig(
        gas=GasSection(**_section_values(parser, "gas")),
        force=ForceSection(**_section_values(parser, "force")),
        discretization=Discretization(**_section_values(parser, "discretization")),
        sigma=SigmaSection(**_section_values(parser, "sigma")),
        fixed_point=FixedPointSection(**_section_values(parser, "fixed_point")),
        inlet=InletSection(**_section_values(parser, "inlet")),
        outputs=OutputSection(**_section_values(parser, "outputs")),
    )
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text)


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Inverse of parse_config: every key written explicitly."""
    lines = []
    data = cfg.to_dict()
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_render(data[section][_FIELD_NAMES.get(key, key)])}")
        lines.append("")
    return "\n".join(lines)


DEMO_CONFIG = """\
[gas]
gamma = 1.4
rho0 = 1.0
u0 = 0.5
L0 = -2.0
L1 = 1.0

[force]
kind = linear
slope = 1.0
"""
