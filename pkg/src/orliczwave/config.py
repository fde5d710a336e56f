"""Line-oriented run configuration: [section] headers and key = value pairs.

Hand-rolled instead of configparser for one reason: every validation error
must point at the offending line, and configparser forgets line numbers.
Blank lines and '#' comments are ignored; values never span lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

__all__ = ["RunConfig", "ConfigError", "parse_config", "compile_expression",
           "COMMANDS"]

COMMANDS = ("solve", "converge-time", "converge-space", "verify-orlicz",
            "verify-nfun", "probe-unique")

_EXPR_NAMES = {"pi": np.pi, "sin": np.sin, "cos": np.cos, "exp": np.exp,
               "abs": np.abs, "sign": np.sign, "sqrt": np.sqrt}
_EXPR_VARS = ("x", "y", "t")


class ConfigError(ValueError):
    """All problems found in one parse, each tagged with its line number."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = list(problems)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.problems))


def compile_expression(text: str):
    """Compile an initial-data / forcing expression over x, y, t.

    Only the whitelisted names are visible; anything else is rejected before
    evaluation, so configs cannot reach the interpreter.
    """
    code = compile(text, "<config expression>", "eval")
    # Lambdas and comprehensions carry their own name tables, which the check
    # below would not see; they have no use in a scalar field expression.
    if any(isinstance(const, type(code)) for const in code.co_consts):
        raise ValueError("nested function expressions are not allowed")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name not in _EXPR_VARS:
            raise ValueError(f"unknown name {name!r} in expression "
                             f"(allowed: {', '.join((*_EXPR_NAMES, *_EXPR_VARS))})")

    def evaluate(points: np.ndarray, t: float = 0.0) -> np.ndarray:
        scope = dict(_EXPR_NAMES)
        scope["x"] = points[:, 0]
        scope["y"] = points[:, 1] if points.shape[1] > 1 else 0.0
        scope["t"] = t
        out = eval(code, {"__builtins__": {}}, scope)
        return np.broadcast_to(np.asarray(out, dtype=float), (points.shape[0],)).copy()

    return evaluate


@dataclass
class RunConfig:
    """Everything a command needs; unset optionals keep their defaults here."""

    command: str | None = None
    seed: int = 0
    out_dir: str = "out"

    spec_kind: str | None = None          # power | exp | quadform
    spec_p: float | None = None
    spec_matrix: np.ndarray | None = None

    space_kind: str | None = None         # fem1d | fem2d | spectral1d
    resolution: int | None = None
    nx: int | None = None
    ny: int | None = None

    t_final: float = 1.0
    n_steps: int | None = None
    tau: float | None = None
    tau_ladder: list = dataclass_field(default_factory=list)
    resolution_ladder: list = dataclass_field(default_factory=list)

    case: str | None = None
    u0_expr: str | None = None
    v0_expr: str | None = None
    forcing_expr: str | None = None

    probe_perturbation: float = 1.0
    probe_steps: int = 20

    check_trials: int = 100
    check_radius: float = 50.0
    check_samples: int = 400

    newton_tol: float | None = None
    rate_min: float | None = None
    rate_max: float | None = None


def _parse_float(text):
    return float(text)


def _parse_int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _parse_floats(text):
    # Commas and semicolons are cosmetic separators (rows of a matrix,
    # readable ladders); only the flat number list matters.
    parts = text.replace(",", " ").replace(";", " ").split()
    if not parts:
        raise ValueError("expected at least one number")
    return [float(p) for p in parts]


def _parse_ints(text):
    return [_parse_int(p) for p in text.replace(",", " ").split()]


def _parse_str(text):
    return text


# (section, key) -> (RunConfig attribute, parser)
_SCHEMA = {
    ("run", "command"): ("command", _parse_str),
    ("run", "seed"): ("seed", _parse_int),
    ("run", "out"): ("out_dir", _parse_str),
    ("spec", "kind"): ("spec_kind", _parse_str),
    ("spec", "p"): ("spec_p", _parse_float),
    ("spec", "matrix"): ("spec_matrix", _parse_floats),
    ("space", "kind"): ("space_kind", _parse_str),
    ("space", "resolution"): ("resolution", _parse_int),
    ("space", "nx"): ("nx", _parse_int),
    ("space", "ny"): ("ny", _parse_int),
    ("time", "T"): ("t_final", _parse_float),
    ("time", "N"): ("n_steps", _parse_int),
    ("time", "tau"): ("tau", _parse_float),
    ("time", "tau_ladder"): ("tau_ladder", _parse_floats),
    ("time", "resolution_ladder"): ("resolution_ladder", _parse_ints),
    ("case", "name"): ("case", _parse_str),
    ("initial", "u0"): ("u0_expr", _parse_str),
    ("initial", "v0"): ("v0_expr", _parse_str),
    ("initial", "forcing"): ("forcing_expr", _parse_str),
    ("probe", "perturbation"): ("probe_perturbation", _parse_float),
    ("probe", "steps"): ("probe_steps", _parse_int),
    ("check", "trials"): ("check_trials", _parse_int),
    ("check", "radius"): ("check_radius", _parse_float),
    ("check", "samples"): ("check_samples", _parse_int),
    ("tolerances", "newton_tol"): ("newton_tol", _parse_float),
    ("tolerances", "rate_min"): ("rate_min", _parse_float),
    ("tolerances", "rate_max"): ("rate_max", _parse_float),
}
_SECTIONS = {section for section, _ in _SCHEMA}


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem found."""
    config = RunConfig()
    problems: list[tuple[int, str]] = []
    lines_of: dict[str, int] = {}
    section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                problems.append((lineno, f"unknown section [{section}]"))
                section = None
            continue
        if "=" not in line:
            problems.append((lineno, f"expected key = value, got {line!r}"))
            continue
        if section is None:
            problems.append((lineno, "key outside any [section]"))
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        entry = _SCHEMA.get((section, key))
        if entry is None:
            problems.append((lineno, f"unknown key {key!r} in section [{section}]"))
            continue
        attr, parser = entry
        try:
            setattr(config, attr, parser(value))
            lines_of[attr] = lineno
        except ValueError as exc:
            problems.append((lineno, f"{key}: {exc}"))

    _validate(config, lines_of, problems)
    if problems:
        raise ConfigError(sorted(problems))
    return config


def _where(lines_of: dict, attr: str) -> int:
    return lines_of.get(attr, 0)


def _validate(config: RunConfig, lines_of: dict, problems: list) -> None:
    if config.command is not None and config.command not in COMMANDS:
        problems.append((_where(lines_of, "command"),
                         f"unknown command {config.command!r}; "
                         f"choose from {', '.join(COMMANDS)}"))

    if config.spec_kind is not None:
        if config.spec_kind not in ("power", "exp", "quadform"):
            problems.append((_where(lines_of, "spec_kind"),
                             f"unknown spec kind {config.spec_kind!r}"))
        if config.spec_kind == "power":
            if config.spec_p is None:
                problems.append((_where(lines_of, "spec_kind"),
                                 "power spec needs p"))
            elif not config.spec_p > 1.0:
                problems.append((_where(lines_of, "spec_p"), "need p > 1"))
        if config.spec_kind == "quadform":
            flat = config.spec_matrix
            if flat is None:
                problems.append((_where(lines_of, "spec_kind"),
                                 "quadform spec needs matrix (row-major entries)"))
            else:
                n = int(round(len(flat) ** 0.5))
                if n * n != len(flat):
                    problems.append((_where(lines_of, "spec_matrix"),
                                     f"matrix needs a square number of entries, got {len(flat)}"))
                else:
                    matrix = np.array(flat, dtype=float).reshape(n, n)
                    try:
                        from .nfunction import NFunctionSpec
                        NFunctionSpec.quad_form(matrix)
                        config.spec_matrix = matrix
                    except ValueError as exc:
                        problems.append((_where(lines_of, "spec_matrix"), str(exc)))

    if config.space_kind is not None:
        # A resolution ladder supplies the sizes itself; otherwise the space
        # needs one fixed resolution (fem2d alternatively takes nx and ny).
        ladder_driven = bool(config.resolution_ladder)
        if config.space_kind not in ("fem1d", "fem2d", "spectral1d"):
            problems.append((_where(lines_of, "space_kind"),
                             f"unknown space kind {config.space_kind!r}"))
        elif config.space_kind == "fem2d":
            if (config.resolution is None and not ladder_driven
                    and (config.nx is None or config.ny is None)):
                problems.append((_where(lines_of, "space_kind"),
                                 "fem2d needs resolution or nx and ny"))
        elif config.resolution is None and not ladder_driven:
            problems.append((_where(lines_of, "space_kind"),
                             f"{config.space_kind} needs resolution"))
        if config.resolution is not None and config.resolution < 1:
            problems.append((_where(lines_of, "resolution"), "resolution must be >= 1"))

    # Matrix dimension must match the domain the space provides.
    if isinstance(config.spec_matrix, np.ndarray) and config.space_kind is not None:
        space_dim = 2 if config.space_kind == "fem2d" else 1
        if config.spec_matrix.shape[0] != space_dim:
            problems.append((_where(lines_of, "spec_matrix"),
                             f"matrix is {config.spec_matrix.shape[0]}x"
                             f"{config.spec_matrix.shape[0]} but the space is "
                             f"{space_dim}-dimensional"))

    if config.t_final <= 0:
        problems.append((_where(lines_of, "t_final"), "T must be positive"))
    if config.n_steps is not None and config.n_steps < 1:
        problems.append((_where(lines_of, "n_steps"), "N must be >= 1"))
    if config.tau is not None and config.tau <= 0:
        problems.append((_where(lines_of, "tau"), "tau must be positive"))
    if (config.tau is not None and config.n_steps is not None
            and abs(config.tau * config.n_steps - config.t_final)
            > 1e-12 * max(1.0, config.t_final)):
        problems.append((_where(lines_of, "tau"),
                         f"tau * N = {config.tau * config.n_steps!r} "
                         f"does not reproduce T = {config.t_final!r}"))
    for value in config.tau_ladder:
        if value <= 0:
            problems.append((_where(lines_of, "tau_ladder"),
                             "ladder entries must be positive"))
            break

    if config.case is not None:
        from .harness import case_names
        if config.case not in case_names():
            problems.append((_where(lines_of, "case"),
                             f"unknown case {config.case!r}; "
                             f"known: {', '.join(case_names())}"))

    for attr in ("u0_expr", "v0_expr", "forcing_expr"):
        value = getattr(config, attr)
        if value is not None:
            try:
                compile_expression(value)
            except (SyntaxError, ValueError) as exc:
                problems.append((_where(lines_of, attr), f"bad expression: {exc}"))

    if config.newton_tol is not None and config.newton_tol <= 0:
        problems.append((_where(lines_of, "newton_tol"), "newton_tol must be positive"))
