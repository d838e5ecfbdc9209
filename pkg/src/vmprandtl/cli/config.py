"""Strict TOML run configuration with environment overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ConfigError, DomainError
from ..profiles import GyreSetup, Profile

MODES = ("solve", "verify", "fields", "ode", "sweep", "convergence")
ENV_PREFIX = "VMP_"
REQUIRED = {
    "solve": ("setup", "initial", "solver"),
    "verify": ("setup", "initial", "solver", "barrier"),
    "fields": ("setup", "initial", "solver"),
    "ode": ("ode",),
    "sweep": ("sweep",),
    "convergence": ("setup", "initial", "solver", "convergence"),
}


def _build(cls, name, data):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


@dataclass(frozen=True)
class SetupBlock:
    lambda0: float
    Y: float
    eta: float
    psi0: dict
    coastline: dict = field(default_factory=lambda: {"kind": "polynomial", "coeffs": [0.0]})

    def build(self) -> GyreSetup:
        try:
            return GyreSetup(float(self.lambda0), float(self.Y), float(self.eta),
                             Profile.from_dict(self.coastline), Profile.from_dict(self.psi0))
        except DomainError as exc:
            raise ConfigError(f"[setup]: {exc}") from None


@dataclass(frozen=True)
class InitialBlock:
    kind: str = "separable"
    alpha_param: Optional[float] = None
    B: float = 1.0
    window: tuple = (0.25, 0.75)

    def __post_init__(self):
        if self.kind not in ("separable", "default"):
            raise ConfigError("[initial] kind must be 'separable' or 'default'")
        if len(self.window) != 2:
            raise ConfigError("[initial] window needs two fractions")


@dataclass(frozen=True)
class SolverBlock:
    eps: float = 1e-3
    n_s: int = 512
    clustering: float = 3.0
    dy0: Optional[float] = None
    dy_min: Optional[float] = None
    dy_max: Optional[float] = None
    newton_tol: float = 1e-10
    max_iter: int = 30
    n_out: int = 20
    output_y: tuple = ()
    backend: str = "auto"
    mu: float = 0.1

    def __post_init__(self):
        if self.backend not in ("auto", "numba", "numpy"):
            raise ConfigError("[solver] backend must be auto, numba or numpy")
        if not self.eps > 0 or int(self.n_s) < 8:
            raise ConfigError("[solver] needs eps > 0 and n_s >= 8")


@dataclass(frozen=True)
class BarrierBlock:
    mu: float = 0.1
    alpha_cap: int = 16
    field_dir: Optional[str] = None


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"
    cadence: int = 1
    formats: tuple = ("csv",)

    def __post_init__(self):
        bad = sorted(set(self.formats) - {"csv", "npz"})
        if bad or int(self.cadence) < 1:
            raise ConfigError("[output] formats must be csv/npz and cadence >= 1")


@dataclass(frozen=True)
class OdeBlock:
    alpha_param: float = 2.5
    Xi: float = 40.0
    tol: float = 1e-12
    threshold_scan: bool = False
    scan_range: tuple = (1.0, 3.0)


@dataclass(frozen=True)
class SweepBlock:
    kappas: tuple = ()
    solve: bool = False
    eps: float = 1e-3
    n_s: int = 256
    mu: float = 0.1
    Y: float = 1.0
    workers: int = 1


@dataclass(frozen=True)
class ConvergenceBlock:
    eps_list: tuple = (4e-3, 2e-3, 1e-3)
    n_s_list: tuple = ()
    compare_points: int = 2001


@dataclass(frozen=True)
class RunConfig:
    mode: str
    setup: Optional[SetupBlock] = None
    initial: Optional[InitialBlock] = None
    solver: Optional[SolverBlock] = None
    barrier: Optional[BarrierBlock] = None
    output: OutputBlock = OutputBlock()
    ode: Optional[OdeBlock] = None
    sweep: Optional[SweepBlock] = None
    convergence: Optional[ConvergenceBlock] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def echo(self):
        return self.raw


_BLOCKS = {"setup": SetupBlock, "initial": InitialBlock, "solver": SolverBlock, "barrier": BarrierBlock,
           "output": OutputBlock, "ode": OdeBlock, "sweep": SweepBlock, "convergence": ConvergenceBlock}


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_env(data: dict, environ=None) -> dict:
    """Overlay ``VMP_<BLOCK>__<KEY>=value`` (or ``VMP_MODE``) onto ``data``; values use TOML syntax."""
    environ = os.environ if environ is None else environ
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        value = _parse_value(environ[name])
        if len(path) == 1:
            out[path[0]] = value
        elif len(path) == 2:
            block = out.setdefault(path[0], {})
            if not isinstance(block, dict):
                raise ConfigError(f"{name} targets a non-table entry")
            # keys are matched case-insensitively against the block schema
            cls = _BLOCKS.get(path[0])
            keys = {f.name.lower(): f.name for f in dataclasses.fields(cls)} if cls else {}
            block[keys.get(path[1], path[1])] = value
        else:
            raise ConfigError(f"{name}: nesting deeper than one table is not supported")
    return out


def _tupled(block):
    return {k: tuple(v) if isinstance(v, list) and k not in ("coeffs",) else v for k, v in block.items()}


def parse_config(data: dict, mode: Optional[str] = None) -> RunConfig:
    data = dict(data)
    file_mode = data.pop("mode", None)
    if mode is not None and file_mode is not None and file_mode != mode:
        raise ConfigError(f"config mode {file_mode!r} conflicts with command {mode!r}")
    mode = mode or file_mode
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    unknown = sorted(set(data) - set(_BLOCKS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    missing = [b for b in REQUIRED[mode] if b not in data]
    if missing:
        raise ConfigError(f"mode {mode!r} needs block(s): {', '.join(missing)}")
    blocks = {}
    for name, cls in _BLOCKS.items():
        if name in data:
            raw = data[name] if name == "setup" else _tupled(data[name])
            blocks[name] = _build(cls, name, raw)
    raw = {"mode": mode, **data}
    return RunConfig(mode=mode, raw=raw, **blocks)


def load_config(path, mode: Optional[str] = None, environ=None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(apply_env(data, environ), mode)
