"""Flat key=value run configuration.

The format is intentionally trivial and human-diffable: one ``key =
value`` pair per line, ``#`` comments, no sections.  Keys carry their
unit in the name (``_inv_m`` for inverse electron masses, ``_m`` for
masses), values are numbers, booleans, or bare strings.  Unknown keys
are hard errors; an empty file yields the all-defaults desk-scale
configuration.  ``parse_config(serialize_config(cfg))`` reproduces
``cfg`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .dhw import StepperConfig
from .fields import FieldParams
from .grid import GridSpec
from .observables import CoarseGrainSpec
from .trajectory import ForceToggles

__all__ = ["RunConfig", "TrajConfig", "QktConfig", "DhwWindow",
           "ConfigError", "parse_config", "serialize_config"]

_MODES = ("dhw", "traj", "qkt", "compare")


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration text."""


@dataclass(frozen=True)
class DhwWindow:
    """Time window and snapshot marks for the spectral solver."""

    t_start: float = -80.0
    t_end: float = 80.0
    snapshot_times: tuple = ()


@dataclass(frozen=True)
class TrajConfig:
    """Monte Carlo settings; window bounds left unset (auto) derive from the field."""

    n_attempts: int = 1_000_000
    seed: int = 1
    t_end: float = 50.0
    spin: float = -0.5
    workers: int = 1
    ode_tol: float = 1e-10
    t_min: float | None = None
    t_max: float | None = None
    z_min: float | None = None
    z_max: float | None = None
    pz_min: float = -1.5
    pz_max: float = 1.5
    bandwidth_px: float | None = None   # None -> Silverman's rule
    bandwidth_pz: float | None = None
    toggles: ForceToggles = ForceToggles()


@dataclass(frozen=True)
class QktConfig:
    t_start: float = -50.0
    t_end: float = 50.0
    n_px: int = 256
    px_max: float = 2.0
    p_z: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    mode: str = "dhw"
    output_dir: str = "out"
    field: FieldParams = FieldParams(epsilon=0.5, tau=20.0, lam=10.0,
                                     omega=0.1, phi=0.0)
    grid: GridSpec = GridSpec(n_z=64, n_qx=64, n_pz=64)
    stepper: StepperConfig = StepperConfig()
    window: DhwWindow = DhwWindow()
    coarse: CoarseGrainSpec = CoarseGrainSpec()
    traj: TrajConfig = TrajConfig()
    qkt: QktConfig = QktConfig()

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")


# key -> (section object name, attribute, type tag)
_SCHEMA = {
    "mode": ("", "mode", "str"),
    "output_dir": ("", "output_dir", "str"),
    "field.epsilon": ("field", "epsilon", "float"),
    "field.tau_inv_m": ("field", "tau", "float"),
    "field.lambda_inv_m": ("field", "lam", "float"),
    "field.omega_m": ("field", "omega", "float"),
    "field.phi_rad": ("field", "phi", "float"),
    "grid.n_z": ("grid", "n_z", "int"),
    "grid.n_qx": ("grid", "n_qx", "int"),
    "grid.n_pz": ("grid", "n_pz", "int"),
    "grid.l_z_inv_m": ("grid", "L_z", "float"),
    "grid.l_q_m": ("grid", "L_q", "float"),
    "grid.l_pz_m": ("grid", "L_pz", "float"),
    "grid.alpha_z": ("grid", "alpha_z", "float"),
    "grid.alpha_q": ("grid", "alpha_q", "float"),
    "grid.dealias_fraction": ("grid", "dealias_fraction", "float"),
    "stepper.rel_tol": ("stepper", "rel_tol", "float"),
    "stepper.abs_tol": ("stepper", "abs_tol", "float"),
    "stepper.dt_init_inv_m": ("stepper", "dt_init", "float"),
    "stepper.dt_min_inv_m": ("stepper", "dt_min", "float"),
    "stepper.dt_max_inv_m": ("stepper", "dt_max", "float"),
    "stepper.taylor_order": ("stepper", "taylor_order", "int"),
    "dhw.t_start_inv_m": ("window", "t_start", "float"),
    "dhw.t_end_inv_m": ("window", "t_end", "float"),
    "dhw.snapshot_times_inv_m": ("window", "snapshot_times", "floats"),
    "coarse.sigma_cells": ("coarse", "sigma", "float"),
    "coarse.half_width_cells": ("coarse", "half_width", "int"),
    "traj.n_attempts": ("traj", "n_attempts", "int"),
    "traj.seed": ("traj", "seed", "int"),
    "traj.t_end_inv_m": ("traj", "t_end", "float"),
    "traj.spin": ("traj", "spin", "float"),
    "traj.workers": ("traj", "workers", "int"),
    "traj.ode_tol": ("traj", "ode_tol", "float"),
    "traj.t_min_inv_m": ("traj", "t_min", "optfloat"),
    "traj.t_max_inv_m": ("traj", "t_max", "optfloat"),
    "traj.z_min_inv_m": ("traj", "z_min", "optfloat"),
    "traj.z_max_inv_m": ("traj", "z_max", "optfloat"),
    "traj.pz_min_m": ("traj", "pz_min", "float"),
    "traj.pz_max_m": ("traj", "pz_max", "float"),
    "traj.bandwidth_px_m": ("traj", "bandwidth_px", "optfloat"),
    "traj.bandwidth_pz_m": ("traj", "bandwidth_pz", "optfloat"),
    "traj.toggle_e": ("toggles", "enable_E", "bool"),
    "traj.toggle_b": ("toggles", "enable_B", "bool"),
    "traj.toggle_s": ("toggles", "enable_S", "bool"),
    "traj.toggle_s_dzb": ("toggles", "enable_S_dzB", "bool"),
    "traj.toggle_s_dze": ("toggles", "enable_S_dzE", "bool"),
    "qkt.t_start_inv_m": ("qkt", "t_start", "float"),
    "qkt.t_end_inv_m": ("qkt", "t_end", "float"),
    "qkt.n_px": ("qkt", "n_px", "int"),
    "qkt.px_max_m": ("qkt", "px_max", "float"),
    "qkt.pz_m": ("qkt", "p_z", "float"),
}


def _parse_value(raw, tag, key, lineno, col):
    try:
        if tag == "float":
            return float(raw)
        if tag == "optfloat":
            return None if raw.lower() == "auto" else float(raw)
        if tag == "int":
            v = int(raw)
            return v
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if tag == "floats":
            raw = raw.strip()
            if not raw:
                return ()
            return tuple(float(x) for x in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(
            f"line {lineno}, column {col}: cannot parse {raw!r} as {tag} "
            f"for key {key!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; unknown keys and bad values are errors."""
    sections = {"": {}, "field": {}, "grid": {}, "stepper": {},
                "window": {}, "coarse": {}, "traj": {}, "toggles": {},
                "qkt": {}}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"line {lineno}, column 1: expected 'key = value', got "
                f"{stripped.strip()!r}")
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip().lower()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}, column 1: unknown key {key!r}")
        section, attr, tag = _SCHEMA[key]
        col = stripped.index("=") + 2
        sections[section][attr] = _parse_value(value_part.strip(), tag,
                                               key, lineno, col)

    defaults = RunConfig()

    def build(default_obj, name, **extra):
        try:
            return replace(default_obj, **sections[name], **extra)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid {name or 'top-level'} settings: "
                              f"{exc}") from None

    kwargs = {}
    kwargs.update(sections[""])
    kwargs["field"] = build(defaults.field, "field")
    kwargs["grid"] = build(defaults.grid, "grid")
    kwargs["stepper"] = build(defaults.stepper, "stepper")
    kwargs["window"] = build(defaults.window, "window")
    kwargs["coarse"] = build(defaults.coarse, "coarse")
    toggles = build(defaults.traj.toggles, "toggles")
    kwargs["traj"] = build(defaults.traj, "traj", toggles=toggles)
    kwargs["qkt"] = build(defaults.qkt, "qkt")
    try:
        return RunConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _format_value(v, tag):
    if tag == "bool":
        return "true" if v else "false"
    if tag == "floats":
        return ",".join(repr(float(x)) for x in v)
    if tag == "optfloat":
        return "auto" if v is None else repr(float(v))
    if tag == "float":
        return repr(float(v))
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Emit the full configuration, one line per key, round-trip exact."""
    objs = {"": cfg, "field": cfg.field, "grid": cfg.grid,
            "stepper": cfg.stepper, "window": cfg.window,
            "coarse": cfg.coarse, "traj": cfg.traj,
            "toggles": cfg.traj.toggles, "qkt": cfg.qkt}
    lines = []
    for key, (section, attr, tag) in _SCHEMA.items():
        lines.append(f"{key} = {_format_value(getattr(objs[section], attr), tag)}")
    return "\n".join(lines) + "\n"
