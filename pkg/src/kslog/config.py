"""Flat ``key = value`` experiment configuration.

Grammar: one assignment per line, dotted keys, ``#`` starts a comment, blank
lines ignored.  Lists are comma separated.  Recognised sections are
``model``, ``grid``, ``init.u`` / ``init.v``, ``solver``, ``sweep``,
``output`` and ``weakform``; see README for the full key list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .grid import Grid
from .params import ModelParams
from .solver import SolverConfig
from .weakform import WeakFormConfig


class ConfigError(ValueError):
    pass


def _num(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.split(","))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class InitSpec:
    profile: str
    options: tuple = ()  # sorted (key, value) pairs

    def kwargs(self) -> dict:
        out = {}
        for key, value in self.options:
            if isinstance(value, str) and "," in value:
                value = _floats(value)
            out[key] = value
        return out


@dataclass(frozen=True)
class SweepSpec:
    axis: str = "k"
    values: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    grid: Grid
    init_u: InitSpec
    init_v: InitSpec
    solver: SolverConfig
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: str = "out"
    stride: int = 1
    snapshot_stride: int = 1
    weakform: WeakFormConfig = field(default_factory=WeakFormConfig)


def parse_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return from_mapping(raw, base_dir)


def _take(raw: dict, key: str, default=None, conv=str):
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return conv(raw.pop(key))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _init(raw: dict, which: str, base_dir: Path | None) -> InitSpec:
    prefix = f"init.{which}."
    profile = _take(raw, prefix + "profile")
    opts = {}
    for key in [k for k in raw if k.startswith(prefix)]:
        name = key[len(prefix):]
        value = raw.pop(key)
        if name == "path":
            if base_dir is not None and not Path(value).is_absolute():
                value = str(base_dir / value)
            opts[name] = value
        else:
            opts[name] = value if "," in value else _num(value)
    return InitSpec(profile, tuple(sorted(opts.items())))


def from_mapping(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    raw = dict(raw)
    try:
        model = ModelParams(
            chi=_take(raw, "model.chi", conv=float),
            a=_take(raw, "model.a", conv=float),
            b=_take(raw, "model.b", conv=float),
            n=_take(raw, "model.n", 1, int),
            k=_take(raw, "model.k", 8.0, float),
        )
        grid = Grid(_take(raw, "grid.extents", conv=_floats),
                    tuple(int(c) for c in _take(raw, "grid.cells", conv=_floats)))
        solver = SolverConfig(
            t_end=_take(raw, "solver.t_end", conv=float),
            dt_max=_take(raw, "solver.dt_max", conv=float),
            cfl_safety=_take(raw, "solver.cfl_safety", 0.9, float),
            scheme=_take(raw, "solver.scheme", "explicit"),
            flux=_take(raw, "solver.flux", "upwind"),
        )
        sweep = SweepSpec(_take(raw, "sweep.axis", "k"), _take(raw, "sweep.values", (), _floats))
        if sweep.axis not in ("k", "chi"):
            raise ConfigError(f"sweep.axis must be 'k' or 'chi', got {sweep.axis!r}")
        weak = WeakFormConfig(
            trace_exponent=_take(raw, "weakform.trace_exponent", "", float) or None,
            spatial_modes=_take(raw, "weakform.spatial_modes", 6, int),
            temporal_profiles=_take(raw, "weakform.temporal_profiles", 5, int),
            tolerance=_take(raw, "weakform.tolerance", 1e-2, float),
            n=model.n,
        )
        cfg = ExperimentConfig(
            model=model,
            grid=grid,
            init_u=_init(raw, "u", base_dir),
            init_v=_init(raw, "v", base_dir),
            solver=solver,
            sweep=sweep,
            output_dir=_take(raw, "output.dir", "out"),
            stride=_take(raw, "output.stride", 1, int),
            snapshot_stride=_take(raw, "output.snapshot_stride", 1, int),
            weakform=weak,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if raw:
        raise ConfigError(f"unknown keys: {', '.join(sorted(raw))}")
    if cfg.stride < 1 or cfg.snapshot_stride < 1:
        raise ConfigError("output strides must be >= 1")
    return cfg


def to_mapping(cfg: ExperimentConfig) -> dict[str, str]:
    m, g, s, w = cfg.model, cfg.grid, cfg.solver, cfg.weakform
    out = {
        "model.chi": m.chi, "model.a": m.a, "model.b": m.b, "model.n": m.n, "model.k": m.k,
        "grid.extents": g.extents, "grid.cells": g.cells,
        "solver.t_end": s.t_end, "solver.dt_max": s.dt_max, "solver.cfl_safety": s.cfl_safety,
        "solver.scheme": s.scheme, "solver.flux": s.flux,
        "sweep.axis": cfg.sweep.axis, "sweep.values": cfg.sweep.values,
        "output.dir": cfg.output_dir, "output.stride": cfg.stride,
        "output.snapshot_stride": cfg.snapshot_stride,
        "weakform.trace_exponent": w.trace_exponent, "weakform.spatial_modes": w.spatial_modes,
        "weakform.temporal_profiles": w.temporal_profiles, "weakform.tolerance": w.tolerance,
    }
    for which, spec in (("u", cfg.init_u), ("v", cfg.init_v)):
        out[f"init.{which}.profile"] = spec.profile
        for key, value in spec.options:
            out[f"init.{which}.{key}"] = value
    return {k: _fmt(v) for k, v in out.items()}


def serialize(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in to_mapping(cfg).items())


def load(path) -> ExperimentConfig:
    path = Path(path)
    return parse_text(path.read_text(), base_dir=path.parent)
