"""YAML experiment configuration for the batch commands."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from bnlsv.evolution import EvolveConfig
from bnlsv.grid import make_grid
from bnlsv.model import ModelParams, Potential

SECTIONS = ("model", "potential", "grid", "solver", "evolve", "virial", "scan",
            "initial", "output")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: ModelParams
    potential: Potential
    r_max: float = 30.0
    n: int = 4096
    tol: float = 1e-8
    max_iter: int = 500
    evolve: Optional[EvolveConfig] = None
    virial_R: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    amplitude: float = 1.0
    profile: Optional[Path] = None
    trajectory: Optional[Path] = None
    output: Path = Path("out")
    source: Optional[Path] = None

    def grid(self):
        return make_grid(self.model.N, self.r_max, self.n)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _number(sec: dict, key: str, default=None, kind=float):
    val = sec.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key} must be numeric, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigError(f"{key} must be an integer, got {val!r}")
    return kind(val)


def _existing(path_text, base: Path, what: str) -> Path:
    path = Path(path_text)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"{what} {path} does not exist")
    return path


def parse_config(raw: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        m = _section(raw, "model")
        if "N" not in m or "p" not in m:
            raise ConfigError("model section needs N and p")
        model = ModelParams(_number(m, "N", kind=int), _number(m, "p"),
                            _number(m, "lambda", -1, kind=int))
        model.require_intercritical()

        pot_sec = dict(_section(raw, "potential")) or {"kind": "zero"}
        if pot_sec.get("kind") == "tabulated":
            pot_sec["table"] = str(_existing(pot_sec.get("table", ""), base_dir,
                                             "potential table"))
        potential = Potential.from_config(pot_sec, base_dir)

        g = _section(raw, "grid")
        s = _section(raw, "solver")
        cfg = ExperimentConfig(
            model=model,
            potential=potential,
            r_max=_number(g, "r_max", 30.0),
            n=_number(g, "n", 4096, kind=int),
            tol=_number(s, "tol", 1e-8),
            max_iter=_number(s, "max_iter", 500, kind=int),
            source=None,
        )
        cfg.grid()  # validates r_max and n
        if cfg.tol <= 0 or cfg.max_iter < 1:
            raise ConfigError("solver tol must be > 0 and max_iter >= 1")

        e = _section(raw, "evolve")
        if e:
            cfg.evolve = EvolveConfig(
                dt=_number(e, "dt"),
                t_end=_number(e, "t_end"),
                record_every=_number(e, "record_every", 10, kind=int),
                dt_min=_number(e, "dt_min"),
                adaptive=bool(e.get("adaptive", True)),
                keep_snapshots=bool(e.get("keep_snapshots", False)),
            )

        v = _section(raw, "virial")
        R = v.get("R", [])
        R = R if isinstance(R, list) else [R]
        cfg.virial_R = [_number({"R": x}, "R") for x in R]
        if any(x <= 0 for x in cfg.virial_R):
            raise ConfigError("virial R must be positive")
        if "trajectory" in v:
            cfg.trajectory = _existing(v["trajectory"], base_dir, "trajectory file")

        sc = _section(raw, "scan")
        amps = sc.get("amplitudes", [])
        if not isinstance(amps, list):
            raise ConfigError("scan.amplitudes must be a list")
        cfg.amplitudes = [_number({"c": c}, "c") for c in amps]
        if "scan" in raw and not cfg.amplitudes:
            raise ConfigError("scan.amplitudes must be nonempty")

        ini = _section(raw, "initial")
        cfg.amplitude = _number(ini, "amplitude", 1.0)
        if "profile" in ini:
            cfg.profile = _existing(ini["profile"], base_dir, "initial profile")

        out = _section(raw, "output")
        cfg.output = Path(out.get("directory", "out"))
        if not cfg.output.is_absolute():
            cfg.output = base_dir / cfg.output
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML config; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_config(raw or {}, path.parent)
    cfg.source = path
    return cfg
