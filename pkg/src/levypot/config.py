"""Plain-text experiment configuration: key=value lines with optional
[model] / [run] section headers; # starts a comment.  Files are the
record of truth; CLI flags only override individual keys."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .model import LevyModel, make_model

EXPERIMENTS = (
    "audit", "heatkernel", "potential", "exit", "green", "poisson",
    "verify-gradient", "verify-harnack", "verify-green-grad",
    "verify-split", "verify-appendix",
)

MODEL_KEYS = {"kind", "dim", "alpha", "tempering", "quad_rel_tol",
              "quad_abs_tol", "grid_min", "grid_max"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    model: LevyModel
    seed: int = 20240801
    n_paths: int = 20000
    output_dir: str = "out"
    dt0: float = 0.02
    plot: bool = True
    overrides: dict = field(default_factory=dict)
    raw_lines: tuple = ()

    def resolved_lines(self) -> list[str]:
        lines = [f"experiment={self.experiment}"]
        lines += self.model.config_lines()
        lines += [f"seed={self.seed}", f"n_paths={self.n_paths}",
                  f"dt0={self.dt0!r}", f"plot={int(self.plot)}"]
        for k in sorted(self.overrides):
            lines.append(f"{k}={self.overrides[k]}")
        return lines


def _parse_scalar(key: str, value: str, lineno: int):
    try:
        if key in ("dim", "seed", "n_paths", "plot"):
            return int(value)
        if key in ("alpha", "tempering", "quad_rel_tol", "quad_abs_tol",
                   "grid_min", "grid_max", "dt0") or key.startswith("tol_"):
            return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: invalid value for {key!r}: {value!r}")
    return value


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("model", "run"):
                raise ConfigError(f"{source}: line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = (_parse_scalar(key, value, lineno), lineno)

    def take(key, default=None):
        if key in fields:
            return fields.pop(key)[0]
        return default

    experiment = take("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"{source}: experiment must be one of {', '.join(EXPERIMENTS)}; "
            f"got {experiment!r}")

    kind = take("kind", "IsotropicStable")
    dim = take("dim", 1)
    alpha = take("alpha", 1.5)
    tempering = take("tempering", 0.0)
    tols = {}
    for k in ("quad_rel_tol", "quad_abs_tol", "grid_min", "grid_max"):
        v = take(k)
        if v is not None:
            tols[k] = v
    try:
        model = make_model(kind, dim, alpha, tempering, **tols)
    except ValueError as exc:
        raise ConfigError(f"{source}: invalid model: {exc}") from exc

    cfg = ExperimentConfig(
        experiment=experiment,
        model=model,
        seed=take("seed", 20240801),
        n_paths=take("n_paths", 20000),
        output_dir=str(take("output_dir", "out")),
        dt0=take("dt0", 0.02),
        plot=bool(take("plot", 1)),
        overrides={k: v for k, (v, _) in fields.items()},
        raw_lines=tuple(text.splitlines()),
    )
    if cfg.n_paths < 1:
        raise ConfigError(f"{source}: n_paths must be >= 1")
    return cfg


def load_config(path, cli_overrides: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config_text(text, source=str(path))
    for key, value in (cli_overrides or {}).items():
        if value is None:
            continue
        setattr(cfg, key, value)
    return cfg
