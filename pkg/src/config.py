"""Run configuration: flat ``key = value`` files validated into a RunConfig."""

import logging
import re
from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.errors import ConfigError, ConfigParseError, DomainError
from src.model import ModelParams, PhasePoint, classical_energy, on_shell_point

logger = logging.getLogger("config")

BUNDLED_DIR = Path(__file__).resolve().parent.parent / "configs"

MODEL_KEYS = ("omega", "omega0", "g1", "g2", "np")
LIST_KEYS = ("fit_window", "husimi_times")
POINT_PREFIX = "point."
SHELL_TOL = 1e-3

_NAME = re.compile(r"^[A-Za-z0-9_]+$")


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    params: ModelParams
    energy: float
    points: dict[str, PhasePoint] = Field(default_factory=dict)
    delta: float = 0.1
    t_start: float = Field(default=0.0, ge=0)
    t_end: float = Field(default=50.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    np_check: int | None = Field(default=None, ge=1)
    fit_window: tuple[float, float] | None = None
    fit_t_end: float | None = Field(default=None, gt=0)
    grid: int = Field(default=101, ge=2)
    husimi_times: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0)
    husimi_points: int = Field(default=201, ge=3)
    husimi_extent: float = Field(default=14.0, gt=0)
    section_t_end: float = Field(default=2000.0, gt=0)
    section_max_points: int = Field(default=2000, ge=1)
    section_scan: int = Field(default=0, ge=0)
    lyapunov_t_end: float = Field(default=2000.0, gt=0)
    renorm_interval: float = Field(default=1.0, gt=0)
    compare_lyapunov: bool = False
    """otoc also estimates the classical exponent and reports rate / (2 exponent)."""
    tol: float = Field(default=1e-11, gt=0)
    inversion_window: float = Field(default=2.0, gt=0)
    collapse_threshold: float | None = Field(default=None, gt=0)
    out_dir: Path = Path("results")
    workers: int | None = Field(default=None, ge=1)
    """Unset falls back to RABICHAOS_WORKERS."""

    @model_validator(mode="after")
    def _check_windows(self) -> Self:
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end {self.t_end} must exceed t_start {self.t_start}")
        if self.fit_window is not None and not self.fit_window[0] < self.fit_window[1]:
            raise ValueError(f"fit_window {self.fit_window} must be increasing")
        if self.renorm_interval > self.lyapunov_t_end:
            raise ValueError("renorm_interval must not exceed lyapunov_t_end")
        return self

    def with_overrides(
        self,
        grid: int | None = None,
        np: int | None = None,
        t_end: float | None = None,
        out_dir: Path | None = None,
        workers: int | None = None,
    ) -> "RunConfig":
        """Copy with command-line overrides applied and revalidated."""
        data = self.model_dump()
        if np is not None:
            data["params"]["cutoff"] = np
        for key, value in (
            ("grid", grid),
            ("t_end", t_end),
            ("out_dir", out_dir),
            ("workers", workers),
        ):
            if value is not None:
                data[key] = value
        return _validate(data)

    def provenance_lines(self) -> list[str]:
        """Every effective setting as a loadable ``key = value`` line.

        Worker count and output directory are left out; they never change results.
        """
        p = self.params
        lines = [
            f"{key} = {_format(value)}"
            for key, value in (
                ("omega", p.omega),
                ("omega0", p.omega0),
                ("g1", p.g1),
                ("g2", p.g2),
                ("np", p.cutoff),
                ("energy", self.energy),
            )
        ]
        for name in RunConfig.model_fields:
            if name in ("params", "energy", "points", "out_dir", "workers"):
                continue
            value = getattr(self, name)
            if value is not None:
                lines.append(f"{name} = {_format(value)}")
        for name, point in self.points.items():
            coords = (point.q1, point.p1, point.q2, point.p2)
            lines.append(f"{POINT_PREFIX}{name} = {_format(coords)}")
        return lines


def _format(value: Any) -> str:
    if isinstance(value, tuple | list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _validate(data: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"] if part != "params") or "config"
        if err["loc"][:1] == ("params",) and key == "cutoff":
            key = "np"
        raise ConfigError(f"{key}: {err['msg']}") from e


def parse_config_text(text: str) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line)`` pairs; comments and blank lines skipped."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if not key or not value:
            raise ConfigParseError(f"empty key or value in {raw.strip()!r}", lineno)
        if key in entries:
            raise ConfigParseError(
                f"duplicate key {key!r} (first set on line {entries[key][1]})", lineno
            )
        entries[key] = (value, lineno)
    return entries


def _split_list(value: str, lineno: int) -> list[float]:
    try:
        return [float(v) for v in value.split(",")]
    except ValueError as e:
        raise ConfigParseError(
            f"expected comma-separated numbers, got {value!r}", lineno
        ) from e


def _build_point(
    name: str, value: str, lineno: int, energy: float, params: ModelParams
) -> PhasePoint:
    if not _NAME.match(name):
        raise ConfigParseError(f"invalid point name {name!r}", lineno)
    coords = _split_list(value, lineno)
    try:
        if len(coords) == 3:
            return on_shell_point(*coords, energy, params)
        if len(coords) == 4:
            point = PhasePoint(q1=coords[0], p1=coords[1], q2=coords[2], p2=coords[3])
        else:
            raise ConfigParseError(
                f"point {name} needs 3 or 4 coordinates, got {len(coords)}", lineno
            )
    except (DomainError, ValidationError) as e:
        message = e.errors()[0]["msg"] if isinstance(e, ValidationError) else str(e)
        raise ConfigError(f"point {name}: {message}") from e
    shell = classical_energy(point, params)
    if abs(shell - energy) > SHELL_TOL * max(1.0, abs(energy)):
        logger.warning(
            {
                "function": "load_config",
                "point": name,
                "energy": shell,
                "configured_energy": energy,
                "message": "named point is off the configured energy shell",
            }
        )
    return point


def config_from_text(text: str) -> RunConfig:
    entries = parse_config_text(text)
    model_data: dict[str, str] = {}
    points_raw: list[tuple[str, str, int]] = []
    data: dict[str, Any] = {}
    for key, (value, lineno) in entries.items():
        if key in MODEL_KEYS:
            model_data[key] = value
        elif key.startswith(POINT_PREFIX):
            points_raw.append((key.removeprefix(POINT_PREFIX), value, lineno))
        elif key in LIST_KEYS:
            data[key] = tuple(_split_list(value, lineno))
        else:
            data[key] = value

    try:
        params = ModelParams.model_validate(model_data)
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else "model"
        raise ConfigError(f"{key}: {err['msg']}") from e
    data["params"] = params

    if points_raw and "energy" not in data:
        raise ConfigError("energy: required when named points are configured")
    try:
        energy = float(data.get("energy", "nan"))
    except ValueError as e:
        raise ConfigError(f"energy: not a number: {data['energy']!r}") from e
    data["points"] = {
        name: _build_point(name, value, lineno, energy, params)
        for name, value, lineno in points_raw
    }
    return _validate(data)


def resolve_config_path(path: str | Path) -> Path:
    """A path as given, else the bundled config of the same file name."""
    path = Path(path)
    if path.is_file():
        return path
    bundled = BUNDLED_DIR / path.name
    if bundled.is_file():
        return bundled
    raise ConfigError(f"config file not found: {path}")


def load_config(path: str | Path) -> RunConfig:
    resolved = resolve_config_path(path)
    config = config_from_text(resolved.read_text(encoding="utf-8"))
    logger.info(
        {
            "function": "load_config",
            "path": str(resolved),
            "points": list(config.points),
            "np": config.params.cutoff,
        }
    )
    return config
