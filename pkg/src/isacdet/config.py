"""JSON run configuration (schema v1) and its mapping onto a Scenario."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .constellation import ALL_KINDS, ConstellationKind
from .harness import Scenario, TargetSpec
from .rdmap import CfarConfig
from .waveform import FrameConfig


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` names the offending field or line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FrameSection(_Strict):
    carrier_hz: float = Field(gt=0)
    subcarriers: int = Field(ge=1)
    symbols: int = Field(ge=1)
    t_cp_s: float = Field(gt=0)
    bandwidth_hz: Optional[float] = Field(default=None, gt=0)
    subcarrier_spacing_hz: Optional[float] = Field(default=None, gt=0)
    t_sym_s: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _spacing(self):
        b, df = self.bandwidth_hz, self.subcarrier_spacing_hz
        if b is None and df is None:
            raise ValueError("one of bandwidth_hz or subcarrier_spacing_hz is required")
        if b is not None and df is not None and not math.isclose(b, df * self.subcarriers, rel_tol=1e-9):
            raise ValueError("bandwidth_hz must equal subcarriers * subcarrier_spacing_hz")
        return self

    def to_frame(self) -> FrameConfig:
        df = self.subcarrier_spacing_hz or self.bandwidth_hz / self.subcarriers
        return FrameConfig(self.carrier_hz, df, self.subcarriers, self.symbols, self.t_cp_s, self.t_sym_s)


class TargetSection(_Strict):
    range_m: float = Field(ge=0)
    snr_db: float
    velocity_mps: float = 0.0
    on_grid: bool = True


class CfarSection(_Strict):
    train: int = Field(default=16, ge=1)
    guard: int = Field(default=4, ge=0)
    pfa: Optional[float] = Field(default=None, gt=0, lt=1)


class DetectorSection(_Strict):
    max_iter: int = Field(default=10, ge=1)
    exclusion_radius: int = Field(default=1, ge=0)


class RunConfig(_Strict):
    schema_version: Literal[1]
    frame: FrameSection
    targets: list[TargetSection] = Field(min_length=1)
    pfa: float = Field(gt=0, lt=1)
    seed: int = Field(ge=0)
    trials: int = Field(default=1000, ge=1)
    calibration_trials: Optional[int] = Field(default=None, ge=1)
    constellations: list[str] = Field(default_factory=lambda: [k.value for k in ALL_KINDS], min_length=1)
    oversample: int = Field(default=1, ge=1)
    target_of_interest: int = Field(default=2, ge=1, description="1-based target index")
    cfar: CfarSection = Field(default_factory=CfarSection)
    detector: DetectorSection = Field(default_factory=DetectorSection)

    @field_validator("constellations")
    @classmethod
    def _kinds(cls, v: list[str]) -> list[str]:
        return [ConstellationKind.parse(k).value for k in v]

    @model_validator(mode="after")
    def _toi(self):
        if self.target_of_interest > len(self.targets):
            raise ValueError(f"target_of_interest={self.target_of_interest} but only "
                             f"{len(self.targets)} targets are defined")
        return self

    @property
    def kinds(self) -> list[ConstellationKind]:
        return [ConstellationKind(k) for k in self.constellations]

    def scenario(self, constellation: ConstellationKind | str | None = None) -> Scenario:
        kind = ConstellationKind.parse(constellation or self.constellations[0])
        try:
            frame = self.frame.to_frame()
            return Scenario(
                frame=frame,
                constellation=kind,
                targets=tuple(TargetSpec(t.range_m, t.snr_db, t.velocity_mps, t.on_grid)
                              for t in self.targets),
                pfa=self.pfa,
                oversample=self.oversample,
                cfar=CfarConfig(self.cfar.pfa or self.pfa, self.cfar.train, self.cfar.guard),
                seed=self.seed,
                trials=self.trials,
                calibration_trials=self.calibration_trials,
                target_of_interest=self.target_of_interest - 1,
                max_iter=self.detector.max_iter,
                exclusion_radius=self.detector.exclusion_radius,
            )
        except ValueError as exc:
            raise ConfigError(f"frame: {exc}") from exc

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        """Git blob hash of the canonical resolved configuration."""
        body = self.canonical_json().encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _set_path(doc: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if isinstance(node, list):
            node = node[int(k)]
        else:
            node = node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path: str | Path, overrides: list[str] = ()) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    for item in overrides:
        key, value = parse_override(item)
        try:
            _set_path(doc, key, value)
        except (IndexError, ValueError, TypeError) as exc:
            raise ConfigError(f"override {key!r}: {exc}") from exc
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            msgs.append(f"field '{loc}': {err['msg']}")
        raise ConfigError(f"{path}: " + "; ".join(msgs)) from None
    cfg.scenario()  # surface frame-level inconsistencies as config errors
    return cfg
