"""Run configuration: a YAML document validated into :class:`RunConfig`.

Unknown keys are rejected everywhere.  Errors carry a dotted field path.
"""

from __future__ import annotations

import os
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator
from pydantic import ValidationError as PydanticError

from .errors import ConfigError, FkmatError
from .fields import make_gauge, make_potential
from .semigroup import make_vector_field

SCHEMA_VERSION = "fkmat.result/1"
COMMANDS = ("semigroup", "kernel", "heatmap", "trace", "kato", "validate", "selftest")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PresetSpec(_Strict):
    preset: str
    params: dict[str, Any] = Field(default_factory=dict)


class AxisRange(_Strict):
    lo: float
    hi: float
    count: PositiveInt

    @model_validator(mode="after")
    def _ordered(self):
        if not self.hi > self.lo:
            raise ValueError("hi must exceed lo")
        return self

    def points(self):
        return np.linspace(self.lo, self.hi, self.count)


class SemigroupBlock(_Strict):
    x: List[float]
    f: PresetSpec


class KernelBlock(_Strict):
    x: List[float]
    y: List[float]
    pairing: bool = True


class HeatmapBlock(_Strict):
    """Either axis ranges (one space dimension) or explicit point lists."""

    x_range: Optional[AxisRange] = None
    y_range: Optional[AxisRange] = None
    x_points: Optional[List[List[float]]] = None
    y_points: Optional[List[List[float]]] = None
    output: Optional[str] = None

    @model_validator(mode="after")
    def _one_form(self):
        for axis in ("x", "y"):
            rng, pts = getattr(self, f"{axis}_range"), getattr(self, f"{axis}_points")
            if (rng is None) == (pts is None):
                raise ValueError(f"give exactly one of {axis}_range and {axis}_points")
        return self


class BoxBlock(_Strict):
    box: List[Tuple[float, float]]
    spacing: PositiveFloat


class KatoBlock(_Strict):
    probes: Optional[List[List[float]]] = None
    box: Optional[List[Tuple[float, float]]] = None
    count: PositiveInt = 5


class ValidateBlock(_Strict):
    f: PresetSpec
    probes: List[List[float]]
    kernel_pairs: List[Tuple[List[float], List[float]]]
    box: List[Tuple[float, float]]
    spacing: PositiveFloat
    semigroup_tolerance: PositiveFloat = 0.02
    kernel_tolerance: PositiveFloat = 0.03


class RunConfig(_Strict):
    space_dim: PositiveInt
    fiber_dim: PositiveInt
    gauge: PresetSpec
    potential: PresetSpec
    t: PositiveFloat
    steps: PositiveInt
    n_paths: int = Field(ge=2)
    seed: int = Field(ge=0)
    scheme: Literal["exp_midpoint", "product_integral", "interaction_picture"] = "exp_midpoint"
    workers: Optional[PositiveInt] = None
    output: Optional[str] = None
    semigroup: Optional[SemigroupBlock] = None
    kernel: Optional[KernelBlock] = None
    heatmap: Optional[HeatmapBlock] = None
    trace: Optional[BoxBlock] = None
    kato: Optional[KatoBlock] = None
    validate_: Optional[ValidateBlock] = Field(default=None, alias="validate")

    @model_validator(mode="after")
    def _dimensions(self):
        n = self.space_dim
        checks = []
        if self.semigroup:
            checks.append(("semigroup.x", self.semigroup.x))
        if self.kernel:
            checks += [("kernel.x", self.kernel.x), ("kernel.y", self.kernel.y)]
        if self.heatmap:
            for key in ("x_points", "y_points"):
                for i, p in enumerate(getattr(self.heatmap, key) or []):
                    checks.append((f"heatmap.{key}.{i}", p))
            if n != 1 and (self.heatmap.x_range or self.heatmap.y_range):
                raise ValueError("heatmap ranges need space_dim 1; use x_points/y_points")
        for name in ("trace", "kato"):
            block = getattr(self, name)
            if block is not None and block.box is not None and len(block.box) != n:
                raise ValueError(f"{name}.box needs {n} axis ranges")
        if self.kato and self.kato.probes:
            checks += [(f"kato.probes.{i}", p) for i, p in enumerate(self.kato.probes)]
        if self.validate_:
            checks += [(f"validate.probes.{i}", p) for i, p in enumerate(self.validate_.probes)]
            for i, (x, y) in enumerate(self.validate_.kernel_pairs):
                checks += [(f"validate.kernel_pairs.{i}.x", x), (f"validate.kernel_pairs.{i}.y", y)]
            if len(self.validate_.box) != n:
                raise ValueError(f"validate.box needs {n} axis ranges")
        for path, point in checks:
            if len(point) != n:
                raise ValueError(f"{path}: expected {n} coordinates, got {len(point)}")
        return self


def _format_pydantic(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data):
    """Validate a mapping into a :class:`RunConfig`; raises :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>: configuration must be a mapping")
    try:
        cfg = RunConfig.model_validate(data)
    except PydanticError as exc:
        raise ConfigError(_format_pydantic(exc)) from None
    build_fields(cfg)  # preset errors surface as config errors
    return cfg


def load_config(path, overrides=None):
    """Read a YAML file, apply top-level scalar overrides, validate."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: invalid YAML: {exc}") from None
    data = {} if data is None else data
    if isinstance(data, dict):
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
    return parse_config(data)


def _build(kind, builder, spec, n, d):
    try:
        return builder(spec.preset, n, d, **dict(spec.params))
    except ConfigError:
        raise
    except (FkmatError, KeyError, TypeError, ValueError) as exc:
        detail = f"missing parameter {exc}" if isinstance(exc, KeyError) else str(exc)
        raise ConfigError(f"{kind}: {detail}") from None


def build_fields(cfg):
    """Gauge field and potential described by ``cfg``."""
    n, d = cfg.space_dim, cfg.fiber_dim
    gauge = _build("gauge", make_gauge, cfg.gauge, n, d)
    pot = _build("potential", make_potential, cfg.potential, n, d)
    return gauge, pot


def build_vector_field(cfg, spec, where):
    return _build(where, make_vector_field, spec, cfg.space_dim, cfg.fiber_dim)


def require_block(cfg, name):
    block = getattr(cfg, "validate_" if name == "validate" else name)
    if block is None:
        raise ConfigError(f"{name}: block is required for the {name} command")
    return block


def output_path(cfg, command, suffix=".json", explicit=None):
    """Resolve the result path; relative paths land in ``$FKMAT_OUTPUT_DIR`` when set."""
    name = explicit or cfg_output(cfg) or f"{command}{suffix}"
    base = os.environ.get("FKMAT_OUTPUT_DIR")
    if base and not os.path.isabs(name):
        name = os.path.join(base, name)
    return name


def cfg_output(cfg):
    return None if cfg is None else cfg.output


def canonical(cfg):
    """The validated configuration as plain data, for echoing into result records."""
    return cfg.model_dump(mode="json", by_alias=True, exclude_none=True, exclude={"workers", "output"})

