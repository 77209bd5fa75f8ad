"""Run configuration: a JSON document with ``medium``, ``numerics`` and ``task`` sections.

Unknown keys are rejected everywhere.  Loading reports every problem it can
find (type errors, then medium invariants, then per-command requirements)
instead of stopping at the first one.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .medium import MediumSpec, validate_medium


class ConfigError(Exception):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MediumConfig(_Strict):
    eps0: float = 1.0
    mu0: float = 1.0
    R: float = 1.0
    L: int = 1
    r_edges: list[float] = Field(default_factory=list)
    # z breakpoints in units of pi, from -1 to 1
    z_edges_pi: list[float] = Field(default_factory=lambda: [-1.0, 1.0])
    eps: list[list[float]] = Field(default_factory=list)
    mu: list[list[float]] | None = None

    def arrays(self):
        nz = max(len(self.z_edges_pi) - 1, 0)
        eps = np.array(self.eps, dtype=float).reshape(len(self.eps), -1) if self.eps \
            else np.zeros((0, nz))
        if self.mu is None:
            mu = np.full(eps.shape, self.mu0)
        else:
            mu = np.array(self.mu, dtype=float).reshape(len(self.mu), -1) if self.mu \
                else np.zeros((0, nz))
        z = tuple(float(v) * math.pi for v in self.z_edges_pi)
        return tuple(self.r_edges), z, eps, mu

    def errors(self) -> list[str]:
        ragged = [f"medium.{name}: rows must all have the same length"
                  for name in ("eps", "mu")
                  if getattr(self, name) and len({len(row) for row in getattr(self, name)}) > 1]
        if ragged:
            return ragged
        r, z, eps, mu = self.arrays()
        return [f"medium: {e}" for e in validate_medium(r, z, eps, mu, self.eps0, self.mu0,
                                                        self.R, self.L)]

    def to_spec(self) -> MediumSpec:
        r, z, eps, mu = self.arrays()
        return MediumSpec(r, z, eps, mu, self.eps0, self.mu0, self.R, self.L)


class NumericsConfig(_Strict):
    n_radial: int = Field(120, ge=4)
    grading: Literal["uniform", "graded-to-interfaces"] = "uniform"
    m_max: int | None = Field(None, ge=0)
    ell_max: int | None = Field(None, ge=0)
    root_tol: float = Field(1e-10, gt=0)
    verify_tol: float = Field(1e-8, gt=0)
    cond_limit: float = Field(1e12, gt=1)
    seed: int = 0


class IncidentConfig(_Strict):
    m: int = 0
    theta0: float = 0.0
    amplitude: tuple[float, float] = (1.0, 0.0)


class TaskConfig(_Strict):
    kappa: float | None = None
    omega: float | None = Field(None, gt=0)
    kappas: list[float] | None = None
    ell: int = 0
    ell_values: list[int] = Field(default_factory=lambda: [0])
    branches: list[int] = Field(default_factory=lambda: [1])
    omega_bracket: tuple[float, float] | None = None
    incident: IncidentConfig | None = None
    slice_theta: float = 0.0
    slice_nz: int = Field(33, ge=2)
    M: int = Field(0, ge=0)
    N: int = Field(0, ge=0)
    certificate: Literal["radius", "monotone", "both"] = "both"
    search_kappas: list[float] | None = None
    omega_max: float | None = Field(None, gt=0)


class RunConfig(_Strict):
    medium: MediumConfig = Field(default_factory=MediumConfig)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    task: TaskConfig = Field(default_factory=TaskConfig)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


REQUIRED = {
    "classify": ("kappa", "omega"),
    "scatter": ("kappa", "omega", "incident"),
    "dispersion": ("kappas",),
    "embedded": ("kappas",),
    "certify": ("kappa", "omega"),
}


def _kappa_errors(name, values) -> list[str]:
    return [f"task.{name}: {k} outside the Brillouin zone [-1/2, 1/2)"
            for k in values if not -0.5 <= k < 0.5]


def _task_errors(t: TaskConfig, command: str | None) -> list[str]:
    errors = []
    if command is not None:
        for name in REQUIRED.get(command, ()):
            if getattr(t, name) is None:
                errors.append(f"task.{name}: required by the {command!r} command")
    if t.kappa is not None:
        errors += _kappa_errors("kappa", [t.kappa])
    for name in ("kappas", "search_kappas"):
        if getattr(t, name) is not None:
            errors += _kappa_errors(name, getattr(t, name))
    if any(b < 1 for b in t.branches):
        errors.append("task.branches: branch indices start at 1")
    if t.omega_bracket is not None and not 0 < t.omega_bracket[0] < t.omega_bracket[1]:
        errors.append("task.omega_bracket: need 0 < lo < hi")
    return errors


def _partial(model, section):
    """Validate the known, well-typed keys of a section that failed as a whole."""
    if not isinstance(section, dict):
        return None
    known = {k: v for k, v in section.items() if k in model.model_fields}
    try:
        return model.model_validate(known)
    except ValidationError as exc:
        bad = {e["loc"][0] for e in exc.errors() if e["loc"]}
    try:
        return model.model_validate({k: v for k, v in known.items() if k not in bad})
    except (ValidationError, ValueError):
        return None


def validate_config(data, command: str | None = None) -> RunConfig:
    """Validate a parsed JSON document, raising ConfigError with all problems."""
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        errors = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
        # sections that still parse can be checked further
        if isinstance(data, dict):
            med = _partial(MediumConfig, data.get("medium", {}))
            if med is not None:
                errors += med.errors()
            task = _partial(TaskConfig, data.get("task", {}))
            if task is not None:
                errors += [e for e in _task_errors(task, command)
                           if e.split(":")[0] not in {x.split(":")[0] for x in errors}]
        raise ConfigError(errors) from None
    errors = cfg.medium.errors() + _task_errors(cfg.task, command)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return validate_config(data, command)
