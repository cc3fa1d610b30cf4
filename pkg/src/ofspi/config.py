"""Experiment configuration: YAML on disk, dataclasses in memory."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ofspi.excitation import (
    ExcitationSpec,
    default_excitation,
    default_k0,
    required_rank,
)
from ofspi.learner import SpiConfig, default_beta_sequence
from ofspi.plant import PRESETS, LtiSystem, preset
from ofspi.reconstruction import companion_from_roots, default_roots


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass
class PlantConfig:
    preset: str | None = "power_system"
    A: list | None = None
    B: list | None = None
    C: list | None = None
    x0: list | None = None


@dataclass
class ExcitationConfig:
    """Either explicit sinusoid terms (``amplitudes``/``frequencies``/``phases``
    as per-channel rows) or the generated default controlled by ``n_terms``,
    ``amplitude`` and ``seed``."""

    n_terms: int = 10
    amplitude: float = 1.0
    seed: int = 0
    amplitudes: list | None = None
    frequencies: list | None = None
    phases: list | None = None
    bias: list | None = None


@dataclass
class ExperimentConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    roots: list | None = None
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    k0: int | None = None
    samples: int = 100
    Q: list | None = None
    R: list | None = None
    delta: float = 0.7
    beta_sequence: list = field(default_factory=lambda: list(default_beta_sequence()))
    safety: float = 0.9
    max_iter: int = 100
    verify: bool = True
    horizon: int = 600

    # -- construction -------------------------------------------------------

    def system(self) -> LtiSystem:
        pc = self.plant
        if pc.A is not None:
            return LtiSystem(pc.A, pc.B, pc.C)
        return preset(pc.preset)

    def filter_roots(self, n: int) -> list:
        return list(self.roots) if self.roots is not None else default_roots(n)

    def M_r(self, n: int) -> np.ndarray:
        return companion_from_roots(self.filter_roots(n))

    def start(self, n: int) -> int:
        return self.k0 if self.k0 is not None else default_k0(self.M_r(n))

    def excitation_spec(self, m: int, n_r: int) -> ExcitationSpec:
        ec = self.excitation
        bias = np.zeros(m) if ec.bias is None else np.asarray(ec.bias, dtype=float)
        if ec.frequencies is not None:
            return ExcitationSpec(np.asarray(ec.amplitudes, float), np.asarray(ec.frequencies, float),
                                  np.asarray(ec.phases, float), bias)
        spec = default_excitation(m, required_rank(n_r, m), ec.n_terms, ec.seed)
        return ExcitationSpec(ec.amplitude * spec.amplitudes, spec.frequencies, spec.phases, bias)

    def spi_config(self, m: int, p: int) -> SpiConfig:
        Q = np.eye(p) if self.Q is None else self.Q
        R = np.eye(m) if self.R is None else self.R
        return SpiConfig(Q, R, self.delta, tuple(self.beta_sequence), self.safety, self.max_iter)

    # -- validation ---------------------------------------------------------

    def problems(self) -> list[str]:
        out: list[str] = []
        sys = None
        pc = self.plant
        if pc.A is not None or pc.B is not None or pc.C is not None:
            if pc.A is None or pc.B is None or pc.C is None:
                out.append("plant: explicit systems need all of A, B and C")
            else:
                try:
                    sys = LtiSystem(pc.A, pc.B, pc.C)
                except ValueError as exc:
                    out.append(f"plant: {exc}")
        elif pc.preset not in PRESETS:
            out.append(f"plant: unknown preset {pc.preset!r}; known: {sorted(PRESETS)}")
        else:
            sys = preset(pc.preset)
        if sys is None:
            out.extend(self._scalar_problems())
            return out
        n, m, p = sys.n, sys.m, sys.p
        if pc.x0 is not None and np.asarray(pc.x0).size != n:
            out.append(f"plant: x0 has {np.asarray(pc.x0).size} entries, expected {n}")
        roots = self.filter_roots(n)
        if len(roots) != n:
            out.append(f"filters: need {n} roots, got {len(roots)}")
        else:
            try:
                companion_from_roots(roots)
            except ValueError as exc:
                out.append(f"filters: {exc}")
        ec = self.excitation
        n_r = n * (m + p)
        if ec.frequencies is not None:
            try:
                spec = self.excitation_spec(m, n_r)
                if spec.m != m:
                    out.append(f"excitation: {spec.m} channels, plant has {m} inputs")
                out.extend(f"excitation: {msg}" for msg in spec.problems(required_rank(n_r, m)))
            except ValueError as exc:
                out.append(f"excitation: {exc}")
        elif ec.amplitude == 0 or not math.isfinite(ec.amplitude):
            out.append("excitation: amplitude must be finite and nonzero")
        if ec.bias is not None and np.asarray(ec.bias).size != m:
            out.append(f"excitation: bias has {np.asarray(ec.bias).size} entries, expected {m}")
        if self.Q is not None and np.asarray(self.Q).shape != (p, p):
            out.append(f"learner: Q must be {p}x{p} (output weight), got shape {np.asarray(self.Q).shape}")
        if self.R is not None and np.asarray(self.R).shape != (m, m):
            out.append(f"learner: R must be {m}x{m}, got shape {np.asarray(self.R).shape}")
        out.extend(self._scalar_problems())
        if not out:
            out.extend(f"learner: {msg}" for msg in self.spi_config(m, p).problems())
        return out

    def _scalar_problems(self) -> list[str]:
        out = []
        if not 0.0 < self.delta < 1.0:
            out.append(f"learner: δ must lie in (0,1), got {self.delta}")
        if not 0.0 < self.safety <= 1.0:
            out.append(f"learner: safety fraction must lie in (0,1], got {self.safety}")
        if self.k0 is not None and self.k0 < 1:
            out.append(f"experiment: k0 must be at least 1, got {self.k0}")
        if self.samples < 1:
            out.append(f"experiment: samples must be positive, got {self.samples}")
        if self.horizon < 1:
            out.append(f"output: horizon must be positive, got {self.horizon}")
        if self.max_iter < 1:
            out.append(f"learner: max_iter must be at least 1, got {self.max_iter}")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = dict(d or {})
        problems = []
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            problems.append(f"unknown keys: {unknown}")
        plant = d.pop("plant", None) or {}
        exc = d.pop("excitation", None) or {}
        for name, sub, sub_cls in (("plant", plant, PlantConfig), ("excitation", exc, ExcitationConfig)):
            bad = sorted(set(sub) - set(sub_cls.__dataclass_fields__))
            if bad:
                problems.append(f"{name}: unknown keys {bad}")
        if problems:
            raise ConfigError(problems)
        return cls(plant=PlantConfig(**plant), excitation=ExcitationConfig(**exc),
                   **{k: v for k, v in d.items() if k in known})

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def demo_config() -> ExperimentConfig:
    """Power-system example: M_r roots -0.1/-0.2/-0.3, x0 = [5, 5, 5],
    delta = 0.7, beta from 0.9 down to 0.01, unit output and input weights."""
    return ExperimentConfig(
        plant=PlantConfig(preset="power_system", x0=[5.0, 5.0, 5.0]),
        roots=[-0.1, -0.2, -0.3],
        excitation=ExcitationConfig(n_terms=10, amplitude=10.0, seed=0),
        k0=None,
        samples=100,
        Q=[[1.0]],
        R=[[1.0]],
        delta=0.7,
    )
