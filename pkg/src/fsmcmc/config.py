"""Declarative experiment configuration (YAML), validated with pydantic."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HeatSettings(_Strict):
    kind: Literal["heat"] = "heat"
    K: int = Field(128, ge=1)
    prior_scale: float = Field(1e4, gt=0)
    gamma: float = Field(1.0, gt=0)
    time: float = Field(1.0, gt=0)


class NSSettings(_Strict):
    kind: Literal["ns"] = "ns"
    viscosity: float = Field(0.1, gt=0)
    dt: float = Field(0.05, gt=0)
    obs_interval: float = Field(0.05, gt=0)
    n_obs: int = Field(10, ge=1)
    grid: int = Field(64, ge=8)
    obs_shape: tuple[int, int] = (16, 32)
    gamma: float = Field(3.2, gt=0)
    forcing: bool = True
    nonlinear: bool = True


class Scalar1DSettings(_Strict):
    kind: Literal["scalar1d"] = "scalar1d"


class Grid(_Strict):
    """Either an explicit list or an evenly spaced (``linspace``) grid."""

    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)
    spacing: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _one_form(self):
        ranged = (self.start, self.stop, self.num)
        if self.values is None and None in ranged:
            raise ValueError("give either 'values' or all of 'start', 'stop', 'num'")
        if self.values is not None and any(v is not None for v in ranged):
            raise ValueError("'values' and a range are mutually exclusive")
        return self

    def points(self) -> list[float]:
        import numpy as np
        if self.values is not None:
            return list(self.values)
        f = np.geomspace if self.spacing == "log" else np.linspace
        return [float(v) for v in f(self.start, self.stop, self.num)]


class ProposalSettings(_Strict):
    variant: Literal["O", "C", "H"] = "O"
    beta: float = Field(0.5, gt=0, le=1)
    k_c: Optional[float] = Field(None, ge=1)
    zeta: Optional[float] = Field(None, gt=0, le=1)
    max_rank: int = Field(200, ge=1)
    n_probe: Optional[int] = Field(None, ge=1)
    rank: Optional[int] = Field(None, ge=0)
    rank_threshold: float = Field(0.01, gt=0)
    linearization: Literal["prior_mean", "chain_mean"] = "prior_mean"
    prelim_steps: int = Field(2000, ge=1)
    eig_rtol: float = Field(1e-6, gt=0)
    eig_max_iter: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _variant_params(self):
        if self.variant == "C" and self.k_c is None:
            raise ValueError("variant C needs k_c")
        if self.variant != "C" and self.k_c is not None:
            raise ValueError("k_c only applies to variant C")
        if self.variant != "H" and self.zeta is not None:
            raise ValueError("zeta only applies to variant H")
        return self


class AdaptationSettings(_Strict):
    enabled: bool = True
    target: float = Field(0.3, gt=0, lt=1)
    n_steps: int = Field(2000, ge=0)
    decay: float = Field(0.6, gt=0.5, le=1)
    beta_min: float = Field(1e-4, gt=0, le=1)
    beta_max: float = Field(1.0, gt=0, le=1)


class ChainSettings(_Strict):
    n_chains: int = Field(4, ge=1)
    n_steps: int = Field(10_000, ge=2)
    burn_in: Optional[int] = Field(None, ge=0)
    start: Literal["prior", "tuned"] = "prior"


class DiagnosticsSettings(_Strict):
    max_lag: Optional[int] = Field(None, ge=1)
    acf_lags: int = Field(500, ge=1)
    curve_points: int = Field(200, ge=2)


class Analytic1DSettings(_Strict):
    betas: Grid = Grid(start=0.005, stop=1.0, num=200)
    gammas: Grid = Grid(values=[0.01])
    kinds: list[Literal["prior", "posterior"]] = ["prior", "posterior"]
    n_cells: int = Field(2000, ge=10)
    refine_check: bool = True
    verify: list[tuple[float, float]] = []
    verify_steps: int = Field(200_000, ge=1000)


Mode = Union[int, tuple[int, int]]


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = Field(0, ge=0)
    output_dir: str = "runs/experiment"
    model: Union[HeatSettings, NSSettings, Scalar1DSettings] = Field(discriminator="kind")
    proposal: ProposalSettings = ProposalSettings()
    adaptation: AdaptationSettings = AdaptationSettings()
    chains: ChainSettings = ChainSettings()
    recorded_modes: Optional[list[Mode]] = None
    diagnostics: DiagnosticsSettings = DiagnosticsSettings()
    analytic1d: Analytic1DSettings = Analytic1DSettings()

    @field_validator("recorded_modes")
    @classmethod
    def _nonempty(cls, v):
        if v is not None and not v:
            raise ValueError("recorded_modes must be omitted or non-empty")
        return v

    @model_validator(mode="after")
    def _model_constraints(self):
        m = self.model
        if self.adaptation.beta_min > self.adaptation.beta_max:
            raise ValueError("adaptation.beta_min exceeds beta_max")
        modes = self.recorded_modes or []
        if m.kind == "heat":
            for k in modes:
                if not isinstance(k, int) or not 1 <= k <= m.K:
                    raise ValueError(f"heat modes are integers in [1, {m.K}], got {k}")
            if self.proposal.k_c is not None and self.proposal.k_c > m.K:
                raise ValueError(f"k_c = {self.proposal.k_c} exceeds K = {m.K}")
        elif m.kind == "ns":
            K = (m.grid - 1) // 3
            for k in modes:
                if isinstance(k, int) or max(abs(k[0]), abs(k[1])) > K or k == (0, 0):
                    raise ValueError(f"NS modes are nonzero pairs with |k|_inf <= {K}, got {k}")
            if self.proposal.k_c is not None and self.proposal.k_c > K * 2 ** 0.5 + 1:
                raise ValueError(f"k_c = {self.proposal.k_c} exceeds the resolved range")
            if m.grid % 2 or m.grid % m.obs_shape[0] or m.grid % m.obs_shape[1]:
                raise ValueError("observation lattice must divide an even grid")
        return self

    # ------------------------------------------------------------------
    def canonical(self) -> dict:
        """Everything that determines results; the output location is excluded."""
        d = self.model_dump(mode="json")
        d.pop("output_dir")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def zeta(self) -> float:
        if self.proposal.zeta is not None:
            return self.proposal.zeta
        return 1.0 if self.model.kind == "heat" else 0.5

    def with_output(self, path) -> ExperimentConfig:
        return self.model_copy(update={"output_dir": str(path)})


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    raw.setdefault("output_dir", str(Path(path).resolve().parent))
    return ExperimentConfig.model_validate(raw)


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True))
