"""JSON run configuration."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from mobsim.engine import SimulationConfig
from mobsim.errors import MissingFile, ValidationFailure
from mobsim.population import SalaryBand
from mobsim.providers import ProviderConfig
from mobsim.schedule import HuffParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InputPaths(_Strict):
    marginals: Path
    cells: Path
    pois: Path
    industries: Path
    categories: Path
    road_nodes: Path
    road_edges: Path
    transit_feed: Optional[Path] = None


class HuffSection(_Strict):
    decay: float = 2.0
    min_distance: float = 50.0
    candidate_radius: float = 5000.0
    fallback_k: int = 10


class SimulationSection(_Strict):
    emission_factors: dict[str, float] = Field(default_factory=lambda: {"walk": 0.0, "transit": 68.0, "drive": 192.0})
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 0.1
    walk_max_distance: float = 2000.0
    bin_width: int = 3600
    access_walk_speed: float = 1.3
    max_rounds: int = 4


class ProviderSection(_Strict):
    mode: Literal["live", "stub"] = "stub"
    endpoint_url: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    stub_seed: int = 42
    stub_perturbation: float = 0.1


class BandSection(_Strict):
    income_band: str
    min: float
    max: float


class RunConfig(_Strict):
    inputs: InputPaths
    bbox: tuple[float, float, float, float]  # min_lat, min_lon, max_lat, max_lon
    cell_size: float = 250.0
    salary_bands: list[BandSection]
    agents: int = 1000
    seed: int = 0
    workers: int = 1
    ipf_tol: float = 1e-6
    ipf_max_iter: int = 1000
    output_dir: Path = Path("out")
    huff: HuffSection = Field(default_factory=HuffSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    provider: ProviderSection = Field(default_factory=ProviderSection)

    @field_validator("agents", "workers")
    @classmethod
    def _non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        """Parse a config file; relative paths resolve against its directory."""
        path = Path(path)
        if not path.is_file():
            raise MissingFile(str(path))
        try:
            cfg = cls.model_validate(json.loads(path.read_text(encoding="utf-8")))
        except (ValidationError, json.JSONDecodeError) as exc:
            raise ValidationFailure(f"{path}: {exc}") from exc
        return cfg.resolved(path.parent)

    def resolved(self, base: Path) -> "RunConfig":
        def fix(p: Optional[Path]) -> Optional[Path]:
            return None if p is None or p.is_absolute() else base / p

        inputs = self.inputs.model_copy(
            update={k: fix(getattr(self.inputs, k)) for k in InputPaths.model_fields if getattr(self.inputs, k)}
        )
        out = self.output_dir if self.output_dir.is_absolute() else base / self.output_dir
        return self.model_copy(update={"inputs": inputs, "output_dir": out})

    def check_paths(self) -> None:
        for name in InputPaths.model_fields:
            p = getattr(self.inputs, name)
            if p is not None and not p.exists():
                raise MissingFile(f"{name}: {p}")

    # domain objects

    def huff_params(self) -> HuffParams:
        return HuffParams(**self.huff.model_dump())

    def simulation_config(self) -> SimulationConfig:
        return SimulationConfig(master_seed=self.seed, **self.simulation.model_dump())

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(**self.provider.model_dump())

    def bands(self) -> list[SalaryBand]:
        return [SalaryBand(b.income_band, b.min, b.max) for b in self.salary_bands]
