"""End-to-end run: marginals -> population -> locations -> schedules -> trips -> outputs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from mobsim.engine import SimulationConfig, TripRecord, World, simulate_day
from mobsim.errors import NoRoutinePoi, ValidationFailure
from mobsim.geography import (
    GridCell,
    GridSpec,
    IndustryCatalog,
    PoiIndex,
    allocate_homes,
    apply_cell_attributes,
    assign_routine,
    build_grid,
    match_industry,
)
from mobsim.io import ingest
from mobsim.io.config import RunConfig
from mobsim.io.outputs import Indicators, HeatmapBin, accumulate_heatmap, compute_indicators, export_outputs
from mobsim.population import AgentProfile, ipf_fit, sample_profiles, seed_joint_from_llm
from mobsim.providers import ProviderConfig
from mobsim.router.road import RoadGraph
from mobsim.router.transit import TransitNetwork
from mobsim.schedule import DailySchedule, generate_schedule
from mobsim.streams import derive_stream

logger = logging.getLogger(__name__)


@dataclass
class Inputs:
    marginals: list
    grid: GridSpec
    cells: list[GridCell]
    pois: PoiIndex
    industries: IndustryCatalog
    categories: list[tuple[str, str]]
    roads: RoadGraph
    transit: Optional[TransitNetwork]


def load_inputs(cfg: RunConfig) -> Inputs:
    cfg.check_paths()
    p = cfg.inputs
    grid, cells = build_grid(tuple(cfg.bbox), cfg.cell_size)
    apply_cell_attributes(cells, ingest.read_cells(p.cells))
    return Inputs(
        marginals=ingest.read_marginals(p.marginals),
        grid=grid,
        cells=cells,
        pois=PoiIndex(ingest.read_pois(p.pois)),
        industries=ingest.read_industries(p.industries),
        categories=ingest.read_categories(p.categories),
        roads=ingest.read_road_graph(p.road_nodes, p.road_edges),
        transit=ingest.ingest_transit_feed(p.transit_feed) if p.transit_feed else None,
    )


def synthesize(cfg: RunConfig, marginals, n: Optional[int] = None) -> list[AgentProfile]:
    provider = cfg.provider_config()
    seed = seed_joint_from_llm(marginals, provider)
    joint = ipf_fit(seed, marginals, cfg.ipf_tol, cfg.ipf_max_iter)
    return sample_profiles(joint, cfg.agents if n is None else n, cfg.bands(), cfg.seed)


def allocate(
    profiles: list[AgentProfile],
    cells: list[GridCell],
    pois: PoiIndex,
    industries: IndustryCatalog,
    provider: ProviderConfig,
    master_seed: int,
) -> list[AgentProfile]:
    """Set each profile's home cell and routine POI in place."""
    homes = allocate_homes(profiles, cells)
    industry_of: dict[str, str] = {}
    for p in profiles:
        p.home_cell_id = homes[p.agent_id]
        if p.occupation not in industry_of:
            industry_of[p.occupation] = match_industry(p.occupation, industries, provider)
        try:
            p.routine_poi_id = assign_routine(
                p, industry_of[p.occupation], pois, derive_stream(master_seed, p.agent_id, "routine")
            )
        except NoRoutinePoi:
            logger.warning("agent %d: no POI for industry %s", p.agent_id, industry_of[p.occupation])
            p.routine_poi_id = None
    return profiles


def make_schedules(profiles, categories, provider: ProviderConfig) -> dict[int, DailySchedule]:
    return {p.agent_id: generate_schedule(p, provider, categories) for p in profiles}


def build_world(cfg: RunConfig, inputs: Inputs) -> World:
    return World(inputs.grid, inputs.cells, inputs.pois, inputs.roads, inputs.transit, cfg.huff_params())


@dataclass
class RunResult:
    profiles: list[AgentProfile]
    schedules: dict[int, DailySchedule]
    trips: list[TripRecord]
    bins: list[HeatmapBin]
    indicators: Indicators
    files: list[Path] = field(default_factory=list)


def run_all(cfg: RunConfig, workers: Optional[int] = None, export: bool = True) -> RunResult:
    inputs = load_inputs(cfg)
    provider = cfg.provider_config()
    sim = cfg.simulation_config()
    profiles = synthesize(cfg, inputs.marginals)
    allocate(profiles, inputs.cells, inputs.pois, inputs.industries, provider, cfg.seed)
    schedules = make_schedules(profiles, inputs.categories, provider)
    world = build_world(cfg, inputs)
    trips = simulate_day(profiles, schedules, world, sim, workers=cfg.workers if workers is None else workers)
    bins = accumulate_heatmap(trips, sim.bin_width)
    indicators = compute_indicators(trips, sim.emission_factors)
    result = RunResult(profiles, schedules, trips, bins, indicators)
    if export:
        result.files = export_outputs(
            trips, bins, indicators, cfg.output_dir, profiles, roads=inputs.roads, transit=inputs.transit
        )
    return result
