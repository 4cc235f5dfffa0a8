"""Daily simulation loop: resolve destinations, pick a mode per trip, record trips."""
from __future__ import annotations

import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from mobsim.errors import MobsimError, NoFeasibleMode, NoRoutinePoi, SnapFailure, Unreachable, ValidationFailure
from mobsim.geography import GridCell, GridSpec, LatLon, PoiIndex, distance_m, distances_m
from mobsim.population import AgentProfile
from mobsim.router.mcraptor import FootLeg, TransitLeg, mcraptor_query
from mobsim.router.road import RoadGraph, road_route
from mobsim.router.transit import TransitNetwork
from mobsim.schedule import DailySchedule, HuffParams, choose_occasional
from mobsim.streams import derive_stream  # re-exported: streams are part of the engine API

logger = logging.getLogger(__name__)

MODES = ("walk", "transit", "drive")
# tie-break order when utilities are equal
MODE_RANK = {"transit": 0, "walk": 1, "drive": 2}


@dataclass(frozen=True)
class SimulationConfig:
    master_seed: int = 0
    # g CO2 per km; the run config can override them
    emission_factors: dict = field(default_factory=lambda: {"walk": 0.0, "transit": 68.0, "drive": 192.0})
    alpha: float = 1.0  # duration weight
    beta: float = 0.5  # walking weight
    gamma: float = 0.1  # per-transfer penalty
    walk_max_distance: float = 2000.0
    bin_width: int = 3600
    access_walk_speed: float = 1.3  # m/s, to and from transit stops
    max_rounds: int = 4

    def __post_init__(self):
        for mode in MODES:
            if mode not in self.emission_factors:
                raise ValidationFailure(f"missing emission factor for {mode}")
            if self.emission_factors[mode] < 0:
                raise ValidationFailure(f"negative emission factor for {mode}")
        if self.emission_factors["walk"] != 0:
            raise ValidationFailure("walking emits nothing; its factor must be 0")
        if 86400 % self.bin_width:
            raise ValidationFailure("bin_width must divide 86400")


@dataclass(frozen=True)
class TripRecord:
    agent_id: int
    trip_index: int
    mode: str  # walk | transit | drive, or "none" for a failed trip
    depart: float
    arrive: float
    distance: float
    segments: tuple[str, ...]
    segment_entries: tuple[float, ...]
    emissions: float
    purpose: str = ""
    late: bool = False
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def emissions_for(distance_m_: float, mode: str, factors: dict) -> float:
    return distance_m_ / 1000.0 * factors.get(mode, 0.0)


# --------------------------------------------------------------------------
# world


@dataclass
class ModeOption:
    mode: str
    duration: float
    walk: float
    transfers: int
    distance: float
    segments: tuple[str, ...] = ()
    # seconds after departure at which each segment is entered
    entry_offsets: tuple[float, ...] = ()


class World:
    """Read-only substrate shared by all agents of a run."""

    def __init__(
        self,
        grid: GridSpec,
        cells: Sequence[GridCell],
        pois: PoiIndex,
        roads: RoadGraph,
        transit: Optional[TransitNetwork],
        huff: HuffParams = HuffParams(),
    ):
        self.grid = grid
        self.cells = {c.cell_id: c for c in cells}
        self.pois = pois
        self.roads = roads
        self.transit = transit
        self.huff = huff
        if transit is not None:
            ids = sorted(transit.stops)
            self._stop_ids = ids
            self._stop_lats = np.array([transit.stops[s].position[0] for s in ids])
            self._stop_lons = np.array([transit.stops[s].position[1] for s in ids])
        self._transit_cache = lru_cache(maxsize=1 << 17)(self._transit_options)
        self._hop_cache: dict[tuple[str, str], float] = {}

    def nearest_stop(self, pos: LatLon, radius: float) -> Optional[tuple[str, float]]:
        if self.transit is None or not self._stop_ids:
            return None
        d = distances_m(pos, self._stop_lats, self._stop_lons)
        i = int(np.argmin(d))
        if d[i] > radius:
            return None
        return self._stop_ids[i], float(d[i])

    def hop_length(self, a: str, b: str) -> float:
        key = (a, b)
        if key not in self._hop_cache:
            self._hop_cache[key] = distance_m(self.transit.stops[a].position, self.transit.stops[b].position)
        return self._hop_cache[key]

    def _transit_options(self, o_stop: str, d_stop: str, t: int, max_rounds: int) -> tuple:
        out = []
        for lab in sorted(mcraptor_query(self.transit, o_stop, d_stop, t, max_rounds), key=lambda l: l.key):
            if lab.trips == 0:
                continue
            segs, entries, dist = [], [], 0.0
            for leg in lab.journey():
                if isinstance(leg, TransitLeg):
                    for a, b, dep in zip(leg.stops, leg.stops[1:], leg.hop_departures):
                        segs.append(f"hop:{a}>{b}")
                        entries.append(dep)
                        dist += self.hop_length(a, b)
                else:
                    segs.append(f"foot:{leg.from_stop}>{leg.to_stop}")
                    entries.append(leg.depart)
                    dist += leg.length
            out.append((lab.arrival, lab.trips, lab.walk, dist, tuple(segs), tuple(entries)))
        return tuple(out)

    def location(self, key: tuple) -> LatLon:
        kind, ident = key
        if kind == "cell":
            return self.cells[ident].centroid
        return self.pois[ident].position


def transit_options(world: World, origin: LatLon, dest: LatLon, depart: float, config: SimulationConfig):
    """Door-to-door transit options: walk to the nearest stop, ride, walk from the nearest stop."""
    if world.transit is None:
        return []
    o = world.nearest_stop(origin, config.walk_max_distance)
    d = world.nearest_stop(dest, config.walk_max_distance)
    if o is None or d is None or o[0] == d[0]:
        return []
    (o_stop, access), (d_stop, egress) = o, d
    board_ready = math.ceil(depart + access / config.access_walk_speed)
    egress_time = egress / config.access_walk_speed
    options = []
    for arrival, trips, walk, dist, segs, entries in world._transit_cache(o_stop, d_stop, board_ready, config.max_rounds):
        options.append(
            ModeOption(
                "transit",
                duration=arrival + egress_time - depart,
                walk=access + walk + egress,
                transfers=trips - 1,
                distance=access + dist + egress,
                segments=segs,
                entry_offsets=tuple(e - depart for e in entries),
            )
        )
    return options


def mode_utilities(options: Sequence[ModeOption], prefs: dict, config: SimulationConfig) -> list[float]:
    max_dur = max((o.duration for o in options), default=0.0)
    max_walk = max((o.walk for o in options), default=0.0)
    out = []
    for o in options:
        u = prefs[o.mode] - config.gamma * o.transfers
        if max_dur > 0:
            u -= config.alpha * o.duration / max_dur
        if max_walk > 0:
            u -= config.beta * o.walk / max_walk
        out.append(u)
    return out


def select_mode(options: Sequence[ModeOption], prefs: dict, config: SimulationConfig) -> ModeOption:
    """Highest-utility option; ties go transit, then walk, then drive, then list order."""
    if not options:
        raise NoFeasibleMode("no candidate mode")
    utils = mode_utilities(options, prefs, config)
    best = min(range(len(options)), key=lambda i: (-utils[i], MODE_RANK[options[i].mode], i))
    return options[best]


def choose_mode(
    profile: AgentProfile, origin: LatLon, dest: LatLon, depart: float, world: World, config: SimulationConfig
) -> ModeOption:
    roads = world.roads
    try:
        o_node, d_node = roads.snap(origin), roads.snap(dest)
    except SnapFailure:
        o_node = d_node = None
    if o_node is not None and o_node == d_node:
        return ModeOption("walk", 0.0, 0.0, 0, 0.0)
    options: list[ModeOption] = []
    if o_node is not None:
        for mode in ("walk", "drive"):
            try:
                path = roads.shortest(o_node, d_node, mode)
            except Unreachable:
                continue
            if mode == "walk" and path.distance > config.walk_max_distance:
                continue
            options.append(
                ModeOption(
                    mode,
                    duration=path.duration,
                    walk=path.distance if mode == "walk" else 0.0,
                    transfers=0,
                    distance=path.distance,
                    segments=tuple(f"edge:{e}" for e in path.edges),
                    entry_offsets=path.entry_offsets,
                )
            )
    options.extend(transit_options(world, origin, dest, depart, config))
    if not options:
        raise NoFeasibleMode(f"agent {profile.agent_id}: no mode reaches {dest} from {origin}")
    prefs = dict(zip(MODES, profile.mode_prefs))
    return select_mode(options, prefs, config)


# --------------------------------------------------------------------------
# simulation


def simulate_agent(
    profile: AgentProfile, schedule: DailySchedule, world: World, config: SimulationConfig
) -> list[TripRecord]:
    stream = derive_stream(config.master_seed, profile.agent_id, "occasional")
    acts = schedule.activities
    factors = config.emission_factors

    def fixed_location(kind):
        if kind == "home":
            return ("cell", profile.home_cell_id)
        if profile.routine_poi_id is None:
            raise NoRoutinePoi(f"agent {profile.agent_id} has no routine location")
        return ("poi", profile.routine_poi_id)

    here = fixed_location(acts[0].location_kind)  # schedules always open at home
    ready = acts[0].end
    trips: list[TripRecord] = []
    for act in acts[1:]:
        depart = ready
        error = None
        dest = None
        try:
            if act.location_kind == "occasional":
                dest = ("poi", choose_occasional(world.location(here), act.poi_category, world.pois, world.huff, stream))
            else:
                dest = fixed_location(act.location_kind)
            if dest == here:
                ready = max(ready, act.end)
                continue
            option = choose_mode(profile, world.location(here), world.location(dest), depart, world, config)
        except MobsimError as exc:
            error = f"{type(exc).__name__}: {exc}"
        if error is not None:
            trips.append(
                TripRecord(profile.agent_id, len(trips), "none", depart, depart, 0.0, (), (), 0.0, act.label, False, error)
            )
            if dest is not None:
                here = dest
            ready = max(depart, act.end)
            continue
        arrive = depart + option.duration
        trips.append(
            TripRecord(
                agent_id=profile.agent_id,
                trip_index=len(trips),
                mode=option.mode,
                depart=depart,
                arrive=arrive,
                distance=option.distance,
                segments=option.segments,
                segment_entries=tuple(depart + off for off in option.entry_offsets),
                emissions=emissions_for(option.distance, option.mode, factors),
                purpose=act.label,
                late=arrive > act.start,
            )
        )
        here = dest
        ready = max(arrive, act.end)
    return trips


# state inherited by forked workers
_SHARED: dict = {}


def _run_chunk(bounds: tuple[int, int]) -> list[TripRecord]:
    agents, schedules, world, config = (_SHARED[k] for k in ("agents", "schedules", "world", "config"))
    out = []
    for profile in agents[bounds[0] : bounds[1]]:
        out.extend(simulate_agent(profile, schedules[profile.agent_id], world, config))
    return out


def simulate_day(
    agents: Sequence[AgentProfile],
    schedules: dict[int, DailySchedule],
    world: World,
    config: SimulationConfig,
    workers: int = 1,
) -> list[TripRecord]:
    """Trips of all agents, ordered by (agent_id, trip_index).

    With ``workers > 1`` agents are split into contiguous chunks run in forked
    processes; the result is identical to a single-worker run.
    """
    ordered = sorted(agents, key=lambda p: p.agent_id)
    missing = [p.agent_id for p in ordered if p.agent_id not in schedules]
    if missing:
        raise ValidationFailure(f"no schedule for agents {missing[:5]}")
    homeless = [p.agent_id for p in ordered if p.home_cell_id is None]
    if homeless:
        raise ValidationFailure(f"no home cell for agents {homeless[:5]}")
    if workers <= 1 or len(ordered) < 2:
        trips = []
        for p in ordered:
            trips.extend(simulate_agent(p, schedules[p.agent_id], world, config))
        return trips

    _SHARED.update(agents=ordered, schedules=schedules, world=world, config=config)
    n_chunks = min(len(ordered), workers * 4)
    edges = [round(i * len(ordered) / n_chunks) for i in range(n_chunks + 1)]
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_run_chunk, zip(edges, edges[1:])))
    finally:
        _SHARED.clear()
    trips = [t for part in parts for t in part]
    trips.sort(key=lambda t: (t.agent_id, t.trip_index))
    return trips
