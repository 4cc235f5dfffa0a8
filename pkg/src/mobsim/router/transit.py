"""Timetabled transit network in the route/trip layout round-based routing needs."""
from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from mobsim.errors import EmptyNetwork, UnknownStop, ValidationFailure
from mobsim.geography import LatLon

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    position: LatLon


@dataclass(frozen=True)
class Footpath:
    from_stop: str
    to_stop: str
    duration: int  # seconds
    length: float  # meters


@dataclass(frozen=True)
class TripTimes:
    trip_id: str
    route_id: str
    stops: tuple[str, ...]
    arrivals: tuple[int, ...]
    departures: tuple[int, ...]

    def problems(self) -> list[str]:
        out = []
        if len(self.stops) < 2:
            out.append("fewer than two stops")
        if not (len(self.stops) == len(self.arrivals) == len(self.departures)):
            out.append("stop/time lengths differ")
            return out
        for i, (a, d) in enumerate(zip(self.arrivals, self.departures)):
            if d < a:
                out.append(f"departure before arrival at position {i}")
            if i and a < self.departures[i - 1]:
                out.append(f"arrival at position {i} precedes departure at position {i - 1}")
        return out


def _overtakes(a: TripTimes, b: TripTimes) -> bool:
    """True unless ``a`` runs no later than ``b`` at every stop."""
    return any(x > y for x, y in zip(a.arrivals, b.arrivals)) or any(
        x > y for x, y in zip(a.departures, b.departures)
    )


@dataclass
class Route:
    """Trips sharing one stop sequence, sorted by departure, without overtaking."""

    route_id: str
    stops: tuple[str, ...]
    trips: list[TripTimes]
    source_route_id: str = ""
    dep_columns: list[list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.trips = sorted(self.trips, key=lambda t: (t.departures[0], t.trip_id))
        for t in self.trips:
            if t.stops != self.stops:
                raise ValidationFailure(f"trip {t.trip_id} does not follow route {self.route_id}'s stops")
            bad = t.problems()
            if bad:
                raise ValidationFailure(f"trip {t.trip_id}: {bad[0]}")
        for a, b in zip(self.trips, self.trips[1:]):
            if _overtakes(a, b):
                raise ValidationFailure(f"route {self.route_id}: trip {b.trip_id} overtakes {a.trip_id}")
        self.dep_columns = [[t.departures[i] for t in self.trips] for i in range(len(self.stops))]
        self.source_route_id = self.source_route_id or self.route_id

    def earliest_trip(self, pos: int, time: float) -> int:
        """Index of the first trip departing position ``pos`` at or after ``time``; len(trips) if none."""
        return bisect_left(self.dep_columns[pos], time)


class TransitNetwork:
    """Immutable stops, routes and footpaths with a stop -> (route, position) index."""

    def __init__(self, stops: Iterable[Stop], routes: Sequence[Route], footpaths: Iterable[Footpath] = ()):
        self.stops: dict[str, Stop] = {s.stop_id: s for s in stops}
        self.routes: list[Route] = list(routes)
        ids = [r.route_id for r in self.routes]
        if len(set(ids)) != len(ids):
            raise ValidationFailure("duplicate route ids")
        self.stop_routes: dict[str, list[tuple[int, int]]] = {s: [] for s in self.stops}
        for ri, route in enumerate(self.routes):
            for pos, sid in enumerate(route.stops):
                if sid not in self.stops:
                    raise UnknownStop(f"route {route.route_id} uses unknown stop {sid}")
                self.stop_routes[sid].append((ri, pos))
        self.footpaths: dict[str, list[Footpath]] = {s: [] for s in self.stops}
        for fp in footpaths:
            if fp.from_stop not in self.stops or fp.to_stop not in self.stops:
                raise UnknownStop(f"footpath {fp.from_stop}->{fp.to_stop} uses an unknown stop")
            if fp.duration < 0 or fp.length < 0:
                raise ValidationFailure(f"footpath {fp.from_stop}->{fp.to_stop} has negative cost")
            # the zero-cost self-loop is implicit
            if fp.from_stop != fp.to_stop:
                self.footpaths[fp.from_stop].append(fp)
        for lst in self.footpaths.values():
            lst.sort(key=lambda f: (f.to_stop, f.duration, f.length))
        self.route_index = {r.route_id: i for i, r in enumerate(self.routes)}
        self.report = None  # set by feed ingestion

    def __repr__(self) -> str:
        return f"TransitNetwork(stops={len(self.stops)}, routes={len(self.routes)})"

    def check_stop(self, stop_id: str) -> None:
        if stop_id not in self.stops:
            raise UnknownStop(stop_id)

    def trip(self, trip_id: str) -> tuple[Route, int]:
        for route in self.routes:
            for i, t in enumerate(route.trips):
                if t.trip_id == trip_id:
                    return route, i
        raise KeyError(trip_id)

    @classmethod
    def from_trips(
        cls, stops: Iterable[Stop], trips: Iterable[TripTimes], footpaths: Iterable[Footpath] = ()
    ) -> "TransitNetwork":
        """Group trips into routes by (route id, stop sequence) and split overtaking trips.

        Each trip joins the first sub-route whose latest trip it does not
        overtake, otherwise it opens a new one.
        """
        groups: dict[tuple[str, tuple[str, ...]], list[TripTimes]] = {}
        for t in trips:
            groups.setdefault((t.route_id, t.stops), []).append(t)
        per_source: dict[str, int] = {}
        for rid, _ in groups:
            per_source[rid] = per_source.get(rid, 0) + 1
        routes = []
        for (rid, seq), members in sorted(groups.items()):
            members.sort(key=lambda t: (t.departures[0], t.trip_id))
            lanes: list[list[TripTimes]] = []
            for t in members:
                for lane in lanes:
                    if not _overtakes(lane[-1], t):
                        lane.append(t)
                        break
                else:
                    lanes.append([t])
            if len(lanes) > 1:
                logger.info("route %s split into %d routes to remove overtaking", rid, len(lanes))
            for li, lane in enumerate(lanes):
                pattern = len([k for k in routes if k.source_route_id == rid])
                single = per_source[rid] == 1 and len(lanes) == 1
                routes.append(Route(rid if single else f"{rid}#{pattern}", seq, lane, source_route_id=rid))
        if not routes:
            raise EmptyNetwork("no valid trips")
        return cls(stops, routes, footpaths)
