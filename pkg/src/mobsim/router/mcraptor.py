"""Multi-criteria round-based transit routing over (arrival, trips taken, walking meters)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Union

from mobsim.router.transit import Route, TransitNetwork

DEFAULT_MAX_ROUNDS = 4


class CriteriaVector(NamedTuple):
    arrival: float
    trips_taken: int
    walk: float


def dominates(a: tuple, b: tuple) -> bool:
    """``a`` is no worse than ``b`` in every component and better in one (smaller is better)."""
    return a != b and all(x <= y for x, y in zip(a, b))


@dataclass(frozen=True)
class TransitLeg:
    route_id: str
    trip_id: str
    board_stop: str
    alight_stop: str
    depart: int
    arrive: int
    stops: tuple[str, ...]  # board .. alight inclusive
    hop_departures: tuple[int, ...]  # departure from each stop but the last


@dataclass(frozen=True)
class FootLeg:
    from_stop: str
    to_stop: str
    depart: float
    arrive: float
    length: float


Leg = Union[TransitLeg, FootLeg]


class Label:
    __slots__ = ("arrival", "trips", "walk", "parent", "leg", "dead")

    def __init__(self, arrival, trips, walk, parent=None, leg=None):
        self.arrival = arrival
        self.trips = trips
        self.walk = walk
        self.parent: Optional[Label] = parent
        self.leg: Optional[Leg] = leg
        self.dead = False

    @property
    def key(self) -> tuple:
        return (self.arrival, self.trips, self.walk)

    @property
    def criteria(self) -> CriteriaVector:
        return CriteriaVector(self.arrival, self.trips, self.walk)

    def journey(self) -> list[Leg]:
        legs = []
        node = self
        while node.parent is not None:
            legs.append(node.leg)
            node = node.parent
        legs.reverse()
        return legs

    def __repr__(self) -> str:
        return f"Label(arrival={self.arrival}, trips={self.trips}, walk={self.walk})"


class RangeLabel:
    """A single-departure label tagged with the departure it was computed for."""

    __slots__ = ("departure", "label")

    def __init__(self, departure, label: Label):
        self.departure = departure
        self.label = label

    @property
    def key(self) -> tuple:
        # later departure is better
        return (-self.departure, self.label.arrival, self.label.trips, self.label.walk)

    def journey(self) -> list[Leg]:
        return self.label.journey()

    def __repr__(self) -> str:
        return f"RangeLabel(departure={self.departure}, {self.label!r})"


class Bag:
    """Mutually non-dominated labels compared on their ``key`` tuples."""

    __slots__ = ("labels",)

    def __init__(self, labels: Iterable = ()):
        self.labels: list = []
        for lab in labels:
            self.insert(lab)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def covers(self, key: tuple) -> bool:
        """Some member dominates or equals ``key``."""
        for lab in self.labels:
            k = lab.key
            if all(x <= y for x, y in zip(k, key)):
                return True
        return False

    def insert(self, label) -> bool:
        key = label.key
        if self.covers(key):
            return False
        keep = []
        for lab in self.labels:
            if dominates(key, lab.key):
                if isinstance(lab, Label):
                    lab.dead = True
            else:
                keep.append(lab)
        keep.append(label)
        self.labels = keep
        return True

    def keys(self) -> list[tuple]:
        return sorted(lab.key for lab in self.labels)


def bag_insert(bag: Bag, label) -> bool:
    return bag.insert(label)


def _covered(key: tuple, *bags: Optional[Bag]) -> bool:
    return any(b is not None and b.covers(key) for b in bags)


def mcraptor_query(
    net: TransitNetwork, origin: str, target: str, depart: float, max_rounds: int = DEFAULT_MAX_ROUNDS
) -> Bag:
    """Pareto set of journeys from ``origin`` to ``target`` leaving no earlier than ``depart``.

    Journeys alternate vehicle trips with at most one footpath in between
    (plus an optional footpath from the origin), using at most ``max_rounds``
    trips. Labels that arrived by vehicle and labels that arrived on foot are
    kept in separate bags per stop because only the former may continue on
    foot; without transitively closed footpaths pruning across the two would
    drop valid journeys.
    """
    net.check_stop(origin)
    net.check_stop(target)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")

    by_vehicle: dict[str, Bag] = {}
    on_foot: dict[str, Bag] = {}

    def target_covers(key):
        return _covered(key, by_vehicle.get(target), on_foot.get(target))

    root = Label(depart, 0, 0.0)
    by_vehicle[origin] = Bag([root])
    marked: dict[str, list[Label]] = {origin: [root]}
    _relax_footpaths(net, marked, by_vehicle, on_foot, target_covers)

    for _ in range(max_rounds):
        if not marked:
            break
        scan: dict[int, int] = {}
        for stop in marked:
            for ri, pos in net.stop_routes[stop]:
                if pos < scan.get(ri, 1 << 30):
                    scan[ri] = pos
        arrived: dict[str, list[Label]] = {}
        for ri in sorted(scan):
            _scan_route(net.routes[ri], scan[ri], marked, by_vehicle, arrived, target_covers)
        marked = {s: [lab for lab in labs if not lab.dead] for s, labs in arrived.items()}
        marked = {s: labs for s, labs in marked.items() if labs}
        _relax_footpaths(net, marked, by_vehicle, on_foot, target_covers)

    result = Bag()
    found = list(by_vehicle.get(target, ())) + list(on_foot.get(target, ()))
    for lab in sorted(found, key=lambda lab: lab.key):
        result.insert(lab)
    return result


def _scan_route(route: Route, start: int, marked, by_vehicle, arrived, target_covers) -> None:
    # route bag entries: (trip index, boarding label, boarding position); a
    # lower trip index never runs later at any stop, so (trip index, walk)
    # dominance is safe to prune on
    riding: list[tuple[int, Label, int]] = []
    stops = route.stops
    trips = route.trips
    for pos in range(start, len(stops)):
        stop = stops[pos]
        if riding:
            bag = by_vehicle.get(stop)
            for ti, lab, board in riding:
                trip = trips[ti]
                arr = trip.arrivals[pos]
                key = (arr, lab.trips + 1, lab.walk)
                if (bag is not None and bag.covers(key)) or target_covers(key):
                    continue
                leg = TransitLeg(
                    route.route_id,
                    trip.trip_id,
                    stops[board],
                    stop,
                    trip.departures[board],
                    arr,
                    stops[board : pos + 1],
                    trip.departures[board:pos],
                )
                new = Label(arr, lab.trips + 1, lab.walk, lab, leg)
                if bag is None:
                    bag = by_vehicle[stop] = Bag()
                bag.insert(new)
                arrived.setdefault(stop, []).append(new)
        if pos == len(stops) - 1:
            break
        for lab in marked.get(stop, ()):
            if lab.dead:
                continue
            ti = route.earliest_trip(pos, lab.arrival)
            if ti >= len(trips):
                continue
            if any(oti <= ti and olab.walk <= lab.walk for oti, olab, _ in riding):
                continue
            riding = [e for e in riding if not (ti <= e[0] and lab.walk <= e[1].walk)]
            riding.append((ti, lab, pos))


def _relax_footpaths(net: TransitNetwork, marked, by_vehicle, on_foot, target_covers) -> None:
    """Walk one footpath from every freshly marked stop; new foot labels are marked too."""
    walked: dict[str, list[Label]] = {}
    for stop in sorted(marked):
        for lab in marked[stop]:
            if lab.dead:
                continue
            for fp in net.footpaths[stop]:
                key = (lab.arrival + fp.duration, lab.trips, lab.walk + fp.length)
                if _covered(key, by_vehicle.get(fp.to_stop), on_foot.get(fp.to_stop)) or target_covers(key):
                    continue
                leg = FootLeg(stop, fp.to_stop, lab.arrival, key[0], fp.length)
                new = Label(key[0], key[1], key[2], lab, leg)
                on_foot.setdefault(fp.to_stop, Bag()).insert(new)
                walked.setdefault(fp.to_stop, []).append(new)
    for stop, labs in walked.items():
        marked.setdefault(stop, []).extend(labs)


def departure_events(net: TransitNetwork, origin: str, t0: float, t1: float) -> list[float]:
    """Origin departure times in [t0, t1] that can catch a trip, directly or after one footpath."""
    events = set()
    for ri, pos in net.stop_routes[origin]:
        route = net.routes[ri]
        if pos < len(route.stops) - 1:
            events.update(d for d in route.dep_columns[pos] if t0 <= d <= t1)
    for fp in net.footpaths[origin]:
        for ri, pos in net.stop_routes[fp.to_stop]:
            route = net.routes[ri]
            if pos < len(route.stops) - 1:
                events.update(d - fp.duration for d in route.dep_columns[pos] if t0 <= d - fp.duration <= t1)
    return sorted(events, reverse=True)


def mcrange_query(
    net: TransitNetwork,
    origin: str,
    target: str,
    window: tuple[float, float],
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> Bag:
    """Pareto set over (departure later-is-better, arrival, trips, walk) for departures in ``window``.

    One single-departure query runs per departure event, latest first. A
    window with no events (or ``t0 == t1``) is a single query at ``t0``.
    """
    t0, t1 = window
    if t0 > t1:
        raise ValueError("window start after window end")
    net.check_stop(origin)
    net.check_stop(target)
    events = departure_events(net, origin, t0, t1) if t1 > t0 else []
    if not events:
        events = [t0]
    result = Bag()
    for tau in events:
        for lab in mcraptor_query(net, origin, target, tau, max_rounds):
            result.insert(RangeLabel(tau, lab))
    return result


def journey_is_feasible(legs: list[Leg], depart: float) -> bool:
    """Every leg starts no earlier than the previous one ends; times never decrease."""
    t = depart
    for leg in legs:
        if leg.depart < t or leg.arrive < leg.depart:
            return False
        t = leg.arrive
    return True
