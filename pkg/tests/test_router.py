import random

import pytest
from hypothesis import given, settings, strategies as st

from mobsim.errors import SnapFailure, UnknownStop, Unreachable, ValidationFailure
from mobsim.router import (
    Bag,
    FootLeg,
    Footpath,
    Label,
    RoadEdge,
    RoadGraph,
    Route,
    Stop,
    TransitLeg,
    TransitNetwork,
    TripTimes,
    bag_insert,
    dominates,
    journey_is_feasible,
    mcraptor_query,
    mcrange_query,
    road_route,
)
from mobsim.router.mcraptor import departure_events
from oracles import (
    all_simple_paths,
    brute_force_events,
    enumerate_journeys,
    pareto_front,
    random_timetable,
    range_enumeration,
)

H = 3600


def hm(h, m=0, s=0):
    return h * H + m * 60 + s


def stops(*ids):
    return [Stop(s, s, (25.0 + i * 0.001, 121.5)) for i, s in enumerate(ids)]


def line(trip_id, seq, start, hop=600, dwell=0, route="L"):
    arr, dep = [], []
    t = start
    for i in range(len(seq)):
        if i:
            t += hop
        arr.append(t)
        t += dwell
        dep.append(t)
    return TripTimes(trip_id, route, tuple(seq), tuple(arr), tuple(dep))


ABCD = stops("A", "B", "C", "D")
WALK_AD = Footpath("A", "D", 45 * 60, 3000.0)


# dominance and bags


def test_dominates_cases():
    assert not dominates((28800, 1, 200), (28800, 1, 200))
    assert dominates((28800, 1, 200), (29100, 2, 300))
    assert not dominates((28800, 2, 200), (29100, 1, 300))
    assert not dominates((29100, 1, 300), (28800, 2, 200))


def test_bag_insert_rules():
    bag = Bag()
    assert bag_insert(bag, Label(100, 1, 10)) and len(bag) == 1
    assert not bag_insert(bag, Label(110, 2, 10))
    assert not bag_insert(bag, Label(100, 1, 10))
    assert bag.keys() == [(100, 1, 10)]


def test_bag_insert_against_pareto_oracle():
    labels = [Label(100, 2, 50), Label(110, 1, 60), Label(120, 0, 40)]
    bag = Bag(labels)
    assert len(bag) == 3
    newcomer = Label(100, 1, 50)  # dominates the first two
    assert bag_insert(bag, newcomer)
    assert len(bag) == 2
    assert set(bag.keys()) == pareto_front([lab.key for lab in labels] + [newcomer.key])
    assert labels[0].dead and labels[1].dead and not labels[2].dead


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 3), st.integers(0, 5)), max_size=25))
def test_bag_is_always_the_pareto_front(keys):
    bag = Bag()
    for k in keys:
        bag.insert(Label(*k))
    assert set(bag.keys()) == pareto_front(keys)


# single query


def test_origin_equals_target():
    net = TransitNetwork.from_trips(ABCD, [line("t1", "ABCD", hm(8))])
    bag = mcraptor_query(net, "B", "B", hm(7))
    assert bag.keys() == [(hm(7), 0, 0.0)]
    assert list(bag)[0].journey() == []


def test_disconnected_target():
    net = TransitNetwork.from_trips(stops("A", "B", "C", "D", "E"), [line("t1", "AB", hm(8))])
    assert len(mcraptor_query(net, "A", "E", hm(7))) == 0


def test_unknown_stop():
    net = TransitNetwork.from_trips(ABCD, [line("t1", "AB", hm(8))])
    with pytest.raises(UnknownStop):
        mcraptor_query(net, "A", "Z", hm(7))


def test_line_with_footpath_gives_two_labels():
    trip = TripTimes("t1", "L", tuple("ABCD"), (hm(8), hm(8, 10), hm(8, 20), hm(8, 30)),
                     (hm(8), hm(8, 10), hm(8, 20), hm(8, 30)))
    net = TransitNetwork.from_trips(ABCD, [trip], [WALK_AD])
    bag = mcraptor_query(net, "A", "D", hm(7, 50))
    assert bag.keys() == [(hm(8, 30), 1, 0.0), (hm(8, 35), 0, 3000.0)]
    assert bag.keys() == sorted(pareto_front(enumerate_journeys([trip], [WALK_AD], "A", "D", hm(7, 50), 4)))
    for lab in bag:
        legs = lab.journey()
        assert journey_is_feasible(legs, hm(7, 50))
        kinds = [type(leg) for leg in legs]
        assert kinds in ([TransitLeg], [FootLeg])


def test_journey_legs_reconstruct_criteria():
    t1 = line("t1", "AB", hm(8), route="L1")
    t2 = line("t2", "CD", hm(8, 20), route="L2")
    net = TransitNetwork.from_trips(ABCD, [t1, t2], [Footpath("B", "C", 120, 150.0)])
    bag = mcraptor_query(net, "A", "D", hm(7))
    assert bag.keys() == [(hm(8, 30), 2, 150.0)]
    legs = list(bag)[0].journey()
    assert [type(x).__name__ for x in legs] == ["TransitLeg", "FootLeg", "TransitLeg"]
    assert legs[0].hop_departures == (hm(8),)
    assert journey_is_feasible(legs, hm(7))


def test_max_rounds_limits_trips():
    t1 = line("t1", "AB", hm(8), route="L1")
    t2 = line("t2", "BC", hm(8, 20), route="L2")
    net = TransitNetwork.from_trips(ABCD, [t1, t2])
    assert len(mcraptor_query(net, "A", "C", hm(7), max_rounds=1)) == 0
    assert mcraptor_query(net, "A", "C", hm(7), max_rounds=2).keys() == [(hm(8, 30), 2, 0.0)]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_query_equals_exhaustive_enumeration(seed):
    rng = random.Random(seed)
    st_, trips, fps = random_timetable(rng)
    net = TransitNetwork.from_trips(st_, trips, fps)
    ids = [s.stop_id for s in st_]
    origin, target = rng.choice(ids), rng.choice(ids)
    depart = rng.randrange(7 * H, 9 * H, 60)
    bag = mcraptor_query(net, origin, target, depart, 4)
    expected = pareto_front(enumerate_journeys(trips, fps, origin, target, depart, 4))
    assert set(bag.keys()) == expected
    for lab in bag:
        assert journey_is_feasible(lab.journey(), depart)


# range query


def test_range_with_equal_bounds_is_single_query():
    trip = line("t1", "ABCD", hm(8))
    net = TransitNetwork.from_trips(ABCD, [trip], [WALK_AD])
    single = mcraptor_query(net, "A", "D", hm(7, 50))
    ranged = mcrange_query(net, "A", "D", (hm(7, 50), hm(7, 50)))
    assert sorted(k[1:] for k in ranged.keys()) == single.keys()
    assert {k[0] for k in ranged.keys()} == {-hm(7, 50)}


def test_range_without_trips_or_footpaths_is_empty():
    net = TransitNetwork.from_trips(stops("A", "B", "C", "D", "E"), [line("t1", "BC", hm(8))])
    assert len(mcrange_query(net, "A", "E", (hm(7), hm(9)))) == 0


def test_range_keeps_both_departures():
    trips = [line("t1", "ABCD", hm(8)), line("t2", "ABCD", hm(8, 30))]
    net = TransitNetwork.from_trips(ABCD, trips, [WALK_AD])
    window = (hm(7, 30), hm(8, 30))
    bag = mcrange_query(net, "A", "D", window)
    transit = sorted((-k[0], k[1]) for k in bag.keys() if k[2] == 1)
    assert transit == [(hm(8), hm(8, 30)), (hm(8, 30), hm(9))]
    events = sorted(brute_force_events(trips, [WALK_AD], "A", *window))
    assert set(bag.keys()) == range_enumeration(trips, [WALK_AD], "A", "D", events, 4)


def test_range_rejects_inverted_window():
    net = TransitNetwork.from_trips(ABCD, [line("t1", "AB", hm(8))])
    with pytest.raises(ValueError):
        mcrange_query(net, "A", "B", (hm(9), hm(8)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_range_equals_enumeration(seed):
    rng = random.Random(seed)
    st_, trips, fps = random_timetable(rng)
    net = TransitNetwork.from_trips(st_, trips, fps)
    ids = [s.stop_id for s in st_]
    origin, target = rng.choice(ids), rng.choice(ids)
    t0 = rng.randrange(6 * H, 9 * H, 60)
    t1 = t0 + rng.randrange(0, 2 * H, 60)
    events = departure_events(net, origin, t0, t1)
    assert set(events) == brute_force_events(trips, fps, origin, t0, t1)
    bag = mcrange_query(net, origin, target, (t0, t1), 4)
    expected = range_enumeration(trips, fps, origin, target, events if t1 > t0 and events else [t0], 4)
    assert set(bag.keys()) == expected


# network normalization


def test_overtaking_trips_are_split():
    slow = TripTimes("slow", "R", ("A", "B"), (hm(8), hm(9)), (hm(8), hm(9)))
    fast = TripTimes("fast", "R", ("A", "B"), (hm(8, 10), hm(8, 30)), (hm(8, 10), hm(8, 30)))
    net = TransitNetwork.from_trips(stops("A", "B"), [slow, fast])
    assert sorted(len(r.trips) for r in net.routes) == [1, 1]
    assert {r.source_route_id for r in net.routes} == {"R"}
    bag = mcraptor_query(net, "A", "B", hm(7))
    assert set(bag.keys()) == pareto_front(enumerate_journeys([slow, fast], [], "A", "B", hm(7), 4))
    assert bag.keys() == [(hm(8, 30), 1, 0.0)]


def test_route_rejects_overtaking_directly():
    slow = TripTimes("slow", "R", ("A", "B"), (hm(8), hm(9)), (hm(8), hm(9)))
    fast = TripTimes("fast", "R", ("A", "B"), (hm(8, 10), hm(8, 30)), (hm(8, 10), hm(8, 30)))
    with pytest.raises(ValidationFailure):
        Route("R", ("A", "B"), [slow, fast])


def test_earliest_trip_lookup():
    r = Route("R", ("A", "B"), [line(f"t{k}", "AB", hm(8, 10 * k)) for k in range(3)])
    assert r.earliest_trip(0, hm(8, 5)) == 1
    assert r.earliest_trip(0, hm(8)) == 0
    assert r.earliest_trip(0, hm(9)) == 3


# roads


def five_node_graph():
    nodes = {i: (25.0, 121.5 + i * 0.002) for i in range(5)}
    edges = [
        RoadEdge(0, 0, 1, 500, 1.3, 10.0),
        RoadEdge(1, 1, 4, 500, 1.3, 10.0),  # short but slow for cars via 1
        RoadEdge(2, 0, 2, 400, 1.3, 20.0),
        RoadEdge(3, 2, 3, 400, 1.3, 20.0),
        RoadEdge(4, 3, 4, 400, 1.3, 20.0),
    ]
    return RoadGraph(nodes, edges)


def best_by_enumeration(graph, s, d, mode):
    paths = list(all_simple_paths(graph.edges.values(), s, d))
    return min(paths, key=lambda p: (sum(e.length / e.speed(mode) for e in p), tuple(e.edge_id for e in p)))


@pytest.mark.parametrize("mode, expected", [("drive", (2, 3, 4)), ("walk", (0, 1))])
def test_competing_paths_match_enumeration(mode, expected):
    g = five_node_graph()
    path = g.shortest(0, 4, mode)
    assert path.edges == expected
    assert path.edges == tuple(e.edge_id for e in best_by_enumeration(g, 0, 4, mode))
    assert path.distance == sum(g.edges[e].length for e in expected)


def test_entry_offsets_accumulate():
    p = five_node_graph().shortest(0, 4, "drive")
    assert p.entry_offsets == (0.0, 20.0, 40.0)
    assert p.duration == pytest.approx(60.0)


def test_same_node_is_empty_path():
    g = five_node_graph()
    p = road_route(g, g.nodes[2], g.nodes[2], "drive")
    assert (p.edges, p.distance, p.duration) == ((), 0.0, 0.0)


def test_unreachable_and_snap_failure():
    g = five_node_graph()
    with pytest.raises(Unreachable):
        g.shortest(4, 0, "walk")
    with pytest.raises(SnapFailure):
        road_route(g, (26.0, 121.5), g.nodes[0], "walk")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_random_graphs_match_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    nodes = {i: (25.0 + rng.random() * 0.01, 121.5 + rng.random() * 0.01) for i in range(n)}
    edges = []
    for k in range(rng.randint(1, 12)):
        a, b = rng.sample(range(n), 2)
        edges.append(RoadEdge(k, a, b, rng.randrange(50, 1000, 50), 1.3, rng.choice((5.0, 8.0, 10.0))))
    g = RoadGraph(nodes, edges)
    s, d = rng.sample(range(n), 2)
    paths = list(all_simple_paths(g.edges.values(), s, d))
    if not paths:
        with pytest.raises(Unreachable):
            g.shortest(s, d, "drive")
        return
    best = min(sum(e.length / e.drive_speed for e in p) for p in paths)
    assert g.shortest(s, d, "drive").duration == pytest.approx(best, rel=1e-12)
