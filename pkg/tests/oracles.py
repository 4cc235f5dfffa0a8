"""Independent reference computations used as test oracles.

None of these import the code paths they check.
"""
from __future__ import annotations

import itertools
import math
import random
from collections import Counter

import numpy as np

from mobsim.router.transit import Footpath, Stop, TransitNetwork, TripTimes


def pareto_front(vectors, better=None):
    """Non-dominated subset of ``vectors`` (all components smaller-is-better)."""
    vs = set(vectors)
    front = set()
    for v in vs:
        if not any(u != v and all(a <= b for a, b in zip(u, v)) for u in vs):
            front.add(v)
    return front


def naive_ipf(seed, row_targets, col_targets, tol=1e-12, max_iter=100000):
    m = [list(map(float, r)) for r in seed]
    for _ in range(max_iter):
        for i, r in enumerate(m):
            s = sum(r)
            m[i] = [x * row_targets[i] / s for x in r]
        for j in range(len(m[0])):
            s = sum(r[j] for r in m)
            for r in m:
                r[j] *= col_targets[j] / s
        rows_ok = all(abs(sum(r) - t) <= tol * t for r, t in zip(m, row_targets))
        if rows_ok:
            return m
    raise RuntimeError("naive IPF did not converge")


def trigram_cosine(a: str, b: str) -> float:
    def grams(s):
        s = " ".join(s.lower().split())
        return Counter(s[i : i + 3] for i in range(len(s) - 2))

    ga, gb = grams(a), grams(b)
    dot = sum(ga[k] * gb[k] for k in ga)
    return dot / (math.sqrt(sum(v * v for v in ga.values())) * math.sqrt(sum(v * v for v in gb.values())))


# --------------------------------------------------------------------------
# transit


def random_timetable(rng: random.Random, max_stops=15, max_routes=5, max_trips=3, max_footpaths=10):
    """Raw (stops, trips, footpaths) of a small random network; trips may overtake."""
    n_stops = rng.randint(3, max_stops)
    stop_ids = [f"S{i}" for i in range(n_stops)]
    stops = [Stop(s, s, (25.0 + i * 0.001, 121.5)) for i, s in enumerate(stop_ids)]
    trips = []
    for r in range(rng.randint(1, max_routes)):
        seq = tuple(rng.sample(stop_ids, rng.randint(2, min(6, n_stops))))
        for k in range(rng.randint(1, max_trips)):
            t = rng.randrange(7 * 3600, 9 * 3600, 60)
            arr, dep = [], []
            for i in range(len(seq)):
                if i:
                    t += rng.randrange(60, 900, 60)
                arr.append(t)
                t += rng.choice((0, 0, 60))
                dep.append(t)
            trips.append(TripTimes(f"R{r}T{k}", f"R{r}", seq, tuple(arr), tuple(dep)))
    footpaths = []
    for _ in range(rng.randint(0, max_footpaths)):
        a, b = rng.sample(stop_ids, 2)
        footpaths.append(Footpath(a, b, rng.randrange(60, 1800, 60), float(rng.randrange(50, 2000, 10))))
    return stops, trips, footpaths


def enumerate_journeys(trips, footpaths, origin, target, depart, max_trips):
    """Criteria vectors (arrival, trips, walk) of every journey reaching ``target``.

    A journey is an optional footpath from the origin, then up to
    ``max_trips`` vehicle trips, each optionally followed by one footpath.
    Every trip that departs late enough is tried, not just the earliest.
    """
    walks = {}
    for fp in footpaths:
        walks.setdefault(fp.from_stop, []).append(fp)
    start = {(origin, depart, 0, 0.0)}
    for fp in walks.get(origin, []):
        start.add((fp.to_stop, depart + fp.duration, 0, fp.length))
    level = start
    every = set(start)
    for _ in range(max_trips):
        nxt = set()
        for stop, t, n, w in level:
            for trip in trips:
                for i, s in enumerate(trip.stops):
                    if s != stop or trip.departures[i] < t:
                        continue
                    for j in range(i + 1, len(trip.stops)):
                        a = trip.arrivals[j]
                        nxt.add((trip.stops[j], a, n + 1, w))
                        for fp in walks.get(trip.stops[j], []):
                            nxt.add((fp.to_stop, a + fp.duration, n + 1, w + fp.length))
        nxt -= every
        every |= nxt
        level = nxt
    return {(t, n, w) for s, t, n, w in every if s == target}


def range_enumeration(trips, footpaths, origin, target, events, max_trips):
    """Extended-criteria Pareto front over the given departure events."""
    vectors = set()
    for tau in events:
        for t, n, w in pareto_front(enumerate_journeys(trips, footpaths, origin, target, tau, max_trips)):
            vectors.add((-tau, t, n, w))
    return pareto_front(vectors)


def brute_force_events(trips, footpaths, origin, t0, t1):
    events = set()
    for trip in trips:
        for i, s in enumerate(trip.stops[:-1]):
            if s == origin and t0 <= trip.departures[i] <= t1:
                events.add(trip.departures[i])
            for fp in footpaths:
                if fp.from_stop == origin and fp.to_stop == s and fp.to_stop != origin:
                    tau = trip.departures[i] - fp.duration
                    if t0 <= tau <= t1:
                        events.add(tau)
    return events


# --------------------------------------------------------------------------
# roads


def all_simple_paths(edges, source, dest):
    out = {}
    for e in edges:
        out.setdefault(e.from_node, []).append(e)

    def walk(node, seen, path):
        if node == dest:
            yield tuple(path)
            return
        for e in out.get(node, []):
            if e.to_node not in seen:
                yield from walk(e.to_node, seen | {e.to_node}, path + [e])

    yield from walk(source, {source}, [])


def brute_force_assignment(incomes, cell_incomes):
    """Min total |income - cell income| over all one-to-one assignments."""
    best = None
    for perm in itertools.permutations(range(len(cell_incomes)), len(incomes)):
        cost = sum(abs(i - cell_incomes[c]) for i, c in zip(incomes, perm))
        if best is None or cost < best[0]:
            best = (cost, perm)
    return best
