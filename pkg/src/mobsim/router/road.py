"""Road graph and minimal-duration walking/driving routes."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from mobsim.errors import SnapFailure, Unreachable, ValidationFailure
from mobsim.geography import LatLon, distances_m

RoadMode = Literal["walk", "drive"]
SNAP_RADIUS = 500.0


@dataclass(frozen=True)
class RoadEdge:
    edge_id: int
    from_node: int
    to_node: int
    length: float  # meters
    walk_speed: float  # m/s, 0 = not traversable
    drive_speed: float

    def speed(self, mode: RoadMode) -> float:
        return self.walk_speed if mode == "walk" else self.drive_speed


@dataclass(frozen=True)
class RoadPath:
    edges: tuple[int, ...]
    distance: float
    duration: float
    # seconds from departure at which each edge is entered
    entry_offsets: tuple[float, ...]


class RoadGraph:
    def __init__(self, nodes: dict[int, LatLon], edges: Iterable[RoadEdge]):
        self.nodes = dict(sorted(nodes.items()))
        if not self.nodes:
            raise ValidationFailure("road graph has no nodes")
        self.edges: dict[int, RoadEdge] = {}
        self.out: dict[int, list[RoadEdge]] = {n: [] for n in self.nodes}
        for e in sorted(edges, key=lambda e: e.edge_id):
            if e.edge_id in self.edges:
                raise ValidationFailure(f"duplicate edge id {e.edge_id}")
            if e.from_node not in self.nodes or e.to_node not in self.nodes:
                raise ValidationFailure(f"edge {e.edge_id} references a missing node")
            if not e.length > 0:
                raise ValidationFailure(f"edge {e.edge_id} has non-positive length")
            if e.walk_speed < 0 or e.drive_speed < 0:
                raise ValidationFailure(f"edge {e.edge_id} has a negative speed")
            self.edges[e.edge_id] = e
            self.out[e.from_node].append(e)
        self._ids = np.array(list(self.nodes))
        self._lats = np.array([p[0] for p in self.nodes.values()])
        self._lons = np.array([p[1] for p in self.nodes.values()])
        self.shortest = lru_cache(maxsize=1 << 16)(self._shortest)

    def __repr__(self) -> str:
        return f"RoadGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def snap(self, position: LatLon, radius: float = SNAP_RADIUS) -> int:
        """Nearest node id (ties by id) within ``radius`` meters."""
        d = distances_m(position, self._lats, self._lons)
        i = int(np.argmin(d))  # node ids are sorted, so the first minimum has the lowest id
        if d[i] > radius:
            raise SnapFailure(f"no road node within {radius:g} m of {position}")
        return int(self._ids[i])

    def _shortest(self, source: int, dest: int, mode: RoadMode) -> RoadPath:
        # label-setting search ordered by (duration, edge-id sequence)
        if source == dest:
            return RoadPath((), 0.0, 0.0, ())
        heap = [(0.0, (), source)]
        done = set()
        while heap:
            cost, path, node = heapq.heappop(heap)
            if node in done:
                continue
            done.add(node)
            if node == dest:
                return self._materialize(path, mode)
            for e in self.out[node]:
                v = e.speed(mode)
                if v <= 0 or e.to_node in done:
                    continue
                heapq.heappush(heap, (cost + e.length / v, path + (e.edge_id,), e.to_node))
        raise Unreachable(f"node {dest} unreachable from {source} by {mode}")

    def _materialize(self, path: tuple[int, ...], mode: RoadMode) -> RoadPath:
        t = 0.0
        dist = 0.0
        offsets = []
        for eid in path:
            e = self.edges[eid]
            offsets.append(t)
            t += e.length / e.speed(mode)
            dist += e.length
        return RoadPath(path, dist, t, tuple(offsets))


def road_route(graph: RoadGraph, origin: LatLon, dest: LatLon, mode: RoadMode) -> RoadPath:
    """Minimal-duration path between the nodes nearest ``origin`` and ``dest``."""
    if mode not in ("walk", "drive"):
        raise ValueError(f"unknown road mode {mode!r}")
    return graph.shortest(graph.snap(origin), graph.snap(dest), mode)
