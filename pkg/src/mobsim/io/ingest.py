"""CSV and GTFS-subset readers.

Every reader names the file and line of the first row it cannot parse.
Timetable rows that parse but are semantically unusable are not fatal: they
land in an :class:`IngestReport` so accepted + rejected always equals the
number of data rows.
"""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from mobsim.errors import EmptyNetwork, MalformedRow, MissingFile
from mobsim.geography import IndustryCatalog, Poi, distance_m
from mobsim.population import MarginalTable, SalaryBand
from mobsim.router.road import RoadEdge, RoadGraph
from mobsim.router.transit import Footpath, Stop, TransitNetwork, TripTimes

logger = logging.getLogger(__name__)

GTFS_FILES = ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt", "transfers.txt")
DEFAULT_TRANSFER_WALK_SPEED = 1.3  # m/s, when transfers.txt gives no min_transfer_time


def read_rows(path: Path, required: tuple[str, ...]) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, row)`` for each data row; the header is line 1."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            raise MalformedRow(path.name, 1, f"missing columns {missing}")
        for row in reader:
            line = reader.line_num
            if None in row or any(row.get(c) is None for c in required):
                raise MalformedRow(path.name, line, "wrong number of fields")
            yield line, {k: (v.strip() if isinstance(v, str) else v) for k, v in row.items()}


def _parse(path: Path, line: int, fn: Callable, value, what: str):
    try:
        return fn(value)
    except (TypeError, ValueError) as exc:
        raise MalformedRow(Path(path).name, line, f"bad {what} {value!r}") from exc


def read_marginals(path: Path) -> list[MarginalTable]:
    """``attribute_id,category,count``; attributes and categories keep file order."""
    grouped: dict[str, tuple[list[str], list[float]]] = {}
    for line, row in read_rows(path, ("attribute_id", "category", "count")):
        count = _parse(path, line, float, row["count"], "count")
        if count < 0:
            raise MalformedRow(Path(path).name, line, "negative count")
        labels, counts = grouped.setdefault(row["attribute_id"], ([], []))
        labels.append(row["category"])
        counts.append(count)
    return [MarginalTable(attr, tuple(labels), tuple(counts)) for attr, (labels, counts) in grouped.items()]


def read_salary_bands(path: Path) -> list[SalaryBand]:
    """``income_band,min,max`` (currency per month)."""
    return [
        SalaryBand(row["income_band"], _parse(path, ln, float, row["min"], "min"), _parse(path, ln, float, row["max"], "max"))
        for ln, row in read_rows(path, ("income_band", "min", "max"))
    ]


def read_cells(path: Path) -> list[dict]:
    """``cell_id,row,col,capacity,avg_income``."""
    out = []
    for line, row in read_rows(path, ("cell_id", "row", "col", "capacity", "avg_income")):
        rec = {
            "cell_id": _parse(path, line, int, row["cell_id"], "cell_id"),
            "row": _parse(path, line, int, row["row"], "row"),
            "col": _parse(path, line, int, row["col"], "col"),
            "capacity": _parse(path, line, int, row["capacity"], "capacity"),
            "avg_income": _parse(path, line, float, row["avg_income"], "avg_income"),
        }
        if rec["capacity"] < 0:
            raise MalformedRow(Path(path).name, line, "negative capacity")
        out.append(rec)
    return out


def read_pois(path: Path) -> list[Poi]:
    """``poi_id,name,category,industry,lat,lon,popularity,credibility``; industry may be blank."""
    out = []
    cols = ("poi_id", "name", "category", "industry", "lat", "lon", "popularity", "credibility")
    for line, row in read_rows(path, cols):
        try:
            out.append(
                Poi(
                    poi_id=int(row["poi_id"]),
                    name=row["name"],
                    category=row["category"],
                    industry=row["industry"] or None,
                    position=(float(row["lat"]), float(row["lon"])),
                    popularity=float(row["popularity"]),
                    credibility=float(row["credibility"]),
                )
            )
        except ValueError as exc:
            raise MalformedRow(Path(path).name, line, str(exc)) from exc
    return out


def read_catalog(path: Path, label_column: str) -> list[tuple[str, str]]:
    """Two-column ``<label_column>,description`` catalog."""
    return [(row[label_column], row["description"]) for _, row in read_rows(path, (label_column, "description"))]


def read_industries(path: Path) -> IndustryCatalog:
    return IndustryCatalog(tuple(read_catalog(path, "industry")))


def read_categories(path: Path) -> list[tuple[str, str]]:
    return read_catalog(path, "category")


def read_road_graph(nodes_path: Path, edges_path: Path) -> RoadGraph:
    nodes = {}
    for line, row in read_rows(nodes_path, ("node_id", "lat", "lon")):
        nid = _parse(nodes_path, line, int, row["node_id"], "node_id")
        nodes[nid] = (_parse(nodes_path, line, float, row["lat"], "lat"), _parse(nodes_path, line, float, row["lon"], "lon"))
    edges = []
    for line, row in read_rows(edges_path, ("edge_id", "from", "to", "length_m", "walk_speed", "drive_speed")):
        p = edges_path
        edges.append(
            RoadEdge(
                _parse(p, line, int, row["edge_id"], "edge_id"),
                _parse(p, line, int, row["from"], "from"),
                _parse(p, line, int, row["to"], "to"),
                _parse(p, line, float, row["length_m"], "length_m"),
                _parse(p, line, float, row["walk_speed"], "walk_speed"),
                _parse(p, line, float, row["drive_speed"], "drive_speed"),
            )
        )
    return RoadGraph(nodes, edges)


# --------------------------------------------------------------------------
# GTFS subset

_GTFS_TIME = re.compile(r"^(\d{1,3}):([0-5]\d):([0-5]\d)$")


def parse_gtfs_time(text: str) -> int:
    """``H:MM:SS`` to seconds; hours may exceed 23 for after-midnight service."""
    m = _GTFS_TIME.match(text)
    if not m:
        raise ValueError(f"not a GTFS time: {text!r}")
    h, mi, s = (int(g) for g in m.groups())
    return h * 3600 + mi * 60 + s


@dataclass(frozen=True)
class Rejection:
    file: str
    line: int
    reason: str
    trip_id: str = ""


@dataclass
class IngestReport:
    total_rows: dict[str, int] = field(default_factory=dict)
    accepted_rows: dict[str, int] = field(default_factory=dict)
    rejected: list[Rejection] = field(default_factory=list)

    @property
    def rejected_trip_ids(self) -> list[str]:
        return sorted({r.trip_id for r in self.rejected if r.trip_id})

    def rejected_rows(self, file: str) -> int:
        return sum(1 for r in self.rejected if r.file == file)


def ingest_transit_feed(directory: Path) -> TransitNetwork:
    """Load a GTFS-subset directory into a validated network.

    Trips whose times run backwards, or that reference unknown stops or
    trips, are dropped and listed in ``network.report``. Routes with
    overtaking trips are split into separate routes.
    """
    directory = Path(directory)
    for name in GTFS_FILES:
        if not (directory / name).is_file():
            raise MissingFile(str(directory / name))
    report = IngestReport()

    stops = []
    for line, row in read_rows(directory / "stops.txt", ("stop_id", "stop_name", "stop_lat", "stop_lon")):
        p = directory / "stops.txt"
        stops.append(
            Stop(
                row["stop_id"],
                row["stop_name"],
                (_parse(p, line, float, row["stop_lat"], "stop_lat"), _parse(p, line, float, row["stop_lon"], "stop_lon")),
            )
        )
    stop_ids = {s.stop_id for s in stops}
    positions = {s.stop_id: s.position for s in stops}
    route_ids = {row["route_id"] for _, row in read_rows(directory / "routes.txt", ("route_id",))}

    trip_route: dict[str, str] = {}
    n = 0
    for line, row in read_rows(directory / "trips.txt", ("route_id", "trip_id")):
        n += 1
        if row["route_id"] not in route_ids:
            report.rejected.append(Rejection("trips.txt", line, f"unknown route {row['route_id']}", row["trip_id"]))
            continue
        trip_route[row["trip_id"]] = row["route_id"]
    report.total_rows["trips.txt"] = n
    report.accepted_rows["trips.txt"] = len(trip_route)

    path = directory / "stop_times.txt"
    rows_by_trip: dict[str, list[tuple[int, int, str, int, int]]] = {}
    n = 0
    for line, row in read_rows(path, ("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence")):
        n += 1
        seq = _parse(path, line, int, row["stop_sequence"], "stop_sequence")
        arr = _parse(path, line, parse_gtfs_time, row["arrival_time"], "arrival_time")
        dep = _parse(path, line, parse_gtfs_time, row["departure_time"], "departure_time")
        tid = row["trip_id"]
        if tid not in trip_route:
            report.rejected.append(Rejection("stop_times.txt", line, "unknown trip", tid))
            continue
        if row["stop_id"] not in stop_ids:
            report.rejected.append(Rejection("stop_times.txt", line, f"unknown stop {row['stop_id']}", tid))
            continue
        rows_by_trip.setdefault(tid, []).append((seq, line, row["stop_id"], arr, dep))
    report.total_rows["stop_times.txt"] = n

    trips = []
    accepted = 0
    for tid in sorted(rows_by_trip):
        rows = sorted(rows_by_trip[tid])
        trip = TripTimes(
            tid,
            trip_route[tid],
            tuple(r[2] for r in rows),
            tuple(r[3] for r in rows),
            tuple(r[4] for r in rows),
        )
        problems = trip.problems()
        if len({r[0] for r in rows}) != len(rows):
            problems.append("duplicate stop_sequence")
        if problems:
            logger.warning("trip %s rejected: %s", tid, problems[0])
            report.rejected.extend(Rejection("stop_times.txt", r[1], problems[0], tid) for r in rows)
            continue
        accepted += len(rows)
        trips.append(trip)
    report.accepted_rows["stop_times.txt"] = accepted

    path = directory / "transfers.txt"
    footpaths = []
    n = 0
    for line, row in read_rows(path, ("from_stop_id", "to_stop_id")):
        n += 1
        a, b = row["from_stop_id"], row["to_stop_id"]
        if a not in stop_ids or b not in stop_ids:
            report.rejected.append(Rejection("transfers.txt", line, "unknown stop"))
            continue
        length = row.get("length_m") or ""
        length = _parse(path, line, float, length, "length_m") if length else distance_m(positions[a], positions[b])
        duration = row.get("min_transfer_time") or ""
        duration = (
            _parse(path, line, int, duration, "min_transfer_time")
            if duration
            else int(round(length / DEFAULT_TRANSFER_WALK_SPEED))
        )
        footpaths.append(Footpath(a, b, duration, length))
    report.total_rows["transfers.txt"] = n
    report.accepted_rows["transfers.txt"] = len(footpaths)

    if not trips:
        raise EmptyNetwork(f"{directory}: no valid trips")
    net = TransitNetwork.from_trips(stops, trips, footpaths)
    net.report = report
    return net
