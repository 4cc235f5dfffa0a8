"""Heat-map bins, mobility indicators and the output files of a run."""
from __future__ import annotations

import csv
import io
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from mobsim.engine import MODES, TripRecord, emissions_for
from mobsim.errors import IoFailure
from mobsim.router.road import RoadGraph
from mobsim.router.transit import TransitNetwork

DAY = 86_400

TRIP_COLUMNS = (
    "agent_id",
    "trip_index",
    "mode",
    "depart",
    "arrive",
    "distance_m",
    "emissions_g",
    "purpose",
    "late",
    "failed",
    "segments",
    "error",
)


@dataclass(frozen=True, order=True)
class HeatmapBin:
    segment_id: str
    mode: str
    hour_bin: int
    count: int


def heatmap_counts(trips: Iterable[TripRecord], bin_width: int = 3600) -> Counter:
    """(segment, mode, bin) -> count; counters from different workers merge by addition."""
    if bin_width <= 0 or DAY % bin_width:
        raise ValueError("bin_width must divide 86400")
    n_bins = DAY // bin_width
    counts: Counter = Counter()
    for trip in trips:
        for seg, t in zip(trip.segments, trip.segment_entries):
            counts[(seg, trip.mode, int(t // bin_width) % n_bins)] += 1
    return counts


def accumulate_heatmap(trips: Iterable[TripRecord], bin_width: int = 3600) -> list[HeatmapBin]:
    counts = heatmap_counts(trips, bin_width)
    return [HeatmapBin(s, m, b, c) for (s, m, b), c in sorted(counts.items()) if c > 0]


@dataclass
class Indicators:
    mode_shares: dict[str, float]
    avg_distance: float
    avg_distance_by_mode: dict[str, float]
    total_emissions: float
    emissions_by_mode: dict[str, float]
    trip_count: int
    failed_trips: int = 0
    late_trips: int = 0
    empty: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def compute_indicators(trips: Sequence[TripRecord], factors: Optional[dict] = None) -> Indicators:
    """Mode shares, mean trip distance and emissions over successful trips.

    With ``factors`` given, emissions are recomputed from distance; otherwise
    each trip's recorded emissions are summed.
    """
    done = [t for t in trips if not t.failed]
    failed = len(trips) - len(done)
    late = sum(1 for t in done if t.late)
    if not done:
        zeros = {m: 0.0 for m in MODES}
        return Indicators(dict(zeros), 0.0, dict(zeros), 0.0, dict(zeros), 0, failed, 0, empty=True)
    per_mode = Counter(t.mode for t in done)
    dist_by_mode = {m: 0.0 for m in MODES}
    em_by_mode = {m: 0.0 for m in MODES}
    total_dist = 0.0
    total_em = 0.0
    for t in done:
        em = emissions_for(t.distance, t.mode, factors) if factors is not None else t.emissions
        dist_by_mode[t.mode] += t.distance
        em_by_mode[t.mode] += em
        total_dist += t.distance
        total_em += em
    n = len(done)
    return Indicators(
        mode_shares={m: per_mode[m] / n for m in MODES},
        avg_distance=total_dist / n,
        avg_distance_by_mode={m: (dist_by_mode[m] / per_mode[m] if per_mode[m] else 0.0) for m in MODES},
        total_emissions=total_em,
        emissions_by_mode=em_by_mode,
        trip_count=n,
        failed_trips=failed,
        late_trips=late,
    )


# --------------------------------------------------------------------------
# files


def segment_geometry(segment_id: str, roads: Optional[RoadGraph], transit: Optional[TransitNetwork]) -> list[list[float]]:
    """[[lon, lat], [lon, lat]] of a segment id (``edge:N``, ``hop:A>B`` or ``foot:A>B``)."""
    kind, _, ident = segment_id.partition(":")
    if kind == "edge" and roads is not None:
        e = roads.edges[int(ident)]
        ends = (roads.nodes[e.from_node], roads.nodes[e.to_node])
    elif kind in ("hop", "foot") and transit is not None:
        a, _, b = ident.partition(">")
        ends = (transit.stops[a].position, transit.stops[b].position)
    else:
        raise KeyError(f"no geometry for segment {segment_id!r}")
    return [[lon, lat] for lat, lon in ends]


def heatmap_geojson(bins: Sequence[HeatmapBin], roads, transit) -> dict:
    features = []
    for b in bins:
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": segment_geometry(b.segment_id, roads, transit)},
                "properties": {"segment_id": b.segment_id, "mode": b.mode, "hour": b.hour_bin, "count": b.count},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def trips_csv(trips: Sequence[TripRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIP_COLUMNS)
    for t in trips:
        w.writerow(
            [
                t.agent_id,
                t.trip_index,
                t.mode,
                _fmt(t.depart),
                _fmt(t.arrive),
                _fmt(t.distance),
                _fmt(t.emissions),
                t.purpose,
                int(t.late),
                int(t.failed),
                ";".join(t.segments),
                t.error or "",
            ]
        )
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_jsonl(path: Path, records: Iterable[dict]) -> None:
    _write(Path(path), "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))


def read_jsonl(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def trip_to_dict(t: TripRecord) -> dict:
    d = asdict(t)
    d["segments"] = list(t.segments)
    d["segment_entries"] = list(t.segment_entries)
    return d


def trip_from_dict(d: dict) -> TripRecord:
    d = dict(d)
    d["segments"] = tuple(d["segments"])
    d["segment_entries"] = tuple(d["segment_entries"])
    return TripRecord(**d)


def export_outputs(
    trips: Sequence[TripRecord],
    bins: Sequence[HeatmapBin],
    indicators: Indicators,
    out_dir: Path,
    profiles: Sequence = (),
    roads: Optional[RoadGraph] = None,
    transit: Optional[TransitNetwork] = None,
) -> list[Path]:
    """Write trips.csv, heatmap.geojson, indicators.json and population.jsonl."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise IoFailure(f"{out_dir} is not writable")
    paths = [out_dir / n for n in ("trips.csv", "heatmap.geojson", "indicators.json", "population.jsonl")]
    _write(paths[0], trips_csv(trips))
    _write(paths[1], json.dumps(heatmap_geojson(bins, roads, transit), separators=(",", ":")) + "\n")
    _write(paths[2], json.dumps(indicators.to_dict(), indent=2, sort_keys=True) + "\n")
    write_jsonl(paths[3], (p.to_dict() for p in profiles))
    return paths
