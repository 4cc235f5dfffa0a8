"""Grid, points of interest, home allocation and routine-location assignment."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from mobsim.errors import (
    DegenerateBbox,
    EmptyCatalog,
    InsufficientCapacity,
    NoRoutinePoi,
    ValidationFailure,
)
from mobsim.providers import ProviderConfig, complete_structured, occupation_request

METERS_PER_DEGREE = 111_320.0
DEFAULT_CELL_SIZE = 250.0

LatLon = tuple[float, float]


def distance_m(a: LatLon, b: LatLon) -> float:
    """Equirectangular distance in meters, scaled at the pair's mean latitude."""
    k = math.cos(math.radians((a[0] + b[0]) / 2.0))
    dx = (b[1] - a[1]) * k * METERS_PER_DEGREE
    dy = (b[0] - a[0]) * METERS_PER_DEGREE
    return math.hypot(dx, dy)


def distances_m(origin: LatLon, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    k = np.cos(np.radians((origin[0] + lats) / 2.0))
    dx = (lons - origin[1]) * k * METERS_PER_DEGREE
    dy = (lats - origin[0]) * METERS_PER_DEGREE
    return np.hypot(dx, dy)


# --------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class GridSpec:
    origin: LatLon  # SW corner
    cell_size: float
    rows: int
    cols: int
    ref_lat: float

    @property
    def _kx(self) -> float:
        return math.cos(math.radians(self.ref_lat)) * METERS_PER_DEGREE

    def to_xy(self, lat: float, lon: float) -> tuple[float, float]:
        return ((lon - self.origin[1]) * self._kx, (lat - self.origin[0]) * METERS_PER_DEGREE)

    def to_latlon(self, x: float, y: float) -> LatLon:
        return (self.origin[0] + y / METERS_PER_DEGREE, self.origin[1] + x / self._kx)

    def cell_id(self, row: int, col: int) -> int:
        return row * self.cols + col

    def centroid(self, row: int, col: int) -> LatLon:
        return self.to_latlon((col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size)

    def cell_of(self, lat: float, lon: float) -> int:
        """Cell id containing a point; points on the far grid edge belong to the last cell."""
        x, y = self.to_xy(lat, lon)
        eps = 1e-6 * self.cell_size
        if not (-eps <= x <= self.cols * self.cell_size + eps and -eps <= y <= self.rows * self.cell_size + eps):
            raise ValueError(f"point ({lat}, {lon}) lies outside the grid")
        col = min(max(int(math.floor(x / self.cell_size)), 0), self.cols - 1)
        row = min(max(int(math.floor(y / self.cell_size)), 0), self.rows - 1)
        return self.cell_id(row, col)


@dataclass
class GridCell:
    cell_id: int
    row: int
    col: int
    centroid: LatLon
    capacity: int = 0
    avg_income: float = 0.0


def build_grid(
    bbox: tuple[float, float, float, float], cell_size: float = DEFAULT_CELL_SIZE
) -> tuple[GridSpec, list[GridCell]]:
    """Cover ``bbox = (min_lat, min_lon, max_lat, max_lon)`` with square cells."""
    min_lat, min_lon, max_lat, max_lon = bbox
    if not (max_lat > min_lat and max_lon > min_lon) or cell_size <= 0:
        raise DegenerateBbox(f"bbox {bbox} with cell size {cell_size}")
    ref_lat = (min_lat + max_lat) / 2.0
    width = (max_lon - min_lon) * math.cos(math.radians(ref_lat)) * METERS_PER_DEGREE
    height = (max_lat - min_lat) * METERS_PER_DEGREE
    # absorb round-off from bboxes built by inverting the projection
    cols = max(1, math.ceil(width / cell_size - 1e-9))
    rows = max(1, math.ceil(height / cell_size - 1e-9))
    spec = GridSpec((min_lat, min_lon), float(cell_size), rows, cols, ref_lat)
    cells = [
        GridCell(spec.cell_id(r, c), r, c, spec.centroid(r, c)) for r in range(rows) for c in range(cols)
    ]
    return spec, cells


def apply_cell_attributes(cells: list[GridCell], rows: Iterable[dict]) -> None:
    """Set capacity and average income from ingested cell rows (keyed by cell_id)."""
    by_id = {c.cell_id: c for c in cells}
    for row in rows:
        cell = by_id.get(int(row["cell_id"]))
        if cell is None:
            raise ValidationFailure(f"cell_id {row['cell_id']} is not on the grid")
        if (int(row["row"]), int(row["col"])) != (cell.row, cell.col):
            raise ValidationFailure(f"cell_id {cell.cell_id} has row/col {row['row']},{row['col']}")
        cell.capacity = int(row["capacity"])
        cell.avg_income = float(row["avg_income"])


def allocate_homes(profiles: Sequence, cells: Sequence[GridCell]) -> dict[int, int]:
    """Greedy income matching.

    Agents go in descending income order (ties by agent id); each takes the
    cell with spare capacity whose average income is closest to its own
    (ties by cell id).
    """
    needed = len(profiles)
    capacity = sum(max(c.capacity, 0) for c in cells)
    if capacity < needed:
        raise InsufficientCapacity(f"{needed} agents but total capacity {capacity}")
    ordered_cells = sorted(cells, key=lambda c: c.cell_id)
    ids = np.array([c.cell_id for c in ordered_cells])
    avg = np.array([c.avg_income for c in ordered_cells], dtype=float)
    remaining = np.array([max(c.capacity, 0) for c in ordered_cells])
    open_avg = np.where(remaining > 0, avg, np.inf)

    out = {}
    for p in sorted(profiles, key=lambda p: (-p.monthly_income, p.agent_id)):
        j = int(np.argmin(np.abs(open_avg - p.monthly_income)))
        out[p.agent_id] = int(ids[j])
        remaining[j] -= 1
        if remaining[j] == 0:
            open_avg[j] = np.inf
    return out


# --------------------------------------------------------------------------
# points of interest


@dataclass(frozen=True)
class Poi:
    poi_id: int
    name: str
    category: str
    industry: Optional[str]
    position: LatLon
    popularity: float
    credibility: float

    def __post_init__(self):
        for name in ("popularity", "credibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationFailure(f"poi {self.poi_id}: {name} {v} outside [0, 1]")

    @property
    def attractiveness(self) -> float:
        return self.popularity * self.credibility


@dataclass(frozen=True)
class CategoryArrays:
    ids: np.ndarray
    lats: np.ndarray
    lons: np.ndarray
    attractiveness: np.ndarray


class PoiIndex:
    """Read-only lookup of POIs by id, industry and category."""

    def __init__(self, pois: Iterable[Poi]):
        self.by_id: dict[int, Poi] = {}
        for p in sorted(pois, key=lambda p: p.poi_id):
            if p.poi_id in self.by_id:
                raise ValidationFailure(f"duplicate poi_id {p.poi_id}")
            self.by_id[p.poi_id] = p
        industries: dict[str, list[int]] = {}
        categories: dict[str, list[Poi]] = {}
        for p in self.by_id.values():
            if p.industry:
                industries.setdefault(p.industry, []).append(p.poi_id)
            categories.setdefault(p.category, []).append(p)
        self.by_industry = {k: tuple(v) for k, v in industries.items()}
        self.by_category = {
            k: CategoryArrays(
                np.array([p.poi_id for p in v]),
                np.array([p.position[0] for p in v]),
                np.array([p.position[1] for p in v]),
                np.array([p.attractiveness for p in v]),
            )
            for k, v in categories.items()
        }

    def __len__(self) -> int:
        return len(self.by_id)

    def __getitem__(self, poi_id: int) -> Poi:
        return self.by_id[poi_id]


# --------------------------------------------------------------------------
# text similarity


def trigram_vector(text: str) -> Counter:
    t = " ".join(text.lower().split())
    if len(t) < 3:
        return Counter([t]) if t else Counter()
    return Counter(t[i : i + 3] for i in range(len(t) - 2))


def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(v * b[k] for k, v in a.items() if k in b)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


def text_similarity(a: str, b: str) -> float:
    """Cosine similarity of character-trigram counts of the lowercased texts."""
    return cosine(trigram_vector(a), trigram_vector(b))


class TextMatcher:
    """Argmax trigram-cosine lookup against a fixed list of (label, description)."""

    def __init__(self, entries: Sequence[tuple[str, str]]):
        if not entries:
            raise EmptyCatalog("no entries to match against")
        self.entries = [(label, trigram_vector(desc)) for label, desc in entries]

    def best(self, text: str) -> str:
        vec = trigram_vector(text)
        scored = [(-cosine(vec, v), label) for label, v in self.entries]
        return min(scored)[1]


@dataclass(frozen=True)
class IndustryCatalog:
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(a), str(b)) for a, b in self.entries))
        labels = [label for label, _ in self.entries]
        if len(set(labels)) != len(labels):
            raise ValidationFailure("industry labels must be unique")
        if any(not desc.strip() for _, desc in self.entries):
            raise ValidationFailure("industry descriptions must be non-empty")

    @cached_property
    def matcher(self) -> TextMatcher:
        return TextMatcher(self.entries)


def describe_occupation(occupation: str, provider: ProviderConfig, client=None) -> str:
    return complete_structured(occupation_request(occupation), provider, client=client).value["description"]


def match_industry(occupation: str, catalog: IndustryCatalog, provider: ProviderConfig, client=None) -> str:
    """Industry whose description is most similar to the occupation's generated description."""
    if not catalog.entries:
        raise EmptyCatalog("industry catalog is empty")
    return catalog.matcher.best(describe_occupation(occupation, provider, client))


def assign_routine(agent, industry: str, pois: PoiIndex, stream) -> int:
    """Uniform draw over the POIs of ``industry`` (sorted by id)."""
    ids = pois.by_industry.get(industry)
    if not ids:
        raise NoRoutinePoi(f"no POI in industry {industry!r}")
    return ids[stream.randrange(len(ids))]
