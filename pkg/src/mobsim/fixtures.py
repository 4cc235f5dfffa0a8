"""Synthetic desk-scale city: every input file a run needs, generated deterministically.

Layout: a 5 km x 5 km square (20 x 20 cells of 250 m) with a 9 x 9 road
lattice, three two-way bus lines crossing near the center, and ~500 POIs.
"""
from __future__ import annotations

import csv
import json
import math
import random
from pathlib import Path

from mobsim.geography import METERS_PER_DEGREE

ORIGIN = (25.03, 121.50)  # SW corner
SIDE_M = 5000.0
GRID_CELLS = 20
LATTICE = 9

AGE_BANDS = {"18-29": 21, "30-44": 27, "45-64": 32, "65+": 20}
EDUCATION = {"secondary": 45, "bachelor": 40, "graduate": 15}
OCCUPATIONS = {
    "office clerk": 18,
    "elementary school teacher": 8,
    "software engineer": 10,
    "registered nurse": 8,
    "retail salesperson": 14,
    "restaurant cook": 10,
    "university student": 16,
    "retired": 16,
}
INCOME_BANDS = {"low": 30, "middle": 40, "high": 22, "very_high": 8}
SALARY_BANDS = [
    {"income_band": "low", "min": 15000.0, "max": 30000.0},
    {"income_band": "middle", "min": 30000.0, "max": 55000.0},
    {"income_band": "high", "min": 55000.0, "max": 90000.0},
    {"income_band": "very_high", "min": 90000.0, "max": 200000.0},
]
POPULATION_TOTAL = 100_000

INDUSTRIES = {
    "Education": "elementary school teacher, university student, schools, teaching, students, education",
    "Healthcare": "registered nurse, hospital, clinic, medical care, health",
    "Information Technology": "software engineer, computer programming, software development, technology",
    "Finance and Administration": "office clerk, office administration, banking, insurance, finance",
    "Retail": "retail salesperson, shops, stores, sales, retail trade",
    "Food Service": "restaurant cook, restaurants, kitchens, food preparation, catering",
    "Community Services": "retired, community centers, volunteering, senior services",
}
CATEGORIES = {
    "restaurant": "restaurant, dinner, late supper, dining, meals, food",
    "park": "walk in the park, parks, green space, outdoor stroll",
    "gym": "sports and exercise, gym, fitness, workout",
    "grocery": "grocery shopping, supermarket, market, food store",
    "school": "school, classes, teaching",
    "hospital": "hospital, clinic, medical",
    "office": "office, business, workplace",
    "store": "store, shop, retail",
    "community center": "community center, senior activities",
}
# category -> industries its POIs may carry
CATEGORY_INDUSTRY = {
    "restaurant": ["Food Service"],
    "park": [None],
    "gym": [None],
    "grocery": ["Retail"],
    "school": ["Education"],
    "hospital": ["Healthcare"],
    "office": ["Information Technology", "Finance and Administration"],
    "store": ["Retail"],
    "community center": ["Community Services"],
}
POI_MIX = {
    "restaurant": 90,
    "park": 40,
    "gym": 40,
    "grocery": 50,
    "school": 40,
    "hospital": 25,
    "office": 120,
    "store": 60,
    "community center": 35,
}


def _ref_lat() -> float:
    return ORIGIN[0] + SIDE_M / METERS_PER_DEGREE / 2.0


def to_latlon(x: float, y: float) -> tuple[float, float]:
    kx = math.cos(math.radians(_ref_lat())) * METERS_PER_DEGREE
    return (ORIGIN[0] + y / METERS_PER_DEGREE, ORIGIN[1] + x / kx)


def bbox() -> tuple[float, float, float, float]:
    top, right = to_latlon(SIDE_M, SIDE_M)
    return (ORIGIN[0], ORIGIN[1], top, right)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _clock(t: int) -> str:
    return f"{t // 3600:02d}:{t % 3600 // 60:02d}:{t % 60:02d}"


def _bus_lines():
    """Three lines as lists of (stop_id, x, y); lines A and B share the center stop."""
    mid = SIDE_M / 2
    xs = [300 + i * 550 for i in range(9)]
    line_a = [(f"A{i}", x, mid) if i != 4 else ("C0", mid, mid) for i, x in enumerate(xs)]
    line_b = [(f"B{i}", mid, y) if i != 4 else ("C0", mid, mid) for i, y in enumerate(xs)]
    line_c = [(f"D{i}", 400 + i * 600, 500 + i * 560) for i in range(8)]
    return {"A": line_a, "B": line_b, "D": line_c}


def write_gtfs(directory: Path, headway: int = 600, first: int = 6 * 3600, last: int = 23 * 3600) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    lines = _bus_lines()
    stops = {}
    for seq in lines.values():
        for sid, x, y in seq:
            stops[sid] = (x, y)
    _write_csv(
        directory / "stops.txt",
        ("stop_id", "stop_name", "stop_lat", "stop_lon"),
        [(sid, f"Stop {sid}", *(f"{v:.7f}" for v in to_latlon(*xy))) for sid, xy in sorted(stops.items())],
    )
    _write_csv(directory / "routes.txt", ("route_id", "route_short_name", "route_type"), [(r, f"Line {r}", 3) for r in lines])
    trips, times = [], []
    for rid, seq in lines.items():
        for direction, ordered in ((0, seq), (1, seq[::-1])):
            for k, start in enumerate(range(first, last + 1, headway)):
                tid = f"{rid}{direction}-{k:03d}"
                trips.append((rid, "daily", tid, direction))
                t = start
                for i, (sid, x, y) in enumerate(ordered):
                    if i:
                        px, py = ordered[i - 1][1], ordered[i - 1][2]
                        t += int(round(math.hypot(x - px, y - py) / 8.0))
                    times.append((tid, _clock(t), _clock(t + 30), sid, i + 1))
                    t += 30
    _write_csv(directory / "trips.txt", ("route_id", "service_id", "trip_id", "direction_id"), trips)
    _write_csv(
        directory / "stop_times.txt", ("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"), times
    )
    transfers = []
    ids = sorted(stops)
    for a in ids:
        for b in ids:
            if a == b or a[0] == b[0]:
                continue
            d = math.hypot(stops[a][0] - stops[b][0], stops[a][1] - stops[b][1])
            if d <= 450:
                transfers.append((a, b, 2, int(round(d / 1.3)) + 60, f"{d:.1f}"))
    _write_csv(
        directory / "transfers.txt",
        ("from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time", "length_m"),
        transfers,
    )


def write_roads(directory: Path) -> None:
    step = SIDE_M / (LATTICE - 1)
    nodes = []
    for r in range(LATTICE):
        for c in range(LATTICE):
            lat, lon = to_latlon(c * step, r * step)
            nodes.append((r * LATTICE + c, f"{lat:.7f}", f"{lon:.7f}"))
    _write_csv(directory / "nodes.csv", ("node_id", "lat", "lon"), nodes)
    edges = []
    arterial = LATTICE // 2
    for r in range(LATTICE):
        for c in range(LATTICE):
            n = r * LATTICE + c
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr >= LATTICE or cc >= LATTICE:
                    continue
                m = rr * LATTICE + cc
                fast = (dr == 0 and r == arterial) or (dc == 0 and c == arterial)
                drive = 13.9 if fast else 8.3
                for a, b in ((n, m), (m, n)):
                    edges.append((len(edges), a, b, f"{step:.1f}", 1.3, drive))
    _write_csv(directory / "edges.csv", ("edge_id", "from", "to", "length_m", "walk_speed", "drive_speed"), edges)


def make_desk_fixture(directory: Path, seed: int = 7, agents: int = 1000) -> Path:
    """Write the fixture files and a ``config.json`` into ``directory``; returns the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    rows = []
    for attr, table in (("age_band", AGE_BANDS), ("education", EDUCATION), ("occupation", OCCUPATIONS), ("income_band", INCOME_BANDS)):
        weight = sum(table.values())
        rows.extend((attr, cat, f"{POPULATION_TOTAL * v / weight:.6f}") for cat, v in table.items())
    _write_csv(directory / "marginals.csv", ("attribute_id", "category", "count"), rows)

    cell = SIDE_M / GRID_CELLS
    cells = []
    for r in range(GRID_CELLS):
        for c in range(GRID_CELLS):
            # richer toward the north-east, denser toward the center
            income = 25000 + 4000 * (r + c) + rng.uniform(-5000, 5000)
            centrality = 1.0 - math.hypot(r - 9.5, c - 9.5) / 14.0
            capacity = int(200 + 600 * centrality + rng.randint(0, 100))
            cells.append((r * GRID_CELLS + c, r, c, capacity, f"{income:.2f}"))
    _write_csv(directory / "cells.csv", ("cell_id", "row", "col", "capacity", "avg_income"), cells)

    pois = []
    pid = 0
    for category, count in POI_MIX.items():
        for _ in range(count):
            x, y = rng.uniform(50, SIDE_M - 50), rng.uniform(50, SIDE_M - 50)
            lat, lon = to_latlon(x, y)
            industry = rng.choice(CATEGORY_INDUSTRY[category]) or ""
            pois.append(
                (pid, f"{category} {pid}", category, industry, f"{lat:.7f}", f"{lon:.7f}",
                 f"{rng.uniform(0.1, 1.0):.4f}", f"{rng.uniform(0.3, 1.0):.4f}")
            )
            pid += 1
    _write_csv(
        directory / "pois.csv",
        ("poi_id", "name", "category", "industry", "lat", "lon", "popularity", "credibility"),
        pois,
    )
    _write_csv(directory / "industries.csv", ("industry", "description"), INDUSTRIES.items())
    _write_csv(directory / "categories.csv", ("category", "description"), CATEGORIES.items())
    write_roads(directory)
    write_gtfs(directory / "gtfs")

    config = {
        "inputs": {
            "marginals": "marginals.csv",
            "cells": "cells.csv",
            "pois": "pois.csv",
            "industries": "industries.csv",
            "categories": "categories.csv",
            "road_nodes": "nodes.csv",
            "road_edges": "edges.csv",
            "transit_feed": "gtfs",
        },
        "bbox": list(bbox()),
        "cell_size": cell,
        "salary_bands": SALARY_BANDS,
        "agents": agents,
        "seed": seed,
        "output_dir": "out",
    }
    path = directory / "config.json"
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path
