"""Synthetic population: LLM-seeded joint table, IPF fitting, profile sampling."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from mobsim.errors import (
    EmptyJoint,
    InconsistentTotals,
    NoConvergence,
    SchemaViolation,
    StructuralZero,
    ValidationFailure,
)
from mobsim.providers import ProviderConfig, complete_structured, joint_seed_request
from mobsim.streams import derive_stream

logger = logging.getLogger(__name__)

TOTALS_RTOL = 0.005
MODES = ("walk", "transit", "drive")

# base (walk, transit, drive) preference weights per occupation class
BASE_MODE_PREFS: dict[str, tuple[float, float, float]] = {
    "office-worker": (0.20, 0.45, 0.35),
    "student": (0.35, 0.60, 0.05),
    "retiree": (0.50, 0.40, 0.10),
    "service-worker": (0.25, 0.45, 0.30),
}
MODE_PREF_JITTER = 0.05

_CLASS_KEYWORDS = (
    ("student", ("student", "pupil")),
    ("retiree", ("retire", "pension")),
    (
        "service-worker",
        ("service", "retail", "sales", "shop", "cook", "chef", "waiter", "driver", "clean", "security", "labor", "craft"),
    ),
)


def occupation_class(occupation: str) -> str:
    """Coarse class used for schedule templates and mode preferences."""
    text = occupation.lower()
    for cls, words in _CLASS_KEYWORDS:
        if any(w in text for w in words):
            return cls
    return "office-worker"


@dataclass(frozen=True)
class MarginalTable:
    attribute_id: str
    category_labels: tuple[str, ...]
    counts: tuple[float, ...]
    total: float = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "category_labels", tuple(self.category_labels))
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if len(self.counts) != len(self.category_labels):
            raise ValidationFailure(f"{self.attribute_id}: counts and labels differ in length")
        if len(set(self.category_labels)) != len(self.category_labels):
            raise ValidationFailure(f"{self.attribute_id}: duplicate category labels")
        if any(c < 0 or not math.isfinite(c) for c in self.counts):
            raise ValidationFailure(f"{self.attribute_id}: counts must be finite and >= 0")
        s = math.fsum(self.counts)
        if self.total is None:
            object.__setattr__(self, "total", s)
        if not self.total > 0:
            raise ValidationFailure(f"{self.attribute_id}: total must be > 0")
        if abs(s - self.total) > 1e-9 * self.total:
            raise ValidationFailure(f"{self.attribute_id}: counts sum {s} != total {self.total}")

    def scaled_to(self, total: float) -> "MarginalTable":
        f = total / self.total
        return MarginalTable(self.attribute_id, self.category_labels, tuple(c * f for c in self.counts))


@dataclass
class JointTable:
    dims: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...]
    cells: np.ndarray
    total: float = None  # type: ignore[assignment]

    def __post_init__(self):
        self.dims = tuple(self.dims)
        self.categories = tuple(tuple(c) for c in self.categories)
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != tuple(len(c) for c in self.categories) or len(self.dims) != self.cells.ndim:
            raise ValidationFailure("joint table shape does not match its categories")
        if np.any(self.cells < 0) or not np.all(np.isfinite(self.cells)):
            raise ValidationFailure("joint table cells must be finite and >= 0")
        s = float(self.cells.sum())
        if self.total is None:
            self.total = s
        elif abs(s - self.total) > 1e-9 * max(abs(self.total), 1e-300):
            raise ValidationFailure(f"joint cells sum {s} != total {self.total}")

    def projection(self, dim: str) -> np.ndarray:
        axis = self.dims.index(dim)
        others = tuple(i for i in range(self.cells.ndim) if i != axis)
        return self.cells.sum(axis=others)


@dataclass(frozen=True)
class SalaryBand:
    label: str
    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ValidationFailure(f"salary band {self.label}: min must be < max")


def check_bands(bands: Iterable[SalaryBand]) -> dict[str, SalaryBand]:
    ordered = sorted(bands, key=lambda b: b.min)
    for a, b in zip(ordered, ordered[1:]):
        if b.min < a.max:
            raise ValidationFailure(f"salary bands {a.label} and {b.label} overlap")
    out = {b.label: b for b in ordered}
    if len(out) != len(ordered):
        raise ValidationFailure("duplicate salary band labels")
    return out


@dataclass
class AgentProfile:
    agent_id: int
    age_band: str
    education: str
    occupation: str
    income_band: str
    monthly_income: float
    mode_prefs: tuple[float, float, float]
    home_cell_id: Optional[int] = None
    routine_poi_id: Optional[int] = None

    @property
    def occupation_class(self) -> str:
        return occupation_class(self.occupation)

    def pref(self, mode: str) -> float:
        return self.mode_prefs[MODES.index(mode)]

    def to_dict(self) -> dict:
        # key order is part of the JSONL export format
        return {
            "agent_id": self.agent_id,
            "age_band": self.age_band,
            "education": self.education,
            "occupation": self.occupation,
            "income_band": self.income_band,
            "monthly_income": self.monthly_income,
            "mode_prefs": {m: p for m, p in zip(MODES, self.mode_prefs)},
            "home_cell_id": self.home_cell_id,
            "routine_poi_id": self.routine_poi_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentProfile":
        prefs = d["mode_prefs"]
        return cls(
            agent_id=int(d["agent_id"]),
            age_band=d["age_band"],
            education=d["education"],
            occupation=d["occupation"],
            income_band=d["income_band"],
            monthly_income=float(d["monthly_income"]),
            mode_prefs=tuple(float(prefs[m]) for m in MODES),
            home_cell_id=d.get("home_cell_id"),
            routine_poi_id=d.get("routine_poi_id"),
        )


def _check_totals(marginals: Sequence[MarginalTable]) -> float:
    ref = marginals[0].total
    for m in marginals[1:]:
        if abs(m.total - ref) > TOTALS_RTOL * ref:
            raise InconsistentTotals(
                f"marginal {m.attribute_id} totals {m.total}, but {marginals[0].attribute_id} totals {ref}"
            )
    return ref


def seed_joint_from_llm(
    marginals: Sequence[MarginalTable], provider: ProviderConfig, client=None
) -> JointTable:
    """Ask the provider for a correlated joint table consistent with ``marginals``."""
    if len(marginals) < 2:
        raise ValidationFailure("at least two marginals are needed to seed a joint table")
    total = _check_totals(marginals)
    request = joint_seed_request(
        [
            {"attribute_id": m.attribute_id, "categories": list(m.category_labels), "counts": list(m.counts)}
            for m in marginals
        ],
        total,
    )
    value = complete_structured(request, provider, client=client).value
    shape = tuple(len(m.category_labels) for m in marginals)
    if tuple(value["shape"]) != shape or list(value["dims"]) != [m.attribute_id for m in marginals]:
        raise SchemaViolation(f"joint seed has dims/shape {value['dims']}/{value['shape']}, expected {shape}")
    cells = np.asarray(value["cells"], dtype=float).reshape(shape)
    s = cells.sum()
    if s <= 0:
        raise SchemaViolation("joint seed has no mass")
    cells = cells * (total / s)
    return JointTable(
        dims=tuple(m.attribute_id for m in marginals),
        categories=tuple(m.category_labels for m in marginals),
        cells=cells,
        total=float(cells.sum()),
    )


def _max_rel_deviation(cells: np.ndarray, targets: list[np.ndarray]) -> float:
    worst = 0.0
    for axis, t in enumerate(targets):
        others = tuple(i for i in range(cells.ndim) if i != axis)
        proj = cells.sum(axis=others)
        with np.errstate(divide="ignore", invalid="ignore"):
            dev = np.where(t > 0, np.abs(proj - t) / np.where(t > 0, t, 1.0), np.where(proj > 0, np.inf, 0.0))
        worst = max(worst, float(dev.max()))
    return worst


def ipf_fit(
    seed: JointTable, marginals: Sequence[MarginalTable], tol: float = 1e-6, max_iter: int = 1000
) -> JointTable:
    """Scale ``seed`` until every attribute projection matches its marginal.

    Dimensions are scaled in ``seed.dims`` order and convergence is checked
    after each full sweep. Zero cells in the seed stay zero.
    """
    by_id = {m.attribute_id: m for m in marginals}
    if set(by_id) != set(seed.dims) or len(by_id) != len(marginals):
        raise ValidationFailure(f"marginals {sorted(by_id)} do not match joint dims {list(seed.dims)}")
    ordered = [by_id[d] for d in seed.dims]
    total = _check_totals(ordered)
    targets = []
    for axis, m in enumerate(ordered):
        if m.category_labels != seed.categories[axis]:
            raise ValidationFailure(f"{m.attribute_id}: category labels differ from the seed's")
        # totals within the accepted band are reconciled to the first marginal's total
        targets.append(np.asarray(m.scaled_to(total).counts if m.total != total else m.counts, dtype=float))

    cells = seed.cells.astype(float).copy()
    support = cells > 0
    for axis, t in enumerate(targets):
        others = tuple(i for i in range(cells.ndim) if i != axis)
        reachable = support.any(axis=others)
        bad = np.nonzero((t > 0) & ~reachable)[0]
        if bad.size:
            label = seed.categories[axis][bad[0]]
            raise StructuralZero(f"{seed.dims[axis]}={label} has target > 0 but only zero seed cells")

    if _max_rel_deviation(cells, targets) <= tol:
        return JointTable(seed.dims, seed.categories, cells, float(cells.sum()))

    ndim = cells.ndim
    for iteration in range(1, max_iter + 1):
        for axis, t in enumerate(targets):
            others = tuple(i for i in range(ndim) if i != axis)
            proj = cells.sum(axis=others)
            factor = np.divide(t, proj, out=np.zeros_like(t), where=proj > 0)
            shape = [1] * ndim
            shape[axis] = -1
            cells *= factor.reshape(shape)
        dev = _max_rel_deviation(cells, targets)
        if dev <= tol:
            logger.debug("IPF converged after %d sweeps (deviation %.3g)", iteration, dev)
            return JointTable(seed.dims, seed.categories, cells, float(cells.sum()))
    raise NoConvergence(f"IPF deviation {dev:.3g} > tol {tol:g} after {max_iter} sweeps")


def _mode_prefs(cls: str, stream) -> tuple[float, float, float]:
    base = BASE_MODE_PREFS.get(cls, BASE_MODE_PREFS["office-worker"])
    raw = [max(0.0, b + stream.uniform(-MODE_PREF_JITTER, MODE_PREF_JITTER)) for b in base]
    s = sum(raw)
    if s <= 0:
        raw, s = list(base), sum(base)
    walk, transit = raw[0] / s, raw[1] / s
    return (walk, transit, 1.0 - walk - transit)


_PROFILE_DIMS = ("age_band", "education", "occupation", "income_band")


def sample_profiles(
    joint: JointTable,
    n: int,
    bands: Iterable[SalaryBand],
    master_seed: int,
    start_id: int = 0,
) -> list[AgentProfile]:
    """Draw ``n`` agents from ``joint``; agent ``i`` uses its own derived stream.

    Dims named ``age_band``, ``education``, ``occupation`` and ``income_band``
    populate the matching profile fields; absent ones are left empty.
    ``start_id`` lets workers sample disjoint id ranges with identical results.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return []
    flat = joint.cells.reshape(-1)
    mass = float(flat.sum())
    if mass <= 0:
        raise EmptyJoint("joint table has no mass")
    band_map = check_bands(bands)
    axis_of = {d: joint.dims.index(d) for d in _PROFILE_DIMS if d in joint.dims}
    if "income_band" in axis_of:
        missing = set(joint.categories[axis_of["income_band"]]) - set(band_map)
        if missing:
            raise ValidationFailure(f"no salary band for income categories {sorted(missing)}")

    cdf = np.cumsum(flat) / mass
    last = int(np.nonzero(flat)[0][-1])
    cdf[last:] = 1.0
    shape = joint.cells.shape

    profiles = []
    for agent_id in range(start_id, start_id + n):
        stream = derive_stream(master_seed, agent_id, "profile")
        idx = int(np.searchsorted(cdf, stream.random(), side="right"))
        combo = np.unravel_index(min(idx, last), shape)
        fields = {d: joint.categories[a][combo[a]] for d, a in axis_of.items()}
        band = band_map.get(fields.get("income_band", ""))
        income = stream.uniform(band.min, band.max) if band else 0.0
        occ = fields.get("occupation", "")
        profiles.append(
            AgentProfile(
                agent_id=agent_id,
                age_band=fields.get("age_band", ""),
                education=fields.get("education", ""),
                occupation=occ,
                income_band=fields.get("income_band", ""),
                monthly_income=income,
                mode_prefs=_mode_prefs(occupation_class(occ), stream),
            )
        )
    return profiles
