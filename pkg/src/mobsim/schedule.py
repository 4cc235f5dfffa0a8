"""Daily schedules and occasional-location choice with a distance-decay attraction model."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal, Optional, Sequence

import numpy as np

from mobsim.errors import EmptyCatalog, InvalidSchedule, NoCandidates, ValidationFailure
from mobsim.geography import LatLon, Poi, PoiIndex, TextMatcher, distance_m, distances_m
from mobsim.providers import (
    ProviderConfig,
    PromptRequest,
    clock_to_seconds,
    complete_structured,
    schedule_request,
)

logger = logging.getLogger(__name__)

DAY = 86_400
LocationKind = Literal["home", "routine", "occasional"]


@dataclass(frozen=True)
class Activity:
    label: str
    location_kind: LocationKind
    start: int
    end: int
    poi_category: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "location_kind": self.location_kind,
            "poi_category": self.poi_category,
            "start": self.start,
            "end": self.end,
        }


@dataclass(frozen=True)
class DailySchedule:
    agent_id: int
    activities: tuple[Activity, ...]

    def validate(self) -> "DailySchedule":
        acts = self.activities
        if not acts:
            raise InvalidSchedule(f"agent {self.agent_id}: empty schedule")
        for a in acts:
            if not 0 <= a.start < a.end <= DAY:
                raise InvalidSchedule(f"agent {self.agent_id}: activity {a.label!r} has bad times {a.start}-{a.end}")
            if a.location_kind == "occasional" and not a.poi_category:
                raise InvalidSchedule(f"agent {self.agent_id}: occasional activity {a.label!r} has no category")
        for prev, nxt in zip(acts, acts[1:]):
            if nxt.start < prev.end:
                raise InvalidSchedule(f"agent {self.agent_id}: {prev.label!r} overlaps {nxt.label!r}")
        if acts[0].location_kind != "home" or acts[-1].location_kind != "home":
            raise InvalidSchedule(f"agent {self.agent_id}: schedule must start and end at home")
        return self

    def to_dict(self) -> dict:
        return {"agent_id": self.agent_id, "activities": [a.to_dict() for a in self.activities]}

    @classmethod
    def from_dict(cls, d: dict) -> "DailySchedule":
        return cls(
            int(d["agent_id"]),
            tuple(
                Activity(a["label"], a["location_kind"], int(a["start"]), int(a["end"]), a.get("poi_category"))
                for a in d["activities"]
            ),
        ).validate()


@dataclass(frozen=True)
class HuffParams:
    decay: float = 2.0
    min_distance: float = 50.0
    candidate_radius: float = 5000.0
    fallback_k: int = 10

    def __post_init__(self):
        if self.decay < 0:
            raise ValidationFailure("decay must be >= 0")
        if self.min_distance <= 0:
            raise ValidationFailure("min_distance must be > 0")
        if self.fallback_k < 1:
            raise ValidationFailure("fallback_k must be >= 1")

    def scaled(self, factor: float) -> "HuffParams":
        return replace(
            self, min_distance=self.min_distance * factor, candidate_radius=self.candidate_radius * factor
        )


@dataclass(frozen=True)
class CandidateWeight:
    poi_id: int
    distance: float
    attractiveness: float
    weight: float


# --------------------------------------------------------------------------
# category mapping


@lru_cache(maxsize=64)
def _matcher(categories: tuple[tuple[str, str], ...]) -> TextMatcher:
    return TextMatcher(categories)


def map_activity_category(
    label: str, categories: Sequence[tuple[str, str]], provider: ProviderConfig | None = None
) -> str:
    """POI category whose description is most similar to the activity label.

    Similarity is trigram cosine in every provider mode; ``provider`` only
    keeps the signature in line with the other LLM-backed steps.
    """
    if not categories:
        raise EmptyCatalog("category catalog is empty")
    return _matcher(tuple((str(a), str(b)) for a, b in categories)).best(label)


# --------------------------------------------------------------------------
# schedule generation


def _schedule_from_doc(agent_id: int, doc: dict, categories) -> DailySchedule:
    known = {c for c, _ in categories} if categories else set()
    acts = []
    for a in doc["activities"]:
        cat = a.get("poi_category")
        if a["location_kind"] == "occasional":
            if not cat or (known and cat not in known):
                if not categories:
                    raise InvalidSchedule(f"agent {agent_id}: cannot resolve category for {a['label']!r}")
                cat = map_activity_category(a["label"], categories)
        else:
            cat = None
        acts.append(
            Activity(a["label"], a["location_kind"], clock_to_seconds(a["start"]), clock_to_seconds(a["end"]), cat)
        )
    # ordering is repairable; overlaps and missing home anchors are not
    acts.sort(key=lambda a: (a.start, a.end))
    return DailySchedule(agent_id, tuple(acts)).validate()


def generate_schedule(
    profile,
    provider: ProviderConfig,
    categories: Sequence[tuple[str, str]] | None = None,
    client=None,
) -> DailySchedule:
    """One day of activities for ``profile``.

    Occasional activities without a known category are mapped onto
    ``categories`` by text similarity. A reply that breaks the schedule
    invariants is retried once with the violation attached, then rejected.
    """
    request = schedule_request(profile.to_dict(), profile.occupation_class)
    try:
        return _schedule_from_doc(profile.agent_id, complete_structured(request, provider, client).value, categories)
    except InvalidSchedule as exc:
        if provider.mode == "stub":
            raise
        logger.warning("schedule for agent %d rejected, retrying: %s", profile.agent_id, exc)
        retry = PromptRequest(
            request.task_kind,
            request.system_text,
            f"{request.user_text}\n\nThe previous schedule was invalid: {exc}",
            request.response_schema_id,
            request.temperature,
        )
        return _schedule_from_doc(profile.agent_id, complete_structured(retry, provider, client).value, categories)


# --------------------------------------------------------------------------
# occasional-location choice


def huff_weight(origin: LatLon, poi: Poi, params: HuffParams) -> CandidateWeight:
    """``popularity * credibility / distance**decay`` with distance clamped at ``min_distance``."""
    d = max(distance_m(origin, poi.position), params.min_distance)
    att = poi.popularity * poi.credibility
    return CandidateWeight(poi.poi_id, d, att, att / d**params.decay)


def huff_probabilities(distances: np.ndarray, attractiveness: np.ndarray, params: HuffParams) -> np.ndarray:
    """Selection probabilities over a candidate set.

    With zero total attractiveness the choice falls back to uniform.
    """
    d = np.maximum(np.asarray(distances, dtype=float), params.min_distance)
    w = np.asarray(attractiveness, dtype=float) / d**params.decay
    s = w.sum()
    if s <= 0:
        return np.full(len(w), 1.0 / len(w))
    return w / s


def candidate_set(origin: LatLon, category: str, pois: PoiIndex, params: HuffParams):
    """(category arrays, candidate indices, distances): all POIs within the radius, else the k nearest."""
    arr = pois.by_category.get(category)
    if arr is None or len(arr.ids) == 0:
        raise NoCandidates(f"no POI of category {category!r}")
    d = distances_m(origin, arr.lats, arr.lons)
    idx = np.nonzero(d <= params.candidate_radius)[0]
    if idx.size == 0:
        idx = np.lexsort((arr.ids, d))[: params.fallback_k]
    return arr, idx, d[idx]


def choose_occasional(
    origin: LatLon, category: str, pois: PoiIndex, params: HuffParams, stream
) -> int:
    arr, idx, dist = candidate_set(origin, category, pois, params)
    probs = huff_probabilities(dist, arr.attractiveness[idx], params)
    cum = np.cumsum(probs)
    j = int(np.searchsorted(cum, stream.random() * cum[-1], side="right"))
    return int(arr.ids[idx[min(j, idx.size - 1)]])
