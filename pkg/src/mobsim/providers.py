"""LLM access: a structured-output client for a hosted model and an offline stub.

All LLM-backed steps (joint-distribution seeding, occupation descriptions,
daily schedules) go through :func:`complete_structured`.  Requests carry their
task context as a JSON document in ``user_text``; replies must validate
against one of the registered schemas below.
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Literal, Optional

import httpx
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from mobsim.errors import SchemaViolation, Transport, UnknownSchema
from mobsim.streams import unit_hash

logger = logging.getLogger(__name__)

TaskKind = Literal["joint_seed", "occupation_description", "daily_schedule"]

ENDPOINT_ENV = "MOBSIM_LLM_ENDPOINT"
API_KEY_ENV = "MOBSIM_LLM_API_KEY"


# --------------------------------------------------------------------------
# response schemas


class JointSeedDoc(BaseModel):
    dims: list[str]
    shape: list[int]
    cells: list[float]
    total: float

    @model_validator(mode="after")
    def _check(self):
        if len(self.dims) != len(self.shape):
            raise ValueError("dims and shape differ in length")
        if any(s <= 0 for s in self.shape):
            raise ValueError("shape entries must be positive")
        if len(self.cells) != math.prod(self.shape):
            raise ValueError(f"expected {math.prod(self.shape)} cells, got {len(self.cells)}")
        if any(not math.isfinite(c) or c < 0 for c in self.cells):
            raise ValueError("cells must be finite and non-negative")
        return self


class OccupationDescriptionDoc(BaseModel):
    occupation: str
    description: str

    @field_validator("description")
    @classmethod
    def _non_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("description is empty")
        return v


_CLOCK = re.compile(r"^([01]\d|2[0-4]):([0-5]\d)$")


class ActivityDoc(BaseModel):
    label: str
    location_kind: Literal["home", "routine", "occasional"]
    poi_category: Optional[str] = None
    start: str
    end: str

    @field_validator("start", "end")
    @classmethod
    def _clock(cls, v: str) -> str:
        m = _CLOCK.match(v)
        if not m or (m.group(1) == "24" and m.group(2) != "00"):
            raise ValueError(f"not an HH:MM clock time: {v!r}")
        return v


class ScheduleDoc(BaseModel):
    activities: list[ActivityDoc]

    @field_validator("activities")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("schedule has no activities")
        return v


SCHEMAS: dict[str, type[BaseModel]] = {
    "joint_seed": JointSeedDoc,
    "occupation_description": OccupationDescriptionDoc,
    "daily_schedule": ScheduleDoc,
}


def clock_to_seconds(text: str) -> int:
    hours, minutes = text.split(":")
    return int(hours) * 3600 + int(minutes) * 60


# --------------------------------------------------------------------------
# request / response / config


@dataclass(frozen=True)
class PromptRequest:
    task_kind: TaskKind
    system_text: str
    user_text: str
    response_schema_id: str
    temperature: float = 0.0

    def __post_init__(self):
        if self.response_schema_id not in SCHEMAS:
            raise UnknownSchema(self.response_schema_id)
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must lie in [0, 1]")

    @property
    def payload(self) -> dict[str, Any]:
        try:
            return json.loads(self.user_text)
        except json.JSONDecodeError:
            return {}


@dataclass(frozen=True)
class StructuredResponse:
    value: dict[str, Any]
    raw_text: str
    provider_mode: Literal["live", "stub"]


@dataclass(frozen=True)
class ProviderConfig:
    mode: Literal["live", "stub"] = "stub"
    endpoint_url: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    stub_seed: int = 42
    # relative half-width of the stub's per-cell perturbation; 0 disables it
    stub_perturbation: float = 0.1
    api_key: str = field(default="", repr=False)

    def __post_init__(self):
        if self.mode not in ("live", "stub"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.mode == "live" and not self.resolved_endpoint():
            raise ValueError("live mode requires an endpoint_url")

    def resolved_endpoint(self) -> str:
        return os.environ.get(ENDPOINT_ENV) or self.endpoint_url

    def resolved_api_key(self) -> str:
        return os.environ.get(API_KEY_ENV) or self.api_key


def _dump(doc: dict[str, Any]) -> str:
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


# --------------------------------------------------------------------------
# request builders


def joint_seed_request(marginals: list[dict[str, Any]], total: float) -> PromptRequest:
    """``marginals``: dicts with ``attribute_id``, ``categories``, ``counts``."""
    payload = {"total": total, "attributes": marginals}
    return PromptRequest(
        task_kind="joint_seed",
        system_text=(
            "You model correlations between demographic attributes. Given one-dimensional "
            "marginal counts, return a joint count table over all attributes whose cells are "
            "flattened in row-major order of the listed attributes."
        ),
        user_text=_dump(payload),
        response_schema_id="joint_seed",
    )


def occupation_request(occupation: str) -> PromptRequest:
    return PromptRequest(
        task_kind="occupation_description",
        system_text="Describe the typical work of an occupation and the industry it belongs to.",
        user_text=_dump({"occupation": occupation}),
        response_schema_id="occupation_description",
    )


def schedule_request(profile: dict[str, Any], occupation_class: str) -> PromptRequest:
    return PromptRequest(
        task_kind="daily_schedule",
        system_text=(
            "Write a plausible one-day activity schedule for the person described. Activities "
            "are sorted, non-overlapping, start and end at home, and use HH:MM clock times."
        ),
        user_text=_dump({"profile": profile, "occupation_class": occupation_class}),
        response_schema_id="daily_schedule",
    )


# --------------------------------------------------------------------------
# stub

OCCUPATION_TEMPLATE = "{occupation}: a person who works as a {occupation}"

# (label, location_kind, start, end)
SCHEDULE_TEMPLATES: dict[str, list[tuple[str, str, str, str]]] = {
    "office-worker": [
        ("home", "home", "00:00", "08:00"),
        ("work", "routine", "09:00", "18:00"),
        ("dinner", "occasional", "18:30", "20:00"),
        ("home", "home", "20:30", "24:00"),
    ],
    "student": [
        ("home", "home", "00:00", "07:30"),
        ("school", "routine", "08:00", "16:00"),
        ("sports and exercise", "occasional", "16:30", "18:00"),
        ("home", "home", "18:30", "24:00"),
    ],
    "retiree": [
        ("home", "home", "00:00", "09:00"),
        ("walk in the park", "occasional", "09:30", "11:30"),
        ("grocery shopping", "occasional", "15:00", "16:00"),
        ("home", "home", "16:30", "24:00"),
    ],
    "service-worker": [
        ("home", "home", "00:00", "10:00"),
        ("work shift", "routine", "11:00", "20:00"),
        ("late supper", "occasional", "20:30", "22:00"),
        ("home", "home", "22:30", "24:00"),
    ],
}
TEMPLATE_CLASSES = tuple(sorted(SCHEDULE_TEMPLATES))


def _stub_joint(payload: dict[str, Any], seed: int, perturbation: float) -> dict[str, Any]:
    import numpy as np

    attrs = payload["attributes"]
    total = float(payload["total"])
    table = np.ones(())
    for attr in attrs:
        counts = np.asarray(attr["counts"], dtype=float)
        table = np.multiply.outer(table, counts / counts.sum())
    table = table * total
    if perturbation:
        flat = table.reshape(-1)
        factors = np.array(
            [1.0 + perturbation * (2.0 * unit_hash(seed, "joint_seed", i) - 1.0) for i in range(flat.size)]
        )
        flat = flat * factors
        if flat.sum() > 0:
            flat = flat * (total / flat.sum())
        table = flat.reshape(table.shape)
    return {
        "dims": [a["attribute_id"] for a in attrs],
        "shape": list(table.shape),
        "cells": [float(c) for c in table.reshape(-1)],
        "total": total,
    }


def stub_generate(request: PromptRequest, seed: int, perturbation: float = 0.1) -> StructuredResponse:
    """Deterministic offline answer for ``request``; a pure function of its inputs."""
    if request.response_schema_id not in SCHEMAS:
        raise UnknownSchema(request.response_schema_id)
    payload = request.payload
    kind = request.response_schema_id
    if kind == "joint_seed":
        doc = _stub_joint(payload, seed, perturbation)
    elif kind == "occupation_description":
        occupation = str(payload.get("occupation", request.user_text))
        doc = {"occupation": occupation, "description": OCCUPATION_TEMPLATE.format(occupation=occupation)}
    else:
        cls = payload.get("occupation_class")
        if cls not in SCHEDULE_TEMPLATES:
            pick = int(unit_hash(seed, "daily_schedule", request.user_text) * len(TEMPLATE_CLASSES))
            cls = TEMPLATE_CLASSES[pick]
        doc = {
            "activities": [
                {"label": label, "location_kind": kind_, "poi_category": None, "start": s, "end": e}
                for label, kind_, s, e in SCHEDULE_TEMPLATES[cls]
            ]
        }
    value = SCHEMAS[kind].model_validate(doc).model_dump()
    return StructuredResponse(value=value, raw_text=_dump(value), provider_mode="stub")


# --------------------------------------------------------------------------
# live


def _extract_document(body: Any) -> Any:
    """Accept either a chat-completion envelope or a bare JSON document."""
    if isinstance(body, dict) and "choices" in body:
        content = body["choices"][0]["message"]["content"]
        if isinstance(content, str):
            content = content.strip()
            fenced = re.match(r"^```(?:json)?\s*(.*?)\s*```$", content, re.S)
            if fenced:
                content = fenced.group(1)
            return json.loads(content)
        return content
    return body


def _live_complete(request: PromptRequest, config: ProviderConfig, client: httpx.Client) -> StructuredResponse:
    schema_model = SCHEMAS[request.response_schema_id]
    system = (
        request.system_text
        + "\nReply with exactly one JSON document conforming to this JSON schema:\n"
        + json.dumps(schema_model.model_json_schema(), sort_keys=True)
    )
    user = request.user_text
    headers = {"Content-Type": "application/json"}
    if config.resolved_api_key():
        headers["Authorization"] = f"Bearer {config.resolved_api_key()}"
    last_error = ""
    for attempt in range(config.max_retries + 1):
        body = {
            "model": config.model_name,
            "temperature": request.temperature,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
        }
        try:
            resp = client.post(config.resolved_endpoint(), content=_dump(body).encode("utf-8"), headers=headers)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise Transport(f"LLM endpoint failed: {exc}") from exc
        raw = resp.text
        try:
            doc = _extract_document(json.loads(raw))
            value = schema_model.model_validate(doc).model_dump()
        except (ValueError, KeyError, IndexError, TypeError, ValidationError) as exc:
            last_error = str(exc)
            logger.warning("attempt %d: response failed validation: %s", attempt + 1, last_error)
            user = f"{request.user_text}\n\nYour previous reply was rejected: {last_error}\nReply again."
            continue
        return StructuredResponse(value=value, raw_text=raw, provider_mode="live")
    raise SchemaViolation(
        f"{request.response_schema_id}: no valid reply after {config.max_retries + 1} attempts: {last_error}"
    )


def complete_structured(
    request: PromptRequest, config: ProviderConfig, client: httpx.Client | None = None
) -> StructuredResponse:
    """Answer ``request`` with a document valid under its declared schema.

    ``client`` lets callers inject an ``httpx.Client`` (connection reuse, or a
    mock transport in tests); one is created per call otherwise.
    """
    if request.response_schema_id not in SCHEMAS:
        raise UnknownSchema(request.response_schema_id)
    if config.mode == "stub":
        return stub_generate(request, config.stub_seed, config.stub_perturbation)
    if client is not None:
        return _live_complete(request, config, client)
    with httpx.Client(timeout=config.timeout) as own:
        return _live_complete(request, config, own)
