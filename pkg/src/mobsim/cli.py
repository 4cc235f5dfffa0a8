"""Command-line entry point.

Each stage reads and writes JSON-lines files in the output directory so
stages can be run one at a time::

    synth     -> population.jsonl
    allocate  -> population.jsonl (home cell and routine POI filled in)
    schedule  -> schedules.jsonl
    simulate  -> trips.jsonl
    export    -> trips.csv, heatmap.geojson, indicators.json, population.jsonl

``run-all`` chains every stage in memory. Exit status is 0 on success, 1 on
invalid input and 2 on any other failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from mobsim.engine import simulate_day
from mobsim.errors import MissingFile, MobsimError, ValidationFailure
from mobsim.fixtures import make_desk_fixture
from mobsim.io.config import RunConfig
from mobsim.io.outputs import (
    accumulate_heatmap,
    compute_indicators,
    export_outputs,
    read_jsonl,
    trip_from_dict,
    trip_to_dict,
    write_jsonl,
)
from mobsim.pipeline import allocate, build_world, load_inputs, make_schedules, run_all, synthesize
from mobsim.population import AgentProfile
from mobsim.schedule import DailySchedule

logger = logging.getLogger("mobsim")

POPULATION = "population.jsonl"
SCHEDULES = "schedules.jsonl"
TRIPS = "trips.jsonl"


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ValidationFailure("--config is required")
    cfg = RunConfig.load(args.config)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.agents is not None:
        if args.agents < 0:
            raise ValidationFailure("--agents must be >= 0")
        update["agents"] = args.agents
    if args.workers is not None:
        update["workers"] = max(1, args.workers)
    if args.out is not None:
        update["output_dir"] = Path(args.out)
    if args.stub_llm:
        update["provider"] = cfg.provider.model_copy(update={"mode": "stub"})
    return cfg.model_copy(update=update)


def _stage_file(cfg: RunConfig, name: str) -> Path:
    path = Path(cfg.output_dir) / name
    if not path.is_file():
        raise MissingFile(f"{path} (run the earlier stage first)")
    return path


def _read_profiles(cfg: RunConfig) -> list[AgentProfile]:
    return [AgentProfile.from_dict(d) for d in read_jsonl(_stage_file(cfg, POPULATION))]


def _read_schedules(cfg: RunConfig) -> dict[int, DailySchedule]:
    scheds = [DailySchedule.from_dict(d) for d in read_jsonl(_stage_file(cfg, SCHEDULES))]
    return {s.agent_id: s for s in scheds}


def _write(cfg: RunConfig, name: str, records) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    write_jsonl(path, records)
    return path


def cmd_synth(cfg: RunConfig) -> None:
    from mobsim.io import ingest

    cfg.check_paths()
    profiles = synthesize(cfg, ingest.read_marginals(cfg.inputs.marginals))
    print(_write(cfg, POPULATION, (p.to_dict() for p in profiles)))


def cmd_allocate(cfg: RunConfig) -> None:
    inputs = load_inputs(cfg)
    profiles = allocate(_read_profiles(cfg), inputs.cells, inputs.pois, inputs.industries, cfg.provider_config(), cfg.seed)
    print(_write(cfg, POPULATION, (p.to_dict() for p in profiles)))


def cmd_schedule(cfg: RunConfig) -> None:
    from mobsim.io import ingest

    cfg.check_paths()
    categories = ingest.read_categories(cfg.inputs.categories)
    schedules = make_schedules(_read_profiles(cfg), categories, cfg.provider_config())
    print(_write(cfg, SCHEDULES, (s.to_dict() for _, s in sorted(schedules.items()))))


def cmd_simulate(cfg: RunConfig) -> None:
    inputs = load_inputs(cfg)
    trips = simulate_day(
        _read_profiles(cfg), _read_schedules(cfg), build_world(cfg, inputs), cfg.simulation_config(), cfg.workers
    )
    print(_write(cfg, TRIPS, (trip_to_dict(t) for t in trips)))


def cmd_export(cfg: RunConfig) -> None:
    inputs = load_inputs(cfg)
    sim = cfg.simulation_config()
    trips = [trip_from_dict(d) for d in read_jsonl(_stage_file(cfg, TRIPS))]
    profiles = _read_profiles(cfg)
    paths = export_outputs(
        trips,
        accumulate_heatmap(trips, sim.bin_width),
        compute_indicators(trips, sim.emission_factors),
        cfg.output_dir,
        profiles,
        roads=inputs.roads,
        transit=inputs.transit,
    )
    for p in paths:
        print(p)


def cmd_run_all(cfg: RunConfig) -> None:
    start = time.perf_counter()
    result = run_all(cfg)
    ind = result.indicators
    logger.info("%d agents, %d trips in %.1f s", len(result.profiles), len(result.trips), time.perf_counter() - start)
    shares = ", ".join(f"{m} {s:.3f}" for m, s in ind.mode_shares.items())
    print(f"mode shares: {shares}; failed trips: {ind.failed_trips}")
    for p in result.files:
        print(p)


COMMANDS = {
    "synth": (cmd_synth, "sample agent profiles from the marginals"),
    "allocate": (cmd_allocate, "assign home cells and routine POIs"),
    "schedule": (cmd_schedule, "generate one daily schedule per agent"),
    "simulate": (cmd_simulate, "route every trip of the day"),
    "export": (cmd_export, "write the trip table, heat map and indicators"),
    "run-all": (cmd_run_all, "every stage in one process"),
}


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # flags may come before or after the verb; the verb-level copy must not reset earlier values
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=default, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, default=default, help="override the master seed")
    common.add_argument("--agents", type=int, default=default, help="override the number of agents")
    common.add_argument(
        "--stub-llm", action="store_true", default=argparse.SUPPRESS if suppress else False,
        help="use the offline deterministic provider",
    )
    common.add_argument("--workers", type=int, default=default, help="worker processes for the simulate stage")
    common.add_argument("--out", type=Path, default=default, help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobsim", description=__doc__.split("\n")[0], parents=[_common_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)
    verb_flags = _common_flags(True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, help=help_text, parents=[verb_flags])
    fx = sub.add_parser("make-fixture", help="write the synthetic desk-scale city", parents=[verb_flags])
    fx.add_argument("directory", type=Path)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "make-fixture":
            print(make_desk_fixture(args.directory, seed=7 if args.seed is None else args.seed, agents=args.agents or 1000))
            return 0
        COMMANDS[args.command][0](_load_config(args))
    except ValidationFailure as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (MobsimError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
