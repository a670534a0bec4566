"""Experiment grids: enumeration, resumable execution, reporting.

A grid is a list of run configurations (dataset x class map x schedule
x seed), each hashed to a stable run id. Results append to a
line-delimited JSON store as runs finish; rerunning a grid skips ids
already present, so an interrupted sweep resumes where it stopped and
converges to the same store contents.
"""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus
from .errors import SweepError
from .evaluate import (
    ClassRow,
    EvalReport,
    aggregate,
    compare_models,
    emit_heatmap,
    match_boundaries,
)
from .hmm.schedule import TrainSchedule
from .hmm.train import (
    TrainerConfig,
    alignment_to_tiers,
    prepare_training_data,
    train_pipeline,
)
from .features import FeatureConfig
from .lexicon import (
    Lexicon,
    NaturalClassMap,
    PhoneClassMap,
    default_identity_classes,
)

IDENTITY_CLASSES = "identity"

EXPERIMENT1_MULTIPLIERS = (0.5, 2.0, 4.0)
EXPERIMENT2_BASE = "5_3_2_2"
EXPERIMENT2_CONTROL = "35_40_40_40"
EXPERIMENT2_SCHEDULE_COUNT = 7


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    class_map: str
    schedule: TrainSchedule
    seed: int = 0

    @property
    def run_id(self) -> str:
        canonical = json.dumps(
            {
                "dataset": self.dataset,
                "class_map": self.class_map,
                "schedule": self.schedule.label,
                "max_gaussians": list(self.schedule.max_gaussians),
                "seed": self.seed,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @property
    def label(self) -> str:
        return f"{self.dataset}/{self.class_map}/{self.schedule.label}/s{self.seed}"

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "class_map": self.class_map,
            "schedule": self.schedule.label,
            "max_gaussians": list(self.schedule.max_gaussians),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        return cls(
            dataset=payload["dataset"],
            class_map=payload["class_map"],
            schedule=TrainSchedule.parse(
                payload["schedule"], tuple(payload["max_gaussians"])
            ),
            seed=payload["seed"],
        )


@dataclass
class RunResult:
    run_id: str
    status: str  # done | failed | skipped
    config: RunConfig
    report: EvalReport | None = None
    wall_time_s: float = 0.0
    stages: dict = field(default_factory=dict)
    error: str = ""

    def to_dict(self) -> dict:
        payload = {
            "run_id": self.run_id,
            "status": self.status,
            "config": self.config.to_dict(),
            "wall_time_s": round(self.wall_time_s, 3),
            "stages": self.stages,
            "error": self.error,
            "report": None,
        }
        if self.report is not None:
            payload["report"] = {
                "model_label": self.report.model_label,
                "dataset_label": self.report.dataset_label,
                "overall_abs_ms": self.report.overall_abs_ms,
                "overall_signed_ms": self.report.overall_signed_ms,
                "count": self.report.count,
                "classes": {
                    name: [row.mean_signed_ms, row.mean_abs_ms, row.count]
                    for name, row in self.report.classes.items()
                },
            }
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "RunResult":
        report = None
        if payload.get("report"):
            raw = payload["report"]
            report = EvalReport(
                model_label=raw["model_label"],
                dataset_label=raw["dataset_label"],
                classes={
                    name: ClassRow(*values) for name, values in raw["classes"].items()
                },
                overall_abs_ms=raw["overall_abs_ms"],
                overall_signed_ms=raw["overall_signed_ms"],
                count=raw["count"],
            )
        return cls(
            run_id=payload["run_id"],
            status=payload["status"],
            config=RunConfig.from_dict(payload["config"]),
            report=report,
            wall_time_s=payload.get("wall_time_s", 0.0),
            stages=payload.get("stages", {}),
            error=payload.get("error", ""),
        )


def enumerate_experiment1(
    datasets: list[str],
    class_maps: list[str],
    base_schedule: TrainSchedule,
    seed: int = 0,
) -> list[RunConfig]:
    """Full first grid: 13 iteration variants x class maps x datasets.

    Variants are the base schedule plus {1/2, 2, 4} applied to each of
    the four stages independently (halving rounds up, floored at 1).
    """
    variants = [base_schedule]
    for stage_index in range(4):
        for multiplier in EXPERIMENT1_MULTIPLIERS:
            variants.append(base_schedule.scale_stage(stage_index, multiplier))
    configs = []
    for dataset in datasets:
        for class_map in class_maps:
            for schedule in variants:
                configs.append(RunConfig(dataset, class_map, schedule, seed))
    return configs


def enumerate_experiment2(
    datasets: list[str],
    base_schedule: TrainSchedule | None = None,
    class_map: str = IDENTITY_CLASSES,
    seed: int = 0,
) -> list[RunConfig]:
    """Doubling series from 5_3_2_2 plus the tool-default control."""
    base = base_schedule or TrainSchedule.parse(EXPERIMENT2_BASE)
    schedules = [base]
    for _ in range(EXPERIMENT2_SCHEDULE_COUNT - 1):
        schedules.append(schedules[-1].doubled())
    schedules.append(TrainSchedule.parse(EXPERIMENT2_CONTROL, base.max_gaussians))
    return [
        RunConfig(dataset, class_map, schedule, seed)
        for dataset in datasets
        for schedule in schedules
    ]


def scale_schedule_for_augmentation(
    schedule: TrainSchedule, copy_count: int
) -> TrainSchedule:
    """Divide stage counts by the number of dataset copies (floor 1)."""
    return schedule.divided_by(copy_count)


@dataclass
class GridAssets:
    """Everything a run needs, addressable by name."""

    datasets: dict  # label -> Corpus
    lexicon: Lexicon
    class_maps: dict  # name -> PhoneClassMap (or None for identity)
    natural_classes: NaturalClassMap
    trainer_config: TrainerConfig = field(default_factory=TrainerConfig)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)


_WORKER_ASSETS: GridAssets | None = None
_WORKER_DATA_CACHE: dict = {}


def _worker_init(assets: GridAssets) -> None:
    global _WORKER_ASSETS, _WORKER_DATA_CACHE
    _WORKER_ASSETS = assets
    _WORKER_DATA_CACHE = {}


def _prepared(dataset: str):
    if dataset not in _WORKER_DATA_CACHE:
        assets = _WORKER_ASSETS
        if dataset not in assets.datasets:
            raise SweepError(f"unknown dataset {dataset!r}")
        _WORKER_DATA_CACHE[dataset] = prepare_training_data(
            assets.datasets[dataset],
            assets.lexicon,
            assets.trainer_config,
            assets.feature_config,
        )
    return _WORKER_DATA_CACHE[dataset]


def execute_run(config: RunConfig) -> RunResult:
    """Train, align the training data, and score one configuration."""
    assets = _WORKER_ASSETS
    started = time.perf_counter()
    try:
        data = _prepared(config.dataset)
        if config.class_map == IDENTITY_CLASSES:
            class_map = default_identity_classes(set(data.inventory))
        else:
            class_map = assets.class_maps.get(config.class_map)
            if class_map is None:
                raise SweepError(f"unknown class map {config.class_map!r}")
        result = train_pipeline(data, config.schedule, class_map, seed=config.seed)

        corpus = assets.datasets[config.dataset]
        ref_by_id = {u.id: u for u in corpus}
        pairs = []
        for uid in data.ids:
            ref = ref_by_id[uid].phone_tier
            if ref is None:
                continue
            _, hyp_tier = alignment_to_tiers(
                result.alignments[uid], data.words[uid], data.config.silence_phone
            )
            pairs.extend(match_boundaries(ref, hyp_tier, utterance_id=uid))
        if not pairs:
            raise SweepError(
                f"dataset {config.dataset!r} has no reference phone tiers to score"
            )
        report = aggregate(
            pairs,
            assets.natural_classes,
            model_label=f"{config.class_map}/{config.schedule.label}",
            dataset_label=config.dataset,
        )
        stages = {
            stage: {
                "iterations": len(log),
                "final_loglik": log[-1].log_likelihood,
                "gaussians": log[-1].n_gaussians,
            }
            for stage, log in result.stage_logs.items()
        }
        return RunResult(
            run_id=config.run_id,
            status="done",
            config=config,
            report=report,
            wall_time_s=time.perf_counter() - started,
            stages=stages,
        )
    except Exception as exc:  # per-run failures must not kill the grid
        return RunResult(
            run_id=config.run_id,
            status="failed",
            config=config,
            wall_time_s=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


def load_store(path: str | Path) -> dict[str, RunResult]:
    """Read a results store, ignoring a torn trailing record."""
    path = Path(path)
    results: dict[str, RunResult] = {}
    if not path.exists():
        return results
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            result = RunResult.from_dict(payload)
        except (json.JSONDecodeError, KeyError):
            warnings.warn(f"{path}: ignoring malformed store record")
            break
        results[result.run_id] = result
    return results


def _append_record(path: Path, result: RunResult) -> None:
    record = json.dumps(result.to_dict(), sort_keys=True, separators=(",", ":"))
    with path.open("a", encoding="utf-8") as fh:
        fh.write(record + "\n")
        fh.flush()


def run_grid(
    configs: list[RunConfig],
    assets: GridAssets,
    store_path: str | Path,
    workers: int = 1,
) -> list[RunResult]:
    """Execute every config not already in the store; resumable.

    Completed (done or failed) run ids are skipped on restart. Results
    are returned for all requested configs, sorted by run id.
    """
    ids = [c.run_id for c in configs]
    if len(set(ids)) != len(ids):
        raise SweepError("duplicate run ids in grid")
    store_path = Path(store_path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    existing = load_store(store_path)
    pending = [c for c in configs if c.run_id not in existing]

    if pending:
        if workers <= 1:
            _worker_init(assets)
            for config in pending:
                result = execute_run(config)
                _append_record(store_path, result)
                existing[result.run_id] = result
        else:
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_worker_init, initargs=(assets,)
            ) as pool:
                for result in pool.map(execute_run, pending):
                    _append_record(store_path, result)
                    existing[result.run_id] = result

    return sorted(
        (existing[c.run_id] for c in configs), key=lambda r: r.run_id
    )


def report_grid(
    results: list[RunResult], out_dir: str | Path
) -> dict[str, Path]:
    """Heatmaps per dataset, a ranking table, and the best-run summary."""
    done = [r for r in results if r.status == "done" and r.report is not None]
    if not done:
        raise SweepError("no successful runs to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    by_dataset: dict[str, list[RunResult]] = {}
    for result in done:
        by_dataset.setdefault(result.config.dataset, []).append(result)
    for dataset in sorted(by_dataset):
        rows = sorted(by_dataset[dataset], key=lambda r: r.run_id)
        written = emit_heatmap([r.report for r in rows], out_dir / f"heatmap_{dataset}")
        for p in written:
            paths[p.name] = p

    ranking = compare_models([r.report for r in done])
    report_of = {id(r.report): r for r in done}
    lines = ["rank,run_id,dataset,class_map,schedule,seed,overall_abs_ms,overall_signed_ms"]
    for rank, report in enumerate(ranking, 1):
        run = report_of[id(report)]
        lines.append(
            f"{rank},{run.run_id},{run.config.dataset},{run.config.class_map},"
            f"{run.config.schedule.label},{run.config.seed},"
            f"{report.overall_abs_ms:.2f},{report.overall_signed_ms:.2f}"
        )
    ranking_path = out_dir / "ranking.csv"
    ranking_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths["ranking.csv"] = ranking_path

    best = report_of[id(ranking[0])]
    best_path = out_dir / "best_run.txt"
    best_path.write_text(
        f"best run: {best.run_id}\n"
        f"dataset: {best.config.dataset}\n"
        f"class map: {best.config.class_map}\n"
        f"schedule: {best.config.schedule.label}\n"
        f"seed: {best.config.seed}\n"
        f"overall mean abs: {best.report.overall_abs_ms:.2f} ms\n",
        encoding="utf-8",
    )
    paths["best_run.txt"] = best_path
    return paths
