"""Multi-stage training schedules.

Four schedule families over the three difficulty levels, all with the same
total optimizer-step budget:

* ``baseline``: one stage over the shuffled union of all levels
* ``sequential``: easy, then medium, then hard (stage split 40/40/40 of 120)
* ``incremental``: easy, then easy+medium, then all three (25/30/65 of 120)
* ``hybrid``: easy, then hardest-half-of-easy + medium, then hardest halves
  of easy and medium + hard (20/30/70 of 120)

``hard_only`` (one stage over the hard level) is also available for the
comparison against curriculum runs.  Between stages the parameters carry
over but the optimizer state is reinitialized and the learning-rate schedule
restarts, with milestones at 70/80/90% of that stage's iterations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import LeveledDataset, _derive_seed, render_split, top_fraction_hardest
from .metrics import EASY, HARD, MEDIUM
from .model import (
    ModelConfig, TrainPlan, generator_state_bytes, init_params, save_checkpoint,
    tokenize, train,
)

SOURCES = (EASY, MEDIUM, HARD, "hardest_easy_50", "hardest_medium_50")

SCHEDULE_KINDS = ("baseline", "sequential", "incremental", "hybrid", "hard_only")

# per-stage iteration fractions and data composition at the reference budget
_STAGE_TABLE = {
    "baseline": (((EASY, MEDIUM, HARD), 1.0),),
    "hard_only": (((HARD,), 1.0),),
    "sequential": (
        ((EASY,), 40 / 120),
        ((MEDIUM,), 40 / 120),
        ((HARD,), 40 / 120),
    ),
    "incremental": (
        ((EASY,), 25 / 120),
        ((EASY, MEDIUM), 30 / 120),
        ((EASY, MEDIUM, HARD), 65 / 120),
    ),
    "hybrid": (
        ((EASY,), 20 / 120),
        (("hardest_easy_50", MEDIUM), 30 / 120),
        (("hardest_easy_50", "hardest_medium_50", HARD), 70 / 120),
    ),
}


@dataclass(frozen=True)
class StageSpec:
    composition: tuple  # source names
    iterations: int

    def __post_init__(self):
        if not self.composition:
            raise ValueError("stage composition must not be empty")
        unknown = set(self.composition) - set(SOURCES)
        if unknown:
            raise ValueError(f"unknown stage sources: {unknown}")
        if self.iterations <= 0:
            raise ValueError("stage iterations must be positive")


@dataclass(frozen=True)
class Schedule:
    kind: str
    stages: tuple

    @property
    def total_iters(self) -> int:
        return sum(s.iterations for s in self.stages)


def make_schedule(kind: str, total_iters: int, stage_iters=None) -> Schedule:
    """Schedule with per-stage iterations scaled proportionally from the
    reference fractions (the last stage absorbs rounding remainder), or with
    explicit `stage_iters`."""
    if kind not in _STAGE_TABLE:
        raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    table = _STAGE_TABLE[kind]
    if stage_iters is not None:
        if len(stage_iters) != len(table):
            raise ValueError(f"{kind} has {len(table)} stages, got {len(stage_iters)} iteration counts")
        iters = list(stage_iters)
        if sum(iters) != total_iters:
            raise ValueError(f"stage iterations {iters} do not sum to {total_iters}")
    else:
        iters = [round(frac * total_iters) for _, frac in table[:-1]]
        iters.append(total_iters - sum(iters))
    stages = tuple(StageSpec(comp, n) for (comp, _), n in zip(table, iters))
    return Schedule(kind=kind, stages=stages)


def resolve_source(name: str, dataset: LeveledDataset) -> list:
    """Snippets a stage source contributes (always from train splits)."""
    if name in (EASY, MEDIUM, HARD):
        return dataset.per_level[name].train
    if name == "hardest_easy_50":
        return top_fraction_hardest(dataset.per_level[EASY].train, 0.5)
    if name == "hardest_medium_50":
        return top_fraction_hardest(dataset.per_level[MEDIUM].train, 0.5)
    raise ValueError(f"unknown source {name!r}")


def stage_snippets(spec: StageSpec, dataset: LeveledDataset) -> list:
    out = []
    for name in spec.composition:
        out.extend(resolve_source(name, dataset))
    return out


def materialize_stage(spec: StageSpec, dataset: LeveledDataset, seed: int):
    """Token stream for one stage: resolve the composition, shuffle the
    snippets with a stage-derived seed, render, tokenize."""
    snippets = stage_snippets(spec, dataset)
    random.Random(seed).shuffle(snippets)
    return tokenize(render_split(snippets))


@dataclass
class ScheduleRun:
    model: object
    rows: list  # merged (iter, stage, lr, train_loss, val_loss) rows
    checkpoints: list


def write_train_log(path, rows):
    with open(path, "w", encoding="ascii") as f:
        f.write("iter,stage,lr,train_loss,val_loss\n")
        for it, stage, lr, train_loss, val_loss in rows:
            val = "" if val_loss is None else f"{val_loss:.6f}"
            f.write(f"{it},{stage},{lr:.8g},{train_loss:.6f},{val}\n")


def run_schedule(
    schedule: Schedule,
    dataset: LeveledDataset,
    model_cfg: ModelConfig,
    plan: TrainPlan,
    seed: int,
    out_dir=None,
    progress=None,
) -> ScheduleRun:
    """Train all stages in order.  Parameters carry over between stages; the
    optimizer and LR schedule are reset per stage; a checkpoint is written at
    every stage boundary."""
    model = init_params(model_cfg, seed)
    val_stream = tokenize(render_split(dataset.combined.val)) if dataset.combined.val else None
    rows = []
    paths = []
    done = 0
    for k, stage in enumerate(schedule.stages, start=1):
        stream = materialize_stage(stage, dataset, _derive_seed(seed, 500 + k))
        stage_plan = replace(plan, total_iters=stage.iterations)
        result = train(
            model,
            stage_plan,
            stream,
            seed=_derive_seed(seed, 900 + k),
            val_stream=val_stream,
            stage=str(k),
            progress=(lambda it, tl, vl, _k=k, _d=done: progress(_d + it, tl, vl, _k)) if progress else None,
        )
        rows.extend(result.rows)
        done += stage.iterations
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / f"stage{k}.ckpt"
            meta = {
                "schedule": schedule.kind,
                "stage": k,
                "stage_iterations": stage.iterations,
                "iterations_done": done,
                "composition": list(stage.composition),
                "seed": seed,
            }
            save_checkpoint(path, model, result.optimizer, generator_state_bytes(result.generator), meta)
            paths.append(path)
    return ScheduleRun(model=model, rows=rows, checkpoints=paths)
