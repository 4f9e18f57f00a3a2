"""Single command-line entry point for reproducible experiments.

Subcommands: ``generate`` (annotated snippets), ``score`` (per-snippet
CC/HD/OM CSV plus an OM histogram), ``build`` (leveled dataset directory),
``train`` (any schedule, with checkpoints and a loss log), ``eval`` (full
report for one checkpoint), and ``compare`` (side-by-side execution accuracy
for several checkpoints).

Every run resolves its configuration (defaults, then an optional ``--config``
file of ``key = value`` lines, then explicit flags), writes the resolved
config next to its artifacts, and is bit-reproducible when re-run from that
file.  All randomness flows from ``--seed``.  Progress goes to stderr, data
to files.  Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import shutil
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import torch

from . import corpus as corpus_mod
from . import curriculum as curriculum_mod
from .evaluate import evaluate_model, exec_comparison_table, execution_accuracy
from .grammar import DEFAULT_PROFILE, GrammarProfile, concept_profile, generate_corpus
from .interp import parse, render_annotated, split_annotated
from .metrics import classify, score_program
from .model import MODEL_PRESETS, ModelConfig, TrainPlan, load_checkpoint
from .corpus import read_dataset

HISTOGRAM_BUCKET = 0.25


class UserError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _floats(text):
    return tuple(float(x) for x in str(text).split(","))


def _ints(text):
    return tuple(int(x) for x in str(text).split(","))


_COMMON_SCHEMA = {"seed": int, "threads": int}

_SCHEMAS = {
    "generate": {**_COMMON_SCHEMA, "count": int, "level": int, "max_statements": int,
                 "max_nesting": int, "max_elif": int, "identifiers": str,
                 "literal_range": _ints},
    "score": {"input": str},
    "build": {**_COMMON_SCHEMA, "per_level": int, "split": _floats, "level": int,
              "max_statements": int, "max_nesting": int, "max_elif": int,
              "identifiers": str, "literal_range": _ints},
    "train": {**_COMMON_SCHEMA, "schedule": str, "dataset": str, "total_iters": int,
              "stage_iters": _ints, "model_preset": str, "n_layers": int, "n_heads": int,
              "embed_dim": int, "block_size": int, "batch_size": int, "base_lr": float,
              "milestones": _floats, "decay_factor": float, "weight_decay": float,
              "grad_clip": float, "log_interval": int},
    "eval": {**_COMMON_SCHEMA, "checkpoint": str, "dataset": str, "decode": str,
             "temperature": float, "sample_seed": int},
    "compare": {**_COMMON_SCHEMA, "checkpoints": str, "labels": str, "dataset": str,
                "decode": str, "temperature": float, "sample_seed": int},
}

_DEFAULTS = {
    "generate": {"count": 100, "seed": 0, "threads": None, "level": None,
                 "max_statements": None, "max_nesting": None, "max_elif": None,
                 "identifiers": None, "literal_range": None},
    "score": {"input": None},
    "build": {"per_level": 1000, "split": (0.85, 0.13, 0.02), "seed": 0, "threads": None,
              "level": None, "max_statements": None, "max_nesting": None,
              "max_elif": None, "identifiers": None, "literal_range": None},
    "train": {"schedule": "baseline", "dataset": None, "total_iters": 1000,
              "stage_iters": None, "model_preset": "paper", "n_layers": None,
              "n_heads": None, "embed_dim": None, "block_size": None, "batch_size": 64,
              "base_lr": 1e-3, "milestones": (0.7, 0.8, 0.9), "decay_factor": 0.1,
              "weight_decay": 0.1, "grad_clip": 1.0, "log_interval": 50,
              "seed": 0, "threads": None},
    "eval": {"checkpoint": None, "dataset": None, "decode": "greedy",
             "temperature": 1.0, "sample_seed": 0, "seed": 0, "threads": None},
    "compare": {"checkpoints": None, "labels": None, "dataset": None, "decode": "greedy",
                "temperature": 1.0, "sample_seed": 0, "seed": 0, "threads": None},
}


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UserError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def resolve_config(command: str, cli_values: dict, config_path) -> dict:
    schema = _SCHEMAS[command]
    resolved = dict(_DEFAULTS[command])
    if config_path:
        if not Path(config_path).exists():
            raise UserError(f"config file not found: {config_path}")
        for key, raw in read_config_file(config_path).items():
            if key == "command":
                if raw != command:
                    raise UserError(f"config file is for {raw!r}, not {command!r}")
                continue
            if key not in schema:
                raise UserError(f"unknown config key {key!r} for {command}")
            resolved[key] = None if raw == "none" else schema[key](raw)
    for key, val in cli_values.items():
        if val is not None:
            resolved[key] = val
    return resolved


def write_config(command: str, cfg: dict, out_dir: Path):
    lines = [f"command = {command}"]
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, tuple):
            val = ",".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        lines.append(f"{key} = {'none' if val is None else val}")
    (out_dir / "config.txt").write_text("\n".join(lines) + "\n", encoding="ascii")


def _log(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _profile_from(cfg: dict) -> GrammarProfile:
    if cfg.get("level") is not None:
        try:
            base = concept_profile(cfg["level"])
        except ValueError as exc:
            raise UserError(str(exc)) from None
    else:
        base = DEFAULT_PROFILE
    overrides = {}
    if cfg.get("max_statements") is not None:
        overrides["max_statements"] = cfg["max_statements"]
    if cfg.get("max_nesting") is not None:
        overrides["max_nesting"] = cfg["max_nesting"]
    if cfg.get("max_elif") is not None:
        overrides["max_elif"] = cfg["max_elif"]
    if cfg.get("identifiers") is not None:
        overrides["identifier_pool"] = tuple(cfg["identifiers"])
    if cfg.get("literal_range") is not None:
        overrides["literal_range"] = tuple(cfg["literal_range"])
    try:
        return replace(base, **overrides) if overrides else base
    except ValueError as exc:
        raise UserError(str(exc)) from None


def _model_config(cfg: dict) -> ModelConfig:
    preset = cfg.get("model_preset") or "paper"
    if preset not in MODEL_PRESETS:
        raise UserError(f"unknown model preset {preset!r}; expected one of {sorted(MODEL_PRESETS)}")
    base = MODEL_PRESETS[preset]
    overrides = {
        key: cfg[key]
        for key in ("n_layers", "n_heads", "embed_dim", "block_size")
        if cfg.get(key) is not None
    }
    try:
        return replace(base, **overrides) if overrides else base
    except ValueError as exc:
        raise UserError(str(exc)) from None


def _apply_threads(cfg: dict):
    if cfg.get("threads") is None:
        cfg["threads"] = torch.get_num_threads()
    torch.set_num_threads(cfg["threads"])


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise UserError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = resolve_config("generate", _cli_values(args, "generate"), args.config)
    _apply_threads(cfg)
    profile = _profile_from(cfg)
    out = _out_dir(args)
    snippets = generate_corpus(profile, cfg["count"], cfg["seed"])
    (out / "snippets.txt").write_text(
        "".join(render_annotated(s.source, s.output_lines) for s in snippets), encoding="ascii"
    )
    write_config("generate", cfg, out)
    _log(f"wrote {len(snippets)} snippets to {out / 'snippets.txt'}")
    return 0


def _read_annotated_file(path) -> list:
    text = Path(path).read_text(encoding="ascii")
    if text and not text.endswith("\n\n"):
        raise UserError(f"{path}: missing blank-line terminator")
    blocks = [b for b in text.split("\n\n") if b != ""]
    out = []
    for block in blocks:
        try:
            src, lines = split_annotated(block + "\n")
        except ValueError as exc:
            raise UserError(f"{path}: {exc}") from None
        out.append((src, lines))
    return out


def cmd_score(args) -> int:
    cfg = resolve_config("score", _cli_values(args, "score"), args.config)
    path = _require(cfg, "input")
    if not Path(path).exists():
        raise UserError(f"input file not found: {path}")
    out = _out_dir(args)
    rows = []
    for src, _ in _read_annotated_file(path):
        score = score_program(parse(src))
        rows.append((score.cc, score.hd, score.om, classify(score.om)))
    with open(out / "scores.csv", "w", encoding="ascii") as f:
        f.write("index,cc,hd,om,level\n")
        for i, (cc, hd, om, lvl) in enumerate(rows):
            f.write(f"{i},{cc:.6g},{hd:.6g},{om:.6g},{lvl}\n")
    top = max(om for _, _, om, _ in rows)
    n_buckets = int(top // HISTOGRAM_BUCKET) + 1
    buckets = [0] * n_buckets
    for _, _, om, _ in rows:
        buckets[int(om // HISTOGRAM_BUCKET)] += 1
    peak = max(buckets)
    with open(out / "om_histogram.txt", "w", encoding="ascii") as f:
        f.write(f"# OM histogram, bucket width {HISTOGRAM_BUCKET}, n={len(rows)}\n")
        for i, count in enumerate(buckets):
            bar = "#" * (0 if peak == 0 else round(50 * count / peak))
            f.write(f"{i * HISTOGRAM_BUCKET:6.2f} {count:8d} {bar}\n")
    write_config("score", cfg, out)
    _log(f"scored {len(rows)} snippets -> {out / 'scores.csv'}")
    return 0


def cmd_build(args) -> int:
    cfg = resolve_config("build", _cli_values(args, "build"), args.config)
    _apply_threads(cfg)
    profile = _profile_from(cfg)
    out = _out_dir(args)
    _log(f"building dataset: {cfg['per_level']} snippets per level, seed {cfg['seed']}")
    ds = corpus_mod.build_leveled(cfg["per_level"], cfg["split"], cfg["seed"], profile)
    corpus_mod.write_dataset(ds, out)
    write_config("build", cfg, out)
    _log(f"dataset written to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config("train", _cli_values(args, "train"), args.config)
    _apply_threads(cfg)
    dataset_dir = _require(cfg, "dataset")
    if not Path(dataset_dir).exists():
        raise UserError(f"dataset directory not found: {dataset_dir}")
    kind = cfg["schedule"]
    if kind not in curriculum_mod.SCHEDULE_KINDS:
        raise UserError(f"unknown schedule {kind!r}; expected one of {curriculum_mod.SCHEDULE_KINDS}")
    out = _out_dir(args)
    model_cfg = _model_config(cfg)
    plan = TrainPlan(
        total_iters=cfg["total_iters"],
        batch_size=cfg["batch_size"],
        base_lr=cfg["base_lr"],
        milestone_fracs=tuple(cfg["milestones"]),
        decay_factor=cfg["decay_factor"],
        grad_clip=cfg["grad_clip"],
        weight_decay=cfg["weight_decay"],
        log_interval=cfg["log_interval"],
    )
    schedule = curriculum_mod.make_schedule(kind, cfg["total_iters"], cfg["stage_iters"])
    _log(f"loading dataset from {dataset_dir}")
    dataset = read_dataset(dataset_dir)
    _log(f"training {kind} for {cfg['total_iters']} iterations "
         f"({model_cfg.n_layers}L/{model_cfg.n_heads}H/d{model_cfg.embed_dim}/block {model_cfg.block_size})")

    def progress(it, train_loss, val_loss, stage):
        val = "" if val_loss is None else f" val {val_loss:.4f}"
        _log(f"  stage {stage} iter {it}: loss {train_loss:.4f}{val}")

    run = curriculum_mod.run_schedule(
        schedule, dataset, model_cfg, plan, cfg["seed"], out_dir=out, progress=progress
    )
    curriculum_mod.write_train_log(out / "train_log.csv", run.rows)
    shutil.copyfile(run.checkpoints[-1], out / "final.ckpt")
    write_config("train", cfg, out)
    _log(f"done; final checkpoint {out / 'final.ckpt'}")
    return 0


def _load_model(path):
    if not Path(path).exists():
        raise UserError(f"checkpoint not found: {path}")
    return load_checkpoint(path).model


def cmd_eval(args) -> int:
    cfg = resolve_config("eval", _cli_values(args, "eval"), args.config)
    _apply_threads(cfg)
    model = _load_model(_require(cfg, "checkpoint"))
    dataset = read_dataset(_require(cfg, "dataset"))
    out = _out_dir(args)
    report = evaluate_model(model, dataset, cfg["decode"], cfg["temperature"], cfg["sample_seed"])
    with open(out / "report.csv", "w", encoding="ascii") as f:
        f.write("metric,level,value,count\n")
        for metric, lvl, value, count in report.csv_rows():
            f.write(f"{metric},{lvl},{value},{count}\n")
    (out / "report.txt").write_text(report.render(), encoding="ascii")
    write_config("eval", cfg, out)
    _log(report.render())
    return 0


def cmd_compare(args) -> int:
    cfg = resolve_config("compare", _cli_values(args, "compare"), args.config)
    _apply_threads(cfg)
    paths = [p for p in str(_require(cfg, "checkpoints")).split(",") if p]
    labels = str(cfg["labels"]).split(",") if cfg.get("labels") else [Path(p).parent.name or Path(p).stem for p in paths]
    if len(labels) != len(paths):
        raise UserError("number of labels must match number of checkpoints")
    dataset = read_dataset(_require(cfg, "dataset"))
    out = _out_dir(args)
    results = {}
    for label, path in zip(labels, paths):
        _log(f"evaluating {label} ({path})")
        model = _load_model(path)
        results[label] = execution_accuracy(model, dataset, cfg["decode"], cfg["temperature"], cfg["sample_seed"])
    table = exec_comparison_table(results)
    (out / "comparison.txt").write_text(table, encoding="ascii")
    with open(out / "comparison.csv", "w", encoding="ascii") as f:
        f.write("model,all,easy,medium,hard\n")
        for label, acc in results.items():
            f.write(f"{label},{acc.overall:.6f},"
                    + ",".join(f"{acc.per_level[lvl]:.6f}" for lvl in ("easy", "medium", "hard")) + "\n")
    write_config("compare", cfg, out)
    _log("\n" + table)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _cli_values(args, command: str) -> dict:
    return {key: getattr(args, key) for key in _SCHEMAS[command] if hasattr(args, key)}


def _add_common(p):
    p.add_argument("--config", help="key = value file of resolved options to start from")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out-dir", required=True, dest="out_dir")


def _add_profile_flags(p):
    p.add_argument("--level", type=int, help="concept level 1..6 (default: full grammar)")
    p.add_argument("--max-statements", type=int, dest="max_statements")
    p.add_argument("--max-nesting", type=int, dest="max_nesting")
    p.add_argument("--max-elif", type=int, dest="max_elif")
    p.add_argument("--identifiers")
    p.add_argument("--literal-range", type=_ints, dest="literal_range", metavar="LO,HI")


def build_parser() -> _Parser:
    parser = _Parser(prog="tinypy-cl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate annotated snippets")
    _add_common(p)
    _add_profile_flags(p)
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="score an annotated snippet file")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("build", help="build a leveled dataset directory")
    _add_common(p)
    _add_profile_flags(p)
    p.add_argument("--per-level", type=int, dest="per_level")
    p.add_argument("--split", type=_floats, metavar="TRAIN,VAL,TEST")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train under a schedule")
    _add_common(p)
    p.add_argument("--schedule", choices=list(curriculum_mod.SCHEDULE_KINDS))
    p.add_argument("--dataset")
    p.add_argument("--total-iters", type=int, dest="total_iters")
    p.add_argument("--stage-iters", type=_ints, dest="stage_iters", metavar="A,B,C")
    p.add_argument("--model-preset", dest="model_preset", choices=sorted(MODEL_PRESETS))
    p.add_argument("--n-layers", type=int, dest="n_layers")
    p.add_argument("--n-heads", type=int, dest="n_heads")
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--base-lr", type=float, dest="base_lr")
    p.add_argument("--milestones", type=_floats)
    p.add_argument("--decay-factor", type=float, dest="decay_factor")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--grad-clip", type=float, dest="grad_clip")
    p.add_argument("--log-interval", type=int, dest="log_interval")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--decode", choices=("greedy", "sample"))
    p.add_argument("--temperature", type=float)
    p.add_argument("--sample-seed", type=int, dest="sample_seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare checkpoints on execution accuracy")
    _add_common(p)
    p.add_argument("--checkpoints", help="comma-separated checkpoint paths")
    p.add_argument("--labels", help="comma-separated row labels")
    p.add_argument("--dataset")
    p.add_argument("--decode", choices=("greedy", "sample"))
    p.add_argument("--temperature", type=float)
    p.add_argument("--sample-seed", type=int, dest="sample_seed")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UserError as exc:
        _log(f"error: {exc}")
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
