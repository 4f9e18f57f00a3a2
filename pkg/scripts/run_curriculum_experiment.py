"""Desk-scale curriculum comparison.

Builds a 20k-snippets-per-level dataset (once), trains baseline, hybrid, and
hard_only models for 15k iterations each under seeds 1..3 at the desk model
preset, evaluates execution accuracy per difficulty level, and writes
``results.json`` plus per-seed comparison tables.

Checks reported at the end:
  (a) hybrid overall execution accuracy >= baseline in at least 2 of 3 seeds
  (b) hybrid accuracy on the hard test set > hard_only's in at least 2 of 3

Every training run goes through the CLI and is skipped when its final
checkpoint already exists, so the experiment is resumable.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import torch

ROOT = Path(__file__).resolve().parents[1]

from tinypy_cl.cli import main as cli_main
from tinypy_cl.corpus import read_dataset
from tinypy_cl.evaluate import exec_comparison_table, execution_accuracy
from tinypy_cl.model import load_checkpoint

SCHEDULES = ("baseline", "hybrid", "hard_only")
SEEDS = (1, 2, 3)
TOTAL_ITERS = 15_000
PER_LEVEL = 20_000
DATASET_SEED = 1


def ensure_dataset(dataset_dir: Path):
    if (dataset_dir / "manifest.json").exists():
        return
    print(f"building dataset at {dataset_dir}", flush=True)
    rc = cli_main([
        "build", "--per-level", str(PER_LEVEL), "--seed", str(DATASET_SEED),
        "--out-dir", str(dataset_dir),
    ])
    if rc != 0:
        sys.exit(rc)


def train_one(dataset_dir: Path, out_dir: Path, schedule: str, seed: int, threads: int):
    final = out_dir / "final.ckpt"
    if final.exists():
        print(f"[skip] {schedule} seed {seed}: {final} exists", flush=True)
        return
    t0 = time.time()
    print(f"[train] {schedule} seed {seed} -> {out_dir}", flush=True)
    rc = cli_main([
        "train", "--schedule", schedule, "--dataset", str(dataset_dir),
        "--total-iters", str(TOTAL_ITERS), "--model-preset", "desk",
        "--seed", str(seed), "--threads", str(threads),
        "--log-interval", "500", "--out-dir", str(out_dir),
    ])
    if rc != 0:
        sys.exit(rc)
    print(f"[train] {schedule} seed {seed} done in {(time.time() - t0) / 60:.1f} min", flush=True)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "desk_curriculum")
    ap.add_argument("--dataset", type=Path, default=ROOT / "runs" / "desk_dataset")
    ap.add_argument("--threads", type=int, default=torch.get_num_threads())
    args = ap.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    ensure_dataset(args.dataset)

    for seed in SEEDS:
        for schedule in SCHEDULES:
            train_one(args.dataset, args.out / f"{schedule}_s{seed}", schedule, seed, args.threads)

    torch.set_num_threads(args.threads)
    dataset = read_dataset(args.dataset)
    results = {}
    for seed in SEEDS:
        per_seed = {}
        for schedule in SCHEDULES:
            model = load_checkpoint(args.out / f"{schedule}_s{seed}" / "final.ckpt").model
            acc = execution_accuracy(model, dataset)
            per_seed[schedule] = acc
            print(f"seed {seed} {schedule:<10} overall {acc.overall:.4f} "
                  + " ".join(f"{lvl} {acc.per_level[lvl]:.4f}" for lvl in ("easy", "medium", "hard")),
                  flush=True)
        table = exec_comparison_table(per_seed)
        (args.out / f"comparison_seed{seed}.txt").write_text(table)
        print(table, flush=True)
        results[seed] = per_seed

    overall_wins = sum(
        1 for s in SEEDS if results[s]["hybrid"].overall >= results[s]["baseline"].overall
    )
    hard_wins = sum(
        1 for s in SEEDS
        if results[s]["hybrid"].per_level["hard"] > results[s]["hard_only"].per_level["hard"]
    )
    summary = {
        "total_iters": TOTAL_ITERS,
        "per_level": PER_LEVEL,
        "model_preset": "desk",
        "seeds": list(SEEDS),
        "accuracy": {
            str(seed): {
                sched: {"overall": acc.overall, **acc.per_level}
                for sched, acc in per_seed.items()
            }
            for seed, per_seed in results.items()
        },
        "hybrid_overall_ge_baseline_seeds": overall_wins,
        "hybrid_hard_gt_hard_only_seeds": hard_wins,
    }
    (args.out / "results.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"hybrid >= baseline (overall): {overall_wins}/3 seeds")
    print(f"hybrid > hard_only (hard):    {hard_wins}/3 seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
