"""Concept-level difficulty validation.

For each of the six concept levels: generate a corpus under that level's
grammar profile, train a small model on it (3k iterations at the concept
preset), and measure execution accuracy on held-out snippets.  Reports the
per-level (mean OM, accuracy) table and the Spearman rank correlation
between the two, which is expected to be negative.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import torch

ROOT = Path(__file__).resolve().parents[1]

from tinypy_cl.corpus import render_split
from tinypy_cl.evaluate import om_validation
from tinypy_cl.grammar import concept_profile, generate_corpus
from tinypy_cl.model import (
    CONCEPT_CONFIG, TrainPlan, generator_state_bytes, init_params, load_checkpoint,
    save_checkpoint, tokenize, train,
)

LEVELS = (1, 2, 3, 4, 5, 6)
CORPUS_SIZE = 4400
TEST_SIZE = 400
TOTAL_ITERS = 3000


def corpus_for(level: int):
    snippets = generate_corpus(concept_profile(level), CORPUS_SIZE, seed=100 + level)
    return snippets[:-TEST_SIZE], snippets[-TEST_SIZE:], snippets


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "om_validation")
    ap.add_argument("--threads", type=int, default=torch.get_num_threads())
    args = ap.parse_args(argv)
    torch.set_num_threads(args.threads)
    args.out.mkdir(parents=True, exist_ok=True)

    models = {}
    tests = {}
    mean_oms = {}
    for level in LEVELS:
        train_snips, test_snips, full = corpus_for(level)
        tests[level] = test_snips
        mean_oms[level] = sum(s.score.om for s in full) / len(full)
        ckpt = args.out / f"level{level}.ckpt"
        if ckpt.exists():
            print(f"[skip] level {level}: {ckpt} exists", flush=True)
            models[level] = load_checkpoint(ckpt).model
            continue
        t0 = time.time()
        stream = tokenize(render_split(train_snips))
        model = init_params(CONCEPT_CONFIG, seed=level)
        plan = TrainPlan(total_iters=TOTAL_ITERS, log_interval=500)
        result = train(model, plan, stream, seed=1000 + level)
        save_checkpoint(ckpt, model, result.optimizer, generator_state_bytes(result.generator),
                        {"concept_level": level, "iters": TOTAL_ITERS})
        models[level] = model
        last = result.rows[-1]
        print(f"[train] level {level}: final loss {last[3]:.4f} in {(time.time() - t0) / 60:.1f} min",
              flush=True)

    rows, rho = om_validation(models, tests)
    lines = [f"{'level':>5} {'mean OM':>9} {'accuracy':>9}"]
    for level, om, acc in rows:
        lines.append(f"{level:>5} {om:9.2f} {acc * 100:8.2f}%")
    lines.append(f"Spearman rho(OM, accuracy) = {rho:.3f}")
    table = "\n".join(lines) + "\n"
    print(table, flush=True)
    (args.out / "table.txt").write_text(table)
    (args.out / "results.json").write_text(json.dumps({
        "rows": [{"level": lv, "mean_om": om, "accuracy": acc} for lv, om, acc in rows],
        "spearman_rho": rho,
        "total_iters": TOTAL_ITERS,
        "corpus_size": CORPUS_SIZE,
        "test_size": TEST_SIZE,
    }, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
