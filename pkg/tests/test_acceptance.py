"""Acceptance suite: one test per criterion, each printing a PASS line.

The two desk-scale studies (curriculum comparison, concept-level validation)
run through their scripts in ``scripts/`` and cache their artifacts under
``runs/``; when the artifacts already exist the tests validate them without
retraining.  Delete ``runs/`` to force a full re-run.  Everything else runs
in-process and is fast.
"""

import json
import math
import random
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
import torch

from tinypy_cl.corpus import build_leveled, top_fraction_hardest
from tinypy_cl.curriculum import make_schedule, stage_snippets
from tinypy_cl.evaluate import execution_accuracy_on
from tinypy_cl.grammar import DEFAULT_PROFILE, generate_corpus, generate_snippet
from tinypy_cl.interp import execute, parse
from tinypy_cl.metrics import (
    build_cfg, classify, cyclomatic_complexity, halstead_counts, score_program,
)
from tinypy_cl.model import (
    DESK_CONFIG, ModelConfig, TINY_CONFIG, TrainPlan, cross_entropy_loss, init_params,
    loss_and_grads, tokenize, train,
)
from tinypy_cl.corpus import render_split

from metrics_oracle import ORACLE_ROWS, expected_hd, expected_om

ROOT = Path(__file__).resolve().parents[1]
RUNS = ROOT / "runs"
GOLDEN = Path(__file__).parent / "data" / "golden_outputs_10k.txt"
GOLDEN_SEED = 20240


def report(n, text):
    print(f"\nACCEPTANCE C{n:02d} PASS: {text}")


def test_c01_metrics_oracle_suite():
    t0 = time.process_time()
    for src, cc, eta1, eta2, n1, n2 in ORACLE_ROWS:
        prog = parse(src)
        assert cyclomatic_complexity(prog) == cc
        counts = halstead_counts(prog)
        assert (counts.eta1, counts.eta2, counts.n1_total, counts.n2_total) == (eta1, eta2, n1, n2)
        score = score_program(prog)
        hd = expected_hd(eta1, eta2, n2)
        assert abs(score.hd - hd) <= 1e-9
        assert abs(score.om - expected_om(cc, hd)) <= 1e-9
    dt = time.process_time() - t0
    assert dt < 1.0
    report(1, f"{len(ORACLE_ROWS)} hand-computed snippets exact in {dt:.2f}s CPU")


def test_c02_cc_duality_on_5000_snippets():
    t0 = time.process_time()
    rng = random.Random(555)
    for _ in range(5000):
        prog = parse(generate_snippet(DEFAULT_PROFILE, rng))
        assert build_cfg(prog).cyclomatic == cyclomatic_complexity(prog)
    dt = time.process_time() - t0
    assert dt < 10.0
    report(2, f"decisions+1 == E-N+2P on 5000 generated snippets in {dt:.1f}s CPU")


def test_c03_interpreter_equivalence_golden():
    t0 = time.process_time()
    snippets = generate_corpus(DEFAULT_PROFILE, 10_000, seed=GOLDEN_SEED)
    blocks = {}
    for block in GOLDEN.read_text(encoding="ascii").split("=== ")[1:]:
        head, _, rest = block.partition("\n")
        blocks[int(head)] = rest.split("\n")[:-1] if rest else []
    assert len(blocks) == 10_000
    for i, s in enumerate(snippets):
        assert list(execute(parse(s.source)).lines) == blocks[i], f"snippet {i} diverges"
    dt = time.process_time() - t0
    assert dt < 60.0
    report(3, f"10,000 snippets match the reference-Python golden file in {dt:.1f}s CPU")


def test_c04_threshold_semantics():
    assert classify(1.999999999) == "easy"
    assert classify(2.0) == "medium"
    assert classify(4.0) == "hard"
    report(4, "classify is right-open at 2 and left-closed at 4")


@pytest.fixture(scope="module")
def dataset_4k():
    return build_leveled(4000, seed=11)


def test_c05_dataset_shape(dataset_4k):
    for lvl in ("easy", "medium", "hard"):
        ss = dataset_4k.per_level[lvl]
        assert (len(ss.train), len(ss.val), len(ss.test)) == (3400, 520, 80)
    for name in ("train", "val", "test"):
        union = Counter()
        for lvl in ("easy", "medium", "hard"):
            union += Counter(s.source for s in getattr(dataset_4k.per_level[lvl], name))
        assert Counter(s.source for s in getattr(dataset_4k.combined, name)) == union
    report(5, "4000/level -> 3400/520/80 splits; ALL splits are exact level unions")


def test_c06_schedule_composition(dataset_4k):
    ds = dataset_4k
    mset = lambda snips: Counter((s.source, s.output_lines) for s in snips)

    hybrid2 = make_schedule("hybrid", 120).stages[1]
    want = mset(top_fraction_hardest(ds.per_level["easy"].train, 0.5)) + mset(ds.per_level["medium"].train)
    assert mset(stage_snippets(hybrid2, ds)) == want

    inc3 = make_schedule("incremental", 120).stages[2]
    want = Counter()
    for lvl in ("easy", "medium", "hard"):
        want += mset(ds.per_level[lvl].train)
    assert mset(stage_snippets(inc3, ds)) == want

    for k, lvl in enumerate(("easy", "medium", "hard")):
        stage = make_schedule("sequential", 120).stages[k]
        assert mset(stage_snippets(stage, ds)) == mset(ds.per_level[lvl].train)
    report(6, "hybrid/incremental/sequential stage multisets match their definitions")


def test_c07_parameter_count():
    n = init_params(ModelConfig(), seed=0).num_params()
    assert 950_000 <= n <= 1_150_000
    report(7, f"default configuration has {n:,} parameters (within [0.95M, 1.15M])")


def test_c08_full_gradient_check():
    t0 = time.process_time()
    torch.manual_seed(0)
    model = init_params(TINY_CONFIG, seed=4, dtype=torch.float64)
    batch = torch.randint(0, TINY_CONFIG.vocab_size, (2, TINY_CONFIG.block_size + 1))
    _, grads = loss_and_grads(model, batch)
    h = 1e-3
    worst = 0.0
    checked = 0
    for p, g in zip(model.parameters(), grads):
        flat = p.detach().reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.numel()):
            with torch.no_grad():
                orig = float(flat[j])
                flat[j] = orig + h
                up = float(cross_entropy_loss(model(batch[:, :-1]), batch[:, 1:]))
                flat[j] = orig - h
                down = float(cross_entropy_loss(model(batch[:, :-1]), batch[:, 1:]))
                flat[j] = orig
            fd = (up - down) / (2 * h)
            a = float(gflat[j])
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1.0))
            checked += 1
    dt = time.process_time() - t0
    assert checked == model.num_params() == 6608
    assert worst < 1e-4
    report(8, f"all {checked} parameter gradients match central differences "
              f"(max rel err {worst:.2e}) in {dt:.0f}s CPU")


def test_c09_analytic_uniform_loss():
    model = init_params(ModelConfig(n_layers=2, n_heads=2, embed_dim=32, block_size=64),
                        seed=0, dtype=torch.float64)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    idx = torch.randint(0, 41, (4, 65))
    with torch.no_grad():
        loss = float(cross_entropy_loss(model(idx[:, :-1]), idx[:, 1:]))
    assert abs(loss - math.log(41)) < 1e-6
    report(9, f"uniform-logit cross-entropy = {loss:.9f} = ln(41) within 1e-6")


def test_c10_overfit_sanity():
    snippets = generate_corpus(DEFAULT_PROFILE, 32, seed=321)
    stream = tokenize(render_split(snippets))
    model = init_params(DESK_CONFIG, seed=7)
    plan = TrainPlan(total_iters=2000, log_interval=500)
    result = train(model, plan, stream, seed=9)
    final_loss = result.rows[-1][3]
    assert final_loss < 0.05
    correct, total = execution_accuracy_on(model, snippets)
    assert (correct, total) == (32, 32)
    report(10, f"32-snippet overfit: final loss {final_loss:.4f} < 0.05, execution 32/32")


def _ensure_script_ran(script: str, results: Path):
    if results.exists():
        return f"cached artifacts in {results.parent.name}/"
    proc = subprocess.run([sys.executable, str(ROOT / "scripts" / script)], cwd=ROOT)
    assert proc.returncode == 0, f"{script} failed"
    assert results.exists()
    return "freshly computed"


def test_c11_desk_scale_curriculum():
    results_path = RUNS / "desk_curriculum" / "results.json"
    source = _ensure_script_ran("run_curriculum_experiment.py", results_path)
    results = json.loads(results_path.read_text())
    assert results["total_iters"] == 15_000
    assert results["per_level"] == 20_000
    assert results["seeds"] == [1, 2, 3]
    overall_wins = results["hybrid_overall_ge_baseline_seeds"]
    hard_wins = results["hybrid_hard_gt_hard_only_seeds"]
    for seed in ("1", "2", "3"):
        assert (RUNS / "desk_curriculum" / f"comparison_seed{seed}.txt").exists()
    assert overall_wins >= 2, f"hybrid >= baseline overall in only {overall_wins}/3 seeds"
    assert hard_wins >= 2, f"hybrid > hard_only on hard in only {hard_wins}/3 seeds"
    report(11, f"hybrid >= baseline overall in {overall_wins}/3 seeds, "
               f"hybrid > hard_only on hard in {hard_wins}/3 seeds ({source})")


def test_c12_om_validation():
    results_path = RUNS / "om_validation" / "results.json"
    source = _ensure_script_ran("run_om_validation.py", results_path)
    results = json.loads(results_path.read_text())
    assert len(results["rows"]) == 6
    rho = results["spearman_rho"]
    assert rho < 0, f"expected negative Spearman correlation, got {rho}"
    acc = {row["level"]: row["accuracy"] for row in results["rows"]}
    assert acc[1] > acc[4], "level 1 should be easier to learn than level 4"
    report(12, f"Spearman rho(mean OM, accuracy) = {rho:.3f} < 0 across six levels ({source})")


def test_c13_cli_determinism(tmp_path):
    from tinypy_cl.cli import main as cli

    def tree(root: Path) -> dict:
        return {str(p.relative_to(root)): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    ds = tmp_path / "ds"
    assert cli(["build", "--per-level", "60", "--seed", "5", "--out-dir", str(ds)]) == 0
    assert cli(["build", "--config", str(ds / "config.txt"), "--out-dir", str(tmp_path / "ds2")]) == 0
    assert tree(ds) == tree(tmp_path / "ds2")

    g1, g2 = tmp_path / "g1", tmp_path / "g2"
    assert cli(["generate", "--count", "40", "--seed", "3", "--out-dir", str(g1)]) == 0
    assert cli(["generate", "--config", str(g1 / "config.txt"), "--out-dir", str(g2)]) == 0
    assert tree(g1) == tree(g2)

    s1, s2 = tmp_path / "s1", tmp_path / "s2"
    assert cli(["score", "--input", str(tmp_path / "g1" / "snippets.txt"), "--out-dir", str(s1)]) == 0
    assert cli(["score", "--config", str(s1 / "config.txt"), "--out-dir", str(s2)]) == 0
    assert tree(s1) == tree(s2)

    t1, t2 = tmp_path / "t1", tmp_path / "t2"
    train_args = ["train", "--schedule", "hybrid", "--dataset", str(ds), "--total-iters", "30",
                  "--n-layers", "1", "--n-heads", "1", "--embed-dim", "8", "--block-size", "32",
                  "--batch-size", "4", "--log-interval", "10", "--seed", "4"]
    assert cli(train_args + ["--out-dir", str(t1)]) == 0
    assert cli(["train", "--config", str(t1 / "config.txt"), "--dataset", str(ds),
                "--out-dir", str(t2)]) == 0
    assert tree(t1) == tree(t2)

    e1, e2 = tmp_path / "e1", tmp_path / "e2"
    assert cli(["eval", "--checkpoint", str(t1 / "final.ckpt"), "--dataset", str(ds),
                "--out-dir", str(e1)]) == 0
    assert cli(["eval", "--config", str(e1 / "config.txt"), "--checkpoint", str(t1 / "final.ckpt"),
                "--dataset", str(ds), "--out-dir", str(e2)]) == 0
    assert tree(e1) == tree(e2)

    c1, c2 = tmp_path / "c1", tmp_path / "c2"
    assert cli(["compare", "--checkpoints", str(t1 / "final.ckpt"), "--labels", "m",
                "--dataset", str(ds), "--out-dir", str(c1)]) == 0
    assert cli(["compare", "--config", str(c1 / "config.txt"), "--out-dir", str(c2)]) == 0
    assert tree(c1) == tree(c2)

    report(13, "generate/score/build/train/eval/compare reruns are byte-identical")
