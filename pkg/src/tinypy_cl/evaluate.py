"""The three evaluation protocols plus the concept-level validation study.

* token-level completion: teacher-forced argmax accuracy over every position
  of the code region (the source text, which ends at the newline before the
  ``# output`` marker), each predicted from its full in-snippet context
* line-level completion: for every code line after the first, prompt with the
  preceding lines and generate until a newline (or 128 tokens); exact-match
  accuracy and Levenshtein edit similarity on stripped lines
* execution: prompt with the code region plus ``# output\\n`` and generate
  until the blank-line terminator; correct only if the generated text equals
  the true ``# ``-prefixed output block byte for byte

Greedy decoding is the default everywhere; multinomial sampling is available
behind ``decode="sample"`` with a temperature and seed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import torch
from scipy import stats

from .interp import OUTPUT_MARKER
from .metrics import LEVELS
from .model import detokenize, generate_batch, tokenize

LINE_MAX_NEW = 128
EXEC_SLACK = 32


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute edit distance."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(pred: str, ref: str) -> float:
    """100 * (1 - levenshtein / max(len, 1)), in [0, 100]."""
    return 100.0 * (1.0 - levenshtein(pred, ref) / max(len(pred), len(ref), 1))


# ---------------------------------------------------------------------------
# Token-level completion
# ---------------------------------------------------------------------------

def _argmax_batch(model, windows: list) -> list:
    """Argmax next-token predictions for a list of id arrays (right-padded
    into one forward; padding cannot influence earlier positions)."""
    lens = [len(w) for w in windows]
    width = max(lens)
    idx = np.zeros((len(windows), width), dtype=np.int64)
    for i, w in enumerate(windows):
        idx[i, : lens[i]] = w
    with torch.no_grad():
        logits = model(torch.from_numpy(idx))
    preds = torch.argmax(logits, dim=-1).numpy()
    return [preds[i, : lens[i]] for i in range(len(windows))]


def token_level_accuracy(model, snippets, chunk: int = 128) -> tuple:
    """(accuracy, position count) of teacher-forced next-token prediction
    over code regions."""
    block = model.config.block_size
    correct = 0
    total = 0
    windows = []
    targets = []

    def flush():
        nonlocal correct, total
        if not windows:
            return
        for pred, tgt in zip(_argmax_batch(model, windows), targets):
            # targets align with the tail of the window (a full window for the
            # in-block case, the final position for overflow windows)
            correct += int((pred[len(pred) - len(tgt):] == tgt).sum())
            total += len(tgt)
        windows.clear()
        targets.clear()

    for s in snippets:
        ids = tokenize(s.source).astype(np.int64)
        n = len(ids)
        if n < 2:
            continue
        head = min(n - 1, block)
        windows.append(ids[:head])
        targets.append(ids[1 : head + 1])
        # targets past the block limit: one maximal-context window each, the
        # prediction read from the final position only
        for t in range(head + 1, n):
            windows.append(ids[t - block : t])
            targets.append(ids[t : t + 1])
        if len(windows) >= chunk:
            flush()
    flush()
    if total == 0:
        raise ValueError("no predictable positions in the given snippets")
    return correct / total, total


# ---------------------------------------------------------------------------
# Generation-based protocols
# ---------------------------------------------------------------------------

def _grouped_generate(model, items, mode, temperature, seed, stop):
    """items: (prompt_ids, max_new) pairs.  Groups by prompt length for
    batched decoding; returns generated id arrays in input order."""
    by_len = defaultdict(list)
    for i, (prompt, cap) in enumerate(items):
        by_len[len(prompt)].append((i, prompt, cap))
    out = [None] * len(items)
    for _, group in sorted(by_len.items()):
        prompts = [g[1] for g in group]
        caps = [g[2] for g in group]
        results = generate_batch(
            model, prompts, caps, mode=mode, temperature=temperature, seed=seed, stop=stop
        )
        for (i, _, _), gen in zip(group, results):
            out[i] = gen
    return out


def line_level_eval(model, snippets, decode: str = "greedy", temperature: float = 1.0, seed: int = 0) -> tuple:
    """(exact-match accuracy, mean edit similarity, item count) over every
    code line after the first, micro-averaged."""
    items = []
    refs = []
    for s in snippets:
        lines = s.source.split("\n")[:-1]
        for i in range(1, len(lines)):
            prompt = "\n".join(lines[:i]) + "\n"
            items.append((tokenize(prompt).astype(np.int64), LINE_MAX_NEW))
            refs.append(lines[i].strip())
    if not items:
        raise ValueError("no multi-line snippets to evaluate")
    gens = _grouped_generate(model, items, decode, temperature, seed, stop="newline")
    exact = 0
    es_total = 0.0
    for gen, ref in zip(gens, refs):
        pred = detokenize(gen).split("\n")[0].strip()
        exact += int(pred == ref)
        es_total += edit_similarity(pred, ref)
    n = len(refs)
    return exact / n, es_total / n, n


def expected_output_block(snippet) -> str:
    """The text the model must produce after ``# output\\n``: the comment
    lines plus the terminating blank line."""
    return "".join(f"# {line}\n" for line in snippet.output_lines) + "\n"


def execution_accuracy_on(model, snippets, decode: str = "greedy", temperature: float = 1.0, seed: int = 0) -> tuple:
    """(correct, total) exact-match output prediction over a snippet list."""
    items = []
    expected = []
    for s in snippets:
        prompt = s.source + OUTPUT_MARKER + "\n"
        want = expected_output_block(s)
        items.append((tokenize(prompt).astype(np.int64), 2 * len(want) + EXEC_SLACK))
        expected.append(want)
    gens = _grouped_generate(model, items, decode, temperature, seed, stop="terminator")
    correct = sum(int(detokenize(g) == want) for g, want in zip(gens, expected))
    return correct, len(snippets)


@dataclass
class ExecAccuracy:
    per_level: dict
    counts: dict
    overall: float
    total: int


def execution_accuracy(model, dataset, decode: str = "greedy", temperature: float = 1.0, seed: int = 0) -> ExecAccuracy:
    """Output-prediction accuracy per difficulty level and overall (overall
    is the count-weighted mean, i.e. accuracy over the union)."""
    per_level = {}
    counts = {}
    good = 0
    total = 0
    for lvl in LEVELS:
        snippets = dataset.per_level[lvl].test
        if not snippets:
            raise ValueError(f"no test snippets for level {lvl}")
        c, n = execution_accuracy_on(model, snippets, decode, temperature, seed)
        per_level[lvl] = c / n
        counts[lvl] = n
        good += c
        total += n
    return ExecAccuracy(per_level=per_level, counts=counts, overall=good / total, total=total)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    token_acc: float
    token_count: int
    line_acc: float
    line_es: float
    line_count: int
    exec_acc: ExecAccuracy
    decode: str = "greedy"

    def csv_rows(self):
        rows = [
            ("token_level_accuracy", "all", f"{self.token_acc:.6f}", self.token_count),
            ("line_level_accuracy", "all", f"{self.line_acc:.6f}", self.line_count),
            ("line_level_edit_similarity", "all", f"{self.line_es:.4f}", self.line_count),
        ]
        for lvl in LEVELS:
            rows.append(("execution_accuracy", lvl, f"{self.exec_acc.per_level[lvl]:.6f}", self.exec_acc.counts[lvl]))
        rows.append(("execution_accuracy", "all", f"{self.exec_acc.overall:.6f}", self.exec_acc.total))
        return rows

    def render(self) -> str:
        e = self.exec_acc
        lines = [
            f"decode mode          : {self.decode}",
            f"token-level accuracy : {self.token_acc * 100:6.2f}%  ({self.token_count} positions)",
            f"line-level accuracy  : {self.line_acc * 100:6.2f}%  ({self.line_count} lines)",
            f"line-level ES        : {self.line_es:6.2f}",
            "execution accuracy   :",
            f"    ALL    {e.overall * 100:6.2f}%  ({e.total})",
        ]
        for lvl in LEVELS:
            lines.append(f"    {lvl:<6} {e.per_level[lvl] * 100:6.2f}%  ({e.counts[lvl]})")
        return "\n".join(lines) + "\n"


def evaluate_model(model, dataset, decode: str = "greedy", temperature: float = 1.0, seed: int = 0) -> EvalReport:
    test_all = dataset.combined.test
    token_acc, token_n = token_level_accuracy(model, test_all)
    line_acc, line_es, line_n = line_level_eval(model, test_all, decode, temperature, seed)
    exec_acc = execution_accuracy(model, dataset, decode, temperature, seed)
    return EvalReport(token_acc, token_n, line_acc, line_es, line_n, exec_acc, decode)


def exec_comparison_table(results: dict) -> str:
    """Side-by-side execution accuracy (rows: models; columns: ALL and the
    three levels)."""
    header = f"{'model':<16}{'ALL':>9}{'Easy':>9}{'Medium':>9}{'Hard':>9}"
    lines = [header, "-" * len(header)]
    for name, acc in results.items():
        lines.append(
            f"{name:<16}{acc.overall * 100:8.2f}%"
            + "".join(f"{acc.per_level[lvl] * 100:8.2f}%" for lvl in LEVELS)
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Concept-level validation
# ---------------------------------------------------------------------------

def om_validation(models: dict, test_corpora: dict, decode: str = "greedy", temperature: float = 1.0, seed: int = 0):
    """Per concept level: mean OM of its corpus and execution accuracy of its
    model, plus the Spearman rank correlation between the two across levels.

    Returns (rows, spearman_rho) with rows of (level, mean_om, accuracy).
    """
    rows = []
    for level in sorted(models):
        corpus = test_corpora[level]
        mean_om = sum(s.score.om for s in corpus) / len(corpus)
        c, n = execution_accuracy_on(models[level], corpus, decode, temperature, seed)
        rows.append((level, mean_om, c / n))
    rho = float(stats.spearmanr([r[1] for r in rows], [r[2] for r in rows]).statistic)
    return rows, rho
