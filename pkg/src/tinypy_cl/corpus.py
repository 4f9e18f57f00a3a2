"""Leveled dataset construction and the on-disk corpus format.

A dataset directory holds one text file per split per level plus the
shuffled union of the levels::

    <root>/{easy,medium,hard,all}/{train,val,test}.txt
    <root>/manifest.json

Each ``.txt`` file is a concatenation of annotated snippets (code,
``# output`` marker, ``# <value>`` lines, one terminating blank line); the
character stream a model trains on is exactly the bytes of these files.
Snippets are not deduplicated (recorded in the manifest).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .alphabet import alphabet_crc
from .grammar import AnnotatedSnippet, DEFAULT_PROFILE, GrammarProfile, _generate_executed, annotate
from .interp import parse, render_annotated, split_annotated
from .metrics import LEVELS, classify, score_program

ALL = "all"
SPLITS = ("train", "val", "test")
DEFAULT_SPLIT_FRACS = (0.85, 0.13, 0.02)

# level-starvation guard: minimum acceptance rate, checked once this many
# draws have been made
STARVATION_MIN_RATE = 0.001
STARVATION_CHECK_AT = 1_000_000


class LevelStarvationError(Exception):
    """A level's acceptance rate is too low to ever fill; the generator
    profile must be widened instead of looping forever."""


class MalformedFileError(Exception):
    def __init__(self, msg: str, path, offset: int):
        super().__init__(f"{path}: {msg} (byte offset {offset})")
        self.path = path
        self.offset = offset


@dataclass
class SplitSet:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def get(self, split: str) -> list:
        return getattr(self, split)


@dataclass
class LeveledDataset:
    per_level: dict  # level name -> SplitSet
    combined: SplitSet  # the shuffled ALL splits
    meta: dict = field(default_factory=dict)

    def level(self, name: str) -> SplitSet:
        if name == ALL:
            return self.combined
        return self.per_level[name]


def _derive_seed(seed: int, salt: int) -> int:
    return (seed * 0x9E3779B9 + salt) % (2**32)


def _split_counts(n: int, fracs) -> tuple:
    n_train = round(n * fracs[0])
    n_val = round(n * fracs[1])
    return n_train, n_val, n - n_train - n_val


def _partition(snippets: list, fracs, rng: random.Random) -> SplitSet:
    order = list(range(len(snippets)))
    rng.shuffle(order)
    n_train, n_val, n_test = _split_counts(len(snippets), fracs)
    shuffled = [snippets[i] for i in order]
    return SplitSet(
        train=shuffled[:n_train],
        val=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
    )


def build_leveled(
    per_level_count: int,
    split=DEFAULT_SPLIT_FRACS,
    seed: int = 0,
    profile: GrammarProfile = DEFAULT_PROFILE,
) -> LeveledDataset:
    """Generate until every difficulty level holds `per_level_count` snippets
    (rejection sampling on the classified level), then partition each level
    and build the shuffled ALL splits."""
    if per_level_count < 10:
        raise ValueError("per_level_count must be >= 10")
    if abs(sum(split) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {split}")

    rng = random.Random(seed)
    pools = {lvl: [] for lvl in LEVELS}
    draws = 0
    while True:
        unfilled = [lvl for lvl in LEVELS if len(pools[lvl]) < per_level_count]
        if not unfilled:
            break
        prog, src, out = _generate_executed(profile, rng)
        snippet = annotate(prog, src, out)
        if len(pools[snippet.level]) < per_level_count:
            pools[snippet.level].append(snippet)
        draws += 1
        if draws >= STARVATION_CHECK_AT:
            for lvl in unfilled:
                rate = len(pools[lvl]) / draws
                if rate < STARVATION_MIN_RATE:
                    raise LevelStarvationError(
                        f"level {lvl!r} acceptance rate {rate:.2e} after {draws} draws"
                    )

    per_level = {
        lvl: _partition(pools[lvl], split, random.Random(_derive_seed(seed, i + 1)))
        for i, lvl in enumerate(LEVELS)
    }
    combined = SplitSet()
    for i, name in enumerate(SPLITS):
        merged = [s for lvl in LEVELS for s in per_level[lvl].get(name)]
        random.Random(_derive_seed(seed, 100 + i)).shuffle(merged)
        setattr(combined, name, merged)

    meta = {
        "per_level_count": per_level_count,
        "split_fracs": list(split),
        "seed": seed,
        "thresholds": {"easy_below": 2.0, "hard_at_or_above": 4.0},
        "alphabet_crc": alphabet_crc(),
        "deduplicated": False,
        "generator_draws": draws,
        "format": "annotated-v1",
    }
    return LeveledDataset(per_level=per_level, combined=combined, meta=meta)


def top_fraction_hardest(snippets, fraction: float) -> list:
    """The ceil(fraction * n) snippets with the highest OM; ties broken by
    higher CC, then input order."""
    if not snippets:
        raise ValueError("empty snippet list")
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = int(-(-len(snippets) * fraction // 1))  # ceil
    order = sorted(range(len(snippets)), key=lambda i: (-snippets[i].score.om, -snippets[i].score.cc, i))
    return [snippets[i] for i in sorted(order[:k])]  # selected subset, input order


def render_split(snippets) -> str:
    """The training-stream text of a snippet list (concatenated annotated
    blocks)."""
    return "".join(render_annotated(s.source, s.output_lines) for s in snippets)


def write_dataset(ds: LeveledDataset, directory) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    counts = {}
    for lvl in (*LEVELS, ALL):
        split_set = ds.level(lvl)
        (root / lvl).mkdir(exist_ok=True)
        for name in SPLITS:
            (root / lvl / f"{name}.txt").write_text(render_split(split_set.get(name)), encoding="ascii")
            counts[f"{lvl}/{name}"] = len(split_set.get(name))
    manifest = dict(ds.meta)
    manifest["counts"] = counts
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii")


def _read_split_file(path: Path) -> list:
    text = path.read_text(encoding="ascii")
    snippets = []
    offset = 0
    if text and not text.endswith("\n\n"):
        raise MalformedFileError("file does not end with the blank-line terminator", path, len(text))
    blocks = text.split("\n\n")
    if blocks and blocks[-1] == "":
        blocks.pop()
    for block in blocks:
        if block == "":
            raise MalformedFileError("empty snippet block", path, offset)
        try:
            src, out = split_annotated(block + "\n")
            prog = parse(src)
        except Exception as exc:
            raise MalformedFileError(str(exc), path, offset) from exc
        score = score_program(prog)
        snippets.append(AnnotatedSnippet(src, tuple(out), score, classify(score.om)))
        offset += len(block) + 2
    return snippets


def read_dataset(directory) -> LeveledDataset:
    """Exact inverse of :func:`write_dataset` (scores are recomputed, which
    is deterministic)."""
    root = Path(directory)
    manifest_path = root / "manifest.json"
    meta = {}
    if manifest_path.exists():
        meta = json.loads(manifest_path.read_text(encoding="ascii"))
        meta.pop("counts", None)
    per_level = {}
    for lvl in LEVELS:
        per_level[lvl] = SplitSet(*[_read_split_file(root / lvl / f"{n}.txt") for n in SPLITS])
    combined = SplitSet(*[_read_split_file(root / ALL / f"{n}.txt") for n in SPLITS])
    return LeveledDataset(per_level=per_level, combined=combined, meta=meta)
