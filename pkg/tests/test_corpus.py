from collections import Counter
from dataclasses import replace

import pytest

from tinypy_cl.corpus import (
    LeveledDataset, MalformedFileError, build_leveled, read_dataset, render_split,
    top_fraction_hardest, write_dataset,
)
from tinypy_cl.grammar import AnnotatedSnippet, DEFAULT_PROFILE, generate_corpus
from tinypy_cl.metrics import DifficultyScore, LEVELS, classify


@pytest.fixture(scope="module")
def dataset():
    return build_leveled(120, seed=42)


def _multiset(snippets):
    return Counter((s.source, s.output_lines) for s in snippets)


def test_split_fractions():
    ds = build_leveled(1000, (0.85, 0.13, 0.02), seed=5)
    for lvl in LEVELS:
        ss = ds.per_level[lvl]
        assert (len(ss.train), len(ss.val), len(ss.test)) == (850, 130, 20)
    assert len(ds.combined.train) == 3 * 850


def test_level_purity_and_balance(dataset):
    for lvl in LEVELS:
        ss = dataset.per_level[lvl]
        for split in (ss.train, ss.val, ss.test):
            for s in split:
                assert classify(s.score.om) == lvl == s.level
        assert len(ss.train) + len(ss.val) + len(ss.test) == 120


def test_all_split_is_permutation(dataset):
    for name in ("train", "val", "test"):
        union = Counter()
        for lvl in LEVELS:
            union += _multiset(getattr(dataset.per_level[lvl], name))
        assert _multiset(getattr(dataset.combined, name)) == union


def test_build_determinism():
    a = build_leveled(60, seed=9)
    b = build_leveled(60, seed=9)
    assert render_split(a.combined.train) == render_split(b.combined.train)
    assert render_split(a.per_level["hard"].test) == render_split(b.per_level["hard"].test)


def test_build_validation():
    with pytest.raises(ValueError):
        build_leveled(5, seed=1)
    with pytest.raises(ValueError):
        build_leveled(100, (0.8, 0.1, 0.2), seed=1)


def test_level_starvation_guard(monkeypatch):
    from tinypy_cl import corpus as corpus_mod
    from tinypy_cl.interp import execute, parse

    easy_src = "a = 1\n"
    easy = (parse(easy_src), easy_src, execute(parse(easy_src)).lines)

    monkeypatch.setattr(corpus_mod, "_generate_executed", lambda profile, rng: easy)
    monkeypatch.setattr(corpus_mod, "STARVATION_CHECK_AT", 500)
    with pytest.raises(corpus_mod.LevelStarvationError):
        build_leveled(10, seed=1)


def _snip(om, cc=1.0, tag="s"):
    return AnnotatedSnippet(f"{tag}\n", (), DifficultyScore(cc, 2 * om - cc, om), classify(om))


def test_top_fraction_hardest():
    snippets = [_snip(1.0, tag="a"), _snip(1.5, tag="b"), _snip(1.8, tag="c"), _snip(1.2, tag="d")]
    assert top_fraction_hardest(snippets, 1.0) == snippets  # identity
    picked = top_fraction_hardest(snippets, 0.5)
    assert [s.source for s in picked] == ["b\n", "c\n"]  # the OM-1.8 and OM-1.5 ones

    equal = [_snip(2.0, tag=t) for t in "abcd"]
    assert [s.source for s in top_fraction_hardest(equal, 0.5)] == ["a\n", "b\n"]

    # ties on OM break toward higher CC
    tied = [_snip(2.0, cc=1.0, tag="low"), _snip(2.0, cc=3.0, tag="high")]
    assert top_fraction_hardest(tied, 0.26)[0].source == "high\n"

    assert len(top_fraction_hardest(snippets, 0.01)) == 1  # ceil
    with pytest.raises(ValueError):
        top_fraction_hardest([], 0.5)
    with pytest.raises(ValueError):
        top_fraction_hardest(snippets, 0.0)


def test_write_read_roundtrip(dataset, tmp_path):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    write_dataset(dataset, d1)
    ds2 = read_dataset(d1)
    write_dataset(ds2, d2)
    files = sorted(p.relative_to(d1) for p in d1.rglob("*.txt"))
    assert files
    for rel in files:
        assert (d1 / rel).read_bytes() == (d2 / rel).read_bytes()
    for lvl in LEVELS:
        assert _multiset(ds2.per_level[lvl].train) == _multiset(dataset.per_level[lvl].train)
        for a, b in zip(dataset.per_level[lvl].test, ds2.per_level[lvl].test):
            assert a.score == b.score and a.level == b.level
    assert len(ds2.combined.test) == len(dataset.combined.test)


def test_read_rejects_missing_terminator(dataset, tmp_path):
    write_dataset(dataset, tmp_path)
    victim = tmp_path / "easy" / "train.txt"
    victim.write_text(victim.read_text()[:-1])  # drop the final blank line
    with pytest.raises(MalformedFileError):
        read_dataset(tmp_path)


def test_read_reports_offset(dataset, tmp_path):
    write_dataset(dataset, tmp_path)
    victim = tmp_path / "medium" / "val.txt"
    text = victim.read_text()
    victim.write_text(text.replace("# output\n", "#output\n", 1))
    with pytest.raises(MalformedFileError) as err:
        read_dataset(tmp_path)
    assert "offset" in str(err.value)


def test_manifest_contents(dataset, tmp_path):
    import json

    write_dataset(dataset, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["deduplicated"] is False
    assert manifest["thresholds"] == {"easy_below": 2.0, "hard_at_or_above": 4.0}
    assert manifest["counts"]["all/train"] == 3 * len(dataset.per_level["easy"].train)
    assert "alphabet_crc" in manifest and "seed" in manifest
