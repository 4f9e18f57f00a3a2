import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tinypy_cl.corpus import build_leveled
from tinypy_cl.evaluate import (
    edit_similarity, exec_comparison_table, execution_accuracy, execution_accuracy_on,
    expected_output_block, levenshtein, line_level_eval, om_validation, token_level_accuracy,
)
from tinypy_cl.grammar import annotate
from tinypy_cl.interp import parse

from conftest import ReplayModel, UniformRandomModel


def test_levenshtein_known_values():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("print(a)", "print(b)") == 1


def test_edit_similarity_examples():
    assert edit_similarity("abc", "abc") == 100.0
    assert edit_similarity("print(a)", "print(b)") == pytest.approx(87.5)
    assert edit_similarity("", "a") == 0.0
    assert edit_similarity("", "") == 100.0


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="ab\n ", max_size=12), st.text(alphabet="ab\n ", max_size=12))
def test_edit_similarity_properties(a, b):
    es = edit_similarity(a, b)
    assert 0.0 <= es <= 100.0
    assert es == edit_similarity(b, a)
    assert (es == 100.0) == (a == b)


@pytest.fixture(scope="module")
def sample_snippets(request):
    from tinypy_cl.grammar import DEFAULT_PROFILE, generate_corpus

    return generate_corpus(DEFAULT_PROFILE, 40, seed=99)


def test_replay_oracle_token_accuracy(sample_snippets, replay_model_for):
    for s in sample_snippets[:5]:
        acc, n = token_level_accuracy(replay_model_for(s), [s])
        assert acc == 1.0
        assert n == len(s.source) - 1


def test_uniform_predictor_token_accuracy(small_corpus, uniform_model):
    acc, n = token_level_accuracy(uniform_model, small_corpus)
    assert n >= 10_000
    p = 1 / 41
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(acc - p) <= 3 * sigma


def test_replay_oracle_line_eval(sample_snippets, replay_model_for):
    multi = [s for s in sample_snippets if s.source.count("\n") >= 2][:5]
    for s in multi:
        acc, es, n = line_level_eval(replay_model_for(s), [s])
        assert acc == 1.0 and es == 100.0 and n == s.source.count("\n") - 1


def test_replay_oracle_execution(sample_snippets, replay_model_for):
    for s in sample_snippets[:10]:
        correct, total = execution_accuracy_on(replay_model_for(s), [s])
        assert (correct, total) == (1, 1)


def test_execution_empty_output_snippet(replay_model_for):
    prog = parse("a = 1\n")
    s = annotate(prog, "a = 1\n", [])
    assert expected_output_block(s) == "\n"
    correct, total = execution_accuracy_on(replay_model_for(s), [s])
    assert (correct, total) == (1, 1)


def test_uniform_model_execution_accuracy_is_low(sample_snippets, uniform_model):
    correct, total = execution_accuracy_on(uniform_model, sample_snippets)
    assert total == len(sample_snippets)
    assert correct <= 2  # random outputs essentially never match exactly


def test_execution_accuracy_per_level():
    ds = build_leveled(60, seed=31)
    model = UniformRandomModel(seed=1, block_size=512)
    acc = execution_accuracy(model, ds)
    assert set(acc.per_level) == {"easy", "medium", "hard"}
    weighted = sum(acc.per_level[l] * acc.counts[l] for l in acc.counts) / sum(acc.counts.values())
    assert acc.overall == pytest.approx(weighted)


def test_comparison_table_layout():
    ds = build_leveled(60, seed=32)
    model = UniformRandomModel(seed=2, block_size=512)
    table = exec_comparison_table({"baseline": execution_accuracy(model, ds)})
    head = table.splitlines()[0]
    for col in ("model", "ALL", "Easy", "Medium", "Hard"):
        assert col in head
    assert "baseline" in table


def test_om_validation_direction(sample_snippets, replay_model_for, uniform_model):
    easy_like = [s for s in sample_snippets if s.level == "easy"][:3]
    hard_like = [s for s in sample_snippets if s.level == "hard"][:3]
    assert easy_like and hard_like
    # a perfect model on the easier corpus, a useless one on the harder corpus;
    # the single-snippet corpus keeps the replay oracle aligned
    models = {1: replay_model_for(easy_like[0]), 2: uniform_model}
    corpora = {1: [easy_like[0]], 2: hard_like}
    rows, rho = om_validation(models, corpora)
    assert [r[0] for r in rows] == [1, 2]
    assert rows[0][2] == 1.0 and rows[1][2] < 1.0
    assert rows[0][1] < rows[1][1]
    assert rho == pytest.approx(-1.0)


def test_greedy_eval_deterministic(small_corpus, uniform_model):
    snippets = small_corpus[:20]
    model = UniformRandomModel(seed=5, block_size=512)
    a = execution_accuracy_on(model, snippets)
    model2 = UniformRandomModel(seed=5, block_size=512)
    b = execution_accuracy_on(model2, snippets)
    assert a == b
