import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from tinypy_cl.grammar import DEFAULT_PROFILE, generate_snippet
from tinypy_cl.interp import Assign, BinOp, Compare, For, If, Lit, Print, Program, Var, parse
from tinypy_cl.metrics import (
    HalsteadCounts, build_cfg, classify, cyclomatic_complexity, halstead_counts,
    halstead_measures, overall_metric, score_program,
)

from metrics_oracle import ORACLE_ROWS, expected_hd, expected_om


@pytest.mark.parametrize("src,cc,eta1,eta2,n1,n2", ORACLE_ROWS)
def test_oracle_counts(src, cc, eta1, eta2, n1, n2):
    prog = parse(src)
    assert cyclomatic_complexity(prog) == cc
    counts = halstead_counts(prog)
    assert (counts.eta1, counts.eta2, counts.n1_total, counts.n2_total) == (eta1, eta2, n1, n2)
    score = score_program(prog)
    assert score.hd == pytest.approx(expected_hd(eta1, eta2, n2), abs=1e-9)
    assert score.om == pytest.approx(expected_om(cc, score.hd), abs=1e-9)


def test_measures_substitution():
    m = halstead_measures(HalsteadCounts(2, 3, 2, 3))
    assert m.difficulty == pytest.approx(1.0)
    assert m.vocabulary == 5
    assert m.length == 5
    assert m.calculated_length == pytest.approx(2 * math.log2(2) + 3 * math.log2(3))
    assert m.volume == pytest.approx(5 * math.log2(5))
    assert m.effort == pytest.approx(m.difficulty * m.volume)
    assert m.time == pytest.approx(m.effort / 18)
    assert m.bugs == pytest.approx(m.volume / 3000)

    assert halstead_measures(HalsteadCounts(1, 1, 1, 1)).difficulty == pytest.approx(0.5)

    zero = halstead_measures(HalsteadCounts(0, 0, 0, 0))
    assert zero.difficulty == 0.0
    assert zero.volume == 0.0


def test_overall_metric():
    assert overall_metric(1, 1) == 1.0
    assert overall_metric(3, 5) == 4.0
    assert overall_metric(1, 0) == 0.5


def test_classify_boundaries():
    assert classify(1.9999999999) == "easy"
    assert classify(2.0) == "medium"
    assert classify(3.9999999999) == "medium"
    assert classify(4.0) == "hard"
    assert classify(0.5) == "easy"


def test_cfg_hand_cases():
    straight = parse("a = 1\nb = 2\nprint(a)\n")
    assert build_cfg(straight).cyclomatic == 1

    if_else = parse("a = 5\nif a > 3 :\n    print(a)\nelse :\n    print(1)\n")
    assert build_cfg(if_else).cyclomatic == 2

    chain_in_for = parse(
        "a = 1\nfor b in range(4) :\n    if b > 2 :\n        print(b)\n"
        "    elif b > 1 :\n        print(a)\n    else :\n        print(0)\n"
    )
    assert build_cfg(chain_in_for).cyclomatic == 4

    nested_fors = parse("for a in range(2) :\n    for b in range(3) :\n        print(a)\n")
    assert cyclomatic_complexity(nested_fors) == 3
    assert build_cfg(nested_fors).cyclomatic == 3


def test_cfg_single_components():
    cfg = build_cfg(parse("a = 1\n"))
    assert cfg.components == 1
    assert len(cfg.nodes) >= 1


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_cc_duality_on_generated(seed):
    src = generate_snippet(DEFAULT_PROFILE, random.Random(seed))
    prog = parse(src)
    assert build_cfg(prog).cyclomatic == cyclomatic_complexity(prog)


def _rename(node, mapping):
    if isinstance(node, Program):
        return Program(tuple(_rename(s, mapping) for s in node.body))
    if isinstance(node, Assign):
        return Assign(mapping[node.target], _rename(node.value, mapping))
    if isinstance(node, Print):
        return Print(_rename(node.value, mapping))
    if isinstance(node, If):
        return If(
            tuple((_rename(c, mapping), tuple(_rename(s, mapping) for s in blk)) for c, blk in node.branches),
            None if node.orelse is None else tuple(_rename(s, mapping) for s in node.orelse),
        )
    if isinstance(node, For):
        return For(mapping[node.var], _rename(node.count, mapping), tuple(_rename(s, mapping) for s in node.body))
    if isinstance(node, (BinOp, Compare)):
        return type(node)(node.op, _rename(node.left, mapping), _rename(node.right, mapping))
    if isinstance(node, Var):
        return Var(mapping[node.name])
    return node


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9), st.randoms(use_true_random=False))
def test_halstead_rename_invariance(seed, rnd):
    src = generate_snippet(DEFAULT_PROFILE, random.Random(seed))
    prog = parse(src)
    letters = list("abcdefgh")
    permuted = letters[:]
    rnd.shuffle(permuted)
    renamed = _rename(prog, dict(zip(letters, permuted)))
    assert halstead_counts(renamed) == halstead_counts(prog)
    assert cyclomatic_complexity(renamed) == cyclomatic_complexity(prog)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_cc_monotone_under_added_decision(seed):
    src = generate_snippet(DEFAULT_PROFILE, random.Random(seed))
    prog = parse(src)
    cc = cyclomatic_complexity(prog)
    wrapped = Program((For("a", Lit(2), prog.body),))
    assert cyclomatic_complexity(wrapped) == cc + 1
    with_if = Program(prog.body + (If(((Compare("<", Lit(0), Lit(1)), (Print(Lit(1)),)),), None),))
    assert cyclomatic_complexity(with_if) == cc + 1
