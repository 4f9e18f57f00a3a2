"""Static difficulty metrics: cyclomatic complexity, Halstead measures, and
the overall metric (OM) that averages the two.

Classification table for Halstead counting, fixed for determinism:

* operators: ``=  +  -  *  %  <  >  <=  >=  ==  !=`` and the keywords
  ``if  elif  else  for  in  range  print`` (one occurrence per appearance)
* operands: identifiers (distinct by name) and integer literals (distinct
  by value)
* never counted: parentheses, colons, commas, newlines
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .interp import Assign, BinOp, Compare, For, If, Lit, Print, Program, Var

EASY, MEDIUM, HARD = "easy", "medium", "hard"
LEVELS = (EASY, MEDIUM, HARD)


@dataclass(frozen=True)
class ControlFlowGraph:
    nodes: frozenset
    edges: frozenset
    components: int

    @property
    def cyclomatic(self) -> int:
        """E - N + 2P."""
        return len(self.edges) - len(self.nodes) + 2 * self.components


@dataclass(frozen=True)
class HalsteadCounts:
    eta1: int  # distinct operators
    eta2: int  # distinct operands
    n1_total: int  # total operators
    n2_total: int  # total operands


@dataclass(frozen=True)
class HalsteadMeasures:
    vocabulary: float
    length: float
    calculated_length: float
    volume: float
    difficulty: float
    effort: float
    time: float
    bugs: float


@dataclass(frozen=True)
class DifficultyScore:
    cc: float
    hd: float
    om: float


def build_cfg(prog: Program) -> ControlFlowGraph:
    """Construct the control-flow graph.

    Consecutive straight-line statements share one basic block; every
    ``if``/``elif`` condition and every ``for`` header is a decision node
    with two out-edges (loop headers additionally receive the back edge).
    """
    nodes: list = []
    edges: set = set()

    def new_node() -> int:
        nodes.append(len(nodes))
        return nodes[-1]

    def link(a, b):
        edges.add((a, b))

    def walk(stmts, current):
        """Process a statement list; `current` is the open basic block (or
        None).  Returns the block that control flows out of."""
        for s in stmts:
            if isinstance(s, (Assign, Print)):
                if current is None:
                    current = new_node()
                continue
            if isinstance(s, If):
                prev = None
                join = None
                first_cond = None
                exits = []
                for cond, block in s.branches:
                    cnode = new_node()
                    if first_cond is None:
                        first_cond = cnode
                    if prev is not None:
                        link(prev, cnode)  # previous condition false
                    bentry = new_node()
                    link(cnode, bentry)
                    exits.append(walk(block, bentry))
                    prev = cnode
                if s.orelse is not None:
                    eentry = new_node()
                    link(prev, eentry)
                    exits.append(walk(s.orelse, eentry))
                    join = new_node()
                else:
                    join = new_node()
                    link(prev, join)  # last condition false, fall through
                for x in exits:
                    link(x, join)
                if current is not None:
                    link(current, first_cond)
                current = join
            elif isinstance(s, For):
                header = new_node()
                if current is not None:
                    link(current, header)
                bentry = new_node()
                link(header, bentry)
                bexit = walk(s.body, bentry)
                link(bexit, header)  # back edge
                after = new_node()
                link(header, after)
                current = after
            else:
                raise TypeError(f"not a statement: {s!r}")
        if current is None:
            current = new_node()
        return current

    walk(prog.body, None)
    return ControlFlowGraph(frozenset(nodes), frozenset(edges), components=1)


def cyclomatic_complexity(prog: Program) -> int:
    """Number of decisions (``if`` and ``elif`` conditions, ``for`` headers)
    plus one.  Agrees with ``E - N + 2P`` of :func:`build_cfg`."""
    decisions = 0

    def walk(stmts):
        nonlocal decisions
        for s in stmts:
            if isinstance(s, If):
                decisions += len(s.branches)
                for _, block in s.branches:
                    walk(block)
                if s.orelse is not None:
                    walk(s.orelse)
            elif isinstance(s, For):
                decisions += 1
                walk(s.body)

    walk(prog.body)
    return 1 + decisions


def halstead_counts(prog: Program) -> HalsteadCounts:
    operators: Counter = Counter()
    operands: Counter = Counter()

    def expr(e):
        if isinstance(e, Lit):
            operands[("lit", e.value)] += 1
        elif isinstance(e, Var):
            operands[("id", e.name)] += 1
        elif isinstance(e, (BinOp, Compare)):
            operators[e.op] += 1
            expr(e.left)
            expr(e.right)
        else:
            raise TypeError(f"not an expression: {e!r}")

    def walk(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                operators["="] += 1
                operands[("id", s.target)] += 1
                expr(s.value)
            elif isinstance(s, Print):
                operators["print"] += 1
                expr(s.value)
            elif isinstance(s, If):
                for i, (cond, block) in enumerate(s.branches):
                    operators["if" if i == 0 else "elif"] += 1
                    expr(cond)
                    walk(block)
                if s.orelse is not None:
                    operators["else"] += 1
                    walk(s.orelse)
            elif isinstance(s, For):
                operators["for"] += 1
                operators["in"] += 1
                operators["range"] += 1
                operands[("id", s.var)] += 1
                expr(s.count)
                walk(s.body)
            else:
                raise TypeError(f"not a statement: {s!r}")

    walk(prog.body)
    return HalsteadCounts(
        eta1=len(operators),
        eta2=len(operands),
        n1_total=sum(operators.values()),
        n2_total=sum(operands.values()),
    )


def halstead_measures(c: HalsteadCounts) -> HalsteadMeasures:
    eta = c.eta1 + c.eta2
    length = c.n1_total + c.n2_total
    calc = 0.0
    if c.eta1 > 0:
        calc += c.eta1 * math.log2(c.eta1)
    if c.eta2 > 0:
        calc += c.eta2 * math.log2(c.eta2)
    volume = length * math.log2(eta) if eta >= 1 else 0.0
    difficulty = (c.eta1 / 2) * (c.n2_total / c.eta2) if c.eta2 > 0 else 0.0
    effort = difficulty * volume
    return HalsteadMeasures(
        vocabulary=float(eta),
        length=float(length),
        calculated_length=calc,
        volume=volume,
        difficulty=difficulty,
        effort=effort,
        time=effort / 18.0,
        bugs=volume / 3000.0,
    )


def halstead_difficulty(prog: Program) -> float:
    return halstead_measures(halstead_counts(prog)).difficulty


def overall_metric(cc: float, hd: float) -> float:
    return (cc + hd) / 2


def classify(om: float) -> str:
    """easy for OM < 2, medium for 2 <= OM < 4, hard for OM >= 4."""
    if om < 2:
        return EASY
    if om < 4:
        return MEDIUM
    return HARD


def score_program(prog: Program) -> DifficultyScore:
    cc = float(cyclomatic_complexity(prog))
    hd = halstead_difficulty(prog)
    return DifficultyScore(cc=cc, hd=hd, om=overall_metric(cc, hd))
