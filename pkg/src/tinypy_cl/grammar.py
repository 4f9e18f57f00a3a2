"""Random program generation for the TinyPy subset.

Programs are drawn from a context-free grammar (see :mod:`tinypy_cl.interp`
for the statement forms) under a :class:`GrammarProfile` that controls which
constructs appear, how deep blocks nest, and how long programs get.
Definite-assignment is enforced during derivation (an expression only reads
variables assigned on every path to it), loop trip counts are bounded at
derivation time (a literal bound or ``v % k``), and candidates that fail to
execute (modulo by zero through a variable divisor) are resampled rather
than repaired, so every emitted snippet parses and runs cleanly.

Six fixed concept profiles cover, in order: plain assignments, multi-operator
arithmetic, plain conditional chains, conditional chains with arithmetic,
plain for loops, and for loops with arithmetic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .interp import (
    Assign, BinOp, Compare, For, If, Lit, Print, Program, Var,
    ExecError, execute, unparse,
)
from .metrics import DifficultyScore, classify, score_program

CONSTRUCTS = frozenset({"assignment", "arith_expr", "if_chain", "for_loop", "print"})

RESAMPLE_BUDGET = 1000
STEP_BUDGET = 10_000
MAX_OUTPUT_LINES = 8  # with MAX_ANNOTATED_CHARS, keeps snippets block-friendly
MAX_ANNOTATED_CHARS = 280


class GenerationBudgetError(Exception):
    """Too many consecutive candidates failed to execute; the profile is
    degenerate (for example, every expression divides by a zero variable)."""


@dataclass(frozen=True)
class GrammarProfile:
    allowed_constructs: frozenset = CONSTRUCTS
    max_nesting: int = 2
    max_elif: int = 2
    identifier_pool: tuple = ("a", "b", "c", "d", "e", "f", "g", "h")
    literal_range: tuple = (0, 9)
    max_statements: int = 6
    concept_level: Optional[int] = None

    def __post_init__(self):
        if not self.identifier_pool:
            raise ValueError("identifier pool must not be empty")
        if not set(self.identifier_pool) <= set("abcdefgh"):
            raise ValueError("identifiers must come from a..h")
        lo, hi = self.literal_range
        if not (0 <= lo <= hi <= 9):
            raise ValueError("literal range must lie within [0, 9]")
        if not 0 <= self.max_nesting <= 2:
            raise ValueError("max nesting must be 0, 1, or 2")
        if self.max_statements < 1:
            raise ValueError("max_statements must be >= 1")
        if not self.allowed_constructs <= CONSTRUCTS:
            raise ValueError(f"unknown constructs: {self.allowed_constructs - CONSTRUCTS}")
        if "assignment" not in self.allowed_constructs or "print" not in self.allowed_constructs:
            raise ValueError("assignment and print are always required")
        if self.concept_level is not None and not 1 <= self.concept_level <= 6:
            raise ValueError(f"concept level {self.concept_level} out of range 1..6")


DEFAULT_PROFILE = GrammarProfile()

_CONCEPT_CONSTRUCTS = {
    1: frozenset({"assignment", "print"}),
    2: frozenset({"assignment", "arith_expr", "print"}),
    3: frozenset({"assignment", "if_chain", "print"}),
    4: frozenset({"assignment", "arith_expr", "if_chain", "print"}),
    5: frozenset({"assignment", "for_loop", "print"}),
    6: frozenset({"assignment", "arith_expr", "for_loop", "print"}),
}


def concept_profile(level: int) -> GrammarProfile:
    """Profile for one of the six concept levels (1..6)."""
    if level not in _CONCEPT_CONSTRUCTS:
        raise ValueError(f"concept level must be in 1..6, got {level}")
    return GrammarProfile(
        allowed_constructs=_CONCEPT_CONSTRUCTS[level],
        max_nesting=0 if level <= 2 else 1,
        max_elif=2,
        max_statements=6,
        concept_level=level,
    )


@dataclass(frozen=True)
class AnnotatedSnippet:
    source: str
    output_lines: tuple
    score: DifficultyScore
    level: str


# ---------------------------------------------------------------------------
# Derivation
# ---------------------------------------------------------------------------

# statement-kind weights (assignment, print, if_chain, for_loop)
_TOP_WEIGHTS = (0.30, 0.18, 0.28, 0.24)
_BLOCK_WEIGHTS = (0.42, 0.42, 0.10, 0.06)
_NESTED_FOR_DAMPING = 0.18  # for-inside-for is rare
_STMT_COUNT_WEIGHTS = (2.4, 3.4, 2.7, 1.5, 0.55, 0.22)


class _Derivation:
    def __init__(self, profile: GrammarProfile, rng: random.Random):
        self.p = profile
        self.rng = rng
        self.arith = "arith_expr" in profile.allowed_constructs

    # -- expressions --------------------------------------------------------

    def lit(self, lo=None, hi=None) -> Lit:
        plo, phi = self.p.literal_range
        lo = plo if lo is None else max(lo, plo)
        hi = phi if hi is None else min(hi, phi)
        if lo > hi:
            lo = hi = max(plo, min(phi, lo))
        return Lit(self.rng.randint(lo, hi))

    def operand(self, defined, var_p=0.65):
        if defined and self.rng.random() < var_p:
            return Var(self.rng.choice(sorted(defined)))
        return self.lit()

    def arith_op(self) -> str:
        return self.rng.choices("+-*%", weights=(0.34, 0.27, 0.25, 0.14))[0]

    def binop(self, defined) -> BinOp:
        op = self.arith_op()
        left = self.operand(defined)
        right = self.operand(defined)
        if op == "%" and isinstance(right, Lit) and right.value == 0:
            right = self.lit(lo=2)
        return BinOp(op, left, right)

    def expression(self, defined, n_ops: int):
        if n_ops <= 0:
            return self.operand(defined)
        node = self.binop(defined)
        for _ in range(n_ops - 1):
            op = self.arith_op()
            other = self.operand(defined)
            # keep divisors simple so values stay tame
            if op == "%":
                if isinstance(other, Lit) and other.value == 0:
                    other = self.lit(lo=2)
                node = BinOp(op, node, other)
            elif self.rng.random() < 0.5:
                node = BinOp(op, node, other)
            else:
                node = BinOp(op, other, node)
        return node

    def rhs(self, defined):
        if self.arith:
            n_ops = self.rng.choices((1, 2, 3), weights=(0.60, 0.32, 0.08))[0]
            return self.expression(defined, n_ops)
        r = self.rng.random()
        if r < 0.45:
            return self.lit()
        if r < 0.60 and defined:
            return Var(self.rng.choice(sorted(defined)))
        return self.expression(defined, 1)

    def condition(self, defined) -> Compare:
        op = self.rng.choice(("<", ">", "<=", ">=", "==", "!="))
        left = self.operand(defined, var_p=0.9)
        if self.arith and self.rng.random() < 0.45:
            left = self.expression(defined, 1)
        right = self.operand(defined, var_p=0.25)
        return Compare(op, left, right)

    def loop_count(self, defined):
        """Trip count bounded at derivation time: a small literal, or
        ``v % k`` with k in 2..7 (always in 0..6)."""
        if self.arith and defined and self.rng.random() < 0.35:
            return BinOp("%", Var(self.rng.choice(sorted(defined))), Lit(self.rng.randint(2, 7)))
        return self.lit(lo=1, hi=5)

    # -- statements ---------------------------------------------------------

    def assignment(self, defined) -> Assign:
        pool = self.p.identifier_pool
        fresh = [v for v in pool if v not in defined]
        if fresh and (not defined or self.rng.random() < 0.55):
            target = self.rng.choice(fresh)
        else:
            target = self.rng.choice(sorted(defined)) if defined else self.rng.choice(list(pool))
        return Assign(target, self.rhs(defined))

    def print_stmt(self, defined) -> Print:
        if self.arith and self.rng.random() < 0.35:
            return Print(self.expression(defined, 1))
        return Print(self.operand(defined, var_p=0.85))

    def if_chain(self, defined, depth) -> If:
        n_elif = self.rng.choices((0, 1, 2), weights=(0.5, 0.33, 0.17))[0]
        n_elif = min(n_elif, self.p.max_elif)
        branches = []
        for _ in range(1 + n_elif):
            branches.append((self.condition(defined), self.block(defined, depth + 1)))
        orelse = self.block(defined, depth + 1) if self.rng.random() < 0.6 else None
        return If(tuple(branches), orelse)

    def for_loop(self, defined, depth, inside_loop) -> For:
        var = self.rng.choice(list(self.p.identifier_pool))
        count = self.lit(lo=1, hi=4) if inside_loop else self.loop_count(defined)
        body = self.block(defined | {var}, depth + 1, inside_loop=True)
        return For(var, count, body)

    def block(self, defined, depth, inside_loop=False) -> tuple:
        n = self.rng.choices((1, 2, 3), weights=(0.64, 0.29, 0.07))[0]
        local = set(defined)
        stmts = []
        for _ in range(n):
            stmts.append(self.statement(local, depth, _BLOCK_WEIGHTS, inside_loop))
        return tuple(stmts)

    def statement(self, defined, depth, weights, inside_loop=False):
        w_assign, w_print, w_if, w_for = weights
        allowed = self.p.allowed_constructs
        can_nest = depth < self.p.max_nesting
        kinds = ["assignment", "print"]
        ws = [w_assign, w_print]
        if "if_chain" in allowed and can_nest:
            kinds.append("if_chain")
            ws.append(w_if)
        if "for_loop" in allowed and can_nest:
            kinds.append("for_loop")
            ws.append(w_for * (_NESTED_FOR_DAMPING if inside_loop else 1.0))
        kind = self.rng.choices(kinds, weights=ws)[0]
        if kind == "assignment":
            s = self.assignment(defined)
            defined.add(s.target)
            return s
        if kind == "print":
            return self.print_stmt(defined)
        if kind == "if_chain":
            return self.if_chain(frozenset(defined), depth)
        return self.for_loop(frozenset(defined), depth, inside_loop)

    # -- whole programs -----------------------------------------------------

    def program(self) -> Program:
        if self.p.concept_level is not None:
            return self.concept_program(self.p.concept_level)
        hi = min(self.p.max_statements, len(_STMT_COUNT_WEIGHTS))
        n = self.rng.choices(range(1, hi + 1), weights=_STMT_COUNT_WEIGHTS[:hi])[0]
        defined: set = set()
        stmts = [self.statement(defined, 0, _TOP_WEIGHTS)]
        if not isinstance(stmts[0], Assign):
            stmts = []
            first = self.assignment(defined)
            defined.add(first.target)
            stmts.append(first)
        for _ in range(n - 1):
            stmts.append(self.statement(defined, 0, _TOP_WEIGHTS))
        return Program(tuple(stmts))

    def concept_stmt(self, defined) -> "Assign | Print":
        if self.rng.random() < 0.62:
            return self.print_stmt(defined)
        s = self.assignment(defined)
        return s

    def concept_block(self, defined) -> tuple:
        n = self.rng.choices((1, 2), weights=(0.78, 0.22))[0]
        local = set(defined)
        stmts = []
        for _ in range(n):
            s = self.concept_stmt(local)
            if isinstance(s, Assign):
                local.add(s.target)
            stmts.append(s)
        return tuple(stmts)

    def concept_program(self, level: int) -> Program:
        defined: set = set()
        stmts = []
        n_inits = self.rng.choices((1, 2), weights=(0.62, 0.38))[0]
        if level in (2, 4, 6):
            n_inits = self.rng.choices((1, 2, 3), weights=(0.4, 0.42, 0.18))[0]
        for _ in range(n_inits):
            s = self.assignment(defined)
            defined.add(s.target)
            stmts.append(s)

        if level <= 2:
            if self.rng.random() < 0.4:
                s = self.assignment(defined)
                defined.add(s.target)
                stmts.append(s)
            for _ in range(self.rng.choices((1, 2), weights=(0.75, 0.25))[0]):
                stmts.append(self.print_stmt(defined))
            return Program(tuple(stmts))

        if level in (3, 4):
            if level == 3:
                n_elif = self.rng.choices((0, 1, 2), weights=(0.45, 0.4, 0.15))[0]
                else_p = 0.7
            else:
                n_elif = self.rng.choices((0, 1, 2), weights=(0.2, 0.45, 0.35))[0]
                else_p = 0.8
            n_elif = min(n_elif, self.p.max_elif)
            branches = []
            for _ in range(1 + n_elif):
                branches.append((self.condition(frozenset(defined)), self.concept_block(defined)))
            orelse = self.concept_block(defined) if self.rng.random() < else_p else None
            stmts.append(If(tuple(branches), orelse))
        else:  # 5, 6
            var = self.rng.choice(list(self.p.identifier_pool))
            count = self.lit(lo=2, hi=5) if level == 5 or not defined else self.loop_count(defined)
            stmts.append(For(var, count, self.concept_block(defined | {var})))

        if self.rng.random() < (0.4 if level in (3, 4) else 0.25):
            stmts.append(self.print_stmt(defined))
        return Program(tuple(stmts))


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def _generate_executed(profile: GrammarProfile, rng: random.Random):
    """Draw candidates until one executes cleanly; returns (program, source,
    output lines)."""
    deriv = _Derivation(profile, rng)
    for _ in range(RESAMPLE_BUDGET):
        prog = deriv.program()
        try:
            out = execute(prog, step_budget=STEP_BUDGET)
        except ExecError:
            continue
        if len(out.lines) > MAX_OUTPUT_LINES:
            continue
        src = unparse(prog)
        if len(src) + sum(len(v) + 3 for v in out.lines) + 10 > MAX_ANNOTATED_CHARS:
            continue
        return prog, src, out.lines
    raise GenerationBudgetError(
        f"{RESAMPLE_BUDGET} consecutive candidates failed to execute; profile is degenerate"
    )


def generate_snippet(profile: GrammarProfile, rng: random.Random) -> str:
    """One executable program under `profile`; deterministic for a fixed rng
    state."""
    return _generate_executed(profile, rng)[1]


def annotate(prog: Program, source: str, output_lines) -> AnnotatedSnippet:
    score = score_program(prog)
    return AnnotatedSnippet(source, tuple(output_lines), score, classify(score.om))


def generate_corpus(profile: GrammarProfile, count: int, seed: int) -> list:
    """`count` independent scored snippets, reproducible per seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    snippets = []
    for _ in range(count):
        prog, src, out = _generate_executed(profile, rng)
        snippets.append(annotate(prog, src, out))
    return snippets
