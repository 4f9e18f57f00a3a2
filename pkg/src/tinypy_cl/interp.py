"""Parser, canonical unparser, and tree-walking executor for the TinyPy subset.

The language (one statement per line, blocks indented by exactly 4 spaces):

    stmt    := <id> = <expr>
             | print(<expr>)
             | if <cmp> : BLOCK {elif <cmp> : BLOCK} [else : BLOCK]
             | for <id> in range(<expr>) : BLOCK
    expr    := <int> | <id> | <expr> (+|-|*|%) <expr>   (with parentheses)
    cmp     := <expr> (<|>|<=|>=|==|!=) <expr>

Canonical formatting, produced by :func:`unparse` and by the snippet
generator: a single space around binary operators, comparison operators,
``=``, and before ``:``; compound operands of a binary operation are
parenthesized; no other parentheses.  ``unparse(parse(s)) == s`` holds for
any canonically formatted source.

Execution semantics match reference Python on this subset: arbitrary
precision integers, floored ``%``, ``range(n)`` iterating ``0..n-1`` (empty
for ``n <= 0``), left-to-right evaluation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class ParseError(Exception):
    """Malformed source; carries 1-based line and column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class IndentError(ParseError):
    """Indentation that is not a consistent multiple of 4 spaces."""


class ExecError(Exception):
    """Base class for runtime errors."""


class ModuloByZeroError(ExecError):
    pass


class UnboundVariableError(ExecError):
    pass


class StepBudgetError(ExecError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * %
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Var, BinOp]

COMPARE_OPS = ("<", ">", "<=", ">=", "==", "!=")
ARITH_OPS = ("+", "-", "*", "%")


@dataclass(frozen=True)
class Compare:
    op: str  # one of COMPARE_OPS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr


@dataclass(frozen=True)
class Print:
    value: Expr


@dataclass(frozen=True)
class If:
    # branches[0] is the `if`, the rest are `elif`s.
    branches: tuple
    orelse: Optional[tuple]


@dataclass(frozen=True)
class For:
    var: str
    count: Expr  # single-argument range
    body: tuple


Stmt = Union[Assign, Print, If, For]


@dataclass(frozen=True)
class Program:
    body: tuple


@dataclass(frozen=True)
class ExecutionOutput:
    lines: tuple
    step_count: int


KEYWORDS = frozenset({"print", "if", "elif", "else", "for", "in", "range"})

_TOKEN_RE = re.compile(
    r"(?P<name>[a-z]+)|(?P<num>[0-9]+)|(?P<op><=|>=|==|!=|[=<>+\-*%():])|(?P<sp> +)|(?P<bad>.)"
)


def _lex_line(text: str, lineno: int):
    """Tokenize one logical line (indentation already stripped)."""
    toks = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "sp":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {text[m.start()]!r}", lineno, m.start() + 1)
        toks.append((kind, m.group(), m.start() + 1))
    toks.append(("end", "", len(text) + 1))
    return toks


class _LineParser:
    """Recursive-descent parser over the tokens of a single line."""

    def __init__(self, toks, lineno: int):
        self.toks = toks
        self.pos = 0
        self.lineno = lineno

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of line'!r}", self.lineno, col)

    def fail(self, msg: str):
        _, val, col = self.peek()
        raise ParseError(msg + (f", found {val!r}" if val else ", found end of line"), self.lineno, col)

    def atom(self) -> Expr:
        kind, val, col = self.next()
        if kind == "num":
            return Lit(int(val))
        if kind == "name":
            if val in KEYWORDS:
                raise ParseError(f"keyword {val!r} is not a value", self.lineno, col)
            if len(val) != 1:
                raise ParseError(f"unknown name {val!r}", self.lineno, col)
            return Var(val)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"expected a value, found {val or 'end of line'!r}", self.lineno, col)

    def term(self) -> Expr:
        node = self.atom()
        while self.peek()[1] in ("*", "%"):
            op = self.next()[1]
            node = BinOp(op, node, self.atom())
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = BinOp(op, node, self.term())
        return node

    def compare(self) -> Compare:
        left = self.expr()
        kind, val, col = self.next()
        if val not in COMPARE_OPS:
            raise ParseError(f"expected a comparison operator, found {val!r}", self.lineno, col)
        return Compare(val, left, self.expr())

    def end(self):
        kind, val, col = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", self.lineno, col)


def parse(src: str) -> Program:
    """Parse source text into a :class:`Program`.

    Syntax only: use of unassigned variables is not checked here (that is a
    runtime error, and the generator guarantees it never occurs in corpus
    snippets).
    """
    lines = src.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    # (depth, lineno, tokens), skipping nothing: blank interior lines are errors
    rows = []
    for i, raw in enumerate(lines, start=1):
        stripped = raw.lstrip(" ")
        if stripped == "":
            raise ParseError("blank line inside a snippet", i, 1)
        indent = len(raw) - len(stripped)
        if indent % 4 != 0:
            raise IndentError(f"indentation of {indent} is not a multiple of 4", i, 1)
        rows.append((indent // 4, i, stripped))

    pos = 0

    def parse_block(depth: int) -> tuple:
        nonlocal pos
        stmts = []
        while pos < len(rows):
            d, lineno, text = rows[pos]
            if d < depth:
                break
            if d > depth:
                raise IndentError(f"unexpected indent (depth {d}, expected {depth})", lineno, 1)
            stmts.append(parse_stmt(depth))
        return tuple(stmts)

    def required_block(depth: int, lineno: int) -> tuple:
        block = parse_block(depth)
        if not block:
            raise IndentError("expected an indented block", lineno, 1)
        return block

    def parse_stmt(depth: int) -> Stmt:
        nonlocal pos
        d, lineno, text = rows[pos]
        pos += 1
        p = _LineParser(_lex_line(text, lineno), lineno)
        kind, val, col = p.peek()
        if val == "print":
            p.next()
            p.expect("(")
            e = p.expr()
            p.expect(")")
            p.end()
            return Print(e)
        if val == "if":
            p.next()
            cond = p.compare()
            p.expect(":")
            p.end()
            branches = [(cond, required_block(depth + 1, lineno))]
            orelse = None
            while pos < len(rows) and rows[pos][0] == depth:
                head = rows[pos][2]
                if head.startswith("elif"):
                    d2, l2, t2 = rows[pos]
                    pos += 1
                    q = _LineParser(_lex_line(t2, l2), l2)
                    q.expect("elif")
                    c2 = q.compare()
                    q.expect(":")
                    q.end()
                    branches.append((c2, required_block(depth + 1, l2)))
                elif head.startswith("else"):
                    d2, l2, t2 = rows[pos]
                    pos += 1
                    q = _LineParser(_lex_line(t2, l2), l2)
                    q.expect("else")
                    q.expect(":")
                    q.end()
                    orelse = required_block(depth + 1, l2)
                    break
                else:
                    break
            return If(tuple(branches), orelse)
        if val == "for":
            p.next()
            kind2, var, col2 = p.next()
            if kind2 != "name" or var in KEYWORDS or len(var) != 1:
                raise ParseError("expected a loop variable", lineno, col2)
            p.expect("in")
            p.expect("range")
            p.expect("(")
            count = p.expr()
            p.expect(")")
            p.expect(":")
            p.end()
            return For(var, count, required_block(depth + 1, lineno))
        if val in ("elif", "else"):
            raise ParseError(f"{val!r} without a matching 'if'", lineno, col)
        if kind == "name" and val not in KEYWORDS:
            if len(val) != 1:
                raise ParseError(f"unknown name {val!r}", lineno, col)
            p.next()
            p.expect("=")
            e = p.expr()
            p.end()
            return Assign(val, e)
        raise ParseError(f"cannot start a statement with {val or 'end of line'!r}", lineno, col)

    body = parse_block(0)
    if pos < len(rows):
        raise IndentError("unexpected indent", rows[pos][1], 1)
    return Program(body)


# ---------------------------------------------------------------------------
# Canonical unparser
# ---------------------------------------------------------------------------

def _fmt_operand(e: Expr) -> str:
    text = _fmt_expr(e)
    return f"({text})" if isinstance(e, BinOp) else text


def _fmt_expr(e: Expr) -> str:
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    return f"{_fmt_operand(e.left)} {e.op} {_fmt_operand(e.right)}"


def _fmt_compare(c: Compare) -> str:
    return f"{_fmt_operand(c.left)} {c.op} {_fmt_operand(c.right)}"


def unparse(prog: Program) -> str:
    """Render a program in canonical formatting, ending with a newline."""
    out = []

    def emit(stmts, depth):
        pad = "    " * depth
        for s in stmts:
            if isinstance(s, Assign):
                out.append(f"{pad}{s.target} = {_fmt_expr(s.value)}")
            elif isinstance(s, Print):
                out.append(f"{pad}print({_fmt_expr(s.value)})")
            elif isinstance(s, If):
                for i, (cond, block) in enumerate(s.branches):
                    out.append(f"{pad}{'if' if i == 0 else 'elif'} {_fmt_compare(cond)} :")
                    emit(block, depth + 1)
                if s.orelse is not None:
                    out.append(f"{pad}else :")
                    emit(s.orelse, depth + 1)
            elif isinstance(s, For):
                out.append(f"{pad}for {s.var} in range({_fmt_expr(s.count)}) :")
                emit(s.body, depth + 1)
            else:
                raise TypeError(f"not a statement: {s!r}")

    emit(prog.body, 0)
    return "\n".join(out) + "\n" if out else ""


# ---------------------------------------------------------------------------
# Executor
# ---------------------------------------------------------------------------

def _eval(e: Expr, env: dict) -> int:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable {e.name!r} used before assignment") from None
    left = _eval(e.left, env)
    right = _eval(e.right, env)
    op = e.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "%":
        if right == 0:
            raise ModuloByZeroError("modulo by zero")
        return left % right
    raise ValueError(f"unknown operator {op!r}")


_CMP = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def execute(prog: Program, step_budget: int = 10_000) -> ExecutionOutput:
    """Run a program, returning printed lines and the executed-statement count."""
    env: dict = {}
    lines: list = []
    steps = 0

    def run(stmts):
        nonlocal steps
        for s in stmts:
            steps += 1
            if steps > step_budget:
                raise StepBudgetError(f"exceeded step budget of {step_budget}")
            if isinstance(s, Assign):
                env[s.target] = _eval(s.value, env)
            elif isinstance(s, Print):
                lines.append(str(_eval(s.value, env)))
            elif isinstance(s, If):
                for cond, block in s.branches:
                    if _CMP[cond.op](_eval(cond.left, env), _eval(cond.right, env)):
                        run(block)
                        break
                else:
                    if s.orelse is not None:
                        run(s.orelse)
            elif isinstance(s, For):
                n = _eval(s.count, env)
                for i in range(n):
                    env[s.var] = i
                    run(s.body)
            else:
                raise TypeError(f"not a statement: {s!r}")

    run(prog.body)
    return ExecutionOutput(tuple(lines), steps)


# ---------------------------------------------------------------------------
# Annotated snippet format
# ---------------------------------------------------------------------------

OUTPUT_MARKER = "# output"


def render_annotated(src: str, output_lines) -> str:
    """Code, the ``# output`` marker, one ``# <value>`` line per printed line,
    and a single blank line as the snippet terminator."""
    if not src.endswith("\n"):
        raise ValueError("source must end with a newline")
    parts = [src, OUTPUT_MARKER, "\n"]
    for line in output_lines:
        parts.append(f"# {line}\n")
    parts.append("\n")
    return "".join(parts)


def split_annotated(block: str):
    """Inverse of :func:`render_annotated` on a single block without its
    trailing blank line.  Returns ``(source, output_lines)``.

    Raises ValueError when the marker is missing or an output line is not a
    ``# ``-prefixed comment; the message includes the character offset of the
    offending line within the block.
    """
    lines = block.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    offset = 0
    marker_at = None
    for i, line in enumerate(lines):
        if line == OUTPUT_MARKER:
            marker_at = i
            break
        offset += len(line) + 1
    if marker_at is None:
        raise ValueError(f"missing {OUTPUT_MARKER!r} marker (offset {offset})")
    src = "".join(line + "\n" for line in lines[:marker_at])
    out = []
    offset += len(OUTPUT_MARKER) + 1
    for line in lines[marker_at + 1:]:
        if line == "# " or not line.startswith("# "):
            raise ValueError(f"malformed output line {line!r} (offset {offset})")
        out.append(line[2:])
        offset += len(line) + 1
    return src, out
