"""Produce the interpreter-equivalence golden file.

Generates the fixed 10k-snippet corpus (profile and seed pinned below, the
same ones the equivalence test regenerates), executes every source with the
host CPython interpreter, and writes the captured stdout blocks to
``tests/data/golden_outputs_10k.txt``.  Run once; the file is committed.
"""

import io
import sys
from contextlib import redirect_stdout
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

from tinypy_cl.grammar import DEFAULT_PROFILE, generate_corpus

GOLDEN_SEED = 20240
GOLDEN_COUNT = 10_000
GOLDEN_PATH = ROOT / "tests" / "data" / "golden_outputs_10k.txt"


def reference_python_output(src: str) -> list:
    buf = io.StringIO()
    scope = {"__builtins__": {"print": print, "range": range}}
    with redirect_stdout(buf):
        exec(compile(src, "<snippet>", "exec"), scope)
    text = buf.getvalue()
    return text.split("\n")[:-1] if text else []


def main() -> int:
    snippets = generate_corpus(DEFAULT_PROFILE, GOLDEN_COUNT, seed=GOLDEN_SEED)
    GOLDEN_PATH.parent.mkdir(parents=True, exist_ok=True)
    with open(GOLDEN_PATH, "w", encoding="ascii") as f:
        for i, snippet in enumerate(snippets):
            lines = reference_python_output(snippet.source)
            f.write(f"=== {i}\n")
            for line in lines:
                f.write(line + "\n")
    print(f"wrote outputs for {len(snippets)} snippets to {GOLDEN_PATH}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
