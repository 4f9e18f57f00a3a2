"""Hand-computed metrics oracle table.

Each row: (source, cc, eta1, eta2, n1_total, n2_total).  The counts were
worked out by hand from the fixed classification table (operators: the
arithmetic/comparison/assignment symbols plus the keywords if, elif, else,
for, in, range, print; operands: identifiers by name, literals by value) and
cross-checked against an independent token scan of the source text.
HD and OM follow by substitution: HD = (eta1/2) * (n2/eta2), OM = (cc+HD)/2.
"""

ORACLE_ROWS = [
    ("a = 1\n", 1, 1, 2, 1, 2),
    ("a = 1\nprint(a)\n", 1, 2, 2, 2, 3),
    ("a = 1 + 2\n", 1, 2, 3, 2, 3),
    ("print(a)\n", 1, 1, 1, 1, 1),
    ("", 1, 0, 0, 0, 0),
    ("a = 2 * 3\nb = a - 1\nprint(b)\n", 1, 4, 5, 5, 7),
    ("a = 5\nif a > 3 :\n    print(a)\n", 2, 4, 3, 4, 5),
    ("a = 5\nif a > 3 :\n    print(a)\nelse :\n    print(1)\n", 2, 5, 4, 6, 6),
    (
        "a = 5\nif a > 6 :\n    print(1)\nelif a > 2 :\n    print(2)\nelse :\n    print(3)\n",
        3, 6, 6, 9, 9,
    ),
    ("for a in range(3) :\n    print(a)\n", 2, 4, 2, 4, 3),
    ("a = 2\nfor b in range(a) :\n    print(b)\n", 2, 5, 3, 5, 5),
    (
        "for a in range(2) :\n    for b in range(3) :\n        print(a + b)\n",
        3, 5, 4, 8, 6,
    ),
    (
        "a = 1\nfor b in range(4) :\n    if b > 2 :\n        print(b)\n"
        "    elif b > 1 :\n        print(a)\n    else :\n        print(0)\n",
        4, 9, 6, 12, 11,
    ),
    ("a = 7 % 2\nprint(a)\n", 1, 3, 3, 3, 4),
    ("a = (1 + 2) * 3\n", 1, 3, 4, 3, 4),
    ("a = 1\nb = a + a\nprint(b * b)\n", 1, 4, 3, 5, 7),
    ("c = 1\nd = c + c\nprint(d * d)\n", 1, 4, 3, 5, 7),
    ("a = 0\nif a == 0 :\n    a = a + 1\nprint(a)\n", 2, 5, 3, 6, 8),
    (
        "a = 3\nb = 4\nif a <= b :\n    print(a)\nif a != b :\n    print(b)\n",
        3, 5, 4, 8, 10,
    ),
    ("b = 9\nc = b % 4\nprint(c * 2)\n", 1, 4, 5, 5, 7),
    ("a = 4\nfor b in range(a % 3) :\n    print(b + a)\n", 2, 7, 4, 7, 7),
    ("a = 1\nb = 2\nc = 3\nprint(a)\nprint(b)\nprint(c)\n", 1, 2, 6, 6, 9),
]


def expected_hd(eta1, eta2, n2):
    return 0.0 if eta2 == 0 else (eta1 / 2) * (n2 / eta2)


def expected_om(cc, hd):
    return (cc + hd) / 2
