"""The fixed 41-character alphabet shared by the language, corpus files, and model.

Every byte of a dataset file (code, the ``# output`` marker, output comment
lines, and the blank-line snippet terminator) is drawn from this alphabet,
so the character-level tokenizer is a bijection over exactly these 41
characters, in codepoint order:

* 10 symbols: newline, space, ``!``, ``#``, ``%``, ``(``, ``)``, ``*``, ``+``, ``-``
* 10 digits: ``0`` to ``9``
* 4 symbols: ``:``, ``<``, ``=``, ``>``
* 17 letters: ``a b c d e f g h`` (identifiers) plus ``i l n o p r s t u``
  (the letters of ``print``, ``if``, ``elif``, ``else``, ``for``, ``in``,
  ``range``, and the ``# output`` marker)
"""

import zlib

ALPHABET = "\n !#%()*+-0123456789:<=>abcdefghilnoprstu"

VOCAB_SIZE = len(ALPHABET)

CHAR_TO_ID = {ch: i for i, ch in enumerate(ALPHABET)}
ID_TO_CHAR = {i: ch for i, ch in enumerate(ALPHABET)}

assert VOCAB_SIZE == 41


def alphabet_crc() -> str:
    """CRC-32 of the alphabet string, recorded in manifests and checkpoints."""
    return f"{zlib.crc32(ALPHABET.encode('ascii')):08x}"
