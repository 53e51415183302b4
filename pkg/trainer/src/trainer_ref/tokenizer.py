"""Byte-level tokenization.

Token ids 0..255 are raw UTF-8 bytes; three reserved ids sit above them.
No merges, no vocabulary file: any text round-trips exactly.
"""

from typing import List

PAD_ID = 256
BOS_ID = 257
EOS_ID = 258
VOCAB_SIZE = 259


def encode(text: str) -> List[int]:
    return list(text.encode("utf-8"))


def decode(ids) -> str:
    """Inverse of encode; special ids are skipped, partial UTF-8 is replaced."""
    return bytes(i for i in ids if 0 <= i < 256).decode("utf-8", errors="replace")
