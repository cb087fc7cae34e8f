"""Cyclic (de Bruijn) patterns for locating overwrite offsets.

When frame-displacement scanning can't recover the buffer offset, a cyclic
pattern is fed to the target instead: every 4-byte window of the pattern is
unique, so the value that lands in the saved return address pinpoints the
offset.  Alphabet is lowercase ascii; capacity is 26**4 + 3 bytes.
"""

from __future__ import annotations

import functools

from .errors import LengthTooLargeError

ALPHABET = b"abcdefghijklmnopqrstuvwxyz"
WINDOW = 4
MAX_PATTERN_LENGTH = len(ALPHABET) ** WINDOW + WINDOW - 1


def _de_bruijn(alphabet: bytes, n: int) -> bytes:
    """Standard Lyndon-word construction of the de Bruijn sequence B(k, n)."""
    k = len(alphabet)
    a = [0] * (k * n)
    out = bytearray()

    def db(t: int, p: int) -> None:
        if t > n:
            if n % p == 0:
                out.extend(alphabet[a[j]] for j in range(1, p + 1))
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, k):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return bytes(out)


@functools.lru_cache(maxsize=1)
def _full_pattern() -> bytes:
    seq = _de_bruijn(ALPHABET, WINDOW)
    # linearize: append the wrap-around so every cyclic window exists once
    return seq + seq[: WINDOW - 1]


def cyclic_pattern(length: int) -> bytes:
    """Pattern of ``length`` bytes in which every 4-byte window is unique."""
    if length < WINDOW:
        raise ValueError(f"pattern length must be at least {WINDOW}")
    if length > MAX_PATTERN_LENGTH:
        raise LengthTooLargeError(
            f"length {length} exceeds the {MAX_PATTERN_LENGTH}-byte capacity "
            f"of a {len(ALPHABET)}-letter alphabet"
        )
    return _full_pattern()[:length]


def pattern_offset(window: bytes) -> int | None:
    """Offset of a 4-byte window within the pattern, or None if absent."""
    if len(window) != WINDOW:
        raise ValueError(f"window must be exactly {WINDOW} bytes")
    idx = _full_pattern().find(window)
    return idx if idx >= 0 else None
