"""Minimal x86-32 instruction decoder.

Decodes exactly the instruction subset the rest of the toolkit needs: the four
free-branch terminators (ret, ret imm16, indirect jmp/call through a register)
plus the register/immediate moves, pushes, pops and stack adjustments that make
gadget bodies executable in the simulator.  Every other byte pattern decodes as
``unknown`` with length 1, which keeps the decoder total and lets scanners
restart at any byte offset.  Prefix bytes are deliberately not interpreted; a
prefix decodes as unknown so a reported length is never wrong.

Operand encoding per mnemonic (register ids 0..7 = eax ecx edx ebx esp ebp esi
edi):

=================  =========================================
pop_reg/push_reg   (reg,)
jmp/call_indirect  (reg,)
push_imm32         (imm,)           unsigned 32-bit
mov_reg_imm32      (reg, imm)       unsigned 32-bit
mov_reg_reg        (dst, src)
xor_reg_reg        (dst, src)
add_esp_imm8/32    (delta,)         sign-extended
ret_imm16          (imm,)           unsigned 16-bit
int_imm8           (vector,)
ret/leave/nop      ()
=================  =========================================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

REG_NAMES = ("eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi")

MAX_INSN_LEN = 6  # longest encoding in the subset: 81 c4 + imm32


class Mnemonic(enum.Enum):
    RET = "ret"
    RET_IMM16 = "ret_imm16"
    JMP_INDIRECT = "jmp_indirect"
    CALL_INDIRECT = "call_indirect"
    POP_REG = "pop_reg"
    PUSH_REG = "push_reg"
    PUSH_IMM32 = "push_imm32"
    MOV_REG_IMM32 = "mov_reg_imm32"
    MOV_REG_REG = "mov_reg_reg"
    XOR_REG_REG = "xor_reg_reg"
    ADD_ESP_IMM8 = "add_esp_imm8"
    ADD_ESP_IMM32 = "add_esp_imm32"
    LEAVE = "leave"
    NOP = "nop"
    INT_IMM8 = "int_imm8"
    UNKNOWN = "unknown"


class FreeBranchKind(enum.IntEnum):
    """Control transfers whose target is attacker-influencable at runtime."""

    RET = 1
    RET_IMM16 = 2
    JMP_INDIRECT = 3
    CALL_INDIRECT = 4


# Encoded length of each terminator, counted from its first byte.
FREE_BRANCH_LENGTH = {
    FreeBranchKind.RET: 1,
    FreeBranchKind.RET_IMM16: 3,
    FreeBranchKind.JMP_INDIRECT: 2,
    FreeBranchKind.CALL_INDIRECT: 2,
}

_FREE_BRANCH_OF = {
    Mnemonic.RET: FreeBranchKind.RET,
    Mnemonic.RET_IMM16: FreeBranchKind.RET_IMM16,
    Mnemonic.JMP_INDIRECT: FreeBranchKind.JMP_INDIRECT,
    Mnemonic.CALL_INDIRECT: FreeBranchKind.CALL_INDIRECT,
}


@dataclass(frozen=True)
class Instruction:
    vaddr: int
    length: int
    mnemonic: Mnemonic
    operands: tuple[int, ...] = ()

    def __str__(self) -> str:
        return format_instruction(self)


def _sign8(b: int) -> int:
    return b - 0x100 if b >= 0x80 else b


def _sign32(v: int) -> int:
    return v - 0x1_0000_0000 if v >= 0x8000_0000 else v


def decode_one(data: bytes, offset: int, vaddr: int = 0) -> Instruction:
    """Decode a single instruction at ``offset``; total over non-empty input.

    Anything outside the supported subset (including multi-byte encodings
    truncated by the end of ``data``) comes back as ``unknown`` with length 1.
    """
    n = len(data)
    if not 0 <= offset < n:
        raise IndexError(f"offset {offset} outside buffer of {n} bytes")
    b = data[offset]

    if b == 0xC3:
        return Instruction(vaddr, 1, Mnemonic.RET)
    if b == 0xC9:
        return Instruction(vaddr, 1, Mnemonic.LEAVE)
    if b == 0x90:
        return Instruction(vaddr, 1, Mnemonic.NOP)
    if 0x50 <= b <= 0x57:
        return Instruction(vaddr, 1, Mnemonic.PUSH_REG, (b - 0x50,))
    if 0x58 <= b <= 0x5F:
        return Instruction(vaddr, 1, Mnemonic.POP_REG, (b - 0x58,))

    if b == 0xC2 and offset + 3 <= n:
        imm = int.from_bytes(data[offset + 1 : offset + 3], "little")
        return Instruction(vaddr, 3, Mnemonic.RET_IMM16, (imm,))
    if b == 0xCD and offset + 2 <= n:
        return Instruction(vaddr, 2, Mnemonic.INT_IMM8, (data[offset + 1],))
    if b == 0x68 and offset + 5 <= n:
        imm = int.from_bytes(data[offset + 1 : offset + 5], "little")
        return Instruction(vaddr, 5, Mnemonic.PUSH_IMM32, (imm,))
    if 0xB8 <= b <= 0xBF and offset + 5 <= n:
        imm = int.from_bytes(data[offset + 1 : offset + 5], "little")
        return Instruction(vaddr, 5, Mnemonic.MOV_REG_IMM32, (b - 0xB8, imm))

    if b in (0x89, 0x8B, 0x31, 0x33) and offset + 2 <= n:
        modrm = data[offset + 1]
        if modrm >> 6 == 0b11:  # register-to-register forms only
            reg = (modrm >> 3) & 7
            rm = modrm & 7
            # 0x89/0x31 store into r/m; 0x8B/0x33 load into reg.
            dst, src = (rm, reg) if b in (0x89, 0x31) else (reg, rm)
            mnem = Mnemonic.MOV_REG_REG if b in (0x89, 0x8B) else Mnemonic.XOR_REG_REG
            return Instruction(vaddr, 2, mnem, (dst, src))
        return Instruction(vaddr, 1, Mnemonic.UNKNOWN)

    if b == 0xFF and offset + 2 <= n:
        modrm = data[offset + 1]
        if 0xD0 <= modrm <= 0xD7:  # /2, mod=11
            return Instruction(vaddr, 2, Mnemonic.CALL_INDIRECT, (modrm - 0xD0,))
        if 0xE0 <= modrm <= 0xE7:  # /4, mod=11
            return Instruction(vaddr, 2, Mnemonic.JMP_INDIRECT, (modrm - 0xE0,))
        return Instruction(vaddr, 1, Mnemonic.UNKNOWN)

    if b == 0x83 and offset + 3 <= n and data[offset + 1] == 0xC4:
        return Instruction(vaddr, 3, Mnemonic.ADD_ESP_IMM8, (_sign8(data[offset + 2]),))
    if b == 0x81 and offset + 6 <= n and data[offset + 1] == 0xC4:
        imm = int.from_bytes(data[offset + 2 : offset + 6], "little")
        return Instruction(vaddr, 6, Mnemonic.ADD_ESP_IMM32, (_sign32(imm),))

    return Instruction(vaddr, 1, Mnemonic.UNKNOWN)


def decode_window(
    data: bytes, start: int, end: int, base_vaddr: int = 0
) -> list[Instruction] | None:
    """Greedily decode ``data[start:end]``; None means the window is invalid.

    Invalid when any instruction decodes as unknown, when a decoded length
    crosses ``end``, or when the final instruction does not land exactly on
    ``end``.  ``base_vaddr`` is the virtual address of ``data[0]``.
    """
    if not 0 <= start <= end <= len(data):
        raise IndexError(f"window [{start}, {end}) outside buffer of {len(data)} bytes")
    insns: list[Instruction] = []
    i = start
    while i < end:
        insn = decode_one(data, i, base_vaddr + i)
        if insn.mnemonic is Mnemonic.UNKNOWN or i + insn.length > end:
            return None
        insns.append(insn)
        i += insn.length
    return insns


def free_branch_kind(insn: Instruction) -> FreeBranchKind | None:
    return _FREE_BRANCH_OF.get(insn.mnemonic)


def _imm(v: int) -> str:
    return f"-{-v:#x}" if v < 0 else f"{v:#x}"


def format_instruction(insn: Instruction) -> str:
    """Fixed debug rendering, roughly Intel syntax."""
    m = insn.mnemonic
    ops = insn.operands
    if m is Mnemonic.RET:
        return "ret"
    if m is Mnemonic.RET_IMM16:
        return f"ret {_imm(ops[0])}"
    if m is Mnemonic.JMP_INDIRECT:
        return f"jmp {REG_NAMES[ops[0]]}"
    if m is Mnemonic.CALL_INDIRECT:
        return f"call {REG_NAMES[ops[0]]}"
    if m is Mnemonic.POP_REG:
        return f"pop {REG_NAMES[ops[0]]}"
    if m is Mnemonic.PUSH_REG:
        return f"push {REG_NAMES[ops[0]]}"
    if m is Mnemonic.PUSH_IMM32:
        return f"push {_imm(ops[0])}"
    if m is Mnemonic.MOV_REG_IMM32:
        return f"mov {REG_NAMES[ops[0]]}, {_imm(ops[1])}"
    if m in (Mnemonic.MOV_REG_REG, Mnemonic.XOR_REG_REG):
        op = "mov" if m is Mnemonic.MOV_REG_REG else "xor"
        return f"{op} {REG_NAMES[ops[0]]}, {REG_NAMES[ops[1]]}"
    if m in (Mnemonic.ADD_ESP_IMM8, Mnemonic.ADD_ESP_IMM32):
        return f"add esp, {_imm(ops[0])}"
    if m is Mnemonic.LEAVE:
        return "leave"
    if m is Mnemonic.NOP:
        return "nop"
    if m is Mnemonic.INT_IMM8:
        return f"int {_imm(ops[0])}"
    return "(bad)"
