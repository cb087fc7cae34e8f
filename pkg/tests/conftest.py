"""Shared fixtures: a hermetic synthetic binary mirroring the demo program.

The layout reproduces the vulnerable-program geometry the toolkit is built
around: two secret functions at 0x0804848b / 0x080484a4, an ``echo`` function
whose body computes a buffer address at ebp-0x1c, a global ``str`` in .data,
and a small zone of cleanup gadgets.  0xCC filler isolates the interesting
byte runs from each other.
"""

from __future__ import annotations

import pytest

from ropforge.elfbuild import SectionSpec, SymbolSpec, build_elf
from ropforge.image import load_image

TEXT_VADDR = 0x08048400
DATA_VADDR = 0x0804A020

ADDR_SECRET_NOPARM = 0x0804848B
ADDR_SECRET_PARM = 0x080484A4
ADDR_ECHO = 0x080484E6
ADDR_MAIN = 0x08048520
ADDR_READ_NAME = 0x08048530
ADDR_COPY_FIELDS = 0x08048540
ADDR_STR = 0x0804A030

ADDR_POP1_EDI = 0x08048550  # 5f c3
ADDR_POP3 = 0x08048554  # 5e 5f 5d c3
ADDR_POP2 = 0x08048555  # 5f 5d c3 (suffix of the run above)
ADDR_POP2_DUP = 0x08048560  # second copy of 5f 5d c3
ADDR_PIVOT8 = 0x08048568  # 83 c4 08 c3
ADDR_XOR_RET = 0x0804856C  # 31 c0 c3
ADDR_UNALIGNED_HOST = 0x08048570  # 05 c3 00 00 00 (ret hidden in the immediate)
ADDR_UNALIGNED_RET = 0x08048571

# Unmapped addresses used as simulator stubs in randomized chain tests.
STUB_BY_ARITY = {k: 0x08049000 + 0x10 * k for k in range(4)}

_ECHO_BODY = bytes.fromhex(
    "55"  # push ebp
    "89e5"  # mov ebp, esp
    "83ec28"  # sub esp, 0x28
    "68d0850408"  # push 0x080485d0
    "b800000000"  # mov eax, 0
    + "90" * 12
    + "8d45e4"  # lea -0x1c(%ebp), %eax   <- at 0x08048502
    "50"  # push eax
    "68e0850408"  # push 0x080485e0
    "b800000000"  # mov eax, 0
    "9090"
    "c9c3"  # leave; ret
)

_PLACEMENTS = [
    (ADDR_SECRET_NOPARM, bytes.fromhex("5589e5905dc3")),
    (ADDR_SECRET_PARM, bytes.fromhex("5589e590905dc3")),
    (ADDR_ECHO, _ECHO_BODY),
    (ADDR_MAIN, bytes.fromhex("5589e59090909090c9c3")),
    (ADDR_READ_NAME, bytes.fromhex("5589e58d45d890c9c3")),
    (ADDR_COPY_FIELDS, bytes.fromhex("5589e58d45f0908d45d8c9c3")),
    (ADDR_POP1_EDI, bytes.fromhex("5fc3")),
    (ADDR_POP3, bytes.fromhex("5e5f5dc3")),
    (ADDR_POP2_DUP, bytes.fromhex("5f5dc3")),
    (ADDR_PIVOT8, bytes.fromhex("83c408c3")),
    (ADDR_XOR_RET, bytes.fromhex("31c0c3")),
    (ADDR_UNALIGNED_HOST, bytes.fromhex("05c3000000")),
    (0x08048578, bytes.fromhex("ffe0")),  # jmp eax
    (0x0804857A, bytes.fromhex("ffd1")),  # call ecx
    (0x0804857C, bytes.fromhex("c20800")),  # ret 8
]

SYMBOLS = [
    SymbolSpec("main", ADDR_MAIN, 10, "function"),
    SymbolSpec("echo", ADDR_ECHO, len(_ECHO_BODY), "function"),
    SymbolSpec("SecretFunctionWithoutParm", ADDR_SECRET_NOPARM, 6, "function"),
    SymbolSpec("SecretFunctionWithParm", ADDR_SECRET_PARM, 7, "function"),
    SymbolSpec("read_name", ADDR_READ_NAME, 9, "function"),
    SymbolSpec("copy_fields", ADDR_COPY_FIELDS, 12, "function"),
    SymbolSpec("str", ADDR_STR, 20, "object"),
]


def _text_bytes() -> bytes:
    text = bytearray(b"\xcc" * 0x200)
    for vaddr, blob in _PLACEMENTS:
        off = vaddr - TEXT_VADDR
        assert text[off : off + len(blob)] == b"\xcc" * len(blob), "placement overlap"
        text[off : off + len(blob)] = blob
    return bytes(text)


def _data_bytes() -> bytes:
    data = bytearray(0x30)
    payload = b"MyROPExploit\x00"
    data[0x10 : 0x10 + len(payload)] = payload
    return bytes(data)


def demo_elf_bytes() -> bytes:
    return build_elf(
        sections=[
            SectionSpec(".text", TEXT_VADDR, _text_bytes(), "ax"),
            SectionSpec(".data", DATA_VADDR, _data_bytes(), "wa"),
        ],
        symbols=SYMBOLS,
        entry=ADDR_MAIN,
    )


@pytest.fixture(scope="session")
def demo_bytes() -> bytes:
    return demo_elf_bytes()


@pytest.fixture(scope="session")
def demo_image(demo_bytes):
    return load_image(demo_bytes)


@pytest.fixture(scope="session")
def demo_binary(demo_bytes, tmp_path_factory):
    path = tmp_path_factory.mktemp("bin") / "vuln32"
    path.write_bytes(demo_bytes)
    return path


@pytest.fixture(scope="session")
def stripped_binary(tmp_path_factory):
    raw = build_elf(
        sections=[SectionSpec(".text", TEXT_VADDR, _text_bytes(), "ax")],
        symbols=[],
    )
    path = tmp_path_factory.mktemp("bin") / "stripped32"
    path.write_bytes(raw)
    return path
