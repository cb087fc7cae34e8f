"""Synthetic ELF32 writer.

Builds small but structurally valid 32-bit little-endian x86 executables from
(section bytes, symbol list) descriptions, so the whole test suite and the
demo workflow run hermetically without a cross C toolchain.  Output parses
with standard binutils tools (readelf/objdump) as well as with this package's
own loader.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

EHDR_SIZE = 52
SHDR_SIZE = 40
SYM_SIZE = 16

SHT_PROGBITS = 1
SHT_SYMTAB = 2
SHT_STRTAB = 3
SHT_DYNSYM = 11

SHF_WRITE = 1
SHF_ALLOC = 2
SHF_EXECINSTR = 4

STB_GLOBAL = 1
_STT = {"function": 2, "object": 1, "other": 0}


@dataclass
class SectionSpec:
    name: str
    vaddr: int
    data: bytes
    flags: str = "a"  # letters: a=alloc w=write x=exec


@dataclass
class SymbolSpec:
    name: str
    vaddr: int
    size: int = 0
    kind: str = "function"  # function | object | other


@dataclass
class _Strtab:
    blob: bytearray = field(default_factory=lambda: bytearray(b"\x00"))

    def add(self, name: str) -> int:
        if not name:
            return 0
        off = len(self.blob)
        self.blob += name.encode() + b"\x00"
        return off


@dataclass
class _Record:
    name: str
    sh_type: int
    flags: int
    vaddr: int
    data: bytes
    link: int = 0
    entsize: int = 0
    info: int = 0


def _sh_flags(letters: str) -> int:
    flags = 0
    for ch in letters:
        flags |= {"a": SHF_ALLOC, "w": SHF_WRITE, "x": SHF_EXECINSTR}[ch]
    return flags


def _symtab_blob(symbols, strtab: _Strtab, section_index) -> bytes:
    blob = bytearray(SYM_SIZE)  # index 0: undefined symbol
    for sym in symbols:
        info = (STB_GLOBAL << 4) | _STT[sym.kind]
        blob += struct.pack(
            "<IIIBBH",
            strtab.add(sym.name),
            sym.vaddr,
            sym.size,
            info,
            0,
            section_index(sym.vaddr),
        )
    return bytes(blob)


def build_elf(
    sections: list[SectionSpec],
    symbols: list[SymbolSpec] | None = None,
    dyn_symbols: list[SymbolSpec] | None = None,
    entry: int | None = None,
) -> bytes:
    """Serialize an ELF32 EXEC image containing the given sections and symbols.

    ``symbols`` land in .symtab, ``dyn_symbols`` in .dynsym.  Entry point
    defaults to the first executable section's start.
    """
    symbols = list(symbols or [])
    dyn_symbols = list(dyn_symbols or [])
    if entry is None:
        entry = next((s.vaddr for s in sections if "x" in s.flags), 0)

    def section_index(vaddr: int) -> int:
        for i, s in enumerate(sections):
            if s.vaddr <= vaddr < s.vaddr + max(len(s.data), 1):
                return i + 1  # +1 for the null section header
        return 0xFFF1  # SHN_ABS

    strtab = _Strtab()
    dynstr = _Strtab()
    records = [
        _Record(s.name, SHT_PROGBITS, _sh_flags(s.flags), s.vaddr, s.data)
        for s in sections
    ]
    if symbols:
        blob = _symtab_blob(symbols, strtab, section_index)
        n = len(records)
        records.append(_Record(".symtab", SHT_SYMTAB, 0, 0, blob, n + 2, SYM_SIZE, 1))
        records.append(_Record(".strtab", SHT_STRTAB, 0, 0, bytes(strtab.blob)))
    if dyn_symbols:
        blob = _symtab_blob(dyn_symbols, dynstr, section_index)
        n = len(records)
        records.append(_Record(".dynsym", SHT_DYNSYM, SHF_ALLOC, 0, blob, n + 2, SYM_SIZE, 1))
        records.append(_Record(".dynstr", SHT_STRTAB, SHF_ALLOC, 0, bytes(dynstr.blob)))

    # The name table's own content depends only on the section names, so it
    # can be finalized before layout like any other data blob.
    shstrtab = _Strtab()
    records.append(_Record(".shstrtab", SHT_STRTAB, 0, 0, b""))
    name_offsets = [shstrtab.add(r.name) for r in records]
    records[-1].data = bytes(shstrtab.blob)
    shstrndx = len(records)  # index in the header table, after the null entry

    body = bytearray(EHDR_SIZE)
    offsets = []
    for rec in records:
        while len(body) % 4:
            body.append(0)
        offsets.append(len(body))
        body += rec.data

    while len(body) % 4:
        body.append(0)
    e_shoff = len(body)
    body += bytes(SHDR_SIZE)  # null section header
    for rec, name_off, off in zip(records, name_offsets, offsets):
        body += struct.pack(
            "<10I",
            name_off,
            rec.sh_type,
            rec.flags,
            rec.vaddr,
            off,
            len(rec.data),
            rec.link,
            rec.info,
            1,
            rec.entsize,
        )

    ehdr = struct.pack(
        "<4sBBBB8xHHIIIIIHHHHHH",
        b"\x7fELF",
        1,  # ELFCLASS32
        1,  # little endian
        1,  # EV_CURRENT
        0,  # System V ABI
        2,  # ET_EXEC
        3,  # EM_386
        1,  # version
        entry,
        0,  # no program headers
        e_shoff,
        0,  # flags
        EHDR_SIZE,
        0,
        0,
        SHDR_SIZE,
        len(records) + 1,
        shstrndx,
    )
    body[:EHDR_SIZE] = ehdr
    return bytes(body)
