"""Command-line frontend.

Subcommands follow the working workflow end to end: ``symbols`` and
``offset`` replace manual objdump reading, ``gadgets`` lists discovered
gadgets, ``build`` emits an annotated payload from a chain file, and
``verify`` replays it in the simulator.  ``pattern`` generates cyclic
patterns and locates crash values for targets where offset recovery fails.

Exit codes: 0 ok, 2 io/parse errors, 3 offset recovery failed, 4 payload
contains bad bytes, 5 chain planning failed, 6 verification failed.
Verification is simulator-only; this tool never executes target binaries.
Set ROPFORGE_COLOR=0 to disable ANSI styling.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import chainfile as chainfile_mod
from .chain import Payload, check_bad_bytes, emit_payload, plan_chain
from .errors import (
    ChainFileError,
    MissingCleanupGadgetError,
    NoCandidateError,
    RopforgeError,
    UnsatisfiableArityError,
)
from .gadgets import DEFAULT_MAX_INSNS, DEFAULT_WINDOW_BACK, enumerate_gadgets
from .image import load_image, lookup_symbol, stack_frame_displacement
from .pattern import cyclic_pattern, pattern_offset
from .sim import SimConfig, TerminationKind, format_trace, simulate, trace_jsonl

EXIT_OK = 0
EXIT_IO = 2
EXIT_OFFSET = 3
EXIT_BAD_BYTES = 4
EXIT_PLAN = 5
EXIT_VERIFY = 6

_KIND_LETTER = {"function": "F", "object": "O", "other": "?"}


def _color_enabled() -> bool:
    value = os.environ.get("ROPFORGE_COLOR", "").strip().lower()
    if value in ("0", "off", "never", "false"):
        return False
    if value in ("1", "on", "always", "true"):
        return True
    return sys.stdout.isatty()


def _style(text: str, code: str) -> str:
    if _color_enabled():
        return f"\x1b[{code}m{text}\x1b[0m"
    return text


def _load(path: str):
    return load_image(Path(path).read_bytes())


def cmd_symbols(args) -> int:
    image = _load(args.binary)
    for sym in sorted(image.symbols, key=lambda s: (s.vaddr, s.name)):
        print(f"{sym.vaddr:08x} {_KIND_LETTER.get(sym.kind, '?')} {sym.name}")
    if not any(s.kind == "function" for s in image.symbols):
        print("warning: no function symbols found (stripped binary?)", file=sys.stderr)
    return EXIT_OK


def cmd_offset(args) -> int:
    image = _load(args.binary)
    function = lookup_symbol(image, args.function)
    disp = stack_frame_displacement(image, function)
    print(f"disp={disp:#x} saved_fp=4 ret_offset={disp + 4}")
    return EXIT_OK


def _class_filter(entry, wanted: str | None, arity: int | None) -> bool:
    if wanted is not None and entry.gclass.kind != wanted:
        return False
    if arity is not None and entry.gclass.arity != arity:
        return False
    return True


def cmd_gadgets(args) -> int:
    image = _load(args.binary)
    gset = enumerate_gadgets(
        image,
        max_insns=args.max_insns,
        window_back=args.window_back,
        workers=args.workers,
    )
    shown = 0
    for addr, entry in gset.by_address():
        if not _class_filter(entry, args.gadget_class, args.arity):
            continue
        shown += 1
        if args.json:
            print(
                json.dumps(
                    {
                        "addr": f"{addr:#010x}",
                        "bytes_hex": entry.gadget.data.hex(),
                        "insns": [str(i) for i in entry.gadget.insns],
                        "class": entry.gclass.render(),
                    }
                )
            )
        else:
            print(f"{_style(f'{addr:#010x}', '36')}: {entry.gadget.render()}")
    if not args.json:
        print(f"{shown} gadgets")
    return EXIT_OK


def _chain_needs_gadgets(spec) -> bool:
    return any(c.arity > 0 for c in spec.calls[:-1])


def _build_payload(resolved, image) -> Payload:
    gadgets = None
    if _chain_needs_gadgets(resolved.spec):
        gadgets = enumerate_gadgets(image)
    layout = plan_chain(resolved.spec, gadgets)
    return emit_payload(layout, pad_byte=resolved.pad_byte)


def _format_payload(payload: Payload, fmt: str) -> bytes:
    if fmt == "raw":
        return payload.data
    if fmt == "hex":
        return payload.data.hex().encode() + b"\n"
    if fmt == "escaped":
        return "".join(f"\\x{b:02x}" for b in payload.data).encode() + b"\n"
    raise ChainFileError(f"unknown payload format {fmt!r}")


def _annotation_table(payload: Payload) -> list[str]:
    rows = []
    for a in payload.annotations:
        if a.role.value == "padding":
            content = f"{payload.data[a.offset]:02x} x{a.length}"
            value = ""
        else:
            content = payload.data[a.offset : a.offset + a.length].hex()
            value = f"{a.value:#010x}"
        rows.append((f"{a.offset:#06x}", content, a.role.value, value))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return ["  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip() for row in rows]


def cmd_build(args) -> int:
    cf = chainfile_mod.load_chain_file(args.chainfile)
    image = load_image(cf.binary_path().read_bytes())
    resolved = chainfile_mod.resolve(cf, image)
    payload = _build_payload(resolved, image)

    fmt = args.format or resolved.out_format
    rendered = _format_payload(payload, fmt)
    annotations = _annotation_table(payload)
    if args.out:
        Path(args.out).write_bytes(rendered)
        print("\n".join(annotations))
        print(f"wrote {len(payload.data)}-byte payload ({fmt}) to {args.out}")
    else:
        print("\n".join(annotations), file=sys.stderr)
        sys.stdout.buffer.write(rendered)
        sys.stdout.buffer.flush()

    violations = check_bad_bytes(payload, resolved.spec.bad_bytes)
    if violations:
        for offset, byte, role in violations:
            print(
                _style(f"bad byte {byte:#04x} at offset {offset} ({role})", "31"),
                file=sys.stderr,
            )
        if not args.force:
            print("payload violates the bad-byte set (use --force to keep it)", file=sys.stderr)
            return EXIT_BAD_BYTES
    return EXIT_OK


def cmd_verify(args) -> int:
    image = _load(args.binary)
    cf = chainfile_mod.load_chain_file(args.chainfile)
    resolved = chainfile_mod.resolve(cf, image)
    if args.payload:
        payload: Payload | bytes = Path(args.payload).read_bytes()
    else:
        payload = _build_payload(resolved, image)

    trace = simulate(image, resolved.stubs, payload, resolved.spec.ret_offset, SimConfig())
    lines = trace_jsonl(trace) if args.json else format_trace(trace)
    print("\n".join(lines))

    expected = [(c.target, c.args) for c in resolved.spec.calls]
    observed = [(e.vaddr, e.args) for e in trace.events]
    if trace.termination.kind is not TerminationKind.EXIT_SENTINEL:
        print("verify: chain did not reach the exit sentinel", file=sys.stderr)
        return EXIT_VERIFY
    if observed != expected:
        print("verify: trace diverges from the declared calls", file=sys.stderr)
        return EXIT_VERIFY
    print("OK: trace matches the chain declaration", file=sys.stderr)
    return EXIT_OK


def cmd_pattern(args) -> int:
    if args.locate is not None:
        token = args.locate
        if token.startswith("0x") or token.isdigit():
            value = int(token, 0) & 0xFFFFFFFF
            window = value.to_bytes(4, "little")  # value as read from a register
        elif len(token) == 4:
            window = token.encode("latin-1")
        else:
            raise ChainFileError("--locate takes a 32-bit value or a 4-char window")
        offset = pattern_offset(window)
        if offset is None:
            print("window not found in pattern", file=sys.stderr)
            return EXIT_OFFSET
        print(f"offset={offset}")
        return EXIT_OK
    if args.length is None:
        raise ChainFileError("pattern needs a LENGTH or --locate")
    sys.stdout.write(cyclic_pattern(args.length).decode("ascii") + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ropforge",
        description="ROP gadget discovery, chain building, and simulator-backed verification "
        "for 32-bit ELF binaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("symbols", help="list the symbol table")
    p.add_argument("binary")
    p.set_defaults(func=cmd_symbols)

    p = sub.add_parser("offset", help="recover the buffer-to-return-address offset")
    p.add_argument("binary")
    p.add_argument("function")
    p.set_defaults(func=cmd_offset)

    p = sub.add_parser("gadgets", help="enumerate gadgets in executable sections")
    p.add_argument("binary")
    p.add_argument("--max-insns", type=int, default=DEFAULT_MAX_INSNS)
    p.add_argument("--window-back", type=int, default=DEFAULT_WINDOW_BACK)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--class",
        dest="gadget_class",
        choices=["pop_ret", "ret_only", "stack_pivot", "other"],
    )
    p.add_argument("--arity", type=int)
    p.add_argument("--json", action="store_true", help="one JSON object per gadget address")
    p.set_defaults(func=cmd_gadgets)

    p = sub.add_parser("build", help="build a payload from a chain file")
    p.add_argument("chainfile")
    p.add_argument("--out", help="write the payload here instead of stdout")
    p.add_argument("--format", choices=list(chainfile_mod.OUTPUT_FORMATS))
    p.add_argument("--force", action="store_true", help="keep payloads with bad bytes")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="simulate a chain and check its trace")
    p.add_argument("binary")
    p.add_argument("chainfile")
    p.add_argument("--payload", help="verify these prebuilt payload bytes instead of rebuilding")
    p.add_argument("--json", action="store_true", help="emit the trace as JSON lines")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pattern", help="cyclic pattern generation / offset lookup")
    p.add_argument("length", nargs="?", type=int)
    p.add_argument("--locate", help="32-bit crash value (0x...) or 4-char window")
    p.set_defaults(func=cmd_pattern)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_IO
    try:
        return args.func(args)
    except NoCandidateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OFFSET
    except (MissingCleanupGadgetError, UnsatisfiableArityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except (RopforgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
