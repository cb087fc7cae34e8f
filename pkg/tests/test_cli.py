"""CLI end-to-end tests driving main() in-process, plus one console-script check."""

import struct
import subprocess
import sys

import pytest

from conftest import ADDR_SECRET_NOPARM, ADDR_STR
from ropforge.cli import main
from ropforge.elfbuild import SectionSpec, SymbolSpec, build_elf

FIG8_CHAIN = """\
binary: {binary}
ret_offset: auto echo
call: SecretFunctionWithoutParm
call: SecretFunctionWithoutParm
call: SecretFunctionWithoutParm
final: sentinel
"""

FIG7_CHAIN = """\
binary: {binary}
ret_offset: auto echo
call: SecretFunctionWithParm &str
final: sentinel
"""


@pytest.fixture(autouse=True)
def no_color(monkeypatch):
    monkeypatch.setenv("ROPFORGE_COLOR", "0")


def write_chain(tmp_path, template, binary, name="chain.rop"):
    path = tmp_path / name
    path.write_text(template.format(binary=binary))
    return path


def test_symbols_lists_demo_addresses(demo_binary, capsys):
    assert main(["symbols", str(demo_binary)]) == 0
    out = capsys.readouterr().out
    assert "0804848b F SecretFunctionWithoutParm" in out
    assert "080484a4 F SecretFunctionWithParm" in out
    assert "0804a030 O str" in out


def test_symbols_stripped_warns(stripped_binary, capsys):
    assert main(["symbols", str(stripped_binary)]) == 0
    captured = capsys.readouterr()
    assert "F " not in captured.out
    assert "warning" in captured.err


def test_symbols_missing_file(capsys):
    assert main(["symbols", "/nonexistent/vuln"]) == 2
    assert "error" in capsys.readouterr().err


def test_offset_echo(demo_binary, capsys):
    assert main(["offset", str(demo_binary), "echo"]) == 0
    assert capsys.readouterr().out.strip() == "disp=0x1c saved_fp=4 ret_offset=32"


def test_offset_no_candidate(demo_binary, capsys):
    assert main(["offset", str(demo_binary), "main"]) == 3
    assert "cyclic pattern" in capsys.readouterr().err


def test_offset_disp_0x28(demo_binary, capsys):
    assert main(["offset", str(demo_binary), "read_name"]) == 0
    assert capsys.readouterr().out.strip() == "disp=0x28 saved_fp=4 ret_offset=44"


def test_gadgets_listing(tmp_path, capsys):
    raw = build_elf([SectionSpec(".text", 0x08048000, b"\x90\x58\x5b\xc3\x90", "ax")])
    binary = tmp_path / "mini"
    binary.write_bytes(raw)
    assert main(["gadgets", str(binary)]) == 0
    out = capsys.readouterr().out
    assert "0x08048001: pop eax ; pop ebx ; ret" in out
    assert "0x08048000: nop ; pop eax ; pop ebx ; ret" in out
    assert out.strip().endswith("4 gadgets")


def test_gadgets_class_filter(tmp_path, capsys):
    raw = build_elf([SectionSpec(".text", 0x08048000, b"\x90\x58\x5b\xc3\x90", "ax")])
    binary = tmp_path / "mini"
    binary.write_bytes(raw)
    assert main(["gadgets", str(binary), "--class", "pop_ret", "--arity", "2"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l and "gadgets" not in l]
    assert lines == ["0x08048001: pop eax ; pop ebx ; ret"]


def test_gadgets_none_found(tmp_path, capsys):
    raw = build_elf([SectionSpec(".text", 0x08048000, b"\x90" * 16, "ax")])
    binary = tmp_path / "noret"
    binary.write_bytes(raw)
    assert main(["gadgets", str(binary)]) == 0
    assert capsys.readouterr().out.strip() == "0 gadgets"


def test_gadgets_json(demo_binary, capsys):
    import json

    assert main(["gadgets", str(demo_binary), "--json", "--class", "stack_pivot"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert {"addr", "bytes_hex", "insns", "class"} == set(lines[0])
    assert any(o["class"] == "stack_pivot(8)" for o in lines)


def test_build_fig8_payload(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG8_CHAIN, demo_binary)
    out_file = tmp_path / "payload.bin"
    assert main(["build", str(chain), "--out", str(out_file), "--format", "raw"]) == 0
    payload = out_file.read_bytes()
    assert len(payload) == 48  # 32 pad + 4 words
    words = struct.unpack("<4I", payload[32:])
    assert words == (ADDR_SECRET_NOPARM,) * 3 + (0xDEADC0DE,)
    assert payload[:32] == b"A" * 32
    out = capsys.readouterr().out
    assert "func_addr" in out and "final_target" in out


def test_build_hex_format_stdout(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG7_CHAIN, demo_binary)
    assert main(["build", str(chain)]) == 0
    out = capsys.readouterr().out.strip()
    assert out == ("41" * 32 + "a4840408" + "dec0adde" + "30a00408")


def test_build_escaped_format(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG7_CHAIN, demo_binary)
    assert main(["build", str(chain), "--format", "escaped"]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("\\x41" * 32)
    assert "\\xa4\\x84\\x04\\x08" in out


def test_build_missing_cleanup_gadget(tmp_path, capsys):
    # a binary with a ret but no pop-ret gadgets at all
    raw = build_elf(
        [SectionSpec(".text", 0x08048000, b"\x90\xc3" + b"\xcc" * 14, "ax")],
        symbols=[SymbolSpec("f", 0x08048000, 2), SymbolSpec("g", 0x08048001, 1)],
    )
    binary = tmp_path / "nopops"
    binary.write_bytes(raw)
    chain = tmp_path / "chain.rop"
    chain.write_text(f"binary: {binary}\nret_offset: 16\ncall: f 1\ncall: g\n")
    assert main(["build", str(chain)]) == 5
    assert "pop_ret(1)" in capsys.readouterr().err


def test_build_bad_bytes_exit_code(demo_binary, tmp_path, capsys):
    # 0x0804200a carries both 0x20 and 0x0a; scanf bad bytes are the default
    chain = tmp_path / "chain.rop"
    chain.write_text(f"binary: {demo_binary}\nret_offset: 32\ncall: 0x0804200a\n")
    assert main(["build", str(chain)]) == 4
    err = capsys.readouterr().err
    assert "bad byte 0x0a" in err and "bad byte 0x20" in err
    assert main(["build", str(chain), "--force"]) == 0


def test_build_bad_bytes_can_be_disabled(demo_binary, tmp_path):
    chain = tmp_path / "chain.rop"
    chain.write_text(
        f"binary: {demo_binary}\nret_offset: 32\ncall: 0x0804200a\nbad_bytes: none\n"
    )
    assert main(["build", str(chain)]) == 0


def test_verify_fig8(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG8_CHAIN, demo_binary)
    assert main(["verify", str(demo_binary), str(chain)]) == 0
    captured = capsys.readouterr()
    calls = [l for l in captured.out.splitlines() if l.startswith("CALL")]
    assert calls == ["CALL 0x0804848b SecretFunctionWithoutParm()"] * 3
    assert "EXIT (sentinel)" in captured.out
    assert "OK" in captured.err


def test_verify_fig7_with_global_argument(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG7_CHAIN, demo_binary)
    assert main(["verify", str(demo_binary), str(chain)]) == 0
    out = capsys.readouterr().out
    assert "CALL 0x080484a4 SecretFunctionWithParm(0x0804a030)" in out


def test_verify_json(demo_binary, tmp_path, capsys):
    import json

    chain = write_chain(tmp_path, FIG7_CHAIN, demo_binary)
    assert main(["verify", str(demo_binary), str(chain), "--json"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert lines[0]["name"] == "SecretFunctionWithParm"
    assert lines[0]["args"] == [f"{ADDR_STR:#010x}"]
    assert lines[-1]["kind"] == "exit_sentinel"


def test_build_then_verify_prebuilt_payload(demo_binary, tmp_path, capsys):
    chain = write_chain(tmp_path, FIG8_CHAIN, demo_binary)
    out_file = tmp_path / "payload.bin"
    assert main(["build", str(chain), "--out", str(out_file), "--format", "raw"]) == 0
    capsys.readouterr()
    assert main(["verify", str(demo_binary), str(chain), "--payload", str(out_file)]) == 0


def test_verify_wrong_ret_offset_diverges(demo_binary, tmp_path, capsys):
    good_chain = write_chain(tmp_path, FIG8_CHAIN, demo_binary)
    out_file = tmp_path / "payload.bin"
    assert main(["build", str(good_chain), "--out", str(out_file), "--format", "raw"]) == 0
    # same calls, but the chain now claims the return slot 4 bytes early:
    # the simulator fetches a misaligned first target word and faults
    wrong = tmp_path / "wrong.rop"
    wrong.write_text(
        f"binary: {demo_binary}\nret_offset: 28\n"
        + "call: SecretFunctionWithoutParm\n" * 3
    )
    capsys.readouterr()
    code = main(["verify", str(demo_binary), str(wrong), "--payload", str(out_file)])
    assert code == 6
    captured = capsys.readouterr()
    assert "did not reach the exit sentinel" in captured.err


def test_verify_divergent_trace_exit_6(demo_binary, tmp_path, capsys):
    # payload built for one chain, verified against a different declaration
    chain_a = write_chain(tmp_path, FIG8_CHAIN, demo_binary, "a.rop")
    out_file = tmp_path / "payload.bin"
    assert main(["build", str(chain_a), "--out", str(out_file), "--format", "raw"]) == 0
    chain_b = tmp_path / "b.rop"
    chain_b.write_text(
        f"binary: {demo_binary}\nret_offset: 32\n" + "call: SecretFunctionWithoutParm\n" * 2
    )
    capsys.readouterr()
    assert main(["verify", str(demo_binary), str(chain_b), "--payload", str(out_file)]) == 6
    assert "diverges" in capsys.readouterr().err


def test_pattern_roundtrip(capsys):
    assert main(["pattern", "100"]) == 0
    pat = capsys.readouterr().out.strip()
    assert len(pat) == 100
    window = pat[32:36]
    value = struct.unpack("<I", window.encode())[0]
    assert main(["pattern", "--locate", hex(value)]) == 0
    assert capsys.readouterr().out.strip() == "offset=32"


def test_pattern_not_found(capsys):
    assert main(["pattern", "--locate", "0x00000000"]) == 3


def test_console_script_installed(demo_binary):
    result = subprocess.run(
        [sys.executable, "-m", "ropforge.cli", "offset", str(demo_binary), "echo"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert result.stdout.strip() == "disp=0x1c saved_fp=4 ret_offset=32"


def test_usage_error_exit_code():
    assert main(["no-such-command"]) == 2
    assert main([]) == 2
