"""Stack-machine simulator that verifies chains without running exploits.

Models just enough of a 32-bit process to replay the moment the vulnerable
function returns with an overflowed frame: a register file, a byte-addressable
stack region, the binary's executable sections for instruction fetch, and a
table of function stubs.  Stubs don't emulate callee bodies; hitting one
records a call event with the argument words observed on the stack and then
behaves like a cdecl callee returning without cleaning its arguments.  A
reserved unmapped sentinel address signals clean chain completion.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .chain import EXIT_SENTINEL, MAX_CALL_ARITY, Payload
from .disasm import Mnemonic, decode_one
from .image import BinaryImage

DEFAULT_STACK_BASE = 0xBFFF0000
DEFAULT_STACK_SIZE = 64 * 1024
DEFAULT_STEP_BUDGET = 10_000
STACK_FILL = 0xCC  # uninitialized slots read conspicuously as 0xCCCCCCCC

_MASK = 0xFFFFFFFF
_ESP, _EBP = 4, 5


class TerminationKind(enum.Enum):
    EXIT_SENTINEL = "exit_sentinel"
    STEP_BUDGET = "step_budget"
    FAULT = "fault"
    UNSUPPORTED_INSTRUCTION = "unsupported_instruction"


class FaultKind(enum.Enum):
    STACK_OUT_OF_BOUNDS = "stack_out_of_bounds"
    UNMAPPED_FETCH = "unmapped_fetch"
    SOFTWARE_INTERRUPT = "software_interrupt"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    fault: FaultKind | None = None
    vaddr: int | None = None

    def render(self) -> str:
        if self.kind is TerminationKind.EXIT_SENTINEL:
            return "EXIT (sentinel)"
        if self.kind is TerminationKind.STEP_BUDGET:
            return "HALT (step budget exhausted)"
        if self.kind is TerminationKind.UNSUPPORTED_INSTRUCTION:
            return f"UNSUPPORTED instruction at {self.vaddr:#010x}"
        detail = self.fault.value.replace("_", " ")
        at = f" at {self.vaddr:#010x}" if self.vaddr is not None else ""
        return f"FAULT ({detail}{at})"


@dataclass(frozen=True)
class CallEvent:
    vaddr: int
    name: str
    args: tuple[int, ...]

    def render(self) -> str:
        args = ", ".join(f"{a:#010x}" for a in self.args)
        return f"CALL {self.vaddr:#010x} {self.name}({args})"


@dataclass(frozen=True)
class CallTrace:
    events: tuple[CallEvent, ...]
    termination: Termination


@dataclass(frozen=True)
class Stub:
    name: str
    arity: int


class StubTable:
    """Address -> (name, arity) map for intercepted functions."""

    def __init__(self, stubs: dict[int, tuple[str, int]] | None = None):
        self._stubs: dict[int, Stub] = {}
        for addr, (name, arity) in (stubs or {}).items():
            self.add(addr, name, arity)

    def add(self, addr: int, name: str, arity: int) -> None:
        if arity < 0 or arity > MAX_CALL_ARITY:
            raise ValueError(f"stub arity {arity} outside 0..{MAX_CALL_ARITY}")
        if addr in self._stubs and self._stubs[addr].arity != arity:
            raise ValueError(f"conflicting arities for stub at {addr:#010x}")
        self._stubs[addr] = Stub(name, arity)

    def get(self, addr: int) -> Stub | None:
        return self._stubs.get(addr)

    def __contains__(self, addr: int) -> bool:
        return addr in self._stubs

    def __len__(self) -> int:
        return len(self._stubs)


@dataclass(frozen=True)
class SimConfig:
    stack_base: int = DEFAULT_STACK_BASE
    stack_size: int = DEFAULT_STACK_SIZE
    exit_sentinel: int = EXIT_SENTINEL
    step_budget: int = DEFAULT_STEP_BUDGET


class _StackFault(Exception):
    def __init__(self, addr: int):
        self.addr = addr


@dataclass
class MachineState:
    """Mutable per-run machine: registers, ip, stack bytes, event log."""

    image: BinaryImage
    stack_base: int
    stack: bytearray
    regs: list[int] = field(default_factory=lambda: [0] * 8)
    ip: int = 0
    steps: int = 0
    events: list[CallEvent] = field(default_factory=list)

    @property
    def esp(self) -> int:
        return self.regs[_ESP]

    @esp.setter
    def esp(self, value: int) -> None:
        self.regs[_ESP] = value & _MASK

    def _span(self, addr: int, length: int) -> int:
        off = addr - self.stack_base
        if off < 0 or off + length > len(self.stack):
            raise _StackFault(addr)
        return off

    def read32(self, addr: int) -> int:
        off = self._span(addr, 4)
        return int.from_bytes(self.stack[off : off + 4], "little")

    def write32(self, addr: int, value: int) -> None:
        off = self._span(addr, 4)
        self.stack[off : off + 4] = (value & _MASK).to_bytes(4, "little")

    def write_bytes(self, addr: int, blob: bytes) -> None:
        off = self._span(addr, len(blob))
        self.stack[off : off + len(blob)] = blob

    def pop(self) -> int:
        value = self.read32(self.esp)
        self.esp = self.esp + 4
        return value

    def push(self, value: int) -> None:
        self.esp = self.esp - 4
        self.write32(self.esp, value)


def step(state: MachineState, stubs: StubTable, config: SimConfig) -> Termination | None:
    """Advance one step; returns a Termination when the run is over.

    Priority per step: stub interception, then the exit sentinel, then fetch
    and execute one decoded instruction.
    """
    if state.steps >= config.step_budget:
        return Termination(TerminationKind.STEP_BUDGET)
    state.steps += 1
    try:
        return _step_inner(state, stubs, config)
    except _StackFault as fault:
        return Termination(
            TerminationKind.FAULT, FaultKind.STACK_OUT_OF_BOUNDS, vaddr=fault.addr
        )


def _step_inner(state: MachineState, stubs: StubTable, config: SimConfig) -> Termination | None:
    stub = stubs.get(state.ip)
    if stub is not None:
        # cdecl callee: observe args above the return slot, then ret without
        # popping them (the caller, i.e. the chain, owns the cleanup).
        args = tuple(state.read32(state.esp + 4 * (i + 1)) for i in range(stub.arity))
        state.events.append(CallEvent(vaddr=state.ip, name=stub.name, args=args))
        state.ip = state.pop()
        return None

    if state.ip == config.exit_sentinel:
        return Termination(TerminationKind.EXIT_SENTINEL)

    section = state.image.section_at(state.ip)
    if section is None or not section.executable:
        return Termination(TerminationKind.FAULT, FaultKind.UNMAPPED_FETCH, vaddr=state.ip)
    insn = decode_one(section.data, state.ip - section.vaddr, state.ip)
    m = insn.mnemonic

    if m is Mnemonic.UNKNOWN:
        return Termination(TerminationKind.UNSUPPORTED_INSTRUCTION, vaddr=state.ip)
    if m is Mnemonic.INT_IMM8:
        return Termination(
            TerminationKind.FAULT, FaultKind.SOFTWARE_INTERRUPT, vaddr=state.ip
        )

    if m is Mnemonic.RET:
        state.ip = state.pop()
    elif m is Mnemonic.RET_IMM16:
        state.ip = state.pop()
        state.esp = state.esp + insn.operands[0]
    elif m is Mnemonic.JMP_INDIRECT:
        state.ip = state.regs[insn.operands[0]]
    elif m is Mnemonic.CALL_INDIRECT:
        state.push((state.ip + insn.length) & _MASK)
        state.ip = state.regs[insn.operands[0]]
    else:
        if m is Mnemonic.POP_REG:
            state.regs[insn.operands[0]] = state.pop()
        elif m is Mnemonic.PUSH_REG:
            state.push(state.regs[insn.operands[0]])
        elif m is Mnemonic.PUSH_IMM32:
            state.push(insn.operands[0])
        elif m is Mnemonic.MOV_REG_IMM32:
            state.regs[insn.operands[0]] = insn.operands[1] & _MASK
        elif m is Mnemonic.MOV_REG_REG:
            state.regs[insn.operands[0]] = state.regs[insn.operands[1]]
        elif m is Mnemonic.XOR_REG_REG:
            dst, src = insn.operands
            state.regs[dst] = state.regs[dst] ^ state.regs[src]
        elif m in (Mnemonic.ADD_ESP_IMM8, Mnemonic.ADD_ESP_IMM32):
            state.esp = state.esp + insn.operands[0]
        elif m is Mnemonic.LEAVE:
            state.esp = state.regs[_EBP]
            state.regs[_EBP] = state.pop()
        elif m is Mnemonic.NOP:
            pass
        state.ip = (state.ip + insn.length) & _MASK

    if not config.stack_base <= state.esp <= config.stack_base + config.stack_size:
        return Termination(
            TerminationKind.FAULT, FaultKind.STACK_OUT_OF_BOUNDS, vaddr=state.esp
        )
    return None


def boot_state(
    image: BinaryImage,
    payload: Payload | bytes,
    ret_offset: int,
    config: SimConfig | None = None,
) -> MachineState:
    """Stack and registers at the instant the vulnerable function returns.

    The payload's buffer start sits a quarter into the stack region; the word
    at ``ret_offset`` therefore occupies the saved return address slot, and
    esp points at that slot with the overflow's tail at ascending addresses.
    """
    config = config or SimConfig()
    data = payload.data if isinstance(payload, Payload) else bytes(payload)
    if len(data) < ret_offset + 4:
        raise ValueError("payload too short to reach the saved return address")
    buffer_addr = config.stack_base + config.stack_size // 4
    if buffer_addr + len(data) > config.stack_base + config.stack_size:
        raise ValueError("payload does not fit in the configured stack region")
    state = MachineState(
        image=image,
        stack_base=config.stack_base,
        stack=bytearray([STACK_FILL]) * config.stack_size,
    )
    state.write_bytes(buffer_addr, data)
    state.esp = buffer_addr + ret_offset
    return state


def simulate(
    image: BinaryImage,
    stubs: StubTable,
    payload: Payload | bytes,
    ret_offset: int,
    config: SimConfig | None = None,
) -> CallTrace:
    """Replay the overflowed return and run the chain to termination."""
    config = config or SimConfig()
    state = boot_state(image, payload, ret_offset, config)
    try:
        state.ip = state.pop()  # the vulnerable function's own ret
    except _StackFault as fault:
        term = Termination(
            TerminationKind.FAULT, FaultKind.STACK_OUT_OF_BOUNDS, vaddr=fault.addr
        )
        return CallTrace(events=(), termination=term)
    while True:
        term = step(state, stubs, config)
        if term is not None:
            return CallTrace(events=tuple(state.events), termination=term)


def format_trace(trace: CallTrace) -> list[str]:
    return [e.render() for e in trace.events] + [trace.termination.render()]


def trace_jsonl(trace: CallTrace) -> list[str]:
    lines = [
        json.dumps(
            {
                "type": "call",
                "addr": f"{e.vaddr:#010x}",
                "name": e.name,
                "args": [f"{a:#010x}" for a in e.args],
            }
        )
        for e in trace.events
    ]
    term = {"type": "termination", "kind": trace.termination.kind.value}
    if trace.termination.fault is not None:
        term["fault"] = trace.termination.fault.value
    if trace.termination.vaddr is not None:
        term["addr"] = f"{trace.termination.vaddr:#010x}"
    lines.append(json.dumps(term))
    return lines
