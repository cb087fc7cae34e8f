"""ropforge: ROP gadget discovery, ret2func chain building, and
simulator-backed payload verification for 32-bit little-endian ELF binaries.

Workflow: load a binary (:func:`load_image`), recover the overflow offset
(:func:`stack_frame_displacement`), enumerate gadgets
(:func:`enumerate_gadgets`), plan and emit a payload (:func:`plan_chain`,
:func:`emit_payload`), and replay it in the stack simulator
(:func:`simulate`).  The ``ropforge`` CLI fronts the same steps.
"""

from .chain import (
    CallStep,
    ChainSpec,
    EXIT_SENTINEL,
    Payload,
    Role,
    SCANF_BAD_BYTES,
    StackLayout,
    check_bad_bytes,
    emit_payload,
    plan_chain,
    unpack_words,
)
from .disasm import (
    FreeBranchKind,
    Instruction,
    Mnemonic,
    decode_one,
    decode_window,
    free_branch_kind,
)
from .errors import (
    AmbiguousSymbolError,
    ChainFileError,
    LengthTooLargeError,
    MissingCleanupGadgetError,
    NoCandidateError,
    NotElfError,
    OutOfRangeError,
    RopforgeError,
    SymbolNotFoundError,
    TruncatedError,
    UnsatisfiableArityError,
)
from .gadgets import (
    Gadget,
    GadgetClass,
    GadgetSet,
    classify,
    enumerate_gadgets,
    find_pop_ret,
    find_terminators,
)
from .image import (
    BinaryImage,
    Section,
    Symbol,
    load_image,
    lookup_symbol,
    read_virtual,
    stack_frame_displacement,
)
from .pattern import cyclic_pattern, pattern_offset
from .sim import (
    CallEvent,
    CallTrace,
    SimConfig,
    StubTable,
    Termination,
    TerminationKind,
    simulate,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousSymbolError",
    "BinaryImage",
    "CallEvent",
    "CallStep",
    "CallTrace",
    "ChainFileError",
    "ChainSpec",
    "EXIT_SENTINEL",
    "FreeBranchKind",
    "Gadget",
    "GadgetClass",
    "GadgetSet",
    "Instruction",
    "LengthTooLargeError",
    "MissingCleanupGadgetError",
    "Mnemonic",
    "NoCandidateError",
    "NotElfError",
    "OutOfRangeError",
    "Payload",
    "Role",
    "RopforgeError",
    "SCANF_BAD_BYTES",
    "Section",
    "SimConfig",
    "StackLayout",
    "StubTable",
    "Symbol",
    "SymbolNotFoundError",
    "Termination",
    "TerminationKind",
    "TruncatedError",
    "UnsatisfiableArityError",
    "check_bad_bytes",
    "classify",
    "cyclic_pattern",
    "decode_one",
    "decode_window",
    "emit_payload",
    "enumerate_gadgets",
    "find_pop_ret",
    "find_terminators",
    "free_branch_kind",
    "load_image",
    "lookup_symbol",
    "pattern_offset",
    "plan_chain",
    "read_virtual",
    "simulate",
    "stack_frame_displacement",
    "step",
    "unpack_words",
]
