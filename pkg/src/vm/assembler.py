"""
Assembly front end for the miniature VM.

Grammar (UTF-8, one item per line, `#` starts a comment):

    .file NAME        source file for the following opcodes (default: the
                      name passed to parse_program)
    .func NAME        start a function body
    .line N           source line for the following opcodes (1-based)
    .entry NAME       entry function (default: main)
    OPCODE [operands]

Without a `.line` directive an opcode maps to its own physical line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

from ..core.config import to_micros
from ..core.types import LineId


class AssemblyError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")


class Opcode(str, Enum):
    PUSH = "PUSH"
    POP = "POP"
    ADD = "ADD"
    JMP = "JMP"
    JNZ = "JNZ"
    CALL = "CALL"
    CALL_NATIVE = "CALL_NATIVE"
    ALLOC = "ALLOC"
    FREE = "FREE"
    COPY = "COPY"
    SPAWN = "SPAWN"
    JOIN = "JOIN"
    RET = "RET"
    HALT = "HALT"


# operand kinds per opcode: "int", "nat" (>= 0), "target", "func", "name", "seconds"
OPERANDS: Dict[Opcode, Tuple[str, ...]] = {
    Opcode.PUSH: ("int",),
    Opcode.POP: (),
    Opcode.ADD: (),
    Opcode.JMP: ("target",),
    Opcode.JNZ: ("target",),
    Opcode.CALL: ("func",),
    Opcode.CALL_NATIVE: ("name", "seconds"),
    Opcode.ALLOC: ("nat",),
    Opcode.FREE: (),
    Opcode.COPY: ("nat",),
    Opcode.SPAWN: ("func",),
    Opcode.JOIN: ("nat",),
    Opcode.RET: (),
    Opcode.HALT: (),
}

Operand = Union[int, str]


@dataclass(frozen=True)
class Instr:
    op: Opcode
    args: Tuple[Operand, ...] = ()

    @property
    def duration_us(self) -> int:
        # CALL_NATIVE only: declared duration in virtual microseconds
        return int(self.args[1])


@dataclass
class Program:
    functions: Dict[str, List[Instr]] = field(default_factory=dict)
    line_table: Dict[str, List[LineId]] = field(default_factory=dict)
    entry: str = "main"

    def line_of(self, function: str, index: int) -> LineId:
        lines = self.line_table[function]
        if not lines:
            raise IndexError(f"function {function} has no opcodes")
        return lines[min(max(index, 0), len(lines) - 1)]

    def opcode_count(self) -> int:
        return sum(len(code) for code in self.functions.values())

    def all_lines(self) -> List[LineId]:
        seen: Dict[LineId, None] = {}
        for lines in self.line_table.values():
            for line_id in lines:
                seen.setdefault(line_id, None)
        return list(seen)


class DisasmRow(NamedTuple):
    function: str
    index: int
    name: str
    operand: Optional[str]
    line: LineId


# -----------------------------
# Parsing
# -----------------------------
def _strip_comment(raw: str) -> str:
    pos = raw.find("#")
    return raw if pos < 0 else raw[:pos]


def _tokens(text: str) -> List[Tuple[str, int]]:
    """Whitespace tokens with their 1-based column."""
    out: List[Tuple[str, int]] = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        start = i
        while i < len(text) and not text[i].isspace():
            i += 1
        out.append((text[start:i], start + 1))
    return out


def _convert(kind: str, token: str, lineno: int, column: int) -> Operand:
    if kind in ("func", "name"):
        return token
    if kind == "seconds":
        try:
            seconds = float(token)
        except ValueError:
            raise AssemblyError(f"expected a duration in seconds, got {token!r}", lineno, column)
        if seconds < 0:
            raise AssemblyError("duration must be non-negative", lineno, column)
        return to_micros(seconds)
    try:
        value = int(token)
    except ValueError:
        raise AssemblyError(f"expected an integer, got {token!r}", lineno, column)
    if kind in ("nat", "target") and value < 0:
        raise AssemblyError(f"operand must be non-negative, got {value}", lineno, column)
    return value


def parse_program(source_text: str, source_name: str = "<program>") -> Program:
    program = Program()
    current: Optional[str] = None
    current_file = source_name
    current_line: Optional[int] = None
    entry_pos = (0, 0)
    # (function, index) -> (lineno, column) for operands validated after parsing
    refs: List[Tuple[str, int, str, Operand, int, int]] = []

    for lineno, raw in enumerate(source_text.splitlines(), start=1):
        toks = _tokens(_strip_comment(raw))
        if not toks:
            continue
        head, col = toks[0]

        if head.startswith("."):
            if len(toks) != 2:
                raise AssemblyError(f"directive {head} takes exactly one argument", lineno, col)
            arg, arg_col = toks[1]
            if head == ".func":
                if arg in program.functions:
                    raise AssemblyError(f"duplicate function {arg}", lineno, arg_col)
                program.functions[arg] = []
                program.line_table[arg] = []
                current = arg
                current_line = None
            elif head == ".line":
                try:
                    current_line = int(arg)
                except ValueError:
                    raise AssemblyError(f"expected a line number, got {arg!r}", lineno, arg_col)
                if current_line < 1:
                    raise AssemblyError("line numbers are 1-based", lineno, arg_col)
            elif head == ".file":
                current_file = arg
            elif head == ".entry":
                program.entry = arg
                entry_pos = (lineno, arg_col)
            else:
                raise AssemblyError(f"unknown directive {head}", lineno, col)
            continue

        try:
            op = Opcode(head.upper())
        except ValueError:
            raise AssemblyError(f"unknown opcode {head!r}", lineno, col)
        if current is None:
            raise AssemblyError("opcode outside of a .func block", lineno, col)

        kinds = OPERANDS[op]
        operands = toks[1:]
        if len(operands) != len(kinds):
            raise AssemblyError(
                f"{op.value} expects {len(kinds)} operand(s), got {len(operands)}", lineno, col
            )
        args = tuple(
            _convert(kind, tok, lineno, tcol) for kind, (tok, tcol) in zip(kinds, operands)
        )
        index = len(program.functions[current])
        for kind, value, (_, tcol) in zip(kinds, args, operands):
            if kind in ("target", "func"):
                refs.append((current, index, kind, value, lineno, tcol))

        program.functions[current].append(Instr(op, args))
        program.line_table[current].append(
            LineId(current_file, current_line if current_line is not None else lineno)
        )

    for function, _index, kind, value, lineno, col in refs:
        if kind == "func" and value not in program.functions:
            raise AssemblyError(f"undefined function {value}", lineno, col)
        if kind == "target" and not 0 <= int(value) < len(program.functions[function]):
            raise AssemblyError(
                f"jump target {value} out of range in function {function}", lineno, col
            )

    if program.entry not in program.functions:
        raise AssemblyError(f"undefined function {program.entry}", *entry_pos)
    return program


# -----------------------------
# Listing / rendering
# -----------------------------
def _operand_text(instr: Instr) -> Optional[str]:
    if not instr.args:
        return None
    if instr.op is Opcode.CALL_NATIVE:
        return f"{instr.args[0]} {instr.duration_us / 1_000_000:.6f}"
    return " ".join(str(a) for a in instr.args)


def disassemble(program: Program) -> List[DisasmRow]:
    rows: List[DisasmRow] = []
    for name, code in program.functions.items():
        lines = program.line_table[name]
        for i, instr in enumerate(code):
            rows.append(DisasmRow(name, i, instr.op.value, _operand_text(instr), lines[i]))
    return rows


def render_listing(
    rows: List[DisasmRow],
    entry: str = "main",
    functions: Optional[List[str]] = None,
) -> str:
    """
    Turn disassembly rows back into assembly text. `functions` lists every
    function (in order) so empty bodies survive the round trip.
    """
    order = list(functions) if functions is not None else []
    for row in rows:
        if row.function not in order:
            order.append(row.function)

    out: List[str] = []
    if entry != "main":
        out.append(f".entry {entry}")
    for name in order:
        out.append(f".func {name}")
        current: Optional[LineId] = None
        for row in rows:
            if row.function != name:
                continue
            if current is None or row.line.file != current.file:
                out.append(f".file {row.line.file}")
            if current is None or row.line != current:
                out.append(f".line {row.line.line}")
            current = row.line
            out.append(row.name if row.operand is None else f"{row.name} {row.operand}")
    return "\n".join(out) + "\n"


def render_program(program: Program) -> str:
    return render_listing(disassemble(program), program.entry, list(program.functions))
