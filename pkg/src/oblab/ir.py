"""Loop-free bitstring bytecode and its deterministic interpreter.

Every program in this lab — plain or obfuscated — is a straight-line
sequence of register instructions over fixed-width bitstrings.  There are
no jumps: conditionals are value selects (ITE) and the only iteration
primitive is DFARUN, which consumes its input bit-by-bit for exactly
``width`` steps.  Totality and a linear step bound therefore hold by
construction, and handing an attacker "the executable" means handing it
the canonical serialization produced here.

Conventions, fixed once for the whole lab:

* Bitstrings read big-endian: bit 0 is the leftmost / most significant
  bit, and integer conversion is the unsigned big-endian reading.
* Register 0 holds the program input; all other registers are write-once.
* The last instruction is the single OUTPUT.
* HASH is SHA-256 over (tag byte || operand encoding), truncated to the
  leftmost ``out_width`` bits.  The same helper (`hash_bits`) is used by
  obfuscators at build time so embedded digests match runtime exactly.
* TRUNC keeps the leftmost bits; PROJECT keeps the bits selected by a
  mask, in order.

Instruction set (dst is always a fresh register):

    CONST   dst <- consts[a]
    EQ      dst <- 1 if reg[a] == reg[b] else 0          (width 1)
    XOR/AND/OR  dst <- reg[a] op reg[b]                  (equal widths)
    NOT     dst <- bitwise complement of reg[a]
    LT      dst <- 1 if reg[a] < reg[b] unsigned         (width 1)
    PROJECT dst <- bits of reg[a] where mask bit is 1
    CONCAT  dst <- reg[a] || reg[b]
    TRUNC   dst <- leftmost `width` bits of reg[a]
    HASH    dst <- SHA-256(tag || reg[a]) truncated to `width` bits
    ITE     dst <- reg[b] if reg[a] == 1 else reg[c]
    DFARUN  dst <- 1 if the embedded automaton accepts reg[a]'s bits
    OUTPUT  return reg[a]
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .errors import MalformedProgram, ParseError, WidthMismatch

MAGIC = b"OBF1"
MAX_WIDTH = 4096
HASH_MAX_WIDTH = 256


@dataclass(frozen=True)
class BitStr:
    """Fixed-width bit string; `value` is the unsigned big-endian reading."""

    value: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"BitStr width must be >= 1, got {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise ValueError(f"value {self.value} out of range for width {self.width}")

    @classmethod
    def zeros(cls, width: int) -> "BitStr":
        return cls(0, width)

    @classmethod
    def from_bits(cls, bits: str) -> "BitStr":
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        return cls(int(bits, 2), len(bits))

    def bits(self) -> str:
        return format(self.value, f"0{self.width}b")

    def bit(self, i: int) -> int:
        """Bit at position i, counting from the left (MSB first)."""
        if not 0 <= i < self.width:
            raise IndexError(i)
        return (self.value >> (self.width - 1 - i)) & 1

    def payload(self) -> bytes:
        """Big-endian bytes, left-padded with zero bits to a byte boundary."""
        return self.value.to_bytes((self.width + 7) // 8, "big")

    @classmethod
    def from_payload(cls, width: int, data: bytes) -> "BitStr":
        return cls(int.from_bytes(data, "big"), width)

    def encode(self) -> bytes:
        """Canonical self-describing form: width as u16 BE, then payload."""
        return struct.pack(">H", self.width) + self.payload()

    @classmethod
    def decode(cls, data: bytes) -> "BitStr":
        v, rest = cls.decode_from(data, 0)
        if rest != len(data):
            raise ParseError("trailing bytes after bitstring", rest)
        return v

    @classmethod
    def decode_from(cls, data: bytes, offset: int) -> tuple["BitStr", int]:
        if offset + 2 > len(data):
            raise ParseError("truncated bitstring header", offset)
        width = struct.unpack_from(">H", data, offset)[0]
        offset += 2
        nbytes = (width + 7) // 8
        if offset + nbytes > len(data):
            raise ParseError("truncated bitstring payload", offset)
        try:
            v = cls(int.from_bytes(data[offset : offset + nbytes], "big"), width)
        except ValueError as exc:
            raise ParseError(str(exc), offset) from exc
        return v, offset + nbytes

    # --- operations used by the interpreter and by program constructors ---

    def _require_same_width(self, other: "BitStr") -> None:
        if self.width != other.width:
            raise WidthMismatch(f"{self.width} vs {other.width}")

    def xor(self, other: "BitStr") -> "BitStr":
        self._require_same_width(other)
        return BitStr(self.value ^ other.value, self.width)

    def and_(self, other: "BitStr") -> "BitStr":
        self._require_same_width(other)
        return BitStr(self.value & other.value, self.width)

    def or_(self, other: "BitStr") -> "BitStr":
        self._require_same_width(other)
        return BitStr(self.value | other.value, self.width)

    def invert(self) -> "BitStr":
        return BitStr(self.value ^ ((1 << self.width) - 1), self.width)

    def concat(self, other: "BitStr") -> "BitStr":
        return BitStr((self.value << other.width) | other.value, self.width + other.width)

    def trunc(self, width: int) -> "BitStr":
        if not 1 <= width <= self.width:
            raise WidthMismatch(f"cannot truncate width {self.width} to {width}")
        return BitStr(self.value >> (self.width - width), width)

    def project(self, mask: "BitStr") -> "BitStr":
        self._require_same_width(mask)
        out = 0
        out_width = 0
        for i in range(self.width):
            if mask.bit(i):
                out = (out << 1) | self.bit(i)
                out_width += 1
        if out_width == 0:
            raise WidthMismatch("projection mask selects no bits")
        return BitStr(out, out_width)

    def __int__(self) -> int:
        return self.value


def hash_bits(tag: int, v: BitStr, out_width: int) -> BitStr:
    """SHA-256 of (tag byte || canonical bitstring encoding), leftmost bits.

    This is the one hash used everywhere: by the HASH instruction at run
    time, by obfuscators when they bake digests into constants, and by the
    seed-derivation helper in the game harness.
    """
    if not 0 <= tag <= 255:
        raise ValueError(f"tag must fit one byte, got {tag}")
    if not 1 <= out_width <= HASH_MAX_WIDTH:
        raise WidthMismatch(f"hash output width {out_width} not in [1, {HASH_MAX_WIDTH}]")
    digest = hashlib.sha256(bytes([tag]) + v.encode()).digest()
    full = int.from_bytes(digest, "big")
    return BitStr(full >> (256 - out_width), out_width)


class Opcode(IntEnum):
    CONST = 1
    EQ = 2
    XOR = 3
    AND = 4
    OR = 5
    NOT = 6
    LT = 7
    PROJECT = 8
    CONCAT = 9
    TRUNC = 10
    HASH = 11
    ITE = 12
    DFARUN = 13
    OUTPUT = 14


@dataclass(frozen=True)
class DfaTables:
    """Transition tables embedded in a DFARUN instruction.

    States are 1-based.  `m0[i-1]` / `m1[i-1]` give the next state from
    state i on symbol 0 / 1.  Unlike the generator convention (start 1,
    accept n), embedded machines carry explicit start/accept so relabeled
    machines stay expressible.
    """

    n_states: int
    start: int
    accept: int
    m0: tuple[int, ...]
    m1: tuple[int, ...]


@dataclass(frozen=True)
class Instr:
    """One instruction.  Field meaning depends on the opcode:

    dst: destination register (unused for OUTPUT)
    a:   first operand register; const-pool index for CONST; source for OUTPUT
    b:   second operand register; `then` register for ITE
    c:   `else` register for ITE
    width: output width for TRUNC/HASH
    tag:   domain-separation byte for HASH
    mask:  projection mask for PROJECT
    tables: automaton tables for DFARUN
    """

    opcode: Opcode
    dst: int = 0
    a: int = 0
    b: int = 0
    c: int = 0
    width: int = 0
    tag: int = 0
    mask: Optional[BitStr] = None
    tables: Optional[DfaTables] = None


@dataclass(frozen=True)
class Program:
    input_width: int
    output_width: int
    consts: tuple[BitStr, ...]
    instrs: tuple[Instr, ...]
    class_tag: str = ""


_BINARY_SAME_WIDTH = (Opcode.XOR, Opcode.AND, Opcode.OR)


def validate(p: Program) -> Optional[str]:
    """Return None if the program is well-formed, else the name of the
    first violated invariant."""
    if p.input_width < 1 or p.output_width < 1:
        return "bad-width"
    if p.input_width > MAX_WIDTH or p.output_width > MAX_WIDTH:
        return "bad-width"
    if not p.instrs:
        return "empty-program"
    for c in p.consts:
        if c.width > MAX_WIDTH:
            return "bad-width"

    widths: dict[int, int] = {0: p.input_width}
    seen_output = False

    for idx, ins in enumerate(p.instrs):
        if seen_output:
            return "multiple-output" if ins.opcode == Opcode.OUTPUT else "output-not-last"

        if ins.opcode == Opcode.OUTPUT:
            if ins.a not in widths:
                return "use-before-def"
            if widths[ins.a] != p.output_width:
                return "output-width-mismatch"
            seen_output = True
            continue

        if ins.dst == 0 or ins.dst in widths:
            return "register-rewrite"

        def _read(reg: int) -> Optional[int]:
            return widths.get(reg)

        if ins.opcode == Opcode.CONST:
            if not 0 <= ins.a < len(p.consts):
                return "bad-const-index"
            widths[ins.dst] = p.consts[ins.a].width
        elif ins.opcode in (Opcode.EQ, Opcode.LT):
            wa, wb = _read(ins.a), _read(ins.b)
            if wa is None or wb is None:
                return "use-before-def"
            if wa != wb:
                return "width-mismatch"
            widths[ins.dst] = 1
        elif ins.opcode in _BINARY_SAME_WIDTH:
            wa, wb = _read(ins.a), _read(ins.b)
            if wa is None or wb is None:
                return "use-before-def"
            if wa != wb:
                return "width-mismatch"
            widths[ins.dst] = wa
        elif ins.opcode == Opcode.NOT:
            wa = _read(ins.a)
            if wa is None:
                return "use-before-def"
            widths[ins.dst] = wa
        elif ins.opcode == Opcode.PROJECT:
            wa = _read(ins.a)
            if wa is None:
                return "use-before-def"
            if ins.mask is None or ins.mask.width != wa:
                return "bad-mask"
            kept = bin(ins.mask.value).count("1")
            if kept == 0:
                return "bad-mask"
            widths[ins.dst] = kept
        elif ins.opcode == Opcode.CONCAT:
            wa, wb = _read(ins.a), _read(ins.b)
            if wa is None or wb is None:
                return "use-before-def"
            if wa + wb > MAX_WIDTH:
                return "bad-width"
            widths[ins.dst] = wa + wb
        elif ins.opcode == Opcode.TRUNC:
            wa = _read(ins.a)
            if wa is None:
                return "use-before-def"
            if not 1 <= ins.width <= wa:
                return "width-mismatch"
            widths[ins.dst] = ins.width
        elif ins.opcode == Opcode.HASH:
            wa = _read(ins.a)
            if wa is None:
                return "use-before-def"
            if not 0 <= ins.tag <= 255:
                return "bad-tag"
            if not 1 <= ins.width <= HASH_MAX_WIDTH:
                return "width-mismatch"
            widths[ins.dst] = ins.width
        elif ins.opcode == Opcode.ITE:
            wc, wt, we = _read(ins.a), _read(ins.b), _read(ins.c)
            if wc is None or wt is None or we is None:
                return "use-before-def"
            if wc != 1 or wt != we:
                return "width-mismatch"
            widths[ins.dst] = wt
        elif ins.opcode == Opcode.DFARUN:
            wa = _read(ins.a)
            if wa is None:
                return "use-before-def"
            t = ins.tables
            if t is None:
                return "bad-table"
            if t.n_states < 1 or len(t.m0) != t.n_states or len(t.m1) != t.n_states:
                return "bad-table"
            if not (1 <= t.start <= t.n_states and 1 <= t.accept <= t.n_states):
                return "bad-table"
            for e in t.m0 + t.m1:
                if not 1 <= e <= t.n_states:
                    return "bad-table-entry"
            widths[ins.dst] = 1
        else:
            return "bad-opcode"

    if not seen_output:
        return "missing-output"
    return None


def ensure_valid(p: Program) -> None:
    violation = validate(p)
    if violation is not None:
        raise MalformedProgram(violation)


def run(p: Program, x: BitStr) -> tuple[BitStr, int]:
    """Interpret `p` on `x`; returns (output, interpreter steps).

    Each instruction costs one step except DFARUN, which costs the width
    of its input operand.  Evaluation state is purely local, so programs
    are safe to share across concurrent runs.
    """
    ensure_valid(p)
    if x.width != p.input_width:
        raise WidthMismatch(f"input width {x.width}, program expects {p.input_width}")

    regs: dict[int, BitStr] = {0: x}
    steps = 0
    for ins in p.instrs:
        op = ins.opcode
        if op == Opcode.OUTPUT:
            steps += 1
            return regs[ins.a], steps
        if op == Opcode.CONST:
            val = p.consts[ins.a]
        elif op == Opcode.EQ:
            val = BitStr(1 if regs[ins.a].value == regs[ins.b].value else 0, 1)
        elif op == Opcode.XOR:
            val = regs[ins.a].xor(regs[ins.b])
        elif op == Opcode.AND:
            val = regs[ins.a].and_(regs[ins.b])
        elif op == Opcode.OR:
            val = regs[ins.a].or_(regs[ins.b])
        elif op == Opcode.NOT:
            val = regs[ins.a].invert()
        elif op == Opcode.LT:
            val = BitStr(1 if regs[ins.a].value < regs[ins.b].value else 0, 1)
        elif op == Opcode.PROJECT:
            val = regs[ins.a].project(ins.mask)
        elif op == Opcode.CONCAT:
            val = regs[ins.a].concat(regs[ins.b])
        elif op == Opcode.TRUNC:
            val = regs[ins.a].trunc(ins.width)
        elif op == Opcode.HASH:
            val = hash_bits(ins.tag, regs[ins.a], ins.width)
        elif op == Opcode.ITE:
            val = regs[ins.b] if regs[ins.a].value == 1 else regs[ins.c]
        else:  # DFARUN; validate() rejects anything else
            arg = regs[ins.a]
            t = ins.tables
            state = t.start
            for i in range(arg.width):
                state = (t.m1 if arg.bit(i) else t.m0)[state - 1]
            val = BitStr(1 if state == t.accept else 0, 1)
            steps += arg.width - 1
        regs[ins.dst] = val
        steps += 1
    raise MalformedProgram("missing-output")  # unreachable after ensure_valid


def execute(p: Program, x: BitStr) -> BitStr:
    return run(p, x)[0]


def static_steps(p: Program) -> int:
    """Interpreter steps for any input: straight-line code makes this a
    property of the program alone."""
    total = 0
    widths: dict[int, int] = {0: p.input_width}
    for ins in p.instrs:
        if ins.opcode == Opcode.DFARUN:
            total += widths[ins.a]
        else:
            total += 1
        if ins.opcode == Opcode.CONST:
            widths[ins.dst] = p.consts[ins.a].width
        elif ins.opcode == Opcode.PROJECT:
            widths[ins.dst] = bin(ins.mask.value).count("1")
        elif ins.opcode == Opcode.CONCAT:
            widths[ins.dst] = widths[ins.a] + widths[ins.b]
        elif ins.opcode in (Opcode.TRUNC, Opcode.HASH):
            widths[ins.dst] = ins.width
        elif ins.opcode in (Opcode.EQ, Opcode.LT, Opcode.DFARUN):
            widths[ins.dst] = 1
        elif ins.opcode == Opcode.ITE:
            widths[ins.dst] = widths[ins.b]
        elif ins.opcode != Opcode.OUTPUT:
            widths[ins.dst] = widths[ins.a]
    return total


def size(p: Program) -> int:
    """Program size: instruction count plus all constant bits.

    Constant bits include the pooled constants and the value-carrying
    immediates (projection masks; automaton tables at their 16-bit wire
    width), so padding a machine with extra states grows the measure.
    """
    total = len(p.instrs)
    total += sum(c.width for c in p.consts)
    for ins in p.instrs:
        if ins.opcode == Opcode.PROJECT:
            total += ins.mask.width
        elif ins.opcode == Opcode.DFARUN:
            total += 2 * ins.tables.n_states * 16
    return total


# --- canonical wire format -------------------------------------------------
#
# magic "OBF1"
# input_width u16 | output_width u16
# class_tag: u16 length + UTF-8 bytes
# const pool: u16 count, then per constant u16 width + padded payload
# instructions: u16 count, then per instruction: u8 opcode + fixed fields
#
# Every field is a pure function of program structure, so structurally
# equal programs serialize to identical bytes.


def _enc_u16(n: int) -> bytes:
    return struct.pack(">H", n)


def serialize(p: Program) -> bytes:
    ensure_valid(p)
    out = bytearray(MAGIC)
    out += _enc_u16(p.input_width)
    out += _enc_u16(p.output_width)
    tag_bytes = p.class_tag.encode("utf-8")
    if len(tag_bytes) > 0xFFFF:
        raise MalformedProgram("class-tag-too-long")
    out += _enc_u16(len(tag_bytes)) + tag_bytes
    out += _enc_u16(len(p.consts))
    for c in p.consts:
        out += c.encode()
    out += _enc_u16(len(p.instrs))
    for ins in p.instrs:
        out.append(ins.opcode)
        op = ins.opcode
        if op == Opcode.OUTPUT:
            out += _enc_u16(ins.a)
        elif op == Opcode.CONST:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a)
        elif op in (Opcode.EQ, Opcode.XOR, Opcode.AND, Opcode.OR, Opcode.LT, Opcode.CONCAT):
            out += _enc_u16(ins.dst) + _enc_u16(ins.a) + _enc_u16(ins.b)
        elif op == Opcode.NOT:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a)
        elif op == Opcode.PROJECT:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a) + ins.mask.encode()
        elif op == Opcode.TRUNC:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a) + _enc_u16(ins.width)
        elif op == Opcode.HASH:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a) + bytes([ins.tag]) + _enc_u16(ins.width)
        elif op == Opcode.ITE:
            out += _enc_u16(ins.dst) + _enc_u16(ins.a) + _enc_u16(ins.b) + _enc_u16(ins.c)
        elif op == Opcode.DFARUN:
            t = ins.tables
            out += _enc_u16(ins.dst) + _enc_u16(ins.a)
            out += _enc_u16(t.n_states) + _enc_u16(t.start) + _enc_u16(t.accept)
            for e in t.m0:
                out += _enc_u16(e)
            for e in t.m1:
                out += _enc_u16(e)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def u8(self) -> int:
        if self.offset + 1 > len(self.data):
            raise ParseError("truncated byte", self.offset)
        v = self.data[self.offset]
        self.offset += 1
        return v

    def u16(self) -> int:
        if self.offset + 2 > len(self.data):
            raise ParseError("truncated u16", self.offset)
        v = struct.unpack_from(">H", self.data, self.offset)[0]
        self.offset += 2
        return v

    def raw(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ParseError("truncated bytes", self.offset)
        v = self.data[self.offset : self.offset + n]
        self.offset += n
        return v

    def bitstr(self) -> BitStr:
        v, self.offset = BitStr.decode_from(self.data, self.offset)
        return v


def deserialize(data: bytes) -> Program:
    r = _Reader(data)
    if r.raw(4) != MAGIC:
        raise ParseError("bad magic", 0)
    input_width = r.u16()
    output_width = r.u16()
    tag_len = r.u16()
    class_tag = r.raw(tag_len).decode("utf-8")
    n_consts = r.u16()
    consts = tuple(r.bitstr() for _ in range(n_consts))
    n_instrs = r.u16()
    instrs = []
    for _ in range(n_instrs):
        at = r.offset
        code = r.u8()
        try:
            op = Opcode(code)
        except ValueError:
            raise ParseError(f"unknown opcode {code}", at) from None
        if op == Opcode.OUTPUT:
            instrs.append(Instr(op, a=r.u16()))
        elif op == Opcode.CONST:
            instrs.append(Instr(op, dst=r.u16(), a=r.u16()))
        elif op in (Opcode.EQ, Opcode.XOR, Opcode.AND, Opcode.OR, Opcode.LT, Opcode.CONCAT):
            instrs.append(Instr(op, dst=r.u16(), a=r.u16(), b=r.u16()))
        elif op == Opcode.NOT:
            instrs.append(Instr(op, dst=r.u16(), a=r.u16()))
        elif op == Opcode.PROJECT:
            instrs.append(Instr(op, dst=r.u16(), a=r.u16(), mask=r.bitstr()))
        elif op == Opcode.TRUNC:
            instrs.append(Instr(op, dst=r.u16(), a=r.u16(), width=r.u16()))
        elif op == Opcode.HASH:
            dst, a = r.u16(), r.u16()
            tag = r.u8()
            instrs.append(Instr(op, dst=dst, a=a, tag=tag, width=r.u16()))
        elif op == Opcode.ITE:
            instrs.append(Instr(op, dst=r.u16(), a=r.u16(), b=r.u16(), c=r.u16()))
        else:  # DFARUN
            dst, a = r.u16(), r.u16()
            n_states, start, accept = r.u16(), r.u16(), r.u16()
            m0 = tuple(r.u16() for _ in range(n_states))
            m1 = tuple(r.u16() for _ in range(n_states))
            instrs.append(
                Instr(op, dst=dst, a=a, tables=DfaTables(n_states, start, accept, m0, m1))
            )
    if r.offset != len(data):
        raise ParseError("trailing bytes", r.offset)
    try:
        return Program(input_width, output_width, consts, tuple(instrs), class_tag)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


# --- JSON mirror (human inspection; the binary form is authoritative) -------


def to_json(p: Program) -> str:
    instrs = []
    for ins in p.instrs:
        d: dict = {"op": ins.opcode.name}
        if ins.opcode != Opcode.OUTPUT:
            d["dst"] = ins.dst
        d["a"] = ins.a
        if ins.opcode in (Opcode.EQ, Opcode.XOR, Opcode.AND, Opcode.OR, Opcode.LT,
                          Opcode.CONCAT, Opcode.ITE):
            d["b"] = ins.b
        if ins.opcode == Opcode.ITE:
            d["c"] = ins.c
        if ins.opcode in (Opcode.TRUNC, Opcode.HASH):
            d["width"] = ins.width
        if ins.opcode == Opcode.HASH:
            d["tag"] = ins.tag
        if ins.opcode == Opcode.PROJECT:
            d["mask"] = {"width": ins.mask.width, "hex": ins.mask.payload().hex()}
        if ins.opcode == Opcode.DFARUN:
            t = ins.tables
            d["tables"] = {
                "n": t.n_states,
                "start": t.start,
                "accept": t.accept,
                "m0": list(t.m0),
                "m1": list(t.m1),
            }
        instrs.append(d)
    doc = {
        "input_width": p.input_width,
        "output_width": p.output_width,
        "class_tag": p.class_tag,
        "consts": [{"width": c.width, "hex": c.payload().hex()} for c in p.consts],
        "instrs": instrs,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def from_json(text: str) -> Program:
    try:
        doc = json.loads(text)
        consts = tuple(
            BitStr.from_payload(c["width"], bytes.fromhex(c["hex"])) for c in doc["consts"]
        )
        instrs = []
        for d in doc["instrs"]:
            op = Opcode[d["op"]]
            kwargs: dict = {"a": d["a"]}
            if op != Opcode.OUTPUT:
                kwargs["dst"] = d["dst"]
            if "b" in d:
                kwargs["b"] = d["b"]
            if "c" in d:
                kwargs["c"] = d["c"]
            if "width" in d:
                kwargs["width"] = d["width"]
            if "tag" in d:
                kwargs["tag"] = d["tag"]
            if "mask" in d:
                kwargs["mask"] = BitStr.from_payload(
                    d["mask"]["width"], bytes.fromhex(d["mask"]["hex"])
                )
            if "tables" in d:
                t = d["tables"]
                kwargs["tables"] = DfaTables(
                    t["n"], t["start"], t["accept"], tuple(t["m0"]), tuple(t["m1"])
                )
            instrs.append(Instr(op, **kwargs))
        return Program(
            doc["input_width"],
            doc["output_width"],
            consts,
            tuple(instrs),
            doc.get("class_tag", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad program JSON: {exc}") from exc


class ProgramBuilder:
    """Append-style construction with automatic register allocation.

    Methods return the destination register of the emitted instruction;
    `output()` finalizes, validates, and returns the Program.
    """

    def __init__(self, input_width: int, class_tag: str = ""):
        self.input_width = input_width
        self.class_tag = class_tag
        self._consts: list[BitStr] = []
        self._instrs: list[Instr] = []
        self._widths: dict[int, int] = {0: input_width}
        self._next_reg = 1

    def _emit(self, ins: Instr, width: int) -> int:
        self._instrs.append(ins)
        self._widths[ins.dst] = width
        return ins.dst

    def _alloc(self) -> int:
        reg = self._next_reg
        self._next_reg += 1
        return reg

    def width_of(self, reg: int) -> int:
        return self._widths[reg]

    def const(self, value: BitStr) -> int:
        self._consts.append(value)
        return self._emit(
            Instr(Opcode.CONST, dst=self._alloc(), a=len(self._consts) - 1), value.width
        )

    def eq(self, a: int, b: int) -> int:
        return self._emit(Instr(Opcode.EQ, dst=self._alloc(), a=a, b=b), 1)

    def lt(self, a: int, b: int) -> int:
        return self._emit(Instr(Opcode.LT, dst=self._alloc(), a=a, b=b), 1)

    def xor(self, a: int, b: int) -> int:
        return self._emit(Instr(Opcode.XOR, dst=self._alloc(), a=a, b=b), self._widths[a])

    def and_(self, a: int, b: int) -> int:
        return self._emit(Instr(Opcode.AND, dst=self._alloc(), a=a, b=b), self._widths[a])

    def or_(self, a: int, b: int) -> int:
        return self._emit(Instr(Opcode.OR, dst=self._alloc(), a=a, b=b), self._widths[a])

    def not_(self, a: int) -> int:
        return self._emit(Instr(Opcode.NOT, dst=self._alloc(), a=a), self._widths[a])

    def project(self, a: int, mask: BitStr) -> int:
        kept = bin(mask.value).count("1")
        return self._emit(Instr(Opcode.PROJECT, dst=self._alloc(), a=a, mask=mask), kept)

    def concat(self, a: int, b: int) -> int:
        return self._emit(
            Instr(Opcode.CONCAT, dst=self._alloc(), a=a, b=b),
            self._widths[a] + self._widths[b],
        )

    def trunc(self, a: int, width: int) -> int:
        return self._emit(Instr(Opcode.TRUNC, dst=self._alloc(), a=a, width=width), width)

    def hash(self, a: int, tag: int, out_width: int) -> int:
        return self._emit(
            Instr(Opcode.HASH, dst=self._alloc(), a=a, tag=tag, width=out_width), out_width
        )

    def ite(self, cond: int, then: int, els: int) -> int:
        return self._emit(
            Instr(Opcode.ITE, dst=self._alloc(), a=cond, b=then, c=els), self._widths[then]
        )

    def dfarun(self, a: int, tables: DfaTables) -> int:
        return self._emit(Instr(Opcode.DFARUN, dst=self._alloc(), a=a, tables=tables), 1)

    def output(self, reg: int) -> Program:
        instrs = tuple(self._instrs) + (Instr(Opcode.OUTPUT, a=reg),)
        p = Program(
            self.input_width, self._widths[reg], tuple(self._consts), instrs, self.class_tag
        )
        ensure_valid(p)
        return p
