"""Evasive predicate classes beyond plain point functions.

Two classes live here: wildcard patterns (accepting sets of size 2^w,
verified publicly by running the program) and compute-and-compare programs
(hidden trigger -> hidden payload, everything else -> bottom).  The module
also carries the classic learnability counterexample: a threshold check
`x < C` looks secret-bearing but falls to binary search over the oracle,
so no obfuscator can protect it.
"""

from __future__ import annotations

import itertools
import random
from typing import Callable, Optional

from .errors import (
    EvasivenessViolated,
    NotMonotone,
    SchemaError,
    UnsupportedParameter,
    WidthMismatch,
)
from .formalism import Attacker, Budget, Instance, ObfuscatedView
from .ir import BitStr, Program, ProgramBuilder, execute, hash_bits

TAG_PATTERN = 0x02
TAG_CC_TRIGGER = 0x03
TAG_CC_PAYLOAD = 0x04

WILDCARD = "*"

# Digest widths are padded beyond n where nothing pins them, so truncated-hash
# collisions are absent even in exhaustive small-n checks.
DIGEST_PAD = 16


# --- wildcard patterns -------------------------------------------------------


def parse_pattern(aux: bytes) -> str:
    try:
        pattern = aux.decode("ascii")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"pattern aux is not ASCII: {exc}") from exc
    if not pattern or set(pattern) - {"0", "1", WILDCARD}:
        raise SchemaError(f"bad pattern {pattern!r}")
    return pattern


def pattern_mask(pattern: str) -> BitStr:
    """Mask with 1 at every fixed (non-wildcard) position."""
    return BitStr.from_bits("".join("0" if ch == WILDCARD else "1" for ch in pattern))


def pattern_fixed_bits(pattern: str) -> BitStr:
    fixed = "".join(ch for ch in pattern if ch != WILDCARD)
    return BitStr.from_bits(fixed)


def plain_pattern_program(pattern: str) -> Program:
    b = ProgramBuilder(len(pattern), class_tag="pattern")
    projected = b.project(0, pattern_mask(pattern))
    fixed = b.const(pattern_fixed_bits(pattern))
    return b.output(b.eq(projected, fixed))


def gen_pattern(n: int, w: int, seed: int) -> Instance:
    """Uniform wildcard positions, uniform fixed bits.

    The margin 2w <= n keeps the acceptance density at most 2^(-n/2);
    generators outside it are refused rather than silently non-evasive.
    """
    if n < 1 or n > 256 or w < 1:
        raise UnsupportedParameter(f"need 1 <= w and 1 <= n <= 256, got n={n}, w={w}")
    if 2 * w > n:
        raise EvasivenessViolated(f"wildcard count {w} exceeds n/2 = {n / 2:g}")
    rng = random.Random(seed)
    wild = set(rng.sample(range(n), w))
    pattern = "".join(WILDCARD if i in wild else str(rng.getrandbits(1)) for i in range(n))
    return Instance(plain_pattern_program(pattern), aux=pattern.encode("ascii"))


def pattern_accepting_inputs(inst: Instance, limit: int) -> list[BitStr]:
    pattern = parse_pattern(inst.aux)
    wild_positions = [i for i, ch in enumerate(pattern) if ch == WILDCARD]
    out = []
    for fill in itertools.product("01", repeat=len(wild_positions)):
        chars = list(pattern)
        for pos, bit in zip(wild_positions, fill):
            chars[pos] = bit
        out.append(BitStr.from_bits("".join(chars)))
        if len(out) >= limit:
            break
    return out


def verify_input_hiding(inst: Instance, cand: BitStr) -> bool:
    """Accept iff the instance program accepts the candidate.

    Public verification: only the program runs, aux is never consulted.
    """
    if cand.width != inst.program.input_width:
        raise WidthMismatch(
            f"candidate width {cand.width}, program expects {inst.program.input_width}"
        )
    return execute(inst.program, cand).value == 1


def obf_pattern_hash(inst: Instance, seed: int) -> Program:
    """Hash the fixed bits behind a salt; the wildcard mask stays readable.

    The protected asset is an accepting input, not the mask: hiding which
    positions are checked would need a different construction entirely, so
    the mask leak is deliberate and documented.
    """
    pattern = parse_pattern(inst.aux)
    mask = pattern_mask(pattern)
    fixed = pattern_fixed_bits(pattern)
    m = fixed.width
    rng = random.Random(seed)
    salt = BitStr(rng.getrandbits(m), m)
    out_width = min(m + DIGEST_PAD, 256)
    digest = hash_bits(TAG_PATTERN, salt.concat(fixed), out_width)
    b = ProgramBuilder(len(pattern), class_tag="pattern/hash")
    projected = b.project(0, mask)
    r_salt = b.const(salt)
    joined = b.concat(r_salt, projected)
    hashed = b.hash(joined, TAG_PATTERN, out_width)
    r_digest = b.const(digest)
    return b.output(b.eq(hashed, r_digest))


# --- compute-and-compare -----------------------------------------------------


def parse_cc_aux(aux: bytes) -> tuple[BitStr, BitStr]:
    trigger, offset = BitStr.decode_from(aux, 0)
    payload, end = BitStr.decode_from(aux, offset)
    if end != len(aux):
        raise SchemaError("trailing bytes in compute-and-compare aux")
    return trigger, payload


def cc_reject(n: int) -> BitStr:
    """The bottom output: flag bit 0, payload bits all zero."""
    return BitStr.zeros(n + 1)


def cc_accept(payload: BitStr) -> BitStr:
    return BitStr(1, 1).concat(payload)


def plain_cc_program(trigger: BitStr, payload: BitStr) -> Program:
    n = trigger.width
    b = ProgramBuilder(n, class_tag="cc")
    r_trigger = b.const(trigger)
    hit = b.eq(0, r_trigger)
    r_payload = b.const(payload)
    r_zero = b.const(BitStr.zeros(n))
    selected = b.ite(hit, r_payload, r_zero)
    return b.output(b.concat(hit, selected))


def gen_cc(n: int, seed: int) -> Instance:
    if not 1 <= n <= 255:
        raise UnsupportedParameter("compute-and-compare supports 1 <= n <= 255")
    rng = random.Random(seed)
    trigger = BitStr(rng.getrandbits(n), n)
    payload = BitStr(rng.getrandbits(n), n)
    return Instance(plain_cc_program(trigger, payload), aux=trigger.encode() + payload.encode())


def obf_cc(inst: Instance, seed: int) -> Program:
    """Gate on a salted trigger digest and unmask the payload on demand.

    Constants are (salt, trigger digest, masked payload): the trigger is
    behind one hash, the payload behind a second, domain-separated one.
    """
    trigger, payload = parse_cc_aux(inst.aux)
    n = trigger.width
    rng = random.Random(seed)
    salt = BitStr(rng.getrandbits(n), n)
    gate_width = min(n + DIGEST_PAD, 256)
    gate = hash_bits(TAG_CC_TRIGGER, salt.concat(trigger), gate_width)
    pad = hash_bits(TAG_CC_PAYLOAD, salt.concat(trigger), n)
    masked = payload.xor(pad)
    b = ProgramBuilder(n, class_tag="cc/hash")
    r_salt = b.const(salt)
    joined = b.concat(r_salt, 0)
    hashed = b.hash(joined, TAG_CC_TRIGGER, gate_width)
    r_gate = b.const(gate)
    hit = b.eq(hashed, r_gate)
    unpad = b.hash(joined, TAG_CC_PAYLOAD, n)
    r_masked = b.const(masked)
    unmasked = b.xor(r_masked, unpad)
    r_zero = b.const(BitStr.zeros(n))
    selected = b.ite(hit, unmasked, r_zero)
    return b.output(b.concat(hit, selected))


def attack_cc_output_reader(view: ObfuscatedView, seed: int, q: int) -> Optional[bytes]:
    """Payload attacker: probe inputs; if the gate ever opens, read the
    payload off the output, otherwise guess."""
    if q < 1:
        raise UnsupportedParameter("query budget must be >= 1")
    p = view.program
    n = p.input_width
    rng = random.Random(seed)
    seen: set[int] = set()
    for _ in range(min(q, 1 << n)):
        x = rng.getrandbits(n)
        while x in seen:
            x = rng.getrandbits(n)
        seen.add(x)
        out = view.run(BitStr(x, n))
        if out.bit(0) == 1:
            return BitStr(out.value & ((1 << (out.width - 1)) - 1), out.width - 1).encode()
    return BitStr(rng.getrandbits(n), n).encode()


def make_cc_output_reader(q: int) -> Attacker:
    return Attacker(
        f"cc-output-reader-q{q}",
        Budget(q, q * 8192 + 8192),
        lambda view, seed: attack_cc_output_reader(view, seed, q),
    )


# --- the learnable counterexample --------------------------------------------


def threshold_program(n: int, limit: int) -> Program:
    """Predicate `x < limit` over n-bit inputs, the textbook example of an
    asset that oracle access alone gives away."""
    if not 0 <= limit < (1 << n):
        raise UnsupportedParameter(f"limit must be in [0, 2^{n})")
    b = ProgramBuilder(n, class_tag="threshold")
    r_limit = b.const(BitStr(limit, n))
    return b.output(b.lt(0, r_limit))


def learn_threshold(oracle: Callable[[int], bool], n: int) -> int:
    """Recover C from a monotone oracle for `x < C` in at most n+1 queries.

    Bisection pins C in n queries; one extra consistency probe lands in
    the middle of the larger implied region.  Any response placing a True
    at or above a known False raises NotMonotone.
    """
    if n < 1:
        raise UnsupportedParameter("n must be >= 1")
    domain = 1 << n
    answers: dict[int, bool] = {}
    true_max = -1
    false_min = domain

    def ask(x: int) -> bool:
        nonlocal true_max, false_min
        if x in answers:
            return answers[x]
        value = bool(oracle(x))
        answers[x] = value
        if value:
            true_max = max(true_max, x)
        else:
            false_min = min(false_min, x)
        if true_max >= false_min:
            raise NotMonotone(
                f"oracle said true at {true_max} but false at {false_min}"
            )
        return value

    lo, hi = 0, domain
    while lo < hi:
        mid = (lo + hi) // 2
        if ask(mid):
            lo = mid + 1
        else:
            hi = mid
    threshold = lo
    if threshold >= 2:
        ask((threshold - 1) // 2)  # implied True; bookkeeping flags a lie
    elif threshold <= domain - 2:
        ask((threshold + domain) // 2)  # implied False
    return threshold
