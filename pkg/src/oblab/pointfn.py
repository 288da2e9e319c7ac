"""Point functions: the licence/password-check class, one good obfuscator
(salted hash), one deliberately broken one (XOR pad), and their attackers.

The XOR transform is the canonical negative example: both pad and padded
secret sit in the constant pool, so a code reader recovers the secret with
certainty.  The hash transform stores only (salt, digest); finding the
accepted input from those is a hash-inversion problem.
"""

from __future__ import annotations

import math
import random
from typing import Optional

from .errors import TemplateMismatch, UnsupportedParameter
from .formalism import Attacker, Budget, Instance, ObfuscatedView
from .ir import BitStr, Opcode, Program, ProgramBuilder, hash_bits

TAG_POINT = 0x01

MIN_N = 1
MAX_N = 256


def plain_point_program(c: BitStr) -> Program:
    b = ProgramBuilder(c.width, class_tag="pointfn")
    rc = b.const(c)
    return b.output(b.eq(0, rc))


def gen_point(n: int, seed: int) -> Instance:
    """Sample a uniform secret c and emit the plain equality check."""
    if not MIN_N <= n <= MAX_N:
        raise UnsupportedParameter(f"point functions support {MIN_N} <= n <= {MAX_N}")
    rng = random.Random(seed)
    c = BitStr(rng.getrandbits(n), n)
    return Instance(plain_point_program(c), aux=c.encode())


def point_secret(inst: Instance) -> BitStr:
    return BitStr.decode(inst.aux)


def obf_hash_point(inst: Instance, seed: int) -> Program:
    """Replace `x == c` by `H(r || x) == H(r || c)` with a fresh n-bit salt.

    The digest is truncated to n bits, so at toy widths the transformed
    program can accept stray inputs; correctness checking tallies those
    collisions instead of hiding them.
    """
    c = point_secret(inst)
    n = c.width
    rng = random.Random(seed)
    salt = BitStr(rng.getrandbits(n), n)
    digest = hash_bits(TAG_POINT, salt.concat(c), n)
    b = ProgramBuilder(n, class_tag="pointfn/hash")
    r_salt = b.const(salt)
    joined = b.concat(r_salt, 0)
    hashed = b.hash(joined, TAG_POINT, n)
    r_digest = b.const(digest)
    return b.output(b.eq(hashed, r_digest))


def obf_xor_point(inst: Instance, seed: int) -> Program:
    """Replace `x == c` by `(r ^ x) == (r ^ c)`.  Functionally fine,
    cryptographically worthless."""
    c = point_secret(inst)
    n = c.width
    rng = random.Random(seed)
    pad = BitStr(rng.getrandbits(n), n)
    masked = pad.xor(c)
    b = ProgramBuilder(n, class_tag="pointfn/xor")
    r_pad = b.const(pad)
    mixed = b.xor(r_pad, 0)
    r_masked = b.const(masked)
    return b.output(b.eq(mixed, r_masked))


def attack_xor_codereader(view: ObfuscatedView, seed: int) -> Optional[bytes]:
    """Read the two constants feeding the XOR/EQ pair and undo the pad.

    Raises TemplateMismatch when the program does not have that shape
    (e.g. a hash-obfuscated or plain program); the game scores that as a
    failed attack.
    """
    p = view.program
    n = p.input_width
    const_regs: dict[int, BitStr] = {}
    xors: list[tuple[int, int, int]] = []
    eqs: list[tuple[int, int]] = []
    for ins in p.instrs:
        if ins.opcode == Opcode.CONST:
            const_regs[ins.dst] = p.consts[ins.a]
        elif ins.opcode == Opcode.XOR:
            xors.append((ins.dst, ins.a, ins.b))
        elif ins.opcode == Opcode.EQ:
            eqs.append((ins.a, ins.b))

    for dst, a, b in xors:
        operands = {a, b}
        if 0 not in operands:
            continue
        others = operands - {0}
        if not others:
            continue
        pad_reg = others.pop()
        pad = const_regs.get(pad_reg)
        if pad is None or pad.width != n:
            continue
        for ea, eb in eqs:
            other = eb if ea == dst else ea if eb == dst else None
            if other is None:
                continue
            masked = const_regs.get(other)
            if masked is None or masked.width != n:
                continue
            return pad.xor(masked).encode()
    raise TemplateMismatch("no XOR/EQ constant pair over the input register")


def make_xor_codereader() -> Attacker:
    return Attacker("xor-codereader", Budget(0, 0), attack_xor_codereader)


def _distinct_draws(rng: random.Random, width: int, count: int) -> list[int]:
    seen: set[int] = set()
    order: list[int] = []
    while len(order) < count:
        x = rng.getrandbits(width)
        if x in seen:
            continue
        seen.add(x)
        order.append(x)
    return order


def attack_bruteforce(view: ObfuscatedView, seed: int, q: int) -> Optional[bytes]:
    """Query q distinct uniform inputs; return the first accepted one.

    If none is accepted, answer the (q+1)-th distinct draw unqueried, so a
    run with a larger budget extends this run's query sequence exactly and
    measured success is monotone in q.  "Accepted" means any non-zero
    output, which matches every class's reject sentinel.
    """
    if q < 1:
        raise UnsupportedParameter("query budget must be >= 1")
    n = view.program.input_width
    rng = random.Random(seed)
    domain = 1 << n
    queries = min(q, domain)
    order = _distinct_draws(rng, n, min(q + 1, domain))
    for x in order[:queries]:
        if view.run(BitStr(x, n)).value != 0:
            return BitStr(x, n).encode()
    if len(order) > queries:
        return BitStr(order[queries], n).encode()
    return None  # whole domain queried and rejected


def make_bruteforce(q: int) -> Attacker:
    # steps: q executions of a program whose step count is small; the
    # slack factor keeps the budget non-binding for every template here.
    return Attacker(
        f"bruteforce-q{q}",
        Budget(q, q * 8192 + 8192),
        lambda view, seed: attack_bruteforce(view, seed, q),
    )


def make_uniform_guess() -> Attacker:
    def run(view: ObfuscatedView, seed: int) -> Optional[bytes]:
        n = view.program.input_width
        return BitStr(random.Random(seed).getrandbits(n), n).encode()

    return Attacker("uniform-guess", Budget(0, 0), run)


def bruteforce_success_probability(n: int, q: int, accepting: int = 1) -> float:
    """Chance that q distinct uniform queries plus one unqueried fallback
    guess hit one of `accepting` accepting inputs in a 2^n domain."""
    domain = 1 << n
    draws = min(q + 1, domain)
    miss = math.comb(domain - accepting, draws) / math.comb(domain, draws)
    return 1.0 - miss


def estimate_smoothness(n: int, samples: int, seed: int) -> float:
    """Fraction of uniform (salt, target) pairs whose target has a domain
    preimage under the truncated point hash, by exhaustive search.

    A useful hash family for point-function obfuscation should keep this
    fraction at least 1/n; for a random function it approaches
    1 - (1 - 2^-n)^(2^n) ~ 0.632.
    """
    if n > 14:
        raise UnsupportedParameter("exhaustive smoothness estimation needs n <= 14")
    if n < 1:
        raise UnsupportedParameter("n must be >= 1")
    if samples < 1:
        raise UnsupportedParameter("samples must be >= 1")
    rng = random.Random(seed)
    hits = 0
    for _ in range(samples):
        salt = BitStr(rng.getrandbits(n), n)
        target = rng.getrandbits(n)
        for x in range(1 << n):
            if hash_bits(TAG_POINT, salt.concat(BitStr(x, n)), n).value == target:
                hits += 1
                break
    return hits / samples
