"""Security-game kernel: class descriptors, assets, obfuscator and attacker
contracts, and the Monte-Carlo experiment that estimates attacker success.

The objects here are deliberately thin: a program class is its generator
plus metadata, an asset is its verifier, and the game is

    sample instance -> obfuscate -> run attacker on the serialized result
    -> score the returned candidate with the asset verifier.

Attackers never see auxiliary data.  That is enforced structurally: the
only thing that crosses the boundary is an ObfuscatedView, which carries
the serialized obfuscated program and a metered interpreter.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import ir
from .errors import (
    BudgetExceeded,
    ObLabError,
    OverheadExceeded,
    SchemaError,
    UnknownId,
    UnsupportedParameter,
)

WILSON_Z = 1.959963984540054  # two-sided 95%


def derive_seed(seed: int, *parts: int | str | bytes) -> int:
    """Derive an independent 64-bit seed from a parent seed and labels.

    Hash-based so that trial seeds, generator seeds, and obfuscator seeds
    never collide or correlate; every experiment in the lab is a pure
    function of one top-level seed.
    """
    h = hashlib.sha256()
    sb = int(seed).to_bytes(32, "big", signed=False)
    h.update(sb)
    for part in parts:
        if isinstance(part, str):
            data = b"s" + part.encode("utf-8")
        elif isinstance(part, bytes):
            data = b"b" + part
        else:
            data = b"i" + int(part).to_bytes(16, "big", signed=True)
        h.update(len(data).to_bytes(4, "big"))
        h.update(data)
    return int.from_bytes(h.digest()[:8], "big")


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval; sane at rates of 0 and 1, which dominate here."""
    if trials < 1:
        raise UnsupportedParameter("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = p + z2 / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    return max(0.0, (centre - spread) / denom), min(1.0, (centre + spread) / denom)


@dataclass(frozen=True)
class Instance:
    """A sampled program together with its class-specific secret."""

    program: ir.Program
    aux: bytes


@dataclass(frozen=True)
class ClassSpec:
    """Descriptor for one program class: generator plus metadata.

    gen(n, seed) must be deterministic in its arguments and run in time
    polynomial in n.  class_size_log2 documents the (lower bound on the)
    log2 count of distinct programs at each n; tests assert it grows.
    accepting_inputs(inst, limit) lists inputs derivable from aux on which
    the obfuscated program must agree with the original (used by sampled
    correctness checks).
    """

    class_id: str
    gen: Callable[[int, int], Instance]
    min_n: int
    max_n: int
    class_size_log2: Callable[[int], float]
    n_predicate: Optional[Callable[[int], bool]] = None
    accepting_inputs: Optional[Callable[[Instance, int], list[ir.BitStr]]] = None

    def supports(self, n: int) -> bool:
        if not self.min_n <= n <= self.max_n:
            return False
        return self.n_predicate(n) if self.n_predicate else True

    def require(self, n: int) -> None:
        if not self.supports(n):
            raise UnsupportedParameter(
                f"class {self.class_id} does not support n={n} "
                f"(range [{self.min_n}, {self.max_n}])"
            )


@dataclass(frozen=True)
class AssetSpec:
    """One asset of a class: candidate schema plus verifier.

    `parse` turns candidate bytes into a typed value (raising SchemaError),
    `check` decides correctness against an instance.  needs_aux records
    whether verification consults the instance secret (setter-verifiable)
    or only the program (publicly verifiable).  `true_candidate` is the
    setter-side canonical answer, used by challenges and tests.
    """

    asset_id: str
    class_id: str
    candidate_schema: str
    parse: Callable[[bytes], object]
    check: Callable[[Instance, object], bool]
    needs_aux: bool
    true_candidate: Callable[[Instance], bytes]


@dataclass(frozen=True)
class Obfuscator:
    """apply(instance, seed) -> transformed program.

    max_size_ratio / max_step_ratio declare the linear overhead bound the
    transform promises; check_efficiency enforces it on samples.
    """

    obf_id: str
    class_id: str
    apply: Callable[[Instance, int], ir.Program]
    max_size_ratio: float
    max_step_ratio: float


@dataclass(frozen=True)
class Budget:
    max_queries: int
    max_steps: int


class ObfuscatedView:
    """Everything an attacker gets: serialized program bytes plus a metered
    interpreter.  Oracle queries and interpreter steps are accounted here;
    exceeding the budget aborts the attack."""

    def __init__(self, program_bytes: bytes, budget: Budget):
        self._bytes = program_bytes
        self._budget = budget
        self._program: Optional[ir.Program] = None
        self.queries_used = 0
        self.steps_used = 0

    @property
    def bytes(self) -> bytes:
        return self._bytes

    @property
    def program(self) -> ir.Program:
        if self._program is None:
            self._program = ir.deserialize(self._bytes)
        return self._program

    def run(self, x: ir.BitStr) -> ir.BitStr:
        if self.queries_used + 1 > self._budget.max_queries:
            raise BudgetExceeded(f"query budget {self._budget.max_queries} exhausted")
        out, steps = ir.run(self.program, x)
        self.queries_used += 1
        self.steps_used += steps
        if self.steps_used > self._budget.max_steps:
            raise BudgetExceeded(f"step budget {self._budget.max_steps} exhausted")
        return out


@dataclass(frozen=True)
class Attacker:
    """run(view, seed) -> candidate bytes, or None to concede the trial."""

    attacker_id: str
    budget: Budget
    run: Callable[[ObfuscatedView, int], Optional[bytes]]


@dataclass(frozen=True)
class GameRow:
    class_id: str
    obf_id: str
    attacker_id: str
    n: int
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int

    CSV_HEADER = "class_id,obf_id,attacker_id,n,trials,successes,p_hat,ci_low,ci_high,seed"

    def csv_line(self) -> str:
        return (
            f"{self.class_id},{self.obf_id},{self.attacker_id},{self.n},{self.trials},"
            f"{self.successes},{self.p_hat:.8f},{self.ci_low:.8f},{self.ci_high:.8f},"
            f"{self.seed:x}"
        )

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "obf_id": self.obf_id,
            "attacker_id": self.attacker_id,
            "n": self.n,
            "trials": self.trials,
            "successes": self.successes,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "seed": f"{self.seed:x}",
        }


def report_csv(rows: list[GameRow]) -> str:
    return GameRow.CSV_HEADER + "\n" + "".join(r.csv_line() + "\n" for r in rows)


def report_json(rows: list[GameRow]) -> str:
    return json.dumps([r.to_dict() for r in rows], sort_keys=True, indent=2) + "\n"


def parse_report_csv(text: str) -> list[GameRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        rows.append(
            GameRow(
                rec["class_id"],
                rec["obf_id"],
                rec["attacker_id"],
                int(rec["n"]),
                int(rec["trials"]),
                int(rec["successes"]),
                float(rec["p_hat"]),
                float(rec["ci_low"]),
                float(rec["ci_high"]),
                int(rec["seed"], 16),
            )
        )
    return rows


def sample_instance(spec: ClassSpec, n: int, seed: int) -> Instance:
    spec.require(n)
    return spec.gen(n, seed)


def verify_asset(spec: AssetSpec, inst: Instance, cand: bytes) -> bool:
    return spec.check(inst, spec.parse(cand))


def run_security_game(
    class_spec: ClassSpec,
    asset_spec: AssetSpec,
    obf: Obfuscator,
    atk: Attacker,
    n: int,
    trials: int,
    seed: int,
) -> GameRow:
    """One grid point of the experiment whose success frequency estimates
    the attacker's winning probability.

    Per-trial errors from lab components (template mismatch, malformed
    candidate, exhausted budget) count as failed attacks; they never abort
    the batch.  Trials are mutually independent given their derived seeds,
    and the aggregate is order-independent, so the loop could be run
    concurrently without changing the report.
    """
    if trials < 1:
        raise UnsupportedParameter("trials must be >= 1")
    class_spec.require(n)
    successes = 0
    for i in range(trials):
        trial_seed = derive_seed(seed, "trial", n, i)
        try:
            inst = class_spec.gen(n, derive_seed(trial_seed, "gen"))
            obf_program = obf.apply(inst, derive_seed(trial_seed, "obf"))
            view = ObfuscatedView(ir.serialize(obf_program), atk.budget)
            cand = atk.run(view, derive_seed(trial_seed, "atk"))
            if cand is not None and verify_asset(asset_spec, inst, cand):
                successes += 1
        except ObLabError:
            pass
    lo, hi = wilson_interval(successes, trials)
    return GameRow(
        class_spec.class_id,
        obf.obf_id,
        atk.attacker_id,
        n,
        trials,
        successes,
        successes / trials,
        lo,
        hi,
        seed,
    )


@dataclass
class CorrectnessReport:
    passed: bool
    counterexample: Optional[ir.BitStr]
    collision_inputs: list[ir.BitStr]
    inputs_checked: int


def check_correctness(
    class_spec: ClassSpec,
    obf: Obfuscator,
    n: int,
    seed: int,
    mode: str = "exhaustive",
    k: int = 256,
) -> CorrectnessReport:
    """Compare an instance against its obfuscation on inputs.

    Exhaustive mode walks the whole input space (n <= 16 only); sampled
    mode uses k uniform inputs plus every accepting input derivable from
    the instance secret.  A mismatch where the original program rejects
    (all-zero output) but the transformed one accepts is a truncated-hash
    collision: it is tallied separately, not failed, because such inputs
    vanish at cryptographic widths.  Any other mismatch is a genuine
    counterexample and fails the check.
    """
    class_spec.require(n)
    inst = class_spec.gen(n, derive_seed(seed, "correctness-gen"))
    obf_program = obf.apply(inst, derive_seed(seed, "correctness-obf"))
    width = inst.program.input_width

    if mode == "exhaustive":
        if n > 16:
            raise UnsupportedParameter("exhaustive mode supports n <= 16 only")
        inputs = (ir.BitStr(v, width) for v in range(1 << width))
        total = 1 << width
    elif mode == "sampled":
        rng = random.Random(derive_seed(seed, "correctness-sample"))
        picked = [ir.BitStr(rng.getrandbits(width), width) for _ in range(k)]
        if class_spec.accepting_inputs is not None:
            picked.extend(class_spec.accepting_inputs(inst, 64))
        inputs = iter(picked)
        total = len(picked)
    else:
        raise UnsupportedParameter(f"unknown mode {mode!r}")

    reject = ir.BitStr.zeros(inst.program.output_width)
    collisions: list[ir.BitStr] = []
    counterexample = None
    for x in inputs:
        a = ir.execute(inst.program, x)
        b = ir.execute(obf_program, x)
        if a == b:
            continue
        if a == reject:
            collisions.append(x)
        else:
            counterexample = x
            break
    return CorrectnessReport(counterexample is None, counterexample, collisions, total)


@dataclass
class EfficiencyReport:
    max_size_ratio: float
    max_step_ratio: float
    samples: int


def check_efficiency(
    class_spec: ClassSpec, obf: Obfuscator, n: int, samples: int, seed: int
) -> EfficiencyReport:
    """Measure size and interpreter-step overhead over sampled instances.

    Straight-line programs execute every instruction on every input, so
    the step count is a program property and no input sweep is needed.
    Raises OverheadExceeded naming the violating sample if a measured
    ratio exceeds the obfuscator's declared bound.
    """
    if samples < 1:
        raise UnsupportedParameter("samples must be >= 1")
    class_spec.require(n)
    max_size = 0.0
    max_steps = 0.0
    for i in range(samples):
        inst = class_spec.gen(n, derive_seed(seed, "eff-gen", i))
        obf_program = obf.apply(inst, derive_seed(seed, "eff-obf", i))
        sr = ir.size(obf_program) / ir.size(inst.program)
        tr = ir.static_steps(obf_program) / ir.static_steps(inst.program)
        if sr > obf.max_size_ratio:
            raise OverheadExceeded(
                f"{obf.obf_id} size ratio {sr:.3f} > declared {obf.max_size_ratio} "
                f"(n={n}, sample {i})"
            )
        if tr > obf.max_step_ratio:
            raise OverheadExceeded(
                f"{obf.obf_id} step ratio {tr:.3f} > declared {obf.max_step_ratio} "
                f"(n={n}, sample {i})"
            )
        max_size = max(max_size, sr)
        max_steps = max(max_steps, tr)
    return EfficiencyReport(max_size, max_steps, samples)


class Registry:
    """Name -> descriptor lookup for classes, assets, obfuscators, and
    attackers, plus the attacker roster per (class, asset) target."""

    def __init__(self):
        self._classes: dict[str, ClassSpec] = {}
        self._assets: dict[str, dict[str, AssetSpec]] = {}
        self._obfuscators: dict[str, Obfuscator] = {}
        self._attackers: dict[str, Attacker] = {}
        self._targets: dict[str, list[tuple[str, str]]] = {}
        self._attacker_factories: list[Callable[[str], Optional[Attacker]]] = []

    def add_class(self, spec: ClassSpec) -> None:
        self._classes[spec.class_id] = spec
        self._assets.setdefault(spec.class_id, {})

    def add_asset(self, spec: AssetSpec) -> None:
        if spec.class_id not in self._classes:
            raise UnknownId(f"class {spec.class_id} not registered")
        self._assets[spec.class_id][spec.asset_id] = spec

    def add_obfuscator(self, obf: Obfuscator) -> None:
        if obf.class_id not in self._classes:
            raise UnknownId(f"class {obf.class_id} not registered")
        self._obfuscators[obf.obf_id] = obf

    def add_attacker(self, atk: Attacker, targets: list[tuple[str, str]]) -> None:
        self._attackers[atk.attacker_id] = atk
        self._targets[atk.attacker_id] = list(targets)

    def add_attacker_factory(self, factory: Callable[[str], Optional[Attacker]]) -> None:
        self._attacker_factories.append(factory)

    def program_class(self, class_id: str) -> ClassSpec:
        try:
            return self._classes[class_id]
        except KeyError:
            raise UnknownId(f"unknown class {class_id!r}") from None

    def asset(self, class_id: str, asset_id: Optional[str] = None) -> AssetSpec:
        assets = self._assets.get(class_id)
        if not assets:
            raise UnknownId(f"no assets for class {class_id!r}")
        if asset_id is None:
            return next(iter(assets.values()))
        try:
            return assets[asset_id]
        except KeyError:
            raise UnknownId(f"unknown asset {asset_id!r} for class {class_id!r}") from None

    def assets_of(self, class_id: str) -> list[AssetSpec]:
        return list(self._assets.get(class_id, {}).values())

    def obfuscator(self, obf_id: str) -> Obfuscator:
        try:
            return self._obfuscators[obf_id]
        except KeyError:
            raise UnknownId(f"unknown obfuscator {obf_id!r}") from None

    def attacker(self, attacker_id: str) -> Attacker:
        if attacker_id in self._attackers:
            return self._attackers[attacker_id]
        for factory in self._attacker_factories:
            atk = factory(attacker_id)
            if atk is not None:
                return atk
        raise UnknownId(f"unknown attacker {attacker_id!r}")

    def attackers_for(self, class_id: str, asset_id: str) -> list[Attacker]:
        roster = []
        for atk_id, targets in self._targets.items():
            if (class_id, asset_id) in targets:
                roster.append(self._attackers[atk_id])
        return roster

    def class_ids(self) -> list[str]:
        return list(self._classes)

    def obfuscator_ids(self) -> list[str]:
        return list(self._obfuscators)

    def attacker_ids(self) -> list[str]:
        return list(self._attackers)
