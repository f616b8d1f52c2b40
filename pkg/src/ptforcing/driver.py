"""Stage-by-stage construction of a generic set, its verification, the
cohesive-set construction and limits of stable colorings."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

from .bitvec import BitString, GroundSets
from .condition import Condition, ConditionError, Instance, compose, identity_witness
from .forcing import (
    acceptable_parts,
    extends,
    force_Qm_extension,
    force_R_extension,
    forces_Qm,
    forces_R_at_horizon,
    refines_part,
    requirement_witness,
    satisfies_on,
)
from .oracle import Registry, diag, eval_functional

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_UNRESOLVED, EXIT_VIOLATED = 0, 1, 2, 3
EXIT_CODES = {"complete": EXIT_OK, "Unresolved": EXIT_UNRESOLVED, "HypothesisViolated": EXIT_VIOLATED}


class ConstructionError(RuntimeError):
    pass


def cantor_pairs(indices: Sequence[int], count: int) -> tuple[tuple[int, int], ...]:
    """The first ``count`` pairs of ``indices`` in diagonal order."""
    out: list[tuple[int, int]] = []
    n = len(indices)
    total = 0
    while len(out) < count and n and total <= 2 * (n - 1):
        for a in range(total + 1):
            b = total - a
            if a < n and b < n:
                out.append((indices[a], indices[b]))
                if len(out) == count:
                    break
        total += 1
    return tuple(out)


@dataclass(frozen=True)
class Schedule:
    """Stage ``s`` forces ``Q_s`` (for ``s ≤ q_max``) and then the requirement
    for ``pairs[s]`` (for ``s < len(pairs)``)."""

    pairs: tuple[tuple[int, int], ...]
    q_max: int
    depth: int
    domain_bound: int = 3
    threshold: int | None = None
    max_parts: int = 64

    @property
    def t(self) -> int:
        return self.threshold if self.threshold is not None else max(1, self.q_max)

    @property
    def stages(self) -> int:
        return max(len(self.pairs), self.q_max + 1)

    @classmethod
    def standard(cls, reg: Registry, stages: int, depth: int, **kw) -> Schedule:
        return cls(cantor_pairs(reg.indices, stages), stages - 1, depth, **kw)

    def to_json(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "q_max": self.q_max,
            "depth": self.depth,
            "domain_bound": self.domain_bound,
            "threshold": self.threshold,
            "max_parts": self.max_parts,
        }

    @classmethod
    def from_json(cls, data: dict) -> Schedule:
        return cls(
            tuple((int(a), int(b)) for a, b in data["pairs"]),
            data["q_max"],
            data["depth"],
            data["domain_bound"],
            data["threshold"],
            data["max_parts"],
        )


@dataclass
class Trace:
    header: dict
    records: list[dict] = field(default_factory=list)
    status: str = "complete"
    reason: str = ""
    chain: list[int] = field(default_factory=list)
    G: BitString | None = None
    report: dict | None = None

    # -- reconstruction of the inputs ----------------------------------------------
    @property
    def grounds(self) -> GroundSets:
        return GroundSets(BitString.parse(self.header["A"]), BitString.parse(self.header["C"]))

    @property
    def registry(self) -> Registry:
        return Registry.loads(self.header["registry"], len(self.header["A"]))

    @property
    def schedule(self) -> Schedule:
        return Schedule.from_json(self.header["schedule"])

    def conditions(self) -> list[Condition]:
        """``c_0`` followed by the condition closing each recorded stage."""
        return [Condition.from_json(self.header["initial"])] + [
            Condition.from_json(r["condition"]) for r in self.records
        ]

    # -- JSON lines ----------------------------------------------------------------------
    def dump(self, fp: TextIO) -> None:
        fp.write(json.dumps({"type": "header", **self.header}) + "\n")
        for r in self.records:
            fp.write(json.dumps({"type": "stage", **r}) + "\n")
        fp.write(
            json.dumps(
                {
                    "type": "result",
                    "status": self.status,
                    "reason": self.reason,
                    "chain": self.chain,
                    "G": None if self.G is None else str(self.G),
                    "report": self.report,
                }
            )
            + "\n"
        )

    def dumps(self) -> str:
        import io

        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, fp: Iterable[str]) -> Trace:
        header, records, result = None, [], None
        for line in fp:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "header":
                header = rec
            elif kind == "stage":
                records.append(rec)
            elif kind == "result":
                result = rec
            else:
                raise ValueError(f"unknown trace record type {kind!r}")
        if header is None or result is None:
            raise ValueError("trace lacks a header or a result record")
        G = None if result["G"] is None else BitString.parse(result["G"])
        return cls(header, records, result["status"], result["reason"], result["chain"], G, result["report"])

    @classmethod
    def loads(cls, text: str) -> Trace:
        return cls.load(text.splitlines())


def _instance(grounds: GroundSets, reg: Registry, schedule: Schedule) -> Instance:
    return Instance(reg, grounds, schedule.domain_bound, schedule.max_parts)


def _step_json(step) -> dict:
    return {
        "tag": step.tag,
        "k_from": step.k_from,
        "k_to": step.k_to,
        "witness": list(step.witness),
        "unforced_before": list(step.unforced_before),
        "unforced_after": list(step.unforced_after),
        "valuations": [str(v) for v in step.valuations],
        **step.detail,
    }


def _outcome_json(outcome) -> dict:
    if outcome is None:
        return {}
    out = {"tag": outcome.tag}
    if hasattr(outcome, "reason"):
        out["reason"] = outcome.reason
    if hasattr(outcome, "h"):
        out["h"] = str(outcome.h)
        out["sources"] = list(outcome.sources)
    out["witnesses"] = list(getattr(outcome, "witnesses", ()))
    return out


def run_construction(grounds: GroundSets, reg: Registry, schedule: Schedule) -> Trace:
    """Build ``c_0, c_1, …`` per the schedule, verifying each extension."""
    inst = _instance(grounds, reg, schedule)
    depth = schedule.depth
    inst.check_horizon(depth)
    A, t = grounds.A, schedule.t
    header = {
        "universe": grounds.universe_size,
        "A": str(grounds.A),
        "C": str(grounds.C),
        "registry": reg.dumps(),
        "schedule": schedule.to_json(),
    }
    if depth == 0 or schedule.stages == 0:
        header["initial"] = Condition.initial(depth).to_json()
        return Trace(header, status="Unresolved", reason="zero depth or stage budget")
    c = Condition.initial(depth)
    header["initial"] = c.to_json()
    trace = Trace(header)
    for s in range(schedule.stages):
        start, f = c, identity_witness(c.k)
        record: dict = {"stage": s, "k_from": c.k, "steps": []}
        if s <= schedule.q_max:
            forced = []
            for i in range(c.k):
                if i in acceptable_parts(c, A, t):
                    c = force_Qm_extension(c, i, A, s, t)
                    forced.append(i)
            record["m"] = s
            record["steps"].append({"tag": "Qm", "m": s, "parts": forced, "stems": [str(x) for x in c.stems]})
        if s < len(schedule.pairs):
            e, i = schedule.pairs[s]
            record["pair"] = [e, i]
            r = force_R_extension(c, e, i, inst)
            record["steps"].extend(_step_json(st) for st in r.steps)
            record["outcome"] = _outcome_json(r.outcome)
            f = compose(f, r.witness)
            c = r.condition
            if r.status != "forced":
                record.update(_close(c, f))
                trace.records.append(record)
                trace.status = r.status
                trace.reason = record["outcome"].get("reason", "")
                log.info("stage %d stopped: %s", s, r.status)
                return trace
        if not extends(c, start, f):
            raise ConstructionError(f"stage {s}: recorded witness does not verify the extension")
        acc = acceptable_parts(c, A, t)
        if not acc:
            raise ConstructionError(f"stage {s}: no acceptable part at threshold {t}")
        for m in range(min(s, schedule.q_max) + 1):
            bad = [i for i in acc if not forces_Qm(c, i, A, m)]
            if bad:
                raise ConstructionError(f"stage {s}: acceptable parts {bad} do not force Q_{m}")
        record.update(_close(c, f))
        record["acceptable"] = list(acc)
        trace.records.append(record)
        log.info("stage %d: k=%d, acceptable=%s", s, c.k, list(acc))
    trace.G = select_path_and_extract_G(trace)
    trace.report = verify_requirements(trace.G, grounds, reg, schedule).to_json()
    return trace


def _close(c: Condition, f: Sequence[int]) -> dict:
    return {"k_to": c.k, "witness": list(f), "stems": [str(x) for x in c.stems], "condition": c.to_json()}


def select_path_and_extract_G(trace: Trace) -> BitString:
    """Follow the least acceptable part of the last condition back through the
    recorded witnesses; ``G`` is its stem padded with zeros."""
    if trace.status != "complete" or not trace.records:
        raise ConstructionError("no complete stage to extract from")
    conds = trace.conditions()
    sched = trace.schedule
    A, t = trace.grounds.A, sched.t
    last = conds[-1]
    acc = acceptable_parts(last, A, t)
    if not acc:
        raise ConstructionError("final condition has no acceptable part")
    chain = [acc[0]]
    for r in reversed(trace.records):
        chain.append(r["witness"][chain[-1]])
    chain.reverse()  # chain[s] is the part of conds[s]; conds[0] is c_0
    for s, (c, i) in enumerate(zip(conds, chain)):
        if s and not c.stems[i].is_prefix_of(last.stems[chain[-1]]):
            raise ConstructionError(f"stem chain not increasing at stage {s - 1}")
        if i not in acceptable_parts(c, A, t):
            raise ConstructionError(f"part {i} of condition {s} is not acceptable")
    for s in range(1, len(conds)):
        d, c = conds[s], conds[s - 1]
        if not refines_part(d.tree, d.stems[chain[s]], chain[s], c.tree, c.stems[chain[s - 1]], chain[s - 1]):
            raise ConstructionError(f"satisfying classes not nested at stage {s - 1}")
    stem = last.stems[chain[-1]]
    G = stem.padded(last.depth)
    for s, (c, i) in enumerate(zip(conds, chain)):
        if not satisfies_on(G, c, i):
            raise ConstructionError(f"G does not satisfy condition {s} on part {i}")
    trace.chain = chain
    return G


@dataclass
class Report:
    items: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(it["ok"] for it in self.items)

    @property
    def failures(self) -> list[dict]:
        return [it for it in self.items if not it["ok"]]

    def to_json(self) -> dict:
        return {"ok": self.ok, "items": self.items}


def verify_requirements(G: BitString, grounds: GroundSets, reg: Registry, schedule: Schedule) -> Report:
    if G.length != schedule.depth:
        raise ValueError("G must have the horizon's length")
    inst = _instance(grounds, reg, schedule)
    rep = Report()
    inA = BitString(G.value & grounds.A.value, G.length).count()
    outA = G.count() - inA
    for m in range(schedule.q_max + 1):
        rep.items.append({"req": f"Q_{m}", "ok": inA >= m and outA >= m, "in_A": inA, "in_Abar": outA})
    for e, i in schedule.pairs:
        w = requirement_witness(G, e, i, inst)
        item = {"req": f"R_{e},{i}", "ok": w is not None}
        if w is not None:
            item.update(side=w[0], kind=w[1], n=w[2])
        rep.items.append(item)
    return rep


def check_trace(trace: Trace) -> list[str]:
    """Re-verify every recorded claim; an empty list means the trace checks."""
    problems: list[str] = []
    try:
        reg, grounds, sched = trace.registry, trace.grounds, trace.schedule
        conds = trace.conditions()
    except (ValueError, KeyError, ConditionError) as exc:
        return [f"unreadable trace: {exc}"]
    inst = _instance(grounds, reg, sched)
    A, t = grounds.A, sched.t
    for s, r in enumerate(trace.records):
        prev, cur = conds[s], conds[s + 1]
        f = r["witness"]
        if r["k_to"] != cur.k or len(f) != cur.k:
            problems.append(f"stage {s}: part count mismatch")
            continue
        if not extends(cur, prev, f):
            problems.append(f"stage {s}: extension witness fails")
        stopped = trace.status != "complete" and s == len(trace.records) - 1
        if "pair" in r and not stopped:
            e, i = r["pair"]
            bad = [j for j in range(cur.k) if not forces_R_at_horizon(cur, j, e, i, inst)]
            if bad:
                problems.append(f"stage {s}: parts {bad} do not force R_{e},{i}")
        if stopped:
            continue
        acc = acceptable_parts(cur, A, t)
        if not acc:
            problems.append(f"stage {s}: no acceptable part")
        if s <= sched.q_max and any(not forces_Qm(cur, i, A, s) for i in acc):
            problems.append(f"stage {s}: an acceptable part does not force Q_{s}")
    if trace.status == "complete":
        try:
            G = select_path_and_extract_G(Trace(trace.header, trace.records))
        except ConstructionError as exc:
            problems.append(str(exc))
        else:
            if trace.G != G:
                problems.append("recorded G differs from the re-extracted G")
            rep = verify_requirements(G, grounds, reg, sched)
            problems.extend(f"requirement {it['req']} fails" for it in rep.failures)
    return problems


# -- cohesive sets ----------------------------------------------------------------------


@dataclass
class CohesiveStage:
    stage: int
    branch: str  # "C" or "complement"
    Z: BitString
    stem_before: BitString
    stem: BitString
    hit: tuple[int, int] | None  # (n, value) when a diagonal hit was secured

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "branch": self.branch,
            "Z": str(self.Z),
            "stem_before": str(self.stem_before),
            "stem": str(self.stem),
            "hit": None if self.hit is None else list(self.hit),
        }


@dataclass
class CohesiveResult:
    G: BitString
    stages: list[CohesiveStage]


def _above(S: BitString, lo: int) -> int:
    return (S.value >> lo).bit_count()


def cohesive_construction(
    sets: Sequence[BitString], grounds: GroundSets, reg: Registry, domain_bound: int = 3
) -> CohesiveResult:
    """Finite extensions inside a shrinking ``Z_s``, securing a diagonal hit for
    the ``s``-th functional of the registry whenever one is available."""
    N = grounds.universe_size
    if any(S.length != N for S in sets):
        raise ValueError("sets must span the universe")
    funcs = reg.indices
    if len(funcs) < len(sets):
        raise ValueError(f"{len(sets)} stages need {len(sets)} functionals, registry has {len(funcs)}")
    Z = BitString.ones(N)
    rho = BitString(0, 0)
    stages: list[CohesiveStage] = []
    R = len(sets)
    for s, S in enumerate(sets):
        need = R - s
        inside = Z & S
        outside = BitString(Z.value & ~S.value, N)
        if _above(inside, rho.length) >= need:
            Z, branch = inside, "C"
        elif _above(outside, rho.length) >= need:
            Z, branch = outside, "complement"
        else:
            raise ConstructionError(f"cohesive stage {s}: both branches have fewer than {need} free elements")
        before = rho
        rho, hit = _cohesive_step(rho, Z, funcs[s], grounds.C, reg, domain_bound, need - 1)
        stages.append(CohesiveStage(s, branch, Z, before, rho, hit))
    return CohesiveResult(rho.padded(N), stages)


def _cohesive_step(
    rho: BitString, Z: BitString, e: int, C: BitString, reg: Registry, domain_bound: int, spare: int
) -> tuple[BitString, tuple[int, int] | None]:
    lo = rho.length
    best = None
    for n in range(domain_bound + 1):
        d = diag(reg, n, reg.s_max)
        if d is None:
            continue
        for en in reg.entries(e, n):
            if en.settle > reg.s_max or en.output != d or not en.c_ok(C):
                continue
            ones, zeros, top, ok = 0, 0, lo, True
            for x, b in en.g_literals():
                if x < lo:
                    ok = rho.bit(x) == b
                else:
                    if b:
                        ok = (Z.value >> x) & 1 == 1
                        ones |= 1 << x
                        top = max(top, x + 1)
                    elif (Z.value >> x) & 1:
                        zeros |= 1 << x
                        top = max(top, x + 1)
                    # outside Z_s the bit stays 0 in every later stage
                if not ok:
                    break
            if not ok:
                continue
            if not ones:
                free = Z.value & ~zeros & ~((1 << lo) - 1)
                if not free:
                    continue
                x = (free & -free).bit_length() - 1
                ones |= 1 << x
                top = max(top, x + 1)
            if _above(Z, top) < spare:
                continue
            if best is None or top < best[0]:
                best = (top, ones, (n, d))
    if best is not None:
        top, ones, hit = best
        return BitString(rho.value | ones, top), hit
    free = Z.value >> lo
    if not free:
        raise ConstructionError("no element left to extend the stem")
    x = lo + (free & -free).bit_length() - 1
    return BitString(rho.value | (1 << x), x + 1), None


def verify_cohesive(
    result: CohesiveResult, sets: Sequence[BitString], grounds: GroundSets, reg: Registry, domain_bound: int = 3
) -> list[str]:
    problems = []
    G = result.G
    funcs = reg.indices
    for st in result.stages:
        lo = st.stem_before.length
        if (G.value >> lo << lo) & ~st.Z.value:
            problems.append(f"stage {st.stage}: G leaves Z_s beyond the earlier stem")
        S = sets[st.stage]
        if st.branch == "C" and st.Z.value & ~S.value or st.branch == "complement" and st.Z.value & S.value:
            problems.append(f"stage {st.stage}: Z_s not on its recorded side")
        if not st.stem.count() > st.stem_before.count() or not st.stem_before.is_prefix_of(st.stem):
            problems.append(f"stage {st.stage}: stem did not grow")
        e = funcs[st.stage]
        outs = [eval_functional(reg, e, G, grounds.C, n, reg.s_max) for n in range(domain_bound + 1)]
        hit = any(o is not None and o == diag(reg, n, reg.s_max) for n, o in enumerate(outs))
        if st.hit is not None and outs[st.hit[0]] != st.hit[1]:
            problems.append(f"stage {st.stage}: recorded hit at {st.hit[0]} not reproduced")
        if not hit and all(o is not None for o in outs):
            problems.append(f"stage {st.stage}: functional {e} total without a diagonal hit")
    return problems


# -- stable colorings ------------------------------------------------------------------


@dataclass(frozen=True)
class StableColoringTable:
    """Colors ``f(m, n) ∈ {1, 2}`` for ``n < m < size``."""

    size: int
    colors: dict[tuple[int, int], int]

    def __post_init__(self) -> None:
        for m in range(self.size):
            for n in range(m):
                if self.colors.get((m, n)) not in (1, 2):
                    raise ValueError(f"missing or invalid color at ({m}, {n})")

    def __call__(self, m: int, n: int) -> int:
        return self.colors[(m, n)]

    @classmethod
    def from_function(cls, size: int, fn: Callable[[int, int], int]) -> StableColoringTable:
        return cls(size, {(m, n): fn(m, n) for m in range(size) for n in range(m)})

    @classmethod
    def planted(
        cls, size: int, limits: Sequence[int], cuts: Sequence[int], rng: random.Random
    ) -> StableColoringTable:
        """Column ``n`` is random below ``cuts[n]`` and equal to ``limits[n]`` from there on."""
        return cls.from_function(
            size, lambda m, n: limits[n] if m >= cuts[n] else rng.choice((1, 2))
        )


def limit_partition(
    f: StableColoringTable, horizon: int | None = None
) -> tuple[BitString, BitString, list[int]]:
    """``(f1, f2, unstable)``: column ``n`` joins ``f1`` when every color in
    its window ``max(n+1, size//2) ≤ m < size`` is 1; ``unstable`` lists the
    columns whose window is not constant."""
    size = f.size
    h = size - 1 if horizon is None else horizon
    if not 0 <= h < size:
        raise ValueError(f"horizon must lie below the table size {size}")
    f1, unstable = [], []
    for n in range(h):
        window = {f(m, n) for m in range(max(n + 1, size // 2), size)}
        f1.append(1 if window == {1} else 0)
        if len(window) > 1:
            unstable.append(n)
    one = BitString.from_bits(f1)
    return one, one.complement(), unstable
