"""Costed reduction of systems ``M |> P``.

Allocation costs +1, deallocation -1, everything else 0.  Communication,
matching and deallocation require the channels involved to be allocated.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from itertools import count
from typing import Iterable

from .syntax import (
    Alloc, Free, If, In, Out, Process, Rec, canonicalize_struct, components,
    make_par, pretty, substitute,
)

__all__ = [
    "CostedStep", "ResourceEnv", "System", "Trace", "format_trace", "fresh_name",
    "run", "state_hash", "step", "tau_moves", "trace_json", "RULE_COST",
]

RULE_COST = {"rCom": 0, "rThen": 0, "rElse": 0, "rRec": 0, "rAll": 1, "rFree": -1}
# one-path scheduler priority, lower is preferred
_PRIORITY = {"rCom": 0, "rThen": 1, "rElse": 1, "rRec": 2, "rFree": 3, "rAll": 4}


@dataclass(frozen=True)
class ResourceEnv:
    """Allocated channels plus a counter seeding fresh-name generation;
    every name outside ``allocated`` counts as deallocated."""
    allocated: frozenset = frozenset()
    fresh_counter: int = 0


@dataclass(frozen=True)
class System:
    resources: ResourceEnv
    process: Process

    @classmethod
    def of(cls, process: Process, allocated: Iterable[str] | None = None) -> "System":
        alloc = frozenset(process.fn if allocated is None else allocated)
        return cls(ResourceEnv(alloc), canonicalize_struct(process))


@dataclass(frozen=True)
class CostedStep:
    next: System
    cost: int
    rule: str
    position: tuple


@dataclass
class Trace:
    steps: list = field(default_factory=list)

    @property
    def total_cost(self) -> int:
        return sum(s.cost for s in self.steps)


def fresh_name(avoid, start: int = 0) -> tuple:
    """First ``_k`` with ``k >= start`` not in ``avoid``; returns (name, k)."""
    for k in count(start):
        n = f"_{k}"
        if n not in avoid:
            return n, k
    raise AssertionError("unreachable")


def tau_moves(threads: tuple, allocated: frozenset, avoid=frozenset(), start: int = 0) -> list:
    """Internal moves of a parallel composition given as its components.

    Returns ``(rule, cost, allocated', threads', position)`` tuples where
    ``threads'`` is the unsorted component list of the successor.
    ``avoid`` lists names a fresh channel must not clash with besides those
    of the system itself.
    """
    out: list = []
    n = len(threads)
    inputs: dict = {}
    for j, t in enumerate(threads):
        if isinstance(t, In):
            inputs.setdefault(t.subject, []).append(j)
    for i, t in enumerate(threads):
        match t:
            case Out(c, payload, cont):
                if c not in allocated:
                    continue
                for j in inputs.get(c, ()):
                    rcv = threads[j]
                    if len(rcv.params) != len(payload):
                        continue
                    body = substitute(rcv.cont, dict(zip(rcv.params, payload)))
                    rest = [threads[k] for k in range(n) if k != i and k != j]
                    out.append(("rCom", 0, allocated, rest + components(cont) + components(body), (i, j)))
            case If(a, b, th, el):
                if a in allocated and b in allocated:
                    rest = [threads[k] for k in range(n) if k != i]
                    if a == b:
                        out.append(("rThen", 0, allocated, rest + components(th), (i,)))
                    else:
                        out.append(("rElse", 0, allocated, rest + components(el), (i,)))
            case Rec(w, body):
                rest = [threads[k] for k in range(n) if k != i]
                out.append(("rRec", 0, allocated, rest + components(substitute(body, {w: t})), (i,)))
            case Alloc(x, cont):
                used = set(allocated) | set(avoid)
                for th in threads:
                    used |= th.fn
                c, _ = fresh_name(used, start)
                rest = [threads[k] for k in range(n) if k != i]
                out.append(("rAll", 1, allocated | {c}, rest + components(substitute(cont, {x: c})), (i,)))
            case Free(c, cont):
                if c in allocated:
                    rest = [threads[k] for k in range(n) if k != i]
                    out.append(("rFree", -1, allocated - {c}, rest + components(cont), (i,)))
    return out


def step(s: System) -> list:
    """All single reductions of ``s`` (one representative fresh name per
    allocation)."""
    threads = tuple(components(canonicalize_struct(s.process)))
    res = []
    for rule, cost, alloc, nxt, pos in tau_moves(threads, s.resources.allocated, start=s.resources.fresh_counter):
        counter = s.resources.fresh_counter
        if rule == "rAll":
            (c,) = alloc - s.resources.allocated
            counter = int(c[1:]) + 1
        proc = make_par(sorted(canonicalize_struct(q) for q in nxt))
        res.append(CostedStep(System(ResourceEnv(alloc, counter), canonicalize_struct(proc)), cost, rule, pos))
    return res


def state_hash(s: System) -> str:
    alloc = ",".join(sorted(s.resources.allocated))
    return hashlib.sha1(f"{alloc}|{s.process.key}".encode()).hexdigest()[:12]


def _state_key(s: System) -> tuple:
    return (s.resources.allocated, s.process)


def run(s: System, fuel: int, policy: str = "exhaustive", max_traces: int = 10_000) -> list:
    """Traces of at most ``fuel`` steps.

    ``one-path`` follows a fixed scheduler: the highest-priority rule
    (communication, then matching, unfolding, deallocation, allocation) at
    the leftmost enabled component.  ``exhaustive`` returns every maximal
    trace, identifying successors with the same resulting state.
    """
    s = System(s.resources, canonicalize_struct(s.process))
    if policy == "one-path":
        tr = Trace()
        cur = s
        for _ in range(fuel):
            succ = step(cur)
            if not succ:
                break
            best = min(succ, key=lambda st: (_PRIORITY[st.rule], st.position))
            tr.steps.append(best)
            cur = best.next
        return [tr]
    if policy != "exhaustive":
        raise ValueError(f"unknown policy {policy!r}")
    traces: list = []

    def dfs(cur: System, prefix: list, budget: int) -> None:
        if len(traces) >= max_traces:
            return
        succ = step(cur) if budget > 0 else []
        seen: set = set()
        uniq = []
        for st in succ:
            k = (st.rule, st.cost, _state_key(st.next))
            if k not in seen:
                seen.add(k)
                uniq.append(st)
        if not uniq:
            traces.append(Trace(list(prefix)))
            return
        for st in uniq:
            prefix.append(st)
            dfs(st.next, prefix, budget - 1)
            prefix.pop()

    dfs(s, [], fuel)
    return traces


def format_trace(tr: Trace) -> str:
    lines = [f"{st.rule} {st.cost:+d} {state_hash(st.next)}" for st in tr.steps]
    lines.append(f"total {tr.total_cost:+d}")
    return "\n".join(lines)


def trace_json(tr: Trace) -> dict:
    return {
        "steps": [
            {"rule": st.rule, "cost": st.cost, "state": state_hash(st.next), "process": pretty(st.next.process)}
            for st in tr.steps
        ],
        "total_cost": tr.total_cost,
    }
