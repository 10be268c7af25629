"""Algorithmic typing of processes and systems.

The checker threads a multiset of assumptions through the term and returns
what is left over (leftover typing).  ``P | Q`` checks ``P`` first and hands
its leftover to ``Q``.  Each assumption carries the prefix depth at which
it was introduced; only assumptions born outside a prefix may flow back out
of its continuation, because anything introduced by the prefix (received
parameters, the decremented subject, fresh channels) is not available to
parallel siblings.

Backtracking happens at three places: the choice among several assumptions
for one identifier, the payload chosen for a fresh channel, and whether to
revise the payload of a unique-now channel before using it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count
from typing import Iterator

from .syntax import Alloc, Free, If, In, Nil, Out, Par, Process, ProcVar, Rec, substitute
from .types import (
    A, PROC, W, Base, Chan, ProcT, TypeEnv, head, inconsistencies, intern, is_duplicable,
    payload_equal, rep, type_str, unfold,
)

__all__ = ["TypingVerdict", "check_process", "check_system", "payload_candidates"]


@dataclass
class TypingVerdict:
    accepted: bool
    derivation: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "derivation": list(self.derivation),
            "diagnostics": list(self.diagnostics),
        }


# An item is (name, type id, level).
Item = tuple


def payload_candidates(env: TypeEnv, extra: tuple = ()) -> list:
    """Payload lists of channel types occurring in ``env``, plus the empty list.

    These are the payloads tried for freshly allocated channels and for
    revising unique-now channels.
    """
    seen_types: set = set()
    out: list = [()]
    seen_payloads: set = {()}
    stack = [t for _, t in env] + list(extra)
    while stack:
        t = stack.pop()
        tid = intern(t)
        if tid in seen_types:
            continue
        seen_types.add(tid)
        h = head(t)
        if isinstance(h, Chan):
            key = tuple(intern(x) for x in h.payload)
            if key not in seen_payloads:
                seen_payloads.add(key)
                out.append(tuple(rep(i) for i in key))
            stack.extend(h.payload)
            stack.append(unfold(t))
    return out


class _Checker:
    def __init__(self, candidates: list, budget: int = 200_000):
        self.candidates = candidates
        self.fresh = count()
        self.failures: list = []
        self.budget = budget

    def note(self, path: tuple, msg: str) -> None:
        if len(self.failures) < 200:
            self.failures.append((path, msg))

    def tick(self) -> None:
        self.budget -= 1
        if self.budget < 0:
            raise _OutOfBudget()

    def bind(self, x: str) -> str:
        return f"{x}#{next(self.fresh)}"

    # -- assumption bookkeeping -----------------------------------------

    @staticmethod
    def normalize(items: list) -> tuple:
        """Join affine assumptions into a unique one where payloads agree and
        drop duplicate copies of duplicable assumptions."""
        by_name: dict = {}
        for it in items:
            by_name.setdefault(it[0], []).append(it)
        out: list = []
        for name, its in by_name.items():
            dup: dict = {}
            rest: list = []
            for n, tid, lvl in its:
                t = rep(tid)
                if is_duplicable(t):
                    dup[tid] = min(lvl, dup.get(tid, lvl))
                else:
                    rest.append((n, tid, lvl))
            out.extend((name, tid, lvl) for tid, lvl in dup.items())
            uniq = [it for it in rest if head(rep(it[1])).attr >= 0]
            aff = [it for it in rest if head(rep(it[1])).attr == A]
            for u in uniq:
                hu = head(rep(u[1]))
                j, lvl = hu.attr, u[2]
                keep = []
                for a in aff:
                    if j > 0 and payload_equal(head(rep(a[1])).payload, hu.payload):
                        j -= 1
                        lvl = max(lvl, a[2])
                    else:
                        keep.append(a)
                aff = keep
                out.append((name, intern(Chan(hu.payload, j)), lvl))
            out.extend(aff)
        out.sort()
        return tuple(out)

    @staticmethod
    def remove(items: tuple, it: Item) -> tuple:
        lst = list(items)
        lst.remove(it)
        return tuple(lst)

    def subject_options(self, items: tuple, u: str, level: int) -> Iterator:
        """Ways of using ``u`` once as a channel: yields
        (remaining items, payload, assumption added for the continuation, note)."""
        seen: set = set()
        for it in items:
            if it[0] != u or it in seen:
                continue
            seen.add(it)
            h = head(rep(it[1]))
            if not isinstance(h, Chan):
                continue
            rest = self.remove(items, it)
            if h.attr == W:
                yield items, h.payload, None, "w"
            elif h.attr == A:
                yield rest, h.payload, None, "a"
            else:
                after = h.attr - 1 if h.attr > 0 else 0
                yield rest, h.payload, (u, intern(Chan(h.payload, after)), level + 1), f"u({h.attr})"
                # split off an affine use and leave the unique part in place
                kept = rest + ((u, intern(Chan(h.payload, h.attr + 1)), it[2]),)
                yield tuple(sorted(kept)), h.payload, None, f"split u({h.attr})"
                # or take the unique part and leave the affine half behind
                left = rest + ((u, intern(Chan(h.payload, A)), it[2]),)
                yield tuple(sorted(left)), h.payload, (u, intern(Chan(h.payload, h.attr)), level + 1), f"split u({h.attr}) keep"
                if h.attr == 0:
                    for cand in self.candidates:
                        if not payload_equal(cand, h.payload):
                            yield rest, cand, (u, intern(Chan(cand, 0)), level + 1), "revise"

    @staticmethod
    def provide(items: tuple, d: str, want) -> Iterator[tuple]:
        """Remove a permission for ``d`` at type ``want``; yields the remaining items."""
        hw = head(want)
        seen: set = set()
        for it in items:
            if it[0] != d or it in seen:
                continue
            seen.add(it)
            t = rep(it[1])
            h = head(t)
            if isinstance(h, (Base, ProcT)):
                if h == hw:
                    yield items
                continue
            if not isinstance(h, Chan) or not isinstance(hw, Chan):
                continue
            if h.attr == W:
                if hw.attr in (W, A) and payload_equal(h.payload, hw.payload):
                    yield items
                continue
            rest = _Checker.remove(items, it)
            if h.attr == A:
                if hw.attr == A and payload_equal(h.payload, hw.payload):
                    yield rest
                continue
            j = h.attr
            payload = h.payload
            if not payload_equal(payload, hw.payload):
                if j != 0:
                    continue
                payload = hw.payload
            if hw.attr == A:
                yield tuple(sorted(rest + ((d, intern(Chan(payload, j + 1)), it[2]),)))
            elif hw.attr == W:
                yield rest
            elif hw.attr >= j + 1:
                yield tuple(sorted(rest + ((d, intern(Chan(payload, A)), it[2]),)))
            elif hw.attr == j:
                yield rest

    def provide_all(self, items: tuple, names: tuple, types: tuple) -> Iterator[tuple]:
        if not names:
            yield items
            return
        for rest in self.provide(items, names[0], types[0]):
            yield from self.provide_all(rest, names[1:], types[1:])

    @staticmethod
    def outer(items: tuple, level: int) -> tuple:
        return tuple(it for it in items if it[2] <= level)

    # -- rules ------------------------------------------------------------

    def check(self, items: tuple, p: Process, level: int, path: tuple) -> Iterator[tuple]:
        """Yields (leftover, derivation) pairs."""
        self.tick()
        match p:
            case Nil():
                yield items, ("tNil",)
            case ProcVar(w):
                if any(n == w and isinstance(head(rep(t)), ProcT) for n, t, _ in items):
                    yield items, (f"tVar {w}",)
                else:
                    self.note(path, f"tVar: process variable {w} has no proc assumption")
            case Par(l, r):
                for left, d1 in self.check(items, l, level, path + ("par-left",)):
                    for right, d2 in self.check(left, r, level, path + ("par-right",)):
                        yield right, ("tPar",) + d1 + d2
            case Rec(w, body):
                fresh = self.bind(w)
                body = substitute(body, {w: ProcVar(fresh)})
                dup = tuple(it for it in items if is_duplicable(rep(it[1])))
                uniq = [it for it in items if isinstance(h := head(rep(it[1])), Chan) and h.attr >= 0]
                # unique assumptions may enter the body weakened to unrestricted
                for mask in range(1 << min(len(uniq), 6)):
                    chosen = [u for k, u in enumerate(uniq) if mask >> k & 1]
                    widened = tuple((n, intern(Chan(head(rep(t)).payload, W)), lvl) for n, t, lvl in chosen)
                    shared = tuple(sorted(dup + widened + ((fresh, intern(PROC), level + 1),)))
                    for _, d in self.check(shared, body, level + 1, path + (f"rec {w}",)):
                        left = items
                        for u in chosen:
                            left = self.remove(left, u)
                        yield left, (f"tRec {w}",) + d
                        break
                self.note(path, f"tRec: body of rec {w} needs more than unrestricted assumptions")
            case If(a, b, th, el):
                dom = {it[0] for it in items}
                missing = [x for x in (a, b) if x not in dom]
                if missing:
                    self.note(path, f"tIf: match on {', '.join(missing)} without a permission")
                    return
                for l1, d1 in self.check(items, th, level, path + ("then",)):
                    for l2, d2 in self.check(items, el, level, path + ("else",)):
                        yield _intersect(l1, l2), (f"tIf {a}={b}",) + d1 + d2
            case Alloc(x, cont):
                fresh = self.bind(x)
                cont = substitute(cont, {x: fresh})
                for cand in self.candidates:
                    t = intern(Chan(cand, 0))
                    new = tuple(sorted(items + ((fresh, t, level + 1),)))
                    for left, d in self.check(new, cont, level + 1, path + (f"alloc {x}",)):
                        yield self.outer(left, level), (f"tAll {x}: {type_str(rep(t))}",) + d
            case Free(u, cont):
                ok = False
                for it in items:
                    h = head(rep(it[1]))
                    if it[0] == u and isinstance(h, Chan) and h.attr == 0:
                        ok = True
                        rest = self.remove(items, it)
                        for left, d in self.check(rest, cont, level + 1, path + (f"free {u}",)):
                            yield self.outer(left, level), (f"tFree {u}",) + d
                        break
                if not ok:
                    self.note(path, f"tFree: free {u} needs a unique-now permission for {u}")
            case Out(u, args, cont):
                found = False
                for rest, payload, added, how in self.subject_options(items, u, level):
                    if len(payload) != len(args):
                        continue
                    for after in self.provide_all(rest, args, payload):
                        found = True
                        new = after + ((added,) if added else ())
                        new = self.normalize(list(new))
                        for left, d in self.check(new, cont, level + 1, path + (f"{u}!",)):
                            yield self.outer(left, level), (f"tOut {u} [{how}]",) + d
                if not found:
                    self.note(path, f"tOut: output {u}!<{','.join(args)}> lacks permissions")
            case In(u, params, cont):
                found = False
                for rest, payload, added, how in self.subject_options(items, u, level):
                    if len(payload) != len(params):
                        continue
                    found = True
                    fresh = [self.bind(x) for x in params]
                    body = substitute(cont, dict(zip(params, fresh)))
                    new = list(rest) + ([added] if added else [])
                    new += [(f, intern(t), level + 1) for f, t in zip(fresh, payload)]
                    new = self.normalize(new)
                    for left, d in self.check(new, body, level + 1, path + (f"{u}?",)):
                        yield self.outer(left, level), (f"tIn {u} [{how}]",) + d
                if not found:
                    self.note(path, f"tIn: input on {u} lacks a channel permission of arity {len(params)}")


class _OutOfBudget(Exception):
    pass


def _intersect(a: tuple, b: tuple) -> tuple:
    rest = list(b)
    out = []
    for it in a:
        if it in rest:
            rest.remove(it)
            out.append(it)
    return tuple(out)


def check_process(env: TypeEnv, p: Process, budget: int = 200_000) -> TypingVerdict:
    """Decide ``env |- p`` by leftover search."""
    checker = _Checker(payload_candidates(env), budget)
    items = _Checker.normalize([(n, tid, 0) for n, tid in env.items])
    try:
        for _, deriv in checker.check(items, p, 0, ()):
            return TypingVerdict(True, list(deriv), [])
    except _OutOfBudget:
        return TypingVerdict(False, [], ["search budget exhausted"])
    diags = []
    for path, msg in checker.failures[-5:]:
        where = " > ".join(path) or "top"
        diags.append(f"{where}: {msg}")
    return TypingVerdict(False, [], diags or ["no derivation"])


def check_system(env: TypeEnv, allocated, p: Process) -> TypingVerdict:
    allocated = set(allocated)
    missing = sorted(env.domain() - allocated)
    if missing:
        return TypingVerdict(False, [], [f"tSys: {', '.join(missing)} typed but not allocated"])
    problems = inconsistencies(env)
    if problems:
        return TypingVerdict(False, [], [f"tSys: inconsistent environment, {p}" for p in problems])
    v = check_process(env, p)
    if v.accepted:
        v.derivation.insert(0, "tSys")
    return v


# Permission bookkeeping shared with the transition system.
provide_permission = _Checker.provide
normalize_items = _Checker.normalize
