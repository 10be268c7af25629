"""Costed typed labelled transitions over configurations ``Γ ⊳ M ▷ P``.

``Γ`` is the observer's view: the permissions an external party holds.
Visible actions transfer permissions between process and observer; the
observer may also allocate and free channels it owns uniquely.
"""

from __future__ import annotations

import hashlib
import re
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from .reduction import ResourceEnv, fresh_name, tau_moves
from .syntax import (
    Alloc, Free, If, In, Nil, Out, Par, Process, ProcVar, Rec, canonicalize_struct, components,
    make_par, pretty, rename_names, substitute,
)
from .typecheck import check_system, provide_permission
from .types import (
    A, W, Chan, TypeEnv, consistent, format_env, head, inconsistencies, intern,
    payload_equal, rep, type_str,
)

__all__ = [
    "AllocExt", "CanonicalConfiguration", "Configuration", "EnvRewrite",
    "FreeExt", "InLabel", "InvalidConfiguration", "OutLabel", "TAU", "Tau",
    "Transition", "barbs", "canonicalize", "canonical_renaming", "dump_json",
    "explore", "in_options", "normalize_env", "out_env", "process_moves",
    "serialize", "settle", "subject_uses", "templates", "transitions", "weak_transitions",
]

GENERATED = re.compile(r"_\d+$")


class InvalidConfiguration(ValueError):
    pass


# --------------------------------------------------------------------------
# Labels


@dataclass(frozen=True)
class Tau:
    def __str__(self) -> str:
        return "tau"


TAU = Tau()


@dataclass(frozen=True)
class OutLabel:
    """Process output observed through the observer's assumption ``via``."""
    subject: str
    payload: tuple
    via: int

    def __str__(self) -> str:
        return f"{self.subject}!<{','.join(self.payload)}>"


@dataclass(frozen=True)
class InLabel:
    """Observer output consumed by the process; ``env`` is the observer's
    view afterwards, which pins down how permissions were handed over."""
    subject: str
    payload: tuple
    env: TypeEnv

    def __str__(self) -> str:
        return f"{self.subject}?({','.join(self.payload)})"


@dataclass(frozen=True)
class AllocExt:
    name: str
    template: tuple  # payload type ids

    def __str__(self) -> str:
        pl = ", ".join(type_str(rep(i)) for i in self.template)
        return f"alloc {self.name}:chan({pl}):u(0)"


@dataclass(frozen=True)
class FreeExt:
    name: str

    def __str__(self) -> str:
        return f"free {self.name}"


@dataclass(frozen=True)
class EnvRewrite:
    """A standalone weakening of the observer's view.

    Never enumerated: a weaker observer can only lose distinguishing power,
    so the rewrites an action needs are folded into that action's label.
    """
    descriptor: str
    env: TypeEnv

    def __str__(self) -> str:
        return f"env {self.descriptor}"


# --------------------------------------------------------------------------
# Configurations


@dataclass(frozen=True)
class Configuration:
    observer: TypeEnv
    resources: ResourceEnv
    process: Process
    witness: TypeEnv | None = field(default=None, compare=False)

    @classmethod
    def make(cls, observer: TypeEnv, process: Process, allocated: Iterable[str] | None = None,
             witness: TypeEnv | None = None) -> "Configuration":
        """Validated constructor.

        ``allocated`` defaults to the observer's names plus the process's
        free names.  When a process environment ``witness`` is given it must
        be jointly consistent with the observer and type the system.
        """
        alloc = frozenset(observer.domain() | process.fn) if allocated is None else frozenset(allocated)
        missing = observer.domain() - alloc
        if missing:
            raise InvalidConfiguration(f"observer names not allocated: {', '.join(sorted(missing))}")
        problems = inconsistencies(observer)
        if problems:
            raise InvalidConfiguration("observer environment is inconsistent: " + "; ".join(problems))
        if witness is not None:
            if not consistent(observer.union(witness)):
                raise InvalidConfiguration("observer and process environments are jointly inconsistent")
            verdict = check_system(witness, alloc, process)
            if not verdict.accepted:
                raise InvalidConfiguration("process is not typed by the witness: " + "; ".join(verdict.diagnostics))
        return cls(normalize_env(observer), ResourceEnv(alloc), make_par(sorted(components(process))), witness)

    @property
    def threads(self) -> tuple:
        return tuple(sorted(components(self.process)))


@dataclass(frozen=True)
class Transition:
    label: object
    cost: int
    rule: str
    target: Configuration


# --------------------------------------------------------------------------
# Observer bookkeeping


@lru_cache(maxsize=200_000)
def normalize_env(env: TypeEnv) -> TypeEnv:
    """Collapse an observer view to a normal form of equal power: duplicate
    unrestricted copies merge, affine copies beside an unrestricted one are
    dropped, and affine copies rejoin a unique assumption."""
    groups: dict = defaultdict(list)
    for n, tid in env.items:
        groups[n].append(tid)
    out: list = []
    for n, tids in groups.items():
        dup: set = set()
        w_payloads: list = []
        uniq: list = []
        aff: list = []
        for tid in tids:
            h = head(rep(tid))
            if not isinstance(h, Chan):
                dup.add(tid)
            elif h.attr == W:
                dup.add(tid)
                w_payloads.append(h.payload)
            elif h.attr == A:
                aff.append((tid, h))
            else:
                uniq.append(h)
        aff = [(t, h) for t, h in aff if not any(payload_equal(h.payload, p) for p in w_payloads)]
        for u in uniq:
            j = u.attr
            keep = []
            for t, h in aff:
                if j > 0 and payload_equal(h.payload, u.payload):
                    j -= 1
                else:
                    keep.append((t, h))
            aff = keep
            out.append((n, intern(Chan(u.payload, j))))
        out.extend((n, t) for t in dup)
        out.extend((n, t) for t, _ in aff)
    return TypeEnv._raw(tuple(sorted(out)))


@lru_cache(maxsize=200_000)
def subject_uses(env: TypeEnv, c: str) -> tuple:
    """Ways for the observer to use ``c`` once as a channel:
    ``(assumption id, payload types, view afterwards)``.  A unique-now
    assumption is first weakened to unique-after-one."""
    res = []
    for tid in sorted(set(env.ids_of(c))):
        h = head(rep(tid))
        if not isinstance(h, Chan):
            continue
        if h.attr == W:
            after = env
        elif h.attr == A:
            after = env.remove(c, tid)
        else:
            after = env.remove(c, tid).add(c, intern(Chan(h.payload, max(h.attr - 1, 0))))
        res.append((tid, h.payload, after))
    return tuple(res)


def out_env(env: TypeEnv, c: str, via: int, names: tuple) -> TypeEnv | None:
    """Observer view after receiving ``names`` on ``c`` through ``via``."""
    for tid, payload, after in subject_uses(env, c):
        if tid == via:
            if len(payload) != len(names):
                return None
            return normalize_env(after.add_many(zip(names, payload)))
    return None


@lru_cache(maxsize=200_000)
def in_options(env: TypeEnv, c: str, arity: int) -> tuple:
    """Observer outputs on ``c`` of ``arity`` names: ``(names, view afterwards)``.

    Each payload name must be backed by a permission of the payload type,
    obtained by splitting, subtyping or revising an observer assumption.
    """
    found: set = set()
    for _, payload, after in subject_uses(env, c):
        if len(payload) != arity:
            continue
        start = tuple((n, t, 0) for n, t in after.items)
        names = sorted(after.domain())

        def go(items: tuple, i: int, chosen: tuple) -> None:
            if i == arity:
                found.add((chosen, normalize_env(TypeEnv._raw(tuple(sorted((n, t) for n, t, _ in items))))))
                return
            for d in names:
                for rest in provide_permission(items, d, payload[i]):
                    go(rest, i + 1, chosen + (d,))

        go(start, 0, ())
    return tuple(sorted(found, key=lambda o: (o[0], o[1].items)))


@lru_cache(maxsize=50_000)
def templates(env: TypeEnv) -> tuple:
    """Payloads for observer allocations: those of channel types occurring as
    payload components in the view (so the new channel can stand in for
    one), plus the empty payload."""
    out = {()}
    seen: set = set()
    stack = [rep(t) for _, t in env.items]
    while stack:
        t = stack.pop()
        tid = intern(t)
        if tid in seen:
            continue
        seen.add(tid)
        h = head(t)
        if isinstance(h, Chan):
            for comp in h.payload:
                hc = head(comp)
                if isinstance(hc, Chan):
                    out.add(tuple(intern(x) for x in hc.payload))
                stack.append(comp)
    return tuple(sorted(out))


def unique_names(env: TypeEnv) -> set:
    return {n for n, t in env.items if isinstance(head(rep(t)), Chan) and head(rep(t)).attr >= 0}


def env_names(env: TypeEnv) -> frozenset:
    return env.domain()


# --------------------------------------------------------------------------
# Strong moves over (view, allocated, components)


def process_moves(env: TypeEnv, alloc: frozenset, threads: tuple, *, observer_alloc: bool = True,
                  max_observer_unique: int = 1, avoid: Iterable[str] = ()) -> list:
    """Strong moves as ``(label, cost, rule, view', allocated', components')``.

    Internal moves never reuse a name the observer knows.  Observer
    allocations are offered only while the observer owns fewer than
    ``max_observer_unique`` unique channels.
    """
    dom = env.domain()
    avoid = frozenset(avoid) | dom
    res = []
    for rule, cost, alloc2, nxt, _ in tau_moves(threads, alloc, avoid):
        res.append((TAU, cost, rule, env, alloc2, tuple(nxt)))
    for i, t in enumerate(threads):
        if isinstance(t, Out) and t.subject in dom:
            rest = threads[:i] + threads[i + 1:]
            cont = tuple(components(t.cont))
            for tid, payload, _ in subject_uses(env, t.subject):
                env2 = out_env(env, t.subject, tid, t.payload)
                if env2 is not None:
                    res.append((OutLabel(t.subject, t.payload, tid), 0, "lOut", env2, alloc, rest + cont))
        elif isinstance(t, In) and t.subject in dom:
            rest = threads[:i] + threads[i + 1:]
            for names, env2 in in_options(env, t.subject, len(t.params)):
                body = substitute(t.cont, dict(zip(t.params, names)))
                res.append((InLabel(t.subject, names, env2), 0, "lIn", env2, alloc, rest + tuple(components(body))))
    if observer_alloc and len(unique_names(env)) < max_observer_unique:
        used = set(alloc) | avoid
        for t in threads:
            used |= t.fn
        c, _ = fresh_name(used)
        for tpl in templates(env):
            env2 = normalize_env(env.add(c, intern(Chan(tuple(rep(i) for i in tpl), 0))))
            res.append((AllocExt(c, tpl), 1, "lAllE", env2, alloc | {c}, threads))
    for c, tid in env.items:
        h = head(rep(tid))
        if isinstance(h, Chan) and h.attr == 0 and c in alloc:
            res.append((FreeExt(c), -1, "lFreeE", normalize_env(env.remove(c, tid)), alloc - {c}, threads))
    return res


def transitions(c: Configuration, max_observer_unique: int = 1) -> list:
    """All strong transitions of a configuration."""
    out = []
    for label, cost, rule, env2, alloc2, nxt in process_moves(
        c.observer, c.resources.allocated, c.threads, max_observer_unique=max_observer_unique
    ):
        proc = make_par(sorted(nxt))
        out.append(Transition(label, cost, rule, Configuration(env2, ResourceEnv(alloc2, c.resources.fresh_counter), proc, c.witness)))
    return out


def _label_matches(want, got) -> bool:
    if want is None:
        return False
    if isinstance(want, AllocExt):
        return isinstance(got, AllocExt) and got.template == want.template
    if isinstance(want, OutLabel) and want.via is None:
        return isinstance(got, OutLabel) and (got.subject, got.payload) == (want.subject, want.payload)
    if isinstance(want, InLabel) and want.env is None:
        return isinstance(got, InLabel) and (got.subject, got.payload) == (want.subject, want.payload)
    return want == got


def weak_transitions(c: Configuration, label, depth: int, max_observer_unique: int = 1) -> set:
    """``τ*·label·τ*`` composites (``τ*`` for ``label=None`` or ``TAU``) with
    at most ``depth`` internal steps on each side of the action.  Returns
    ``(accumulated cost, CanonicalConfiguration)`` pairs.  An ``OutLabel``
    with ``via=None`` or an ``InLabel`` with ``env=None`` matches any
    permission bookkeeping."""
    start = (c.observer, c.resources.allocated, c.threads)

    def closure(states: set) -> set:
        seen = set(states)
        frontier = list(states)
        for _ in range(depth):
            nxt = []
            for cost, (env, alloc, threads) in frontier:
                for lab, k, _, env2, alloc2, th2 in process_moves(env, alloc, threads, observer_alloc=False):
                    if lab is TAU:
                        st = (cost + k, (env2, alloc2, tuple(sorted(th2))))
                        if st not in seen:
                            seen.add(st)
                            nxt.append(st)
            frontier = nxt
        return seen

    pre = closure({(0, start)})
    if label is None or isinstance(label, Tau):
        post = pre
    else:
        mid = set()
        for cost, (env, alloc, threads) in pre:
            for lab, k, _, env2, alloc2, th2 in process_moves(env, alloc, threads, max_observer_unique=max_observer_unique):
                if _label_matches(label, lab):
                    mid.add((cost + k, (env2, alloc2, tuple(sorted(th2)))))
        post = closure(mid)
    res = set()
    for cost, (env, alloc, threads) in post:
        conf = Configuration(env, ResourceEnv(alloc, c.resources.fresh_counter), make_par(threads), c.witness)
        res.add((cost, canonicalize(conf)[0]))
    return res


def barbs(c: Configuration, fuel: int) -> set:
    """Observer names on which some internal run of at most ``fuel`` steps
    exposes an output."""
    dom = c.observer.domain()
    seen = {(c.resources.allocated, c.threads)}
    frontier = list(seen)
    found: set = set()
    for level in range(fuel + 1):
        nxt = []
        for alloc, threads in frontier:
            found |= {t.subject for t in threads if isinstance(t, Out) and t.subject in dom}
            if level == fuel:
                continue
            for _, _, alloc2, th2, _ in tau_moves(threads, alloc, dom):
                st = (alloc2, tuple(sorted(th2)))
                if st not in seen:
                    seen.add(st)
                    nxt.append(st)
        frontier = nxt
    return found


# --------------------------------------------------------------------------
# Inert internal steps


def settle(dom: frozenset, alloc: frozenset, threads: tuple, limit: int = 1000) -> tuple:
    """Apply internal steps that can neither be disabled nor disable anything.

    These are the unfolding of a top-level recursion and a communication on
    an allocated channel the observer does not know, when exactly one
    component sends on it, exactly one receives, and no other component
    mentions it.  Both cost nothing and commute with every other move, so a
    configuration and its settled form are interchangeable at equal credit.
    Returns the sorted components.
    """
    threads = list(threads)
    for _ in range(limit):
        changed = False
        for i, t in enumerate(threads):
            if isinstance(t, Rec) and not isinstance(t.body, (ProcVar, Rec)):
                rest = threads[:i] + threads[i + 1:]
                threads = rest + components(substitute(t.body, {t.var: t}))
                changed = True
                break
        if changed:
            continue
        senders: dict = defaultdict(list)
        receivers: dict = defaultdict(list)
        for i, t in enumerate(threads):
            if isinstance(t, Out):
                senders[t.subject].append(i)
            elif isinstance(t, In):
                receivers[t.subject].append(i)
        for b, outs in senders.items():
            ins = receivers.get(b, ())
            if len(outs) != 1 or len(ins) != 1 or b in dom or b not in alloc:
                continue
            i, j = outs[0], ins[0]
            snd, rcv = threads[i], threads[j]
            if len(snd.payload) != len(rcv.params):
                continue
            if any(b in t.fn for k, t in enumerate(threads) if k != i and k != j):
                continue
            body = substitute(rcv.cont, dict(zip(rcv.params, snd.payload)))
            rest = [t for k, t in enumerate(threads) if k != i and k != j]
            threads = rest + components(snd.cont) + components(body)
            changed = True
            break
        if not changed:
            break
    return tuple(sorted(threads))


# --------------------------------------------------------------------------
# Canonical forms


def serialize(p: Process, f, occ: list | None = None, bound: dict | None = None) -> str:
    """Name-abstracted serialization.

    Free names go through ``f`` (and are appended to ``occ`` in order of
    occurrence); bound identifiers become binder depths, and parallel
    components are sorted, so alpha-equivalent and structurally congruent
    terms agree.
    """
    bound = {} if bound is None else bound

    def nm(x: str) -> str:
        b = bound.get(x)
        if b is not None:
            return b
        if occ is not None:
            occ.append(x)
        return f(x)

    def bind(xs: Iterable[str]) -> dict:
        d = dict(bound)
        for x in xs:
            d[x] = f"${len(d)}"
        return d

    match p:
        case Nil():
            return "0"
        case Out(c, payload, cont):
            s = nm(c)
            return f"O({s};{','.join(nm(x) for x in payload)};{serialize(cont, f, occ, bound)})"
        case In(c, params, cont):
            s = nm(c)
            return f"I({s};{len(params)};{serialize(cont, f, occ, bind(params))})"
        case If(a, b, th, el):
            sa, sb = nm(a), nm(b)
            return f"F({sa};{sb};{serialize(th, f, occ, bound)};{serialize(el, f, occ, bound)})"
        case Rec(w, body):
            return f"R({serialize(body, f, occ, bind([w]))})"
        case ProcVar(w):
            return f"V({bound.get(w, w)})"
        case Par():
            parts = []
            for q in components(p):
                sub: list = []
                parts.append((serialize(q, f, sub, bound), sub))
            parts.sort(key=lambda x: x[0])
            if occ is not None:
                for _, sub in parts:
                    occ.extend(sub)
            return "P(" + "|".join(s for s, _ in parts) + ")" if parts else "0"
        case Alloc(x, cont):
            return f"A({serialize(cont, f, occ, bind([x]))})"
        case Free(c, cont):
            s = nm(c)
            return f"X({s};{serialize(cont, f, occ, bound)})"
    raise TypeError(p)


_templates: dict = {}


def _template(t: Process) -> tuple:
    """Serialization of ``t`` split at its free-name occurrences."""
    hit = _templates.get(t.key)
    if hit is None:
        occ: list = []
        parts = tuple(serialize(t, lambda x: "\x00", occ).split("\x00"))
        hit = (parts, tuple(occ))
        if len(_templates) > 500_000:
            _templates.clear()
        _templates[t.key] = hit
    return hit


def _fill(tpl: tuple, f) -> str:
    parts, occ = tpl
    out = [parts[0]]
    for x, p in zip(occ, parts[1:]):
        out.append(f(x))
        out.append(p)
    return "".join(out)


def canonical_renaming(env: TypeEnv, sides: list, fixed_observer) -> tuple:
    """Choose canonical names for a view shared by one or more sides.

    ``sides`` holds ``(allocated, components)`` pairs.  Observer names for
    which ``fixed_observer`` holds are kept; the other observer names are
    renamed jointly, and names private to a side are renamed per side.
    Returns ``(per-side renamings, key)``; the key identifies the
    configuration up to these renamings and structural congruence, with
    garbage channels ignored.
    """
    dom = env.domain()
    gdyn = sorted(n for n in dom if not fixed_observer(n))
    priv = []
    for alloc, threads in sides:
        fn: set = set()
        for t in threads:
            fn |= t.fn
        priv.append(sorted(fn - dom))
    assigned_g: dict = {}
    assigned_p: list = [dict() for _ in sides]
    n_g = len(gdyn)

    def symbol(side: int | None, x: str) -> str:
        if x in dom:
            if x in assigned_g:
                return f"#{assigned_g[x]}"
            return "*g" + ",".join(map(str, env.ids_of(x))) if x in gdyn else x
        d = assigned_p[side]
        if x in d:
            return f"#{d[x]}"
        return "*a" if x in sides[side][0] else "*d"

    todo_g = set(gdyn)
    todo_p = [set(p) for p in priv]
    while todo_g or any(todo_p):
        best = None
        for n, tid in env.items:
            if n in todo_g:
                cand = ((0, tid, ""), [(None, n)])
                if best is None or cand[0] < best[0]:
                    best = cand
        for s, (alloc, threads) in enumerate(sides):
            for t in threads:
                if not (t.fn & todo_g or t.fn & todo_p[s]):
                    continue
                tpl = _template(t)
                shape = _fill(tpl, lambda x, s=s: symbol(s, x))
                cand = ((1, s, shape), [(s, x) for x in tpl[1]])
                if best is None or cand[0] < best[0]:
                    best = cand
        for s, x in best[1]:
            if x in todo_g:
                assigned_g[x] = len(assigned_g)
                todo_g.discard(x)
            elif s is not None and x in todo_p[s]:
                assigned_p[s][x] = n_g + len(assigned_p[s])
                todo_p[s].discard(x)
    sigmas = []
    for s in range(len(sides)):
        sigma = {x: f"_{i}" for x, i in assigned_g.items()}
        sigma.update({x: f"_{i}" for x, i in assigned_p[s].items()})
        sigmas.append(sigma)
    genv = env.rename(sigmas[0]) if sigmas else env
    keys = [tuple(genv.items)]
    for s, (alloc, threads) in enumerate(sides):
        sigma = sigmas[s]
        ser = sorted(_fill(_template(t), lambda x: sigma.get(x, x)) for t in threads)
        fn: set = set()
        for t in threads:
            fn |= t.fn
        live = sorted(sigma.get(x, x) for x in alloc if x in fn or x in dom)
        keys.append((tuple(ser), tuple(live)))
    return sigmas, tuple(keys)


def apply_renaming(sigma: dict, env: TypeEnv, alloc: frozenset, threads: tuple) -> tuple:
    if not sigma:
        return env, alloc, threads
    env2 = env.rename(sigma)
    alloc2 = frozenset(sigma.get(x, x) for x in alloc)
    th2 = tuple(sorted(rename_names(t, sigma) if t.fn & sigma.keys() else t for t in threads))
    return env2, alloc2, th2


@dataclass(frozen=True)
class CanonicalConfiguration:
    key: tuple
    configuration: Configuration = field(compare=False)
    garbage: int = field(compare=False)

    @property
    def hash(self) -> str:
        return hashlib.sha1(repr(self.key).encode()).hexdigest()[:12]


def canonicalize(c: Configuration) -> tuple:
    """Canonical form and the renaming applied.  Observer names are kept;
    every other name gets the next canonical name in order of first
    occurrence; unreachable allocated channels are dropped and counted."""
    threads = tuple(sorted(components(canonicalize_struct(c.process))))
    alloc = c.resources.allocated
    sigmas, key = canonical_renaming(c.observer, [(alloc, threads)], lambda n: True)
    sigma = sigmas[0]
    fn: set = set()
    for t in threads:
        fn |= t.fn
    dom = c.observer.domain()
    live = frozenset(x for x in alloc if x in fn or x in dom)
    garbage = len(alloc) - len(live)
    env2, alloc2, th2 = apply_renaming(sigma, c.observer, live, threads)
    conf = Configuration(env2, ResourceEnv(alloc2, c.resources.fresh_counter), make_par(th2), c.witness)
    return CanonicalConfiguration(key, conf, garbage), sigma


# --------------------------------------------------------------------------
# Exploration and dumps


def explore(c: Configuration, depth: int, max_observer_unique: int = 1, max_nodes: int = 20_000) -> tuple:
    """Breadth-first exploration of canonical configurations.

    Returns ``(nodes, edges)`` with nodes keyed by canonical hash.
    """
    root, _ = canonicalize(c)
    nodes = {root.hash: root}
    edges: list = []
    frontier = [root]
    for _ in range(depth):
        nxt = []
        for node in frontier:
            for tr in transitions(node.configuration, max_observer_unique):
                tgt, _ = canonicalize(tr.target)
                edges.append((node.hash, str(tr.label), tr.cost, tr.rule, tgt.hash))
                if tgt.hash not in nodes and len(nodes) < max_nodes:
                    nodes[tgt.hash] = tgt
                    nxt.append(tgt)
        frontier = nxt
    return nodes, edges


def dump_json(c: Configuration, depth: int, max_observer_unique: int = 1) -> dict:
    nodes, edges = explore(c, depth, max_observer_unique)
    return {
        "nodes": [
            {
                "hash": h,
                "observer": format_env(n.configuration.observer).strip().splitlines(),
                "allocated": len(n.configuration.resources.allocated),
                "garbage": n.garbage,
                "process": pretty(n.configuration.process),
            }
            for h, n in nodes.items()
        ],
        "edges": [
            {"source": s, "label": lab, "cost": k, "rule": r, "target": t}
            for s, lab, k, r, t in edges
        ],
    }
