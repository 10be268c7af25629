"""Amortized typed bisimulation as a two-player game.

A position is ``(Γ, n, L, R)``: a shared observer view, a credit and the two
systems.  The challenger picks a side and a strong move of cost ``k``; the
defender answers on the other side with a weak move carrying the same label
at cost ``l``.  A left challenge leaves credit ``n + l - k``, a right one
``n + k - l``; the credit may never go negative and is clamped at a cap.
The defender wins every infinite play.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from .lts import (
    GENERATED, AllocExt, FreeExt, InLabel, InvalidConfiguration, OutLabel,
    Tau, apply_renaming, canonical_renaming, normalize_env, out_env,
    process_moves, settle, templates, unique_names,
)
from .reduction import System, fresh_name
from .syntax import components, make_par, pretty, rename_names
from .types import Chan, TypeEnv, head, inconsistencies, intern, rep

__all__ = [
    "CostModel", "GameOptions", "Verdict", "check_eq", "check_leq",
    "check_refined", "least_credit", "replay_counterexample", "verify_witness",
]


class CostModel(enum.Enum):
    SIGNED = "signed"
    ABSOLUTE = "absolute"
    ALLOC_ONLY = "alloc-only"

    def apply(self, k: int) -> int:
        if self is CostModel.ABSOLUTE:
            return abs(k)
        if self is CostModel.ALLOC_ONLY:
            return max(k, 0)
        return k


@dataclass(frozen=True)
class GameOptions:
    credit_cap: int = 8
    tau_depth: int = 32
    state_budget: int = 200_000
    cost_model: CostModel = CostModel.SIGNED
    bounded: int | None = None
    max_observer_unique: int = 1
    time_budget: float | None = None


@dataclass
class Verdict:
    result: str  # Holds | Refuted | Inconclusive
    credit: int
    options: GameOptions
    witness: list | None = None
    counterexample: list | None = None
    reason: str | None = None
    closure_total: bool = True
    stats: dict = field(default_factory=dict)
    root: tuple | None = None

    @property
    def holds(self) -> bool:
        return self.result == "Holds"

    @property
    def refuted(self) -> bool:
        return self.result == "Refuted"

    def to_json(self) -> dict:
        o = self.options
        out = {
            "result": self.result,
            "credit": self.credit,
            "bounds": {
                "credit_cap": o.credit_cap,
                "tau_depth": o.tau_depth,
                "state_budget": o.state_budget,
                "cost_model": o.cost_model.value,
                "bounded": o.bounded,
                "closure_total": self.closure_total,
            },
            "stats": dict(self.stats),
        }
        if self.result == "Holds":
            out["witness_size"] = len(self.witness or ())
        elif self.result == "Refuted":
            out["counterexample"] = [_step_json(s) for s in self.counterexample or ()]
        else:
            out["reason"] = self.reason
        return out


def _step_json(s: dict) -> dict:
    return {k: v for k, v in s.items() if not k.startswith("_")}


def _fixed(name: str) -> bool:
    return GENERATED.match(name) is None


def _names(env: TypeEnv, *sides) -> set:
    used = set(env.domain())
    for alloc, threads in sides:
        used |= alloc
        for t in threads:
            used |= t.fn
    return used


def _live(env: TypeEnv, alloc: frozenset, threads: tuple) -> frozenset:
    fn: set = set(env.domain())
    for t in threads:
        fn |= t.fn
    return frozenset(x for x in alloc if x in fn)


class _Game:
    def __init__(self, opts: GameOptions):
        self.o = opts
        self.model = opts.cost_model
        self.bound = (opts.bounded if opts.bounded is not None else opts.credit_cap) + 2
        self.index: dict = {}
        self.raw_index: dict = {}
        self.depth: list = []
        self.pos: list = []
        self.lost: list = []
        self.lost_at: list = []
        self.lost_by: list = []
        self.chal: list = []
        self.alive: list = []
        self.rev: list = []
        self.expanded: list = []
        self.memo: dict = {}
        self.closure_total = True
        self.clock = 0

    # -- positions --------------------------------------------------------

    def position(self, env: TypeEnv, n: int, L: tuple, R: tuple) -> int:
        raw = (env, n, L[0], tuple(t.key for t in L[1]), R[0], tuple(t.key for t in R[1]))
        pid = self.raw_index.get(raw)
        if pid is not None:
            return pid
        dom = env.domain()
        L = (_live(env, *L), settle(dom, *L))
        R = (_live(env, *R), settle(dom, *R))
        sigmas, key = canonical_renaming(env, [L, R], _fixed)
        key = (key, n)
        pid = self.index.get(key)
        if pid is not None:
            self.raw_index[raw] = pid
            return pid
        self.raw_index[raw] = len(self.pos)
        env2, la, lt = apply_renaming(sigmas[0], env, *L)
        _, ra, rt = apply_renaming(sigmas[1], env, *R)
        pid = len(self.pos)
        self.index[key] = pid
        self.pos.append((env2, n, (la, lt), (ra, rt)))
        self.lost.append(False)
        self.lost_at.append(None)
        self.lost_by.append(None)
        self.chal.append(None)
        self.alive.append(None)
        self.rev.append([])
        self.expanded.append(False)
        self.depth.append(0)
        return pid

    def lose(self, pid: int, reason) -> None:
        stack = [(pid, reason)]
        while stack:
            p, why = stack.pop()
            if self.lost[p]:
                continue
            self.lost[p] = True
            self.lost_by[p] = why
            self.clock += 1
            self.lost_at[p] = self.clock
            for pred, ci in self.rev[p]:
                if self.lost[pred]:
                    continue
                self.alive[pred][ci] -= 1
                if self.alive[pred][ci] == 0:
                    stack.append((pred, ci))

    # -- credit -----------------------------------------------------------

    def credit(self, n: int, side: int, k: int, l: int) -> int | None:
        """Credit after a challenge of cost ``k`` on ``side`` answered at ``l``."""
        m = n + l - k if side == 0 else n + k - l
        if m < 0:
            return None
        if self.o.bounded is not None:
            return m if m <= self.o.bounded else None
        return min(m, self.o.credit_cap)

    def clamp(self, c: int) -> int:
        return max(-self.bound, min(self.bound, c))

    # -- weak answers -----------------------------------------------------

    def closure(self, env: TypeEnv, state: tuple, prefer: int) -> list:
        """Internal runs from ``state``: ``(cost, state')`` pairs.

        ``prefer`` is +1 or -1 when only the highest or lowest cost per
        target matters, 0 when every cost must be kept.
        """
        alloc, threads = state
        key = (tuple(t.key for t in threads), alloc, env.domain(), prefer)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        dom = env.domain()
        best: dict = {}
        threads = settle(dom, alloc, threads)
        start = (alloc, threads)
        skey = (tuple(t.key for t in threads), alloc)
        best[skey] = (start, {0})
        frontier = [(0, start, skey)]
        depth = 0
        while frontier:
            if depth == self.o.tau_depth:
                self.closure_total = False
                break
            depth += 1
            nxt = []
            for cost, (a, th), _ in frontier:
                for rule, k, a2, th2, _ in _tau(th, a, dom):
                    th2 = settle(dom, a2, th2)
                    a2 = _live(env, a2, th2)
                    c2 = self.clamp(cost + self.model.apply(k))
                    k2 = (tuple(t.key for t in th2), a2)
                    ent = best.get(k2)
                    if ent is None:
                        best[k2] = ((a2, th2), {c2})
                        nxt.append((c2, (a2, th2), k2))
                        continue
                    costs = ent[1]
                    if c2 in costs:
                        continue
                    if prefer and costs:
                        cur = next(iter(costs))
                        if (c2 - cur) * prefer <= 0:
                            continue
                        costs.clear()
                    costs.add(c2)
                    nxt.append((c2, (a2, th2), k2))
            frontier = nxt
        res = [(c, st) for st, costs in best.values() for c in costs]
        self.memo[key] = res
        return res

    def answers(self, env: TypeEnv, state: tuple, label, env2: TypeEnv, pattern, prefer: int) -> list:
        """Weak answers ``(cost, state')`` to ``label`` from ``state``."""
        pre = self.closure(env, state, prefer)
        if isinstance(label, Tau):
            return pre
        out: dict = {}
        for c1, st in pre:
            for c2, st2 in _strong_match(env, st, label, env2, pattern, self.model):
                for c3, st3 in self.closure(env2, st2, prefer):
                    c = self.clamp(c1 + c2 + c3)
                    k = (tuple(t.key for t in st3[1]), st3[0])
                    ent = out.get(k)
                    if ent is None:
                        out[k] = (st3, {c})
                    elif prefer:
                        cur = next(iter(ent[1]))
                        if (c - cur) * prefer > 0:
                            out[k] = (st3, {c})
                    else:
                        ent[1].add(c)
        return [(c, st) for st, cs in out.values() for c in cs]

    # -- challenges -------------------------------------------------------

    def challenges(self, pid: int) -> list:
        """``(side, label, cost, env', challenger state', pattern)`` moves."""
        env, n, L, R = self.pos[pid]
        res = []
        used = _names(env, L, R)
        for side, (alloc, threads) in enumerate((L, R)):
            for label, k, rule, env2, a2, th2 in process_moves(env, alloc, threads, observer_alloc=False):
                if isinstance(label, FreeExt):
                    continue
                pattern = None
                if isinstance(label, OutLabel):
                    label, env2, a2, th2, pattern = _externalize(env, label, a2, th2, used)
                res.append((side, label, self.model.apply(k), rule, env2, (a2, tuple(sorted(th2))), pattern))
            if len(unique_names(env)) < self.o.max_observer_unique:
                c, _ = fresh_name(used)
                for tpl in templates(env):
                    env2 = normalize_env(env.add(c, intern(Chan(tuple(rep(i) for i in tpl), 0))))
                    res.append((side, AllocExt(c, tpl), self.model.apply(1), "lAllE", env2, (alloc | {c}, threads), None))
            for c, tid in env.items:
                h = head(rep(tid))
                if isinstance(h, Chan) and h.attr == 0:
                    env2 = normalize_env(env.remove(c, tid))
                    res.append((side, FreeExt(c), self.model.apply(-1), "lFreeE", env2, (alloc - {c}, threads), None))
        return res

    def expand(self, pid: int, queue: deque) -> None:
        self.expanded[pid] = True
        env, n, L, R = self.pos[pid]
        chal = []
        alive = []
        seen: dict = {}
        for side, label, k, rule, env2, st, pattern in self.challenges(pid):
            defender = R if side == 0 else L
            prefer = 0 if self.o.bounded is not None else (1 if side == 0 else -1)
            targets = set()
            for l, dst in self.answers(env, defender, label, env2, pattern, prefer):
                m = self.credit(n, side, k, l)
                if m is None:
                    continue
                pair = (st, dst) if side == 0 else (dst, st)
                q = self.position(env2, m, *pair)
                if not self.expanded[q] and not self.lost[q] and q not in self._queued:
                    self._queued.add(q)
                    self.depth[q] = self.depth[pid] + 1
                    queue.append(q)
                targets.add(q)
            fz = frozenset(targets)
            if fz in seen:
                continue
            seen[fz] = len(chal)
            chal.append((side, label, k, rule, env2, st, fz))
            alive.append(sum(1 for q in fz if not self.lost[q]))
        self.chal[pid] = chal
        self.alive[pid] = alive
        for ci, (*_, fz) in enumerate(chal):
            for q in fz:
                self.rev[q].append((pid, ci))
        for ci, a in enumerate(alive):
            if a == 0:
                self.lose(pid, ci)
                return

    # -- solving ----------------------------------------------------------

    def solve(self, root: int) -> str:
        t0 = time.monotonic()
        queue = deque([root])
        self._queued = {root}
        while queue and not self.lost[root]:
            if len(self.pos) > self.o.state_budget:
                return "budget"
            if self.o.time_budget is not None and time.monotonic() - t0 > self.o.time_budget:
                return "time"
            pid = queue.popleft()
            if self.lost[pid] or self.expanded[pid]:
                continue
            self.expand(pid, queue)
        return "done"

    def pessimistic(self) -> set:
        """Largest set of expanded positions closed under the transfer
        property when unexplored positions count as lost."""
        good = {p for p in range(len(self.pos)) if self.expanded[p] and not self.lost[p]}
        changed = True
        while changed:
            changed = False
            for p in list(good):
                for *_, fz in self.chal[p]:
                    if not any(q in good for q in fz):
                        good.discard(p)
                        changed = True
                        break
        return good

    def ranks(self) -> dict:
        """Rounds the challenger needs from each lost position."""
        lost = [p for p in range(len(self.pos)) if self.lost[p] and self.chal[p] is not None]
        inf = float("inf")
        rank = {p: inf for p in lost}
        changed = True
        while changed:
            changed = False
            for p in lost:
                best = rank[p]
                for ci, (*_, fz) in enumerate(self.chal[p]):
                    r = 1 + max((rank.get(q, inf) for q in fz), default=-1)
                    if r < best:
                        best = r
                        self.lost_by[p] = ci
                if best < rank[p]:
                    rank[p] = best
                    changed = True
        return rank

    def counterexample(self, root: int) -> list:
        """Shortest refutation: the challenger picks the quickest winning
        challenge, the defender the answer that holds out longest."""
        rank = self.ranks()
        script = []
        p = root
        while True:
            ci = self.lost_by[p]
            side, label, k, rule, env2, st, fz = self.chal[p][ci]
            env, n, _, _ = self.pos[p]
            step = {
                "side": "left" if side == 0 else "right",
                "label": str(label),
                "rule": rule,
                "cost": k,
                "credit": n,
                "_pos": p,
                "_challenge": ci,
            }
            if not fz:
                step["answer"] = None
                script.append(step)
                return script
            q = max(fz, key=lambda x: (rank[x], x))
            step["answer"] = {"credit": self.pos[q][1], "_pos": q}
            script.append(step)
            p = q


def _tau(threads: tuple, alloc: frozenset, dom: frozenset):
    from .reduction import tau_moves
    return tau_moves(threads, alloc, dom)


def _externalize(env: TypeEnv, label: OutLabel, alloc: frozenset, threads: tuple, used: set):
    """Rename payload names unknown to the observer to fresh shared names,
    so both sides can emit the same label."""
    dom = env.domain()
    sigma: dict = {}
    avoid = set(used)
    pattern = []
    for x in label.payload:
        if x in dom:
            pattern.append(None)
            continue
        if x not in sigma:
            e, _ = fresh_name(avoid)
            avoid.add(e)
            sigma[x] = e
        pattern.append(sigma[x])
    payload = tuple(sigma.get(x, x) for x in label.payload)
    env2 = out_env(env, label.subject, label.via, payload)
    a2, th2 = alloc, threads
    if sigma:
        a2 = frozenset(sigma.get(x, x) for x in alloc)
        th2 = tuple(rename_names(t, sigma) if t.fn & sigma.keys() else t for t in threads)
    return OutLabel(label.subject, payload, label.via), env2, a2, th2, tuple(pattern)


def _strong_match(env: TypeEnv, state: tuple, label, env2: TypeEnv, pattern, model: CostModel):
    alloc, threads = state
    dom = env.domain()
    if isinstance(label, OutLabel):
        from .syntax import Out
        for i, t in enumerate(threads):
            if not (isinstance(t, Out) and t.subject == label.subject and len(t.payload) == len(label.payload)):
                continue
            sigma: dict = {}
            back: dict = {}
            ok = True
            for d, e, pat in zip(t.payload, label.payload, pattern):
                if pat is None:
                    ok = d == e
                else:
                    ok = d not in dom and sigma.get(d, e) == e and back.get(e, d) == d
                    sigma[d] = e
                    back[e] = d
                if not ok:
                    break
            if not ok:
                continue
            rest = threads[:i] + threads[i + 1:] + tuple(components(t.cont))
            a2 = alloc
            if sigma:
                a2 = frozenset(sigma.get(x, x) for x in alloc)
                rest = tuple(rename_names(u, sigma) if u.fn & sigma.keys() else u for u in rest)
            yield 0, (a2, tuple(sorted(rest)))
    elif isinstance(label, InLabel):
        from .syntax import In, substitute
        for i, t in enumerate(threads):
            if isinstance(t, In) and t.subject == label.subject and len(t.params) == len(label.payload):
                body = substitute(t.cont, dict(zip(t.params, label.payload)))
                rest = threads[:i] + threads[i + 1:] + tuple(components(body))
                yield 0, (alloc, tuple(sorted(rest)))
    elif isinstance(label, AllocExt):
        yield model.apply(1), (alloc | {label.name}, threads)
    elif isinstance(label, FreeExt):
        if label.name in alloc:
            yield model.apply(-1), (alloc - {label.name}, threads)


# --------------------------------------------------------------------------
# Public entry points


def _validate(env: TypeEnv, s: System, which: str) -> None:
    missing = env.domain() - s.resources.allocated
    if missing:
        raise InvalidConfiguration(f"{which}: observer names not allocated: {', '.join(sorted(missing))}")
    problems = inconsistencies(env)
    if problems:
        raise InvalidConfiguration("observer environment is inconsistent: " + "; ".join(problems))


def _side(s: System) -> tuple:
    return (s.resources.allocated, tuple(sorted(components(s.process))))


def check_leq(env: TypeEnv, left: System, right: System, credit: int = 0,
              opts: GameOptions = GameOptions()) -> Verdict:
    """Decide ``env ⊨ left ≲^credit right`` within the bounds in ``opts``."""
    if credit < 0:
        raise ValueError("credit must be non-negative")
    if opts.credit_cap < credit:
        raise ValueError(f"credit cap {opts.credit_cap} is below the credit {credit}")
    if opts.bounded is not None and (opts.bounded < credit or opts.bounded > opts.credit_cap):
        raise ValueError("bounded mode needs credit <= m <= credit cap")
    _validate(env, left, "left")
    _validate(env, right, "right")
    env = normalize_env(env)
    t0 = time.monotonic()
    g = _Game(opts)
    root = g.position(env, credit, _side(left), _side(right))
    status = g.solve(root)
    stats = {"states": len(g.pos), "expanded": sum(g.expanded)}
    v = Verdict("Inconclusive", credit, opts, closure_total=g.closure_total, stats=stats, root=g.pos[root])
    if g.lost[root]:
        v.result = "Refuted"
        v.counterexample = g.counterexample(root)
        _attach_positions(g, v.counterexample)
    elif status == "done":
        v.result = "Holds"
        v.witness = [g.pos[p] for p in range(len(g.pos)) if not g.lost[p] and g.expanded[p]]
    else:
        good = g.pessimistic()
        if root in good:
            v.result = "Holds"
            v.witness = [g.pos[p] for p in good]
        else:
            v.reason = "state budget" if status == "budget" else "time budget"
    stats["time"] = round(time.monotonic() - t0, 3)
    return v


def _attach_positions(g: _Game, script: list) -> None:
    for step in script:
        p = step["_pos"]
        env, n, L, R = g.pos[p]
        step["_position"] = g.pos[p]
        step["_move"] = g.chal[p][step["_challenge"]]
        step["left"] = pretty(make_par(L[1]))
        step["right"] = pretty(make_par(R[1]))
        step["observer"] = str(env)
        if step["answer"] is not None:
            step["_answer"] = g.pos[step["answer"]["_pos"]]
            step["answer"] = {"credit": step["answer"]["credit"]}


def least_credit(env: TypeEnv, left: System, right: System, opts: GameOptions = GameOptions()) -> Verdict:
    """The first credit in ``0..cap`` at which the preorder holds, or the
    verdict at the cap when none does."""
    v = None
    for n in range(opts.credit_cap + 1):
        v = check_leq(env, left, right, n, opts)
        if v.holds:
            break
    return v


def check_eq(env: TypeEnv, left: System, right: System, opts: GameOptions = GameOptions()) -> tuple:
    """Both directions, each at its least sufficient credit."""
    return least_credit(env, left, right, opts), least_credit(env, right, left, opts)


def check_refined(env: TypeEnv, left: System, right: System, opts: GameOptions = GameOptions()) -> Verdict:
    """Signed preorder, strengthened by the allocation-only preorder when the
    two systems are equally efficient in the signed sense.  Credits are
    searched independently for each part."""
    signed = replace(opts, cost_model=CostModel.SIGNED)
    v = least_credit(env, left, right, signed)
    parts = {"signed": v.credit if v.holds else None, "reverse": None, "alloc_only": None}
    v.stats["refined"] = parts
    if not v.holds:
        return v
    back = least_credit(env, right, left, signed)
    parts["reverse"] = back.credit if back.holds else None
    if not back.holds:
        return v
    w = least_credit(env, left, right, replace(opts, cost_model=CostModel.ALLOC_ONLY))
    parts["alloc_only"] = w.credit if w.holds else None
    w.stats["refined"] = parts
    return w


# --------------------------------------------------------------------------
# Independent checking


def _dfs_closure(env: TypeEnv, state: tuple, depth: int, model: CostModel, bound: int) -> set:
    out: set = set()
    dom = env.domain()

    def go(st: tuple, cost: int, d: int) -> None:
        key = (cost, st[0], st[1])
        if key in out:
            return
        out.add(key)
        if d == 0:
            return
        for _, k, a2, th2, _ in _tau(st[1], st[0], dom):
            th2 = settle(dom, a2, th2)
            go((_live(env, a2, th2), th2), max(-bound, min(bound, cost + model.apply(k))), d - 1)

    go((state[0], settle(dom, *state)), 0, depth)
    return {(c, (a, t)) for c, a, t in out}


def _key(env: TypeEnv, n: int, L: tuple, R: tuple) -> tuple:
    dom = env.domain()
    L = (_live(env, *L), settle(dom, *L))
    R = (_live(env, *R), settle(dom, *R))
    _, key = canonical_renaming(env, [L, R], _fixed)
    return key, n


def verify_witness(witness: Iterable, opts: GameOptions) -> list:
    """Check the transfer property on every position of ``witness``.

    Weak answers are recomputed by depth-first search without sharing any
    state with the solver.  Returns a list of problems (empty when valid).
    """
    witness = list(witness)
    members: dict = {}
    for env, n, L, R in witness:
        key, _ = _key(env, n, L, R)
        members.setdefault(key, set()).add(n)
    bound = (opts.bounded if opts.bounded is not None else opts.credit_cap) + 2
    probe = _Game(opts)
    problems = []

    def member(env, m, L, R) -> bool:
        key, _ = _key(env, m, L, R)
        credits = members.get(key, ())
        if opts.bounded is not None:
            return m in credits
        return any(c <= m for c in credits)

    for env, n, L, R in witness:
        pid = probe.position(env, n, L, R)
        for side, label, k, rule, env2, st, pattern in probe.challenges(pid):
            penv, pn, pL, pR = probe.pos[pid]
            defender = pR if side == 0 else pL
            ok = False
            pre = _dfs_closure(penv, defender, opts.tau_depth, opts.cost_model, bound)
            cands = pre if isinstance(label, Tau) else {
                (c1 + c2 + c3, s3)
                for c1, s1 in pre
                for c2, s2 in _strong_match(penv, s1, label, env2, pattern, opts.cost_model)
                for c3, s3 in _dfs_closure(env2, s2, opts.tau_depth, opts.cost_model, bound)
            }
            for l, dst in cands:
                m = probe.credit(pn, side, k, l)
                if m is None:
                    continue
                pair = (st, dst) if side == 0 else (dst, st)
                if member(env2, m, *pair):
                    ok = True
                    break
            if not ok:
                problems.append(f"unmatched {'left' if side == 0 else 'right'} challenge {label} at credit {n}")
                break
    return problems


def replay_counterexample(v: Verdict) -> bool:
    """Re-run a refutation script move by move: each challenge must be a
    legal strong move, each chosen answer a legal weak answer, and the last
    challenge must have no answer keeping the credit non-negative."""
    if not v.refuted or not v.counterexample:
        return False
    opts = v.options
    bound = (opts.bounded if opts.bounded is not None else opts.credit_cap) + 2
    probe = _Game(opts)
    for i, step in enumerate(v.counterexample):
        env, n, L, R = step["_position"]
        pid = probe.position(env, n, L, R)
        side, label, k, rule, env2, st, _ = step["_move"]
        moves = [m for m in probe.challenges(pid) if m[0] == side and str(m[1]) == str(label) and m[2] == k]
        if not moves:
            return False
        penv, pn, pL, pR = probe.pos[pid]
        defender = pR if side == 0 else pL
        found_any = False
        for _, lab, kk, _, e2, s2, pat in moves:
            pre = _dfs_closure(penv, defender, opts.tau_depth, opts.cost_model, bound)
            cands = pre if isinstance(lab, Tau) else {
                (c1 + c2 + c3, s3)
                for c1, s1 in pre
                for c2, s2b in _strong_match(penv, s1, lab, e2, pat, opts.cost_model)
                for c3, s3 in _dfs_closure(e2, s2b, opts.tau_depth, opts.cost_model, bound)
            }
            valid = []
            for l, dst in cands:
                m = probe.credit(pn, side, kk, l)
                if m is not None:
                    pair = (s2, dst) if side == 0 else (dst, s2)
                    valid.append(_key(e2, m, *pair))
            if step["answer"] is None:
                if valid:
                    continue
                return i == len(v.counterexample) - 1
            ae, an, aL, aR = step["_answer"]
            if _key(ae, an, aL, aR) in valid:
                found_any = True
                break
        if step["answer"] is None:
            return False
        if not found_any:
            return False
    return False
