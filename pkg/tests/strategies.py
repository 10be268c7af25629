"""Hypothesis strategies for processes, types and environments."""

from __future__ import annotations

from hypothesis import strategies as st

from picr.syntax import NIL, Alloc, Free, If, In, Out, Par, ProcVar, Rec
from picr.types import A, W, Base, Chan, Mu, TVar, unfold

NAMES = ("a", "b", "c")


@st.composite
def processes(draw, depth: int = 4, names=NAMES, scope=(), pvars=()):
    """Closed process terms over ``names`` plus bound variables."""
    idents = list(names) + list(scope)
    pick = st.sampled_from(idents)
    kinds = ["nil", "out", "in", "alloc", "free", "if", "par", "rec"] + (["var"] if pvars else [])
    kind = draw(st.sampled_from(kinds)) if depth > 0 else draw(st.sampled_from(["nil"] + (["var"] if pvars else [])))
    sub = depth - 1
    if kind == "nil":
        return NIL
    if kind == "var":
        return ProcVar(draw(st.sampled_from(pvars)))
    if kind == "out":
        payload = tuple(draw(st.lists(pick, max_size=2)))
        return Out(draw(pick), payload, draw(processes(sub, names, scope, pvars)))
    if kind == "in":
        n = draw(st.integers(0, 2))
        params = tuple(f"x{len(scope) + k}" for k in range(n))
        return In(draw(pick), params, draw(processes(sub, names, scope + params, pvars)))
    if kind == "alloc":
        x = f"x{len(scope)}"
        return Alloc(x, draw(processes(sub, names, scope + (x,), pvars)))
    if kind == "free":
        return Free(draw(pick), draw(processes(sub, names, scope, pvars)))
    if kind == "if":
        return If(draw(pick), draw(pick), draw(processes(sub, names, scope, pvars)),
                  draw(processes(sub, names, scope, pvars)))
    if kind == "par":
        return Par(draw(processes(sub, names, scope, pvars)), draw(processes(sub, names, scope, pvars)))
    w = f"w{len(pvars)}"
    return Rec(w, draw(processes(sub, names, scope, pvars + (w,))))


ATTRS = st.sampled_from([W, A, 0, 1, 2])
BASES = st.sampled_from([Base("T"), Base("U")])


@st.composite
def types(draw, depth: int = 3, bound=(), guarded=()):
    """Closed contractive types; ``guarded`` lists variables already under
    a channel constructor and so usable as leaves."""
    leaves = [BASES] + ([st.sampled_from([TVar(x) for x in guarded])] if guarded else [])
    if depth <= 0:
        return draw(st.one_of(leaves))
    kind = draw(st.sampled_from(["leaf", "chan", "chan", "mu"]))
    if kind == "leaf":
        return draw(st.one_of(leaves))
    if kind == "chan":
        inner = tuple(bound)
        n = draw(st.integers(0, 2))
        payload = tuple(draw(types(depth - 1, bound, inner)) for _ in range(n))
        return Chan(payload, draw(ATTRS))
    x = f"X{len(bound)}"
    n = draw(st.integers(1, 2))
    payload = tuple(draw(types(depth - 1, bound + (x,), tuple(bound) + (x,))) for _ in range(n))
    return Mu(x, Chan(payload, draw(ATTRS)))


def unfold_somewhere(t, choices):
    """Rewrite ``t`` by unfolding or leaving each recursive node per the
    boolean stream ``choices``; the result is equi-recursively equal."""
    it = iter(choices)

    def go(t, budget):
        if budget == 0:
            return t
        match t:
            case Mu():
                if next(it, False):
                    return go(unfold(t), budget - 1)
                return t
            case Chan(ps, a):
                return Chan(tuple(go(p, budget - 1) for p in ps), a)
        return t

    return go(t, 6)


def variants(t):
    return st.lists(st.booleans(), max_size=12).map(lambda cs: unfold_somewhere(t, cs))


# --------------------------------------------------------------------------
# A typed fragment: unrestricted signal channels plus a carrier channel

TYPED_ENV_TEXT = "a : chan():w\nb : chan():w\np : chan(chan():w):w\n"


@st.composite
def typed_processes(draw, depth: int = 4, scope=(), pvars=()):
    """Processes over the typed fragment; mostly well-typed, callers filter."""
    sig = st.sampled_from(["a", "b"] + [x for x in scope])
    kinds = ["nil", "sig", "recv", "send", "take", "alloc", "par", "rec", "if"] + (["var"] if pvars else [])
    kind = draw(st.sampled_from(kinds)) if depth > 0 else "nil"
    sub = depth - 1
    if kind == "nil":
        return NIL
    if kind == "var":
        return ProcVar(draw(st.sampled_from(pvars)))
    if kind == "sig":
        return Out(draw(sig), (), draw(typed_processes(sub, scope, pvars)))
    if kind == "recv":
        return In(draw(sig), (), draw(typed_processes(sub, scope, pvars)))
    if kind == "send":
        return Out("p", (draw(sig),), draw(typed_processes(sub, scope, pvars)))
    if kind == "take":
        x = f"y{len(scope)}"
        return In("p", (x,), draw(typed_processes(sub, scope + (x,), pvars)))
    if kind == "alloc":
        x = f"z{len(scope)}"
        body = draw(typed_processes(sub, scope, pvars))
        tail = draw(st.sampled_from(["free", "use", "both"]))
        if tail == "free":
            return Alloc(x, Par(body, Free(x, NIL)))
        if tail == "use":
            return Alloc(x, Par(body, Par(Out(x, (), NIL), In(x, (), Free(x, NIL)))))
        return Alloc(x, Par(Out(x, (), NIL), In(x, (), Free(x, body))))
    if kind == "if":
        return If("a", draw(sig), draw(typed_processes(sub, scope, pvars)), draw(typed_processes(sub, scope, pvars)))
    if kind == "par":
        return Par(draw(typed_processes(sub, scope, pvars)), draw(typed_processes(sub, scope, pvars)))
    w = f"w{len(pvars)}"
    return Rec(w, draw(typed_processes(sub, scope, pvars + (w,))))


# --------------------------------------------------------------------------
# Cost padding: same behaviour, different resource profile

def pad(p, plan):
    """Insert allocation noise before prefixes according to ``plan``:
    0 leaves a prefix alone, 1 inserts ``alloc z. free z.``, 2 leaks a
    fresh channel with ``alloc z.``."""
    it = iter(plan)
    counter = iter(range(10_000))

    def noise(q):
        k = next(it, 0)
        if k == 0:
            return q
        z = f"pad{next(counter)}"
        return Alloc(z, Free(z, q)) if k == 1 else Alloc(z, q)

    def go(q):
        match q:
            case Out(c, ps, k):
                return noise(Out(c, ps, go(k)))
            case In(c, ps, k):
                return noise(In(c, ps, go(k)))
            case Par(l, r):
                return Par(go(l), go(r))
            case Rec(w, b):
                return Rec(w, go(b))
            case If(a, b, t, e):
                return If(a, b, go(t), go(e))
            case Alloc(x, k):
                return Alloc(x, go(k))
            case Free(c, k):
                return Free(c, go(k))
        return q

    return go(p)


PLANS = st.lists(st.sampled_from([0, 0, 1, 2]), max_size=8)


@st.composite
def padded_family(draw, size: int = 3, depth: int = 2):
    """A small typed process and ``size`` cost-padded variants of it."""
    base = draw(typed_processes(depth=depth))
    return [pad(base, draw(PLANS)) for _ in range(size)]
