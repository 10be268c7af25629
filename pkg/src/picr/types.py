"""Channel types with usage attributes, equi-recursive equality, splitting,
subtyping and multiset type environments.

Attributes are encoded as integers: ``W`` (unrestricted), ``A`` (affine)
and any ``i >= 0`` for unique-after-``i``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

W = -1
A = -2

__all__ = [
    "A", "W", "Base", "Chan", "Mu", "ProcT", "TVar", "Type", "TypeEnv",
    "TypeSyntaxError", "UNDEFINED", "attr_decrement", "attr_le", "attr_str",
    "can_split", "consistent", "env_join", "env_revise", "env_split", "format_env",
    "head", "inconsistencies", "intern", "is_duplicable", "parse_env", "parse_type",
    "subtype", "type_equal", "type_str", "unfold", "check_type",
]


class TypeSyntaxError(ValueError):
    pass


class _Undefined:
    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Undefined()


@dataclass(frozen=True, slots=True)
class Base:
    """Opaque value type named by a free type identifier (e.g. ``T1``)."""
    name: str


@dataclass(frozen=True, slots=True)
class ProcT:
    pass


@dataclass(frozen=True, slots=True)
class Chan:
    payload: tuple
    attr: int


@dataclass(frozen=True, slots=True)
class TVar:
    name: str


@dataclass(frozen=True, slots=True)
class Mu:
    var: str
    body: "Type"


Type = Base | ProcT | Chan | TVar | Mu
PROC = ProcT()


def attr_str(a: int) -> str:
    return {W: "w", A: "a"}.get(a, f"u({a})")


def type_str(t: Type) -> str:
    match t:
        case Base(n):
            return n
        case ProcT():
            return "proc"
        case Chan(ts, a):
            return f"chan({', '.join(type_str(x) for x in ts)}):{attr_str(a)}"
        case TVar(n):
            return n
        case Mu(x, b):
            return f"mu {x}. {type_str(b)}"
    raise TypeError(t)


# --------------------------------------------------------------------------
# Well-formedness and unfolding


def check_type(t: Type) -> None:
    """Raise ``TypeSyntaxError`` unless ``t`` is closed and contractive."""

    def go(t: Type, bound: dict) -> None:
        # bound maps a type variable to whether a Chan separates it from its binder
        match t:
            case TVar(x):
                if x not in bound:
                    raise TypeSyntaxError(f"unbound type variable {x}")
                if not bound[x]:
                    raise TypeSyntaxError(f"type variable {x} is not under a channel constructor")
            case Mu(x, b):
                go(b, {**bound, x: False})
            case Chan(ts, a):
                if a < A:
                    raise TypeSyntaxError(f"bad attribute {a}")
                inner = {k: True for k in bound}
                for s in ts:
                    go(s, inner)

    go(t, {})


@lru_cache(maxsize=None)
def _checked(t: Type) -> Type:
    check_type(t)
    return t


def _tsubst(t: Type, x: str, r: Type) -> Type:
    match t:
        case TVar(y):
            return r if y == x else t
        case Mu(y, b):
            return t if y == x else Mu(y, _tsubst(b, x, r))
        case Chan(ts, a):
            return Chan(tuple(_tsubst(s, x, r) for s in ts), a)
    return t


def unfold(t: Type) -> Type:
    """One unfolding of a top-level recursive type."""
    if isinstance(t, Mu):
        return _tsubst(t.body, t.var, t)
    return t


_head_cache: dict = {}


def head(t: Type) -> Type:
    """Unfold top-level ``mu`` binders until a constructor is exposed."""
    h = _head_cache.get(t)
    if h is None:
        h = t
        while isinstance(h, Mu):
            h = unfold(h)
        _head_cache[t] = h
    return h


# --------------------------------------------------------------------------
# Equality, subtyping, splitting


def type_equal(t1: Type, t2: Type) -> bool:
    """Equality under the equi-recursive interpretation, decided as a
    bisimulation over the finitely many unfolded subterm pairs.  Raises
    ``TypeSyntaxError`` on open or non-contractive input."""
    _checked(t1)
    _checked(t2)
    seen: set = set()
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        if a == b or (a, b) in seen:
            continue
        seen.add((a, b))
        ha, hb = head(a), head(b)
        if isinstance(ha, Chan) and isinstance(hb, Chan):
            if ha.attr != hb.attr or len(ha.payload) != len(hb.payload):
                return False
            stack.extend(zip(ha.payload, hb.payload))
        elif ha != hb:
            return False
    return True


def payload_equal(p1: Sequence[Type], p2: Sequence[Type]) -> bool:
    return len(p1) == len(p2) and all(type_equal(a, b) for a, b in zip(p1, p2))


def attr_le(a1: int, a2: int) -> bool:
    """Reflexive-transitive closure of the attribute subtyping steps."""
    if a1 == a2:
        return True
    if a1 >= 0:
        return a2 == W or a2 == A or (a2 >= 0 and a1 <= a2)
    return a1 == W and a2 == A


def subtype(t1: Type, t2: Type) -> bool:
    h1, h2 = head(_checked(t1)), head(_checked(t2))
    if isinstance(h1, Chan) and isinstance(h2, Chan):
        return attr_le(h1.attr, h2.attr) and payload_equal(h1.payload, h2.payload)
    return type_equal(t1, t2)


def attr_decrement(a: int):
    """``None`` when the permission is used up, ``UNDEFINED`` for unique-now."""
    if a == A:
        return None
    if a == W:
        return W
    if a == 0:
        return UNDEFINED
    return a - 1


def is_duplicable(t: Type) -> bool:
    h = head(t)
    return isinstance(h, (Base, ProcT)) or (isinstance(h, Chan) and h.attr == W)


def can_split(t: Type, t1: Type, t2: Type) -> bool:
    h, h1, h2 = head(t), head(t1), head(t2)
    if isinstance(h, ProcT):
        return isinstance(h1, ProcT) and isinstance(h2, ProcT)
    if isinstance(h, Base):
        return h1 == h and h2 == h
    if not (isinstance(h, Chan) and isinstance(h1, Chan) and isinstance(h2, Chan)):
        return False
    if not (payload_equal(h.payload, h1.payload) and payload_equal(h.payload, h2.payload)):
        return False
    if h.attr == W:
        return h1.attr == W and h2.attr == W
    if h.attr >= 0:
        want = {A, h.attr + 1}
        return {h1.attr, h2.attr} == want
    return False


def with_attr(t: Type, a: int) -> Chan:
    h = head(t)
    assert isinstance(h, Chan), t
    return Chan(h.payload, a)


# --------------------------------------------------------------------------
# Interning: one representative per equivalence class

_reps: list = []
_rep_index: dict = {}
_by_shape: dict = {}


def _shape(t: Type):
    h = head(t)
    if isinstance(h, Chan):
        return ("c", h.attr, len(h.payload))
    return h


def intern(t: Type) -> int:
    """Index of the canonical representative of ``t``'s equality class."""
    i = _rep_index.get(t)
    if i is not None:
        return i
    shape = _shape(t)
    for j in _by_shape.get(shape, ()):
        if type_equal(t, _reps[j]):
            _rep_index[t] = j
            return j
    check_type(t)
    j = len(_reps)
    _reps.append(t)
    _rep_index[t] = j
    _by_shape.setdefault(shape, []).append(j)
    return j


def rep(i: int) -> Type:
    return _reps[i]


# --------------------------------------------------------------------------
# Environments


class TypeEnv:
    """An immutable multiset of ``(identifier, type)`` assumptions.

    Types are stored by interned representative so that multiset equality
    coincides with equality modulo type equivalence.
    """

    __slots__ = ("items", "_hash")

    def __init__(self, items: Iterable = ()):
        norm = []
        for name, t in items:
            norm.append((name, t if isinstance(t, int) else intern(t)))
        norm.sort()
        self.items = tuple(norm)
        self._hash = hash(self.items)

    @classmethod
    def _raw(cls, items: tuple) -> "TypeEnv":
        e = cls.__new__(cls)
        e.items = items
        e._hash = hash(items)
        return e

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypeEnv) and self.items == other.items

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator:
        for n, i in self.items:
            yield n, _reps[i]

    def __repr__(self) -> str:
        return f"TypeEnv({self})"

    def __str__(self) -> str:
        return ", ".join(f"{n}: {type_str(_reps[i])}" for n, i in self.items)

    def domain(self) -> frozenset:
        return frozenset(n for n, _ in self.items)

    def types_of(self, name: str) -> list:
        return [_reps[i] for n, i in self.items if n == name]

    def ids_of(self, name: str) -> list:
        return [i for n, i in self.items if n == name]

    def add(self, name: str, t) -> "TypeEnv":
        i = t if isinstance(t, int) else intern(t)
        return TypeEnv._raw(tuple(sorted(self.items + ((name, i),))))

    def add_many(self, pairs: Iterable) -> "TypeEnv":
        extra = tuple((n, t if isinstance(t, int) else intern(t)) for n, t in pairs)
        return TypeEnv._raw(tuple(sorted(self.items + extra))) if extra else self

    def remove(self, name: str, t) -> "TypeEnv":
        i = t if isinstance(t, int) else intern(t)
        items = list(self.items)
        try:
            items.remove((name, i))
        except ValueError:
            raise KeyError(f"no assumption {name}: {type_str(_reps[i])}") from None
        return TypeEnv._raw(tuple(items))

    def without(self, names: Iterable[str]) -> "TypeEnv":
        names = set(names)
        return TypeEnv._raw(tuple(p for p in self.items if p[0] not in names))

    def restrict(self, names: Iterable[str]) -> "TypeEnv":
        names = set(names)
        return TypeEnv._raw(tuple(p for p in self.items if p[0] in names))

    def union(self, other: "TypeEnv") -> "TypeEnv":
        return TypeEnv._raw(tuple(sorted(self.items + other.items)))

    def rename(self, sigma: dict) -> "TypeEnv":
        return TypeEnv._raw(tuple(sorted((sigma.get(n, n), i) for n, i in self.items)))

    def counter(self) -> Counter:
        return Counter(self.items)


def env_split(env: TypeEnv, name: str, t: Type, t1: Type, t2: Type) -> TypeEnv:
    if not can_split(t, t1, t2):
        raise ValueError(f"{type_str(t)} does not split into {type_str(t1)} and {type_str(t2)}")
    return env.remove(name, t).add_many([(name, t1), (name, t2)])


def env_join(env: TypeEnv, name: str, t1: Type, t2: Type, t: Type) -> TypeEnv:
    if not can_split(t, t1, t2):
        raise ValueError(f"{type_str(t1)} and {type_str(t2)} do not join into {type_str(t)}")
    return env.remove(name, t1).remove(name, t2).add(name, t)


def env_revise(env: TypeEnv, name: str, new_payload: Sequence[Type]) -> TypeEnv:
    for t in env.types_of(name):
        h = head(t)
        if isinstance(h, Chan) and h.attr == 0:
            return env.remove(name, t).add(name, Chan(tuple(new_payload), 0))
    raise ValueError(f"{name} has no unique-now assumption to revise")


def consistent(env: TypeEnv) -> bool:
    """Whether ``env`` is derivable from a partial map by structural rules.

    Per identifier: unrestricted copies together with affine weakenings of
    them; a single unique-after-``j`` assumption with at most ``j`` affine
    companions; affine assumptions alone; value and process assumptions
    that agree.  Payloads must agree throughout.
    """
    return not inconsistencies(env)


def inconsistencies(env: TypeEnv) -> list:
    """Per-name reasons why ``env`` is not consistent (empty when it is)."""
    groups: dict = {}
    for n, t in env:
        groups.setdefault(n, []).append(head(t))
    out = []
    for n, ts in sorted(groups.items()):
        why = _group_problem(ts)
        if why:
            out.append(f"{n}: {why}")
    return out


def _group_problem(ts: list) -> str | None:
    chans = [t for t in ts if isinstance(t, Chan)]
    others = [t for t in ts if not isinstance(t, Chan)]
    if others:
        if chans:
            return "used both as a channel and as a value"
        if any(o != others[0] for o in others):
            return "value assumptions disagree"
        return None
    first = chans[0].payload
    if not all(payload_equal(first, c.payload) for c in chans[1:]):
        return "payload types disagree"
    attrs = [c.attr for c in chans]
    uniq = [a for a in attrs if a >= 0]
    n_aff = attrs.count(A)
    if not uniq:
        return None
    if len(uniq) > 1:
        return "more than one unique assumption"
    if W in attrs:
        return "unique assumption beside an unrestricted one"
    if n_aff > uniq[0]:
        return f"{n_aff} affine assumptions exceed unique-after-{uniq[0]}"
    return None


# --------------------------------------------------------------------------
# Concrete syntax

_TTOK = re.compile(r"\s*(?:(?P<id>[A-Za-z_][A-Za-z0-9_']*)|(?P<num>\d+)|(?P<sym>[(),:.]))")


class _TParser:
    def __init__(self, text: str):
        self.text = text
        self.toks: list = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TTOK.match(text, pos)
            if m is None or m.end() == pos:
                raise TypeSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r} in type {text!r}")
            self.toks.append((m.lastgroup, m.group(m.lastgroup)))
            pos = m.end()
        self.toks.append(("eof", ""))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind: str, val: str | None = None) -> str:
        k, v = self.toks[self.i]
        if k != kind or (val is not None and v != val):
            want = val or kind
            raise TypeSyntaxError(f"expected {want!r} in type {self.text!r}, found {v or 'end'!r}")
        self.i += 1
        return v

    def typ(self, bound: frozenset) -> Type:
        k, v = self.peek()
        if k == "id" and v == "proc":
            self.i += 1
            return PROC
        if k == "id" and v == "mu":
            self.i += 1
            x = self.take("id")
            self.take("sym", ".")
            return Mu(x, self.typ(bound | {x}))
        if k == "id" and v == "chan":
            self.i += 1
            self.take("sym", "(")
            args: list = []
            if self.peek() != ("sym", ")"):
                args.append(self.typ(bound))
                while self.peek() == ("sym", ","):
                    self.i += 1
                    args.append(self.typ(bound))
            self.take("sym", ")")
            self.take("sym", ":")
            return Chan(tuple(args), self.attr())
        if k == "id":
            self.i += 1
            return TVar(v) if v in bound else Base(v)
        raise TypeSyntaxError(f"expected a type in {self.text!r}, found {v or 'end'!r}")

    def attr(self) -> int:
        v = self.take("id")
        if v == "w":
            return W
        if v == "a":
            return A
        if v == "u":
            if self.peek() == ("sym", "("):
                self.i += 1
                n = int(self.take("num"))
                self.take("sym", ")")
                return n
            return 0
        raise TypeSyntaxError(f"unknown attribute {v!r}")


def parse_type(text: str) -> Type:
    p = _TParser(text)
    t = p.typ(frozenset())
    if p.peek()[0] != "eof":
        raise TypeSyntaxError(f"trailing input in type {text!r}")
    check_type(t)
    return t


def parse_env(text: str) -> TypeEnv:
    """Parse ``IDENT : TYPE`` lines; repeated identifiers build a multiset."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise TypeSyntaxError(f"line {lineno}: expected 'IDENT : TYPE'")
        name, typ = line.split(":", 1)
        name = name.strip()
        if not re.fullmatch(r"[A-Za-z0-9_][A-Za-z0-9_']*", name):
            raise TypeSyntaxError(f"line {lineno}: bad identifier {name!r}")
        try:
            pairs.append((name, parse_type(typ)))
        except TypeSyntaxError as e:
            raise TypeSyntaxError(f"line {lineno}: {e}") from None
    return TypeEnv(pairs)


def format_env(env: TypeEnv) -> str:
    return "".join(f"{n} : {type_str(t)}\n" for n, t in env)
