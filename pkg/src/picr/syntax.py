"""Process terms: parsing, printing, substitution and structural normal forms.

Identifiers share one namespace.  Whether an identifier in channel position
is a name or a channel variable depends only on whether an enclosing input
or ``alloc`` binds it; identifiers in process position are process
variables bound by ``rec``.  Value literals such as ``42`` or ``v1`` are
ordinary names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import count
from typing import Iterable, Iterator, Mapping, Union

__all__ = [
    "Alloc", "Free", "If", "In", "Nil", "Out", "Par", "ProcVar", "Process",
    "Rec", "ParseError", "SubstitutionError", "canonicalize_struct",
    "components", "free_names", "free_proc_vars", "make_par", "parse",
    "pretty", "struct_equiv", "substitute", "rename_names", "NIL",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class SubstitutionError(TypeError):
    pass


class Process:
    """Base class of all process terms.

    Terms are immutable.  Equality and hashing go through a serialization
    computed once at construction, which keeps deep terms cheap to use as
    dictionary keys.
    """

    __slots__ = ()
    key: str
    fn: frozenset
    fpv: frozenset

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Process) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "Process") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return pretty(self)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {pretty(self)}>"


def _init(obj, key: str, fn: frozenset, fpv: frozenset) -> None:
    object.__setattr__(obj, "key", key)
    object.__setattr__(obj, "fn", fn)
    object.__setattr__(obj, "fpv", fpv)


_EMPTY: frozenset = frozenset()


@dataclass(frozen=True, eq=False, slots=True)
class Nil(Process):
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(self, "0", _EMPTY, _EMPTY)


@dataclass(frozen=True, eq=False, slots=True)
class Out(Process):
    subject: str
    payload: tuple
    cont: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))
        _init(
            self,
            f"O({self.subject};{','.join(self.payload)};{self.cont.key})",
            self.cont.fn | {self.subject, *self.payload},
            self.cont.fpv,
        )


@dataclass(frozen=True, eq=False, slots=True)
class In(Process):
    subject: str
    params: tuple
    cont: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"repeated input parameter in {self.params}")
        _init(
            self,
            f"I({self.subject};{','.join(self.params)};{self.cont.key})",
            (self.cont.fn - set(self.params)) | {self.subject},
            self.cont.fpv,
        )


@dataclass(frozen=True, eq=False, slots=True)
class If(Process):
    left: str
    right: str
    then: Process
    orelse: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(
            self,
            f"F({self.left};{self.right};{self.then.key};{self.orelse.key})",
            self.then.fn | self.orelse.fn | {self.left, self.right},
            self.then.fpv | self.orelse.fpv,
        )


@dataclass(frozen=True, eq=False, slots=True)
class Rec(Process):
    var: str
    body: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(self, f"R({self.var};{self.body.key})", self.body.fn, self.body.fpv - {self.var})


@dataclass(frozen=True, eq=False, slots=True)
class ProcVar(Process):
    name: str
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(self, f"V({self.name})", _EMPTY, frozenset((self.name,)))


@dataclass(frozen=True, eq=False, slots=True)
class Par(Process):
    left: Process
    right: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(
            self,
            f"P({self.left.key};{self.right.key})",
            self.left.fn | self.right.fn,
            self.left.fpv | self.right.fpv,
        )


@dataclass(frozen=True, eq=False, slots=True)
class Alloc(Process):
    var: str
    cont: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(self, f"A({self.var};{self.cont.key})", self.cont.fn - {self.var}, self.cont.fpv)


@dataclass(frozen=True, eq=False, slots=True)
class Free(Process):
    subject: str
    cont: Process
    key: str = field(init=False, repr=False)
    fn: frozenset = field(init=False, repr=False)
    fpv: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        _init(self, f"D({self.subject};{self.cont.key})", self.cont.fn | {self.subject}, self.cont.fpv)


NIL = Nil()

# --------------------------------------------------------------------------
# Free identifiers


def free_names(p: Process) -> frozenset:
    """Channel identifiers occurring free in ``p``."""
    return p.fn


def free_proc_vars(p: Process) -> frozenset:
    return p.fpv


# --------------------------------------------------------------------------
# Substitution

Replacement = Union[str, Process]

def _fresh_var(base: str, avoid: set) -> str:
    stem = base.split("'")[0]
    for k in count():
        cand = f"{stem}'{k}"
        if cand not in avoid:
            return cand
    raise AssertionError("unreachable")


def _range_names(s: Mapping[str, Replacement]) -> set:
    out: set = set()
    for v in s.values():
        if isinstance(v, str):
            out.add(v)
        else:
            out |= v.fn
            out |= v.fpv
    return out


def substitute(p: Process, s: Mapping[str, Replacement]) -> Process:
    """Capture-avoiding substitution of names for channel variables and of
    terms for process variables."""
    if not s:
        return p
    for k, v in s.items():
        if isinstance(v, str):
            if k in p.fpv and k not in p.fn:
                raise SubstitutionError(f"process variable {k} mapped to name {v}")
        elif isinstance(v, Process):
            if k in p.fn:
                raise SubstitutionError(f"channel variable {k} mapped to a process")
        else:
            raise SubstitutionError(f"cannot substitute {v!r}")
    return _subst(p, dict(s))


def _subst(p: Process, s: dict) -> Process:
    # kinds are resolved by position: names replace identifiers in channel
    # positions, terms replace process variables
    if not s or not ((p.fn | p.fpv) & s.keys()):
        return p
    match p:
        case Out(subj, payload, cont):
            return Out(_name(subj, s), tuple(_name(a, s) for a in payload), _subst(cont, s))
        case In(subj, params, cont):
            params, cont, inner = _enter(params, cont, s, False)
            return In(_name(subj, s), params, _subst(cont, inner))
        case If(a, b, t, e):
            return If(_name(a, s), _name(b, s), _subst(t, s), _subst(e, s))
        case Rec(var, body):
            (var,), body, inner = _enter((var,), body, s, True)
            return Rec(var, _subst(body, inner))
        case ProcVar(name):
            r = s.get(name)
            return r if isinstance(r, Process) else p
        case Par(l, r):
            return Par(_subst(l, s), _subst(r, s))
        case Alloc(var, cont):
            (var,), cont, inner = _enter((var,), cont, s, False)
            return Alloc(var, _subst(cont, inner))
        case Free(subj, cont):
            return Free(_name(subj, s), _subst(cont, s))
    return p


def _name(ident: str, s: dict) -> str:
    r = s.get(ident)
    return r if isinstance(r, str) else ident


def _enter(binders: tuple, body: Process, s: dict, proc_binder: bool):
    if proc_binder:
        inner = {k: v for k, v in s.items() if not (k in binders and isinstance(v, Process))}
    else:
        inner = {k: v for k, v in s.items() if not (k in binders and isinstance(v, str))}
    live = {k: v for k, v in inner.items() if k in body.fn or k in body.fpv}
    if not live:
        return binders, body, live
    clash = set(binders) & _range_names(live)
    if not clash:
        return binders, body, live
    avoid = _range_names(live) | body.fn | body.fpv | set(live) | set(binders)
    renaming: dict = {}
    new_binders = []
    for b in binders:
        if b in clash:
            nb = _fresh_var(b, avoid)
            avoid.add(nb)
            renaming[b] = ProcVar(nb) if proc_binder else nb
            new_binders.append(nb)
        else:
            new_binders.append(b)
    return tuple(new_binders), _subst(body, renaming), live


def rename_names(p: Process, sigma: Mapping[str, str]) -> Process:
    """Apply a name permutation/renaming to free channel identifiers."""
    sigma = {k: v for k, v in sigma.items() if k != v}
    return _subst(p, sigma) if sigma else p


# --------------------------------------------------------------------------
# Structural congruence


def components(p: Process) -> list:
    """Top-level parallel components of ``p`` with ``nil`` dropped."""
    out: list = []
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.right)
            stack.append(q.left)
        elif not isinstance(q, Nil):
            out.append(q)
    return out


def make_par(parts: Iterable[Process]) -> Process:
    parts = list(parts)
    if not parts:
        return NIL
    acc = parts[0]
    for q in parts[1:]:
        acc = Par(acc, q)
    return acc


def canonicalize_struct(p: Process) -> Process:
    """Normal form modulo commutativity, associativity and ``nil`` units.

    Parallel compositions are flattened, ``nil`` components dropped and the
    remaining components sorted by their serialization, at every depth.
    """
    match p:
        case Par():
            parts = sorted(canonicalize_struct(q) for q in components(p))
            flat: list = []
            for q in parts:
                flat.extend(components(q))
            return make_par(sorted(flat))
        case Out(subj, payload, cont):
            return Out(subj, payload, canonicalize_struct(cont))
        case In(subj, params, cont):
            return In(subj, params, canonicalize_struct(cont))
        case If(a, b, t, e):
            return If(a, b, canonicalize_struct(t), canonicalize_struct(e))
        case Rec(var, body):
            return Rec(var, canonicalize_struct(body))
        case Alloc(var, cont):
            return Alloc(var, canonicalize_struct(cont))
        case Free(subj, cont):
            return Free(subj, canonicalize_struct(cont))
    return p


def struct_equiv(p: Process, q: Process) -> bool:
    return canonicalize_struct(p) == canonicalize_struct(q)


# --------------------------------------------------------------------------
# Concrete syntax

KEYWORDS = frozenset({"nil", "if", "then", "else", "rec", "alloc", "free"})

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<id>[A-Za-z0-9_][A-Za-z0-9_']*)
  | (?P<sym>[!?<>().,|=])
  """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks: list = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            toks.append(_Tok("kw" if kind == "id" and val in KEYWORDS else kind, val, line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, closed: bool):
        self.toks = _tokenize(text)
        self.i = 0
        self.closed = closed

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        shown = tok.text or "end of input"
        raise ParseError(f"{msg}, found {shown!r}", tok.line, tok.col)

    def expect_sym(self, sym: str, what: str) -> _Tok:
        t = self.peek()
        if t.kind != "sym" or t.text != sym:
            self.fail(f"expected {sym!r} {what}")
        return self.advance()

    def expect_id(self, what: str) -> str:
        t = self.peek()
        if t.kind != "id":
            self.fail(f"expected identifier {what}")
        return self.advance().text

    def at_sym(self, sym: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == sym

    def at_kw(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == kw

    def parse(self) -> Process:
        p = self.par(frozenset())
        if self.peek().kind != "eof":
            self.fail("unexpected trailing input")
        return p

    def par(self, pvars: frozenset) -> Process:
        left = self.prefix(pvars)
        while self.at_sym("|"):
            self.advance()
            left = Par(left, self.prefix(pvars))
        return left

    def ids(self, close: str, what: str) -> tuple:
        out: list = []
        if self.at_sym(close):
            self.advance()
            return ()
        while True:
            out.append(self.expect_id(what))
            if self.at_sym(","):
                self.advance()
                continue
            self.expect_sym(close, f"to close the {what}")
            return tuple(out)

    def cont(self, pvars: frozenset, optional: bool) -> Process:
        if self.at_sym("."):
            self.advance()
            return self.prefix(pvars)
        if optional:
            return NIL
        self.fail("expected '.'")

    def prefix(self, pvars: frozenset) -> Process:
        t = self.peek()
        if t.kind == "sym" and t.text == "(":
            self.advance()
            p = self.par(pvars)
            self.expect_sym(")", "to close the parenthesis")
            return p
        if t.kind == "kw":
            self.advance()
            if t.text == "nil":
                return NIL
            if t.text == "if":
                a = self.expect_id("after 'if'")
                self.expect_sym("=", "in match")
                b = self.expect_id("in match")
                if not self.at_kw("then"):
                    self.fail("expected 'then'")
                self.advance()
                th = self.prefix(pvars)
                if not self.at_kw("else"):
                    self.fail("expected 'else'")
                self.advance()
                el = self.prefix(pvars)
                return If(a, b, th, el)
            if t.text == "rec":
                w = self.expect_id("after 'rec'")
                self.expect_sym(".", "after the recursion variable")
                return Rec(w, self.prefix(pvars | {w}))
            if t.text == "alloc":
                x = self.expect_id("after 'alloc'")
                self.expect_sym(".", "after the allocated variable")
                return Alloc(x, self.prefix(pvars))
            if t.text == "free":
                x = self.expect_id("after 'free'")
                return Free(x, self.cont(pvars, optional=False))
            self.fail("unexpected keyword", t)
        if t.kind == "id":
            self.advance()
            if self.at_sym("!"):
                self.advance()
                self.expect_sym("<", "to open the payload")
                payload = self.ids(">", "payload")
                return Out(t.text, payload, self.cont(pvars, optional=True))
            if self.at_sym("?"):
                self.advance()
                self.expect_sym("(", "to open the parameters")
                params = self.ids(")", "parameter list")
                if len(set(params)) != len(params):
                    raise ParseError("repeated input parameter", t.line, t.col)
                return In(t.text, params, self.cont(pvars, optional=True))
            if self.closed and t.text not in pvars:
                raise ParseError(f"unbound process variable {t.text!r}", t.line, t.col)
            return ProcVar(t.text)
        self.fail("expected a process")


def parse(text: str, closed: bool = True) -> Process:
    """Parse process text.  With ``closed`` set, free process variables are
    reported as errors."""
    return _Parser(text, closed).parse()


def _fmt(p: Process, ctx: str) -> str:
    # ctx: "top" allows a bare parallel composition, "pre" does not
    match p:
        case Nil():
            return "nil"
        case Out(subj, payload, cont):
            return f"{subj}!<{','.join(payload)}>.{_fmt(cont, 'pre')}"
        case In(subj, params, cont):
            return f"{subj}?({','.join(params)}).{_fmt(cont, 'pre')}"
        case If(a, b, t, e):
            return f"if {a}={b} then {_fmt(t, 'pre')} else {_fmt(e, 'pre')}"
        case Rec(var, body):
            return f"rec {var}. {_fmt(body, 'pre')}"
        case ProcVar(name):
            return name
        case Par(l, r):
            s = f"{_fmt(l, 'top')} | {_fmt(r, 'arg')}"
            return s if ctx == "top" else f"({s})"
        case Alloc(var, cont):
            return f"alloc {var}. {_fmt(cont, 'pre')}"
        case Free(subj, cont):
            return f"free {subj}. {_fmt(cont, 'pre')}"
    raise TypeError(p)


def pretty(p: Process) -> str:
    return _fmt(p, "top")


def walk(p: Process) -> Iterator[Process]:
    """Pre-order traversal of all subterms."""
    stack = [p]
    while stack:
        q = stack.pop()
        yield q
        match q:
            case Out(_, _, c) | In(_, _, c) | Alloc(_, c) | Free(_, c):
                stack.append(c)
            case Rec(_, b):
                stack.append(b)
            case If(_, _, t, e):
                stack.extend((e, t))
            case Par(l, r):
                stack.extend((r, l))
