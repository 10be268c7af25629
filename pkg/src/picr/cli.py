"""Command-line front end.

Exit codes: 0 success or Holds, 1 negative verdict, 2 usage or
configuration error (and Inconclusive for ``bisim``).

Process and environment arguments are file paths, ``corpus:NAME`` for a
bundled file, or the name of a system in a ``--workspace`` manifest.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .bisim import CostModel, GameOptions, check_leq, check_refined, least_credit
from .lts import Configuration, InvalidConfiguration, dump_json
from .reduction import System, format_trace, run, trace_json
from .syntax import ParseError, Process, parse
from .typecheck import check_process
from .types import TypeEnv, TypeSyntaxError, parse_env

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Inputs


def read_source(ref: str, base: Path | None = None) -> str:
    if ref.startswith("corpus:"):
        res = resources.files("picr") / "corpus" / ref[len("corpus:"):]
        if not res.is_file():
            raise UsageError(f"no bundled file {ref!r}")
        return res.read_text()
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    try:
        return path.read_text()
    except OSError as e:
        raise UsageError(f"cannot read {ref}: {e.strerror or e}") from e


@dataclass(frozen=True)
class SystemDef:
    name: str
    env: TypeEnv | None
    allocated: tuple | None
    process: Process


def parse_alloc(text: str | None) -> tuple | None:
    if text is None:
        return None
    names = tuple(n for n in (x.strip() for x in text.replace(",", " ").split()) if n)
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise UsageError(f"duplicate allocated channels: {', '.join(dup)}")
    return names


def load_workspace(ref: str) -> dict:
    """Read an INI manifest; each section is a system with keys ``process``,
    optional ``env`` and optional ``alloc``."""
    text = read_source(ref)
    base = None if ref.startswith("corpus:") else Path(ref).parent
    prefix = "corpus:" if ref.startswith("corpus:") else ""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=ref)
    except configparser.Error as e:
        raise UsageError(f"bad workspace {ref}: {e}") from e
    out = {}
    for name in cp.sections():
        sec = cp[name]
        if "process" not in sec:
            raise UsageError(f"workspace system {name!r} has no process")
        proc = _parse_process(read_source(prefix + sec["process"], base), sec["process"])
        env = _parse_env(read_source(prefix + sec["env"], base), sec["env"]) if "env" in sec else None
        out[name] = SystemDef(name, env, parse_alloc(sec.get("alloc")), proc)
    return out


def _parse_process(text: str, where: str) -> Process:
    try:
        return parse(text)
    except ParseError as e:
        raise UsageError(f"{where}: {e}") from e


def _parse_env(text: str, where: str) -> TypeEnv:
    try:
        return parse_env(text)
    except TypeSyntaxError as e:
        raise UsageError(f"{where}: {e}") from e


def resolve(ref: str, workspace: dict | None, env_ref: str | None, alloc: str | None) -> SystemDef:
    """A system from a workspace name or a process file, with command-line
    ``--env`` and ``--alloc`` taking precedence."""
    if workspace is not None and ref in workspace:
        sd = workspace[ref]
    else:
        sd = SystemDef(ref, None, None, _parse_process(read_source(ref), ref))
    env = _parse_env(read_source(env_ref), env_ref) if env_ref else sd.env
    allocated = parse_alloc(alloc) if alloc is not None else sd.allocated
    return SystemDef(sd.name, env, allocated, sd.process)


def allocation(sd: SystemDef) -> frozenset:
    if sd.allocated is not None:
        return frozenset(sd.allocated)
    dom = sd.env.domain() if sd.env is not None else frozenset()
    return frozenset(dom | sd.process.fn)


def emit(obj: dict, kind: str) -> None:
    print(json.dumps({"schema": f"picr/{kind}/v{SCHEMA_VERSION}", **obj}, indent=2))


# --------------------------------------------------------------------------
# Commands


def cmd_typecheck(a) -> int:
    sd = resolve(a.file, a.ws, a.env, None)
    env = sd.env if sd.env is not None else TypeEnv()
    v = check_process(env, sd.process)
    if a.emit == "json":
        emit({"file": a.file, **v.to_json()}, "typecheck")
    else:
        print("accepted" if v.accepted else "rejected")
        for line in v.derivation if v.accepted else v.diagnostics:
            print("  " + line)
    return EXIT_OK if v.accepted else EXIT_NEGATIVE


def cmd_run(a) -> int:
    if a.input:
        raise UsageError("run has no observer; replay visible actions with `picr lts` instead")
    sd = resolve(a.file, a.ws, None, a.alloc)
    s = System.of(sd.process, sd.allocated)
    traces = run(s, a.fuel, a.policy)
    if a.emit == "json":
        emit({"policy": a.policy, "fuel": a.fuel, "traces": [trace_json(t) for t in traces]}, "trace")
    else:
        for i, t in enumerate(traces):
            if len(traces) > 1:
                print(f"trace {i}")
            print(format_trace(t))
    return EXIT_OK


def cmd_lts(a) -> int:
    sd = resolve(a.file, a.ws, a.env, a.alloc)
    env = sd.env if sd.env is not None else TypeEnv()
    conf = Configuration.make(env, sd.process, allocation(sd))
    doc = dump_json(conf, a.depth, a.observer_unique)
    if a.out:
        Path(a.out).write_text(json.dumps({"schema": f"picr/lts/v{SCHEMA_VERSION}", **doc}, indent=2))
        print(f"{len(doc['nodes'])} nodes, {len(doc['edges'])} edges -> {a.out}")
    else:
        emit(doc, "lts")
    return EXIT_OK


def cmd_bisim(a) -> int:
    left = resolve(a.left, a.ws, a.env, a.alloc)
    right = resolve(a.right, a.ws, a.env, a.alloc)
    if left.env is None or right.env is None:
        raise UsageError("bisim needs an observer environment (--env or a workspace env)")
    if left.env != right.env:
        raise UsageError("left and right systems declare different observer environments")
    if a.credit_cap < a.credit:
        raise UsageError(f"credit cap {a.credit_cap} is below the credit {a.credit}")
    opts = GameOptions(
        credit_cap=a.credit_cap, tau_depth=a.depth, state_budget=a.state_budget,
        cost_model=CostModel(a.cost_model), bounded=a.bounded, time_budget=a.time_budget,
        max_observer_unique=a.observer_unique,
    )
    ls = System.of(left.process, allocation(left))
    rs = System.of(right.process, allocation(right))
    try:
        if a.relation == "leq":
            verdicts = [check_leq(left.env, ls, rs, a.credit, opts)]
        elif a.relation == "eq":
            verdicts = [least_credit(left.env, ls, rs, opts), least_credit(left.env, rs, ls, opts)]
        else:
            verdicts = [check_refined(left.env, ls, rs, opts)]
    except ValueError as e:
        if isinstance(e, InvalidConfiguration):
            raise
        raise UsageError(str(e)) from e
    for v in verdicts:
        v.stats["jobs"] = a.jobs
    if a.emit == "json":
        if len(verdicts) == 1:
            emit(verdicts[0].to_json(), "verdict")
        else:
            emit({"relation": "eq", "verdicts": [v.to_json() for v in verdicts]}, "verdict")
    else:
        for v, (l, r) in zip(verdicts, [(a.left, a.right), (a.right, a.left)]):
            _print_verdict(v, l, r)
    results = [v.result for v in verdicts]
    if "Refuted" in results:
        return EXIT_NEGATIVE
    if "Inconclusive" in results:
        return EXIT_USAGE
    return EXIT_OK


def _print_verdict(v, left: str, right: str) -> None:
    st = v.stats
    print(f"{left} <~{v.credit} {right}: {v.result} "
          f"(states {st.get('states')}, {st.get('time')}s, cost model {v.options.cost_model.value})")
    if v.holds:
        print(f"  witness: {len(v.witness or ())} positions")
    elif v.refuted:
        for i, s in enumerate(v.counterexample or ()):
            ans = "no answer" if s["answer"] is None else f"answered, credit {s['answer']['credit']}"
            print(f"  {i}. {s['side']} {s['label']} {s['cost']:+d} at credit {s['credit']}: {ans}")
    else:
        print(f"  stopped by {v.reason}")


# --------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="picr", description="Resource-aware pi-calculus workbench.")
    p.add_argument("--workspace", help="INI manifest of named systems")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("typecheck", help="check a process against an environment")
    t.add_argument("file")
    t.add_argument("--env")
    t.add_argument("--emit", choices=("text", "json"), default="text")
    t.set_defaults(func=cmd_typecheck)

    r = sub.add_parser("run", help="costed reduction traces")
    r.add_argument("file")
    r.add_argument("--alloc", help="initially allocated channels (default: free names)")
    r.add_argument("--fuel", type=int, default=20)
    r.add_argument("--policy", choices=("exhaustive", "one-path"), default="one-path")
    r.add_argument("--input", action="append", help=argparse.SUPPRESS)
    r.add_argument("--emit", choices=("text", "json"), default="text")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("lts", help="dump the typed transition system")
    s.add_argument("file")
    s.add_argument("--env")
    s.add_argument("--alloc")
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--out")
    s.add_argument("--observer-unique", type=int, default=1,
                   help="unique names the observer may allocate at once (0 disables)")
    s.add_argument("--jobs", type=int, default=1, help="parallelism hint")
    s.set_defaults(func=cmd_lts)

    b = sub.add_parser("bisim", help="decide the amortized preorder")
    b.add_argument("left")
    b.add_argument("right")
    b.add_argument("--env")
    b.add_argument("--alloc")
    b.add_argument("--relation", choices=("leq", "eq", "refined"), default="leq")
    b.add_argument("--credit", type=int, default=0)
    b.add_argument("--credit-cap", type=int, default=8)
    b.add_argument("--bounded", type=int, metavar="M")
    b.add_argument("--cost-model", choices=[m.value for m in CostModel], default="signed")
    b.add_argument("--depth", type=int, default=32, help="tau closure depth")
    b.add_argument("--state-budget", type=int, default=200_000)
    b.add_argument("--time-budget", type=float)
    b.add_argument("--observer-unique", type=int, default=1)
    b.add_argument("--jobs", type=int, default=1, help="parallelism hint")
    b.add_argument("--emit", choices=("text", "json"), default="text")
    b.set_defaults(func=cmd_bisim)
    return p


def main(argv: list | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        a.ws = load_workspace(a.workspace) if a.workspace else None
        return a.func(a)
    except (UsageError, InvalidConfiguration) as e:
        print(f"picr: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
