import pytest

from picr.syntax import NIL, parse
from picr.typecheck import check_process, check_system
from picr.types import TypeEnv, parse_env

from conftest import env, proc


@pytest.mark.parametrize("name", ["c0", "c1", "c2", "c2p", "c3"])
def test_clients_accept(name):
    v = check_process(env("clients"), proc(name))
    assert v.accepted, v.diagnostics
    assert v.derivation[0] == "tRec w"


def test_c4_accepts_when_reply_types_coincide():
    same = parse_env("srv1 : chan(chan(T):a):w\nsrv2 : chan(chan(T):a):w\nret : chan(T, T):w")
    assert check_process(same, proc("c4")).accepted


def test_servers_accept():
    for name in ["s1", "s2"]:
        assert check_process(env("gamma1"), proc(name)).accepted


def test_nil_under_empty():
    assert check_process(TypeEnv(), NIL).accepted


def test_free_on_affine_rejected():
    v = check_process(env("free_affine"), proc("free_affine"))
    assert not v.accepted
    assert any("tFree" in d for d in v.diagnostics)


def test_buffers_with_affine_chain_links():
    e = env("buffer_int_affine_b")
    alloc = e.domain()
    for name in ["buff", "ebuff"]:
        v = check_system(e, alloc, proc(name))
        assert v.accepted, (name, v.diagnostics)
        assert v.derivation[0] == "tSys"


def test_system_needs_allocation():
    v = check_system(env("clients"), {"srv1", "srv2"}, proc("c2"))
    assert not v.accepted and "ret" in v.diagnostics[0]


def test_system_needs_consistency():
    e = parse_env("c : chan(T):u(0)\nc : chan(T):a")
    v = check_system(e, {"c"}, NIL)
    assert not v.accepted and "inconsistent" in v.diagnostics[0]


def test_output_consumes_affine():
    e = parse_env("c : chan():a")
    assert check_process(e, parse("c!<>")).accepted
    assert not check_process(e, parse("c!<> | c!<>")).accepted


def test_match_requires_permissions():
    e = parse_env("a : chan():w")
    assert not check_process(e, parse("if a = b then nil else nil")).accepted
    e2 = parse_env("a : chan():w\nb : chan():w")
    assert check_process(e2, parse("if a = b then nil else nil")).accepted


def test_rec_body_only_unrestricted():
    e = parse_env("c : chan():a")
    assert not check_process(e, parse("rec w. c!<>.w")).accepted


def test_alloc_then_free():
    assert check_process(TypeEnv(), parse("alloc x. free x. nil")).accepted
    assert not check_process(TypeEnv(), parse("alloc x. (x!<> | free x. nil)")).accepted


def test_weakening_by_unused_assumption():
    base = env("clients")
    extra = base.add("junk", parse_env("j : chan(T):w").items[0][1])
    assert check_process(extra, proc("c2")).accepted
