from itertools import accumulate

import pytest

from picr.reduction import (
    RULE_COST, ResourceEnv, System, fresh_name, format_trace, run, state_hash,
    step, trace_json,
)
from picr.syntax import canonicalize_struct, parse

from conftest import proc


def sys_of(text, alloc):
    return System.of(parse(text), alloc)


def only(steps):
    assert len(steps) == 1, steps
    return steps[0]


def test_communication():
    st = only(step(sys_of("c!<d>.a!<> | c?(x).x!<>", {"c", "a", "d"})))
    assert (st.rule, st.cost) == ("rCom", 0)
    assert st.next.process == canonicalize_struct(parse("a!<> | d!<>"))


def test_communication_blocked_on_deallocated_channel():
    assert step(sys_of("c!<d> | c?(x)", {"d"})) == []


def test_alloc_picks_fresh_name():
    st = only(step(sys_of("alloc x. x!<>", set())))
    assert (st.rule, st.cost) == ("rAll", 1)
    assert st.next.resources.allocated == {"_0"}
    assert st.next.process == parse("_0!<>")
    assert st.next.resources.fresh_counter == 1


def test_fresh_name_avoids_process_names():
    st = only(step(sys_of("alloc x. x!<_0>", set())))
    assert st.next.resources.allocated == {"_1"}
    assert fresh_name({"_0", "_2"}) == ("_1", 1)


def test_matching():
    then = only(step(sys_of("if c = c then a!<> else b!<>", {"c"})))
    assert then.rule == "rThen" and then.next.process == parse("a!<>")
    other = only(step(sys_of("if c = d then a!<> else b!<>", {"c", "d"})))
    assert other.rule == "rElse" and other.next.process == parse("b!<>")
    assert step(sys_of("if c = d then nil else nil", {"c"})) == []


def test_free():
    st = only(step(sys_of("free c. nil", {"c"})))
    assert (st.rule, st.cost, st.next.resources.allocated) == ("rFree", -1, frozenset())
    assert step(sys_of("free c. nil", set())) == []


def test_example_with_premature_release():
    s = System.of(proc("premature_free"), {"c"})
    (tr,) = run(s, 2, "one-path")
    assert [(st.rule, st.cost) for st in tr.steps] == [("rFree", -1), ("rAll", 1)]
    assert tr.total_cost == 0
    # the fresh channel could reuse the released name;
    # here the scheduler picks the first unused name
    assert tr.steps[-1].next.resources.allocated == {"_0"}


def test_nil_run():
    (tr,) = run(System.of(parse("nil")), 5)
    assert tr.steps == [] and tr.total_cost == 0
    assert format_trace(tr) == "total +0"


def test_alloc_free_loop_prefix_costs():
    # by hand: rRec 0, rAll +1, rFree -1, repeated
    hand = [0, 1, -1, 0, 1, -1]
    expected_prefix = list(accumulate(hand))
    traces = run(sys_of("rec w. alloc x. free x. w", set()), 6, "exhaustive")
    assert len(traces) == 1
    costs = [st.cost for st in traces[0].steps]
    assert costs == hand
    assert list(accumulate(costs)) == expected_prefix
    assert set(expected_prefix) <= {0, 1}


def test_exhaustive_enumerates_interleavings():
    traces = run(sys_of("alloc x. nil | free c. nil", {"c"}), 5, "exhaustive")
    orders = sorted(tuple(st.rule for st in t.steps) for t in traces)
    assert orders == [("rAll", "rFree"), ("rFree", "rAll")]
    assert all(t.total_cost == 0 for t in traces)


def test_unknown_policy():
    with pytest.raises(ValueError):
        run(System.of(parse("nil")), 1, "random")


def test_rule_costs_table():
    assert RULE_COST == {"rCom": 0, "rThen": 0, "rElse": 0, "rRec": 0, "rAll": 1, "rFree": -1}


def test_trace_json_and_hash():
    s = System.of(proc("premature_free"), {"c"})
    (tr,) = run(s, 2, "one-path")
    doc = trace_json(tr)
    assert [x["cost"] for x in doc["steps"]] == [-1, 1] and doc["total_cost"] == 0
    assert doc["steps"][0]["state"] == state_hash(tr.steps[0].next)
    assert len(state_hash(s)) == 12


def test_structural_closure():
    a = System(ResourceEnv(frozenset({"c"})), parse("c!<> | c?() | nil"))
    b = System(ResourceEnv(frozenset({"c"})), parse("c?() | c!<>"))
    assert {x.next for x in step(a)} == {x.next for x in step(b)}
