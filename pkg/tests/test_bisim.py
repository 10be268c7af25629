import pytest

from picr.bisim import (
    CostModel, GameOptions, check_eq, check_leq, least_credit,
    replay_counterexample, verify_witness,
)
from picr.lts import TAU, Configuration, InvalidConfiguration, weak_transitions
from picr.reduction import ResourceEnv, System
from picr.syntax import make_par, parse
from picr.types import parse_env

from conftest import env, system


def test_cost_models():
    assert [CostModel.SIGNED.apply(k) for k in (-1, 0, 1)] == [-1, 0, 1]
    assert [CostModel.ABSOLUTE.apply(k) for k in (-1, 0, 1)] == [1, 0, 1]
    assert [CostModel.ALLOC_ONLY.apply(k) for k in (-1, 0, 1)] == [0, 0, 1]


def test_defaults():
    o = GameOptions()
    assert (o.credit_cap, o.tau_depth, o.state_budget, o.cost_model) == (8, 32, 200_000, CostModel.SIGNED)


def test_bad_bounds(gamma1):
    s = system("c1", gamma1)
    with pytest.raises(ValueError, match="below the credit"):
        check_leq(gamma1, s, s, 5, GameOptions(credit_cap=3))
    with pytest.raises(ValueError, match="bounded"):
        check_leq(gamma1, s, s, 2, GameOptions(bounded=1))
    with pytest.raises(ValueError):
        check_leq(gamma1, s, s, -1)


def test_invalid_configuration(gamma1):
    s = System.of(parse("nil"), set())
    with pytest.raises(InvalidConfiguration):
        check_leq(gamma1, s, s)


def test_fewer_allocations_is_better(gamma1):
    v = check_leq(gamma1, system("c1", gamma1), system("c0", gamma1), 0)
    assert v.holds and v.closure_total
    assert v.stats["states"] < 200_000
    assert verify_witness(v.witness, v.options) == []
    assert v.to_json()["witness_size"] == len(v.witness)


def test_more_allocations_refuted_with_replayable_script(gamma1):
    v = check_leq(gamma1, system("c0", gamma1), system("c1", gamma1), 0)
    assert v.refuted and replay_counterexample(v)
    last = v.counterexample[-1]
    assert last["answer"] is None and (last["side"], last["label"], last["cost"]) == ("left", "tau", 1)
    # oracle: the defender's internal closure, computed by the transition
    # system alone, cannot pay for the allocation
    obs, n, _, right = last["_position"]
    conf = Configuration(obs, ResourceEnv(right[0]), make_par(right[1]))
    costs = {k for k, _ in weak_transitions(conf, TAU, 32)}
    assert all(n + l - last["cost"] < 0 for l in costs)


def test_json_shape(gamma1):
    v = check_leq(gamma1, system("c0", gamma1), system("c1", gamma1), 0)
    doc = v.to_json()
    assert doc["result"] == "Refuted"
    assert set(doc["bounds"]) == {"credit_cap", "tau_depth", "state_budget", "cost_model", "bounded", "closure_total"}
    assert all(not k.startswith("_") for step in doc["counterexample"] for k in step)


def test_reflexive(gamma1):
    for name in ["c1", "c2"]:
        s = system(name, gamma1)
        a, b = check_eq(gamma1, s, s)
        assert a.holds and b.holds and a.credit == b.credit == 0


def test_release_needs_credit(gamma1):
    v = least_credit(gamma1, system("c3", gamma1), system("c2", gamma1))
    assert v.holds and v.credit == 1
    assert check_leq(gamma1, system("c3", gamma1), system("c2", gamma1), 0).refuted


def test_bounded_mode(gamma1):
    o = GameOptions(bounded=1)
    assert check_leq(gamma1, system("c3", gamma1), system("c2", gamma1), 1, o).holds
    assert check_leq(gamma1, system("c2", gamma1), system("c3", gamma1), 0, o).holds


def test_transitivity_instance(gamma1):
    c2, c1, c0 = (system(n, gamma1) for n in ("c2", "c1", "c0"))
    assert check_leq(gamma1, c2, c1, 0).holds and check_leq(gamma1, c1, c0, 0).holds
    assert check_leq(gamma1, c2, c0, 0).holds


def test_absolute_costs(gamma1):
    o = GameOptions(cost_model=CostModel.ABSOLUTE)
    assert least_credit(gamma1, system("c1", gamma1), system("c2", gamma1), o).holds


def test_behavioural_difference_refuted():
    e = parse_env("a : chan():w\nb : chan():w")
    left = System.of(parse("a!<>"), {"a", "b"})
    right = System.of(parse("b!<>"), {"a", "b"})
    v = least_credit(e, left, right, GameOptions(credit_cap=2))
    assert v.refuted and replay_counterexample(v)
    assert v.counterexample[-1]["label"] == "a!<>"


def test_budget_exhaustion_is_inconclusive(gamma1):
    v = check_leq(gamma1, system("c1", gamma1), system("c0", gamma1), 0, GameOptions(state_budget=20))
    assert v.result == "Inconclusive" and v.reason == "state budget"
    assert v.to_json()["reason"] == "state budget"


def test_backend_pair():
    e = env("backend")
    v = check_leq(e, system("ebk_backend", e), system("bck_backend", e), 0)
    assert v.holds and verify_witness(v.witness, v.options) == []
