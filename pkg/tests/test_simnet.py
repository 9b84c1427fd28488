import json

import pytest

from dacr.adversary import STRATEGIES
from dacr.simnet import ConfigError, ScenarioConfig, da_properties, run


def cfg(**kw):
    base = {"n": 4, "f": 1, "stop": "views", "max_views": 5, "trace": True}
    base.update(kw)
    return ScenarioConfig.from_dict(base)


def test_honest_run_commits_every_view_in_four_steps():
    res = run(cfg(seed=3))
    m = res.metrics()
    assert res.ok and len(m["commits"]) >= 5
    assert set(m["steps_per_block"].values()) == {4}
    assert m["inclusion"][0]["distance"] == 1
    assert m["incomplete"] == 0


def test_signals_equal_views():
    res = run(cfg(seed=1))
    sim = res.sim
    assert all(sim.signal_count[i] == sim.nodes[i].view for i in range(4))


def test_post_gst_delays_bounded_by_delta():
    res = run(cfg(seed=2, gst=6.0, rushing=False))
    late = [row for row in res.sim.trace if row[0] >= 6.0 and row[1] != row[2]]
    assert late and all(row[6] - row[0] <= 1.0 + 1e-9 for row in late)
    assert res.ok


def test_stall_agreement_forces_view_change():
    res = run(cfg(seed=0, adversary={"strategy": "StallAgreement"}))
    m = res.metrics()
    assert m["incomplete"] > 0
    assert all(c["view"] != 1 for c in m["commits"])
    assert res.ok


def test_tamper_gets_zero_approvals():
    res = run(cfg(seed=0, max_views=3, adversary={"strategy": "TamperColumn", "params": {"mode": "data"}}))
    assert res.metrics()["approvals_per_view"]["1"] == 0


def test_partial_tamper_rejected_by_victim():
    res = run(cfg(seed=0, max_views=3, adversary={"strategy": "TamperColumn", "params": {"mode": "partial"}}))
    assert res.metrics()["reject_reasons"].get("parity-mismatch", 0) >= 1
    assert res.ok


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_every_strategy_is_safe(strategy):
    for seed in range(5):
        res = run(cfg(n=7, f=2, seed=seed, max_views=6, trace=False, adversary={"strategy": strategy}))
        assert res.ok, res.sim.violations
        props = da_properties(res)
        bad = [k for k, v in props.items() if v is False]
        assert not bad, props["details"]


def test_malicious_leaders_cost_at_most_f_view_changes():
    res = run(ScenarioConfig.from_dict({"n": 7, "f": 2, "seed": 4, "adversary": {"strategy": "SilentReplicas"}}))
    log = res.reference_log()
    assert log and log[0].view <= 2 + 1


def test_censoring_leader_is_replaced():
    res = run(cfg(n=7, f=2, seed=0, stop="target-commit", workload={"copies": 2},
                  adversary={"strategy": "CensorTx", "malicious": [0, 1]}))
    inc = res.inclusion()[0]
    assert res.ok and inc["distance"] is not None


def test_client_mode_counts_acks():
    res = run(ScenarioConfig.from_dict({"n": 7, "f": 2, "seed": 1, "workload": {"mode": "client"},
                                        "adversary": {"strategy": "SilentReplicas"}}))
    inc = res.inclusion()[0]
    assert inc["acks"] == 5 and inc["distance"] in (0, 1)
    assert not set(inc["holders"]) & {0, 1}


def test_client_submit_fails_when_too_few_available():
    res = run(ScenarioConfig.from_dict({"n": 4, "f": 1, "seed": 0, "stop": "views", "max_views": 3,
                                        "workload": {"mode": "client", "copies": 4},
                                        "adversary": {"strategy": "SilentReplicas"}}))
    assert res.inclusion()[0]["submit_failed"] == 3


def test_determinism():
    a, b = run(cfg(seed=9)), run(cfg(seed=9))
    assert a.metrics_json() == b.metrics_json() and a.trace_lines() == b.trace_lines()
    assert run(cfg(seed=10)).trace_lines() != a.trace_lines()


def test_message_conservation():
    res = run(cfg(seed=5))
    c = res.metrics()["messages"]
    assert c["sent"] == c["delivered"] + c["dropped"] + c["in_flight"]


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(n=3, f=1)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"n": 4, "bogus": 1})
    with pytest.raises(ConfigError):
        cfg(adversary={"strategy": "Nope"})
    with pytest.raises(ConfigError) as e:
        ScenarioConfig.from_json('{"n": 4,\n "f": }')
    assert "line 2" in str(e.value)


def test_defaults_roundtrip():
    d = ScenarioConfig().to_dict()
    assert ScenarioConfig.from_dict(json.loads(json.dumps(d))).to_dict() == d
