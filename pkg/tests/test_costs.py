import pytest

from ftsim.costs import PERIODICITIES, CostModel, StrategyKind


def test_defaults():
    m = CostModel()
    assert m.predict_s == 38 and m.cold_restart_reinstate_s == 600
    assert [m.reinstate("ckpt-central-single", p) for p in PERIODICITIES] == [848, 940, 987]
    assert [m.reinstate("ckpt-central-multi", p) for p in PERIODICITIES] == [848, 940, 987]
    assert [m.reinstate("ckpt-decentral", p) for p in PERIODICITIES] == [927, 1043, 1113]
    assert m.reinstate("agent", 3600) == 0.47 and m.reinstate("core", 7200) == 0.38
    assert [m.overhead("ckpt-central-single", p) for p in PERIODICITIES] == [485, 617, 713]
    assert [m.overhead("ckpt-central-multi", p) for p in PERIODICITIES] == [554, 742, 837]
    assert [m.overhead("ckpt-decentral", p) for p in PERIODICITIES] == [404, 586, 783]
    assert [m.overhead("agent", p) for p in PERIODICITIES] == [314, 398, 461]
    assert [m.overhead("core", p) for p in PERIODICITIES] == [267, 337, 389]


def test_core_cheaper_than_agent_everywhere():
    m = CostModel()
    for p in PERIODICITIES:
        assert m.reinstate("core", p) < m.reinstate("agent", p)
        assert m.overhead("core", p) < m.overhead("agent", p)


def test_cold_restart_and_hybrid():
    m = CostModel()
    assert m.reinstate("cold-restart", 1) == 600 and m.overhead("cold-restart", 1) == 0
    with pytest.raises(ValueError):
        m.reinstate("hybrid", 3600)
    assert m.covers("hybrid", 3600)
    assert not m.covers("agent", 1800)
    with pytest.raises(KeyError):
        m.overhead("agent", 1800)


def test_entries_must_be_positive():
    with pytest.raises(ValueError):
        CostModel(predict_s=0)
    with pytest.raises(ValueError):
        CostModel.from_dict({"overhead_s": {"agent": {"3600": -1}}})


def test_override_and_round_trip():
    m = CostModel.from_dict({"reinstate_s": {"core": {"3600": 1.5}}, "predict_s": 40})
    assert m.reinstate("core", 3600) == 1.5 and m.reinstate("core", 7200) == 0.38
    assert m.predict_s == 40
    assert CostModel.from_dict(m.to_dict()) == m
    assert CostModel.from_dict(m.to_dict(provenance=True)).to_dict() == m.to_dict()


def test_provenance():
    prov = CostModel().provenance()
    assert prov["reinstate_s.core.3600"].endswith("(00:00:0.38)")
    assert prov["overhead_s.ckpt-central-single.3600"].endswith("(00:08:05)")
    changed = CostModel.from_dict({"overhead_s": {"agent": {"3600": 300}}}).provenance()
    assert changed["overhead_s.agent.3600"] == "override"


def test_strategy_kind_groups():
    assert [k.value for k in StrategyKind if k.proactive] == ["agent", "core", "hybrid"]
    assert [k.value for k in StrategyKind if k.checkpointing] == [
        "ckpt-central-single", "ckpt-central-multi", "ckpt-decentral"]
