import json

import lockstep


def test_adjust_counts():
    out = lockstep.adjust([("m0", "18/25"), ("m1", "7/25")], 10, "1/100")
    assert out["star"] == "m0"
    assert out["counts"] == {"m0": 7, "m1": 3}
    assert out["mass"]["m1"] == "3/10"


def test_default_eps():
    assert lockstep.default_eps("1/5", 2, 5) == "1/80"


def test_chain_length_frozen():
    assert lockstep.chain_length(2, 5, 4) == 7
    assert lockstep.chain_length(3, 5, 4) == 142


def test_verify_chain():
    rep = lockstep.verify_chain(3, 5, 4)
    assert rep["ok"]
    assert rep["classes"] == 142


def test_validate_config():
    violations = lockstep.validate_config({"n": "4", "t": "1"})
    assert any(hard and "ct" in msg for hard, msg in violations)


def test_small_experiment():
    out = lockstep.run_experiment(
        {"n": "25", "t": "5", "seeds": "2", "rounds-cap": "16"}
    )
    assert len(out["records"]) == 4  # attack + baseline per seed
    summary = json.loads(out["summary"])
    assert summary["runs"] == 4
    assert out["witness"]["horizon"] >= 4
