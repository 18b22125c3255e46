from __future__ import annotations

import json

import numpy as np
import pytest

from kvpilot.io.config import (
    ConfigError,
    CorpusConfig,
    EnvelopeConfig,
    RequestsConfig,
    RunConfig,
    config_digest,
    parse_config,
    serialize_config,
)


def test_empty_object_yields_full_defaults():
    config = parse_config("{}")
    assert config.version == 1
    assert config.workload == "default"
    assert config.corpus.count == 16
    assert config.envelope.bucket_floors == (0.9, 0.95, 0.97, 0.99)
    assert config.bandit.epsilon == 0.1
    assert config.scenarios == {}


def test_serialize_echoes_every_section():
    doc = json.loads(serialize_config(parse_config("{}")))
    assert set(doc) == {"version", "workload", "space", "budget", "corpus", "envelope", "bandit", "scenarios"}
    assert doc["space"]["bits"] == [2, 3, 4, 8]
    assert doc["budget"]["acc_threshold"] == 0.9
    assert doc["corpus"]["sample_size"] == 8


def test_parse_serialize_parse_is_a_fixpoint():
    text = serialize_config(parse_config("{}"))
    assert serialize_config(parse_config(text)) == text


def test_fixpoint_holds_for_randomized_configs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        doc = {}
        if rng.random() < 0.7:
            doc["space"] = {
                "transforms": ["identity", "delta_over_tokens"],
                "bits": sorted(set(rng.choice([2, 3, 4, 8], size=2).tolist())),
                "group_sizes": [32],
            }
        if rng.random() < 0.5:
            doc["budget"] = {"max_iterations": int(rng.integers(5, 50))}
        if rng.random() < 0.5:
            doc["corpus"] = {"count": int(rng.integers(4, 20)), "sample_size": 2}
        if rng.random() < 0.5:
            doc["bandit"] = {"epsilon": float(rng.uniform(0.0, 0.5))}
        if rng.random() < 0.5:
            doc["scenarios"] = {
                "s1": {
                    "mode": str(rng.choice(["full", "no_bandit", "no_compression"])),
                    "trace": [[0.0, float(rng.uniform(0.1, 10.0))]],
                    "requests": {"count": int(rng.integers(1, 30))},
                }
            }
        text = serialize_config(parse_config(json.dumps(doc)))
        assert serialize_config(parse_config(text)) == text


def test_unknown_keys_are_rejected_at_every_level():
    with pytest.raises(ConfigError, match="config root"):
        parse_config('{"versionn": 1}')
    with pytest.raises(ConfigError, match="space"):
        parse_config('{"space": {"bitz": [4]}}')
    with pytest.raises(ConfigError, match="budget"):
        parse_config('{"budget": {"iterations": 5}}')
    with pytest.raises(ConfigError, match="corpus"):
        parse_config('{"corpus": {"size": 4}}')
    with pytest.raises(ConfigError, match="scenarios.s"):
        parse_config('{"scenarios": {"s": {"modee": "full"}}}')
    with pytest.raises(ConfigError, match="requests"):
        parse_config('{"scenarios": {"s": {"requests": {"n": 3}}}}')
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"requests": {"workloads": [{"name": "a", "color": 1}]}}}}')


def test_invalid_json_and_root_type():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config("{")
    with pytest.raises(ConfigError, match="root must be an object"):
        parse_config("[1, 2]")


def test_field_validation_is_wrapped_as_config_error():
    with pytest.raises(ConfigError):
        parse_config('{"budget": {"acc_threshold": 2.0}}')
    with pytest.raises(ConfigError):
        parse_config('{"bandit": {"alpha": 0.0}}')
    with pytest.raises(ConfigError):
        parse_config('{"corpus": {"count": 0}}')
    with pytest.raises(ConfigError):
        parse_config('{"version": 2}')


def test_cross_field_checks():
    with pytest.raises(ConfigError, match="does not divide"):
        parse_config('{"space": {"group_sizes": [48]}, "corpus": {"channels": 64}}')
    with pytest.raises(ConfigError, match="power-of-two"):
        parse_config('{"corpus": {"channels": 96}, "space": {"group_sizes": [32]}}')
    # dropping the transform lifts the power-of-two requirement
    parse_config(
        '{"corpus": {"channels": 96}, "space": {"group_sizes": [32],'
        ' "transforms": ["identity"]}}'
    )


def test_scenario_section_parses_traces_and_drift():
    text = """
    {"scenarios": {"sag": {
        "kind": "pd_separation",
        "mode": "full",
        "trace": [[0.0, 1.0], [60.0, 0.2]],
        "drift_factors": {"p000": [[120.0, 0.5]]},
        "drift_overheads": {"*": [[0.0, 0.05]]},
        "requests": {"count": 10, "workloads": [{"name": "chat", "t_slo": 30.0}]}
    }}}
    """
    config = parse_config(text)
    sc = config.scenarios["sag"]
    assert sc.trace == ((0.0, 1.0), (60.0, 0.2))
    assert sc.drift_factors == {"p000": ((120.0, 0.5),)}
    assert sc.drift_overheads == {"*": ((0.0, 0.05),)}
    assert sc.requests.count == 10
    assert sc.requests.specs()[0].name == "chat"


def test_scenario_validation():
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"kind": "mesh"}}}')
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"mode": "auto"}}}')
    with pytest.raises(ConfigError, match="fixed_profile_id"):
        parse_config('{"scenarios": {"s": {"mode": "fixed_profile"}}}')
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"recompute_seconds": -1.0}}}')
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"trace": []}}}')
    with pytest.raises(ConfigError):
        parse_config('{"scenarios": {"s": {"trace": [[0.0, 1.0, 2.0]]}}}')


def test_requests_and_workload_validation():
    with pytest.raises(ConfigError):
        RequestsConfig(count=0)
    with pytest.raises(ConfigError):
        RequestsConfig(mean_interarrival=0.0)
    with pytest.raises(ConfigError):
        RequestsConfig(workloads=())
    with pytest.raises(ConfigError, match="name"):
        RequestsConfig(workloads=({"weight": 1.0},))


def test_envelope_bandwidth_to_x_conversion():
    env = EnvelopeConfig(bandwidth_lo_gbps=0.08, bandwidth_hi_gbps=800.0)
    assert env.x_lo == pytest.approx(1e-11)
    assert env.x_hi == pytest.approx(1e-7)
    with pytest.raises(ConfigError):
        EnvelopeConfig(bandwidth_lo_gbps=2.0, bandwidth_hi_gbps=1.0)
    with pytest.raises(ConfigError):
        EnvelopeConfig(bucket_floors=(0.9, 0.9))
    with pytest.raises(ConfigError):
        EnvelopeConfig(bucket_floors=())


def test_corpus_validation():
    with pytest.raises(ConfigError):
        CorpusConfig(sample_size=20, count=10)
    with pytest.raises(ConfigError):
        CorpusConfig(outlier_fraction=1.5)
    with pytest.raises(ConfigError):
        CorpusConfig(outlier_scale=0.0)


def test_digest_is_stable_and_sensitive():
    a = config_digest(parse_config("{}"))
    b = config_digest(parse_config("{}"))
    assert a == b
    assert len(a) == 16 and all(ch in "0123456789abcdef" for ch in a)
    c = config_digest(parse_config('{"corpus": {"seed": 1}}'))
    assert c != a


def test_serialize_rejects_non_finite_numbers():
    config = RunConfig(envelope=EnvelopeConfig(bandwidth_hi_gbps=float("inf")))
    with pytest.raises(ConfigError, match="non-finite"):
        serialize_config(config)
