import json

import numpy as np
import pytest

from pillarwave import medium as md
from pillarwave.config import ConfigError, RunConfig, load_config, validate_config


def write(tmp_path, obj, name="run.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


def errors_of(data, command=None):
    with pytest.raises(ConfigError) as info:
        validate_config(data, command)
    return info.value.errors


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {}))
    assert cfg.medium.eps0 == 1.0 and cfg.medium.R == 1.0 and cfg.medium.L == 1
    assert cfg.numerics.n_radial == 120 and cfg.numerics.cond_limit == 1e12
    spec = cfg.medium.to_spec()
    assert spec.n_radial_cells == 0 and spec.fingerprint == md.homogeneous().fingerprint


def test_medium_roundtrip():
    data = {"medium": {"r_edges": [0.3, 0.7], "z_edges_pi": [-1, 0, 1],
                       "eps": [[2.0, 3.0], [1.5, 1.5]], "mu": [[1.0, 1.0], [2.0, 2.0]],
                       "eps0": 1.2, "R": 1.5}}
    spec = validate_config(data).medium.to_spec()
    assert spec.r_edges == (0.3, 0.7) and spec.R == 1.5 and spec.eps0 == 1.2
    assert np.array_equal(spec.eps, [[2.0, 3.0], [1.5, 1.5]])
    assert spec.z_edges == pytest.approx((-np.pi, 0.0, np.pi))


def test_nonpositive_eps_names_field():
    errs = errors_of({"medium": {"r_edges": [0.5], "eps": [[-1.0]]}})
    assert len(errs) == 1 and "eps[0, 0]" in errs[0] and "positive" in errs[0]
    errs = errors_of({"medium": {"eps0": 0.0}})
    assert any("eps0" in e for e in errs)


def test_period_consistency():
    # a profile of period 2 pi declared with L = 2
    errs = errors_of({"medium": {"r_edges": [0.5], "z_edges_pi": [-1, 0, 1],
                                 "eps": [[2.0, 1.0]], "L": 2}})
    assert any("period" in e and "L=2" in e for e in errs)
    # the same profile repeated twice per 2 pi is fine
    validate_config({"medium": {"r_edges": [0.5], "z_edges_pi": [-1, -0.5, 0, 0.5, 1],
                                "eps": [[2.0, 1.0, 2.0, 1.0]], "L": 2}})


def test_unknown_keys_rejected():
    for data in ({"extra": 1}, {"medium": {"epsilon": 2}}, {"numerics": {"nradial": 10}},
                 {"task": {"incident": {"m": 0, "phase": 1}}}):
        errs = errors_of(data)
        assert any("Extra inputs" in e for e in errs)


def test_all_errors_reported_together():
    data = {"medium": {"r_edges": [0.5], "eps": [[-2.0]], "bogus": 1},
            "numerics": {"n_radial": 2},
            "task": {"kappa": 0.7, "omega": "x", "branches": [0]}}
    errs = errors_of(data, "classify")
    joined = "\n".join(errs)
    for needle in ("medium.bogus", "numerics.n_radial", "task.omega", "eps[0, 0]",
                   "task.kappa", "task.branches"):
        assert needle in joined
    assert len(errs) == 6


def test_command_requirements():
    errs = errors_of({"task": {"kappa": 0.1}}, "scatter")
    assert sorted(errs) == ["task.incident: required by the 'scatter' command",
                            "task.omega: required by the 'scatter' command"]
    assert errors_of({}, "dispersion") == ["task.kappas: required by the 'dispersion' command"]
    errs = errors_of({"task": {"kappas": [0.1, 0.5, -0.6]}}, "dispersion")
    assert len(errs) == 2 and all("Brillouin" in e for e in errs)
    errs = errors_of({"task": {"kappas": [0.1], "omega_bracket": [0.5, 0.2]}}, "dispersion")
    assert errs == ["task.omega_bracket: need 0 < lo < hi"]


def test_ragged_tables():
    errs = errors_of({"medium": {"r_edges": [0.5, 0.7], "z_edges_pi": [-1, 0, 1],
                                 "eps": [[2.0, 1.0], [3.0]]}})
    assert errs == ["medium.eps: rows must all have the same length"]


def test_json_syntax_error_has_position(tmp_path):
    path = write(tmp_path, '{\n  "medium": {\n    "eps0": 1.0,\n  }\n}')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    msg = info.value.errors[0]
    assert "line 4" in msg and "column" in msg


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_canonical_json_ignores_key_order():
    a = validate_config({"task": {"kappa": 0.1, "omega": 1.0}, "medium": {"R": 2.0}})
    b = validate_config({"medium": {"R": 2.0}, "task": {"omega": 1.0, "kappa": 0.1}})
    assert a.canonical_json() == b.canonical_json()
    assert isinstance(a, RunConfig)
