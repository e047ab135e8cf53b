import pytest

from linkshare.config import ConfigError, RunConfig, from_dict, load


def test_defaults_and_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 7\nmodel:\n  folds: 3\n  hyperparams:\n    n_estimators: 5\nstats:\n  n_bins: 4\n")
    cfg = load(p)
    assert cfg.seed == 7 and cfg.model.folds == 3 and cfg.model.hyperparams.n_estimators == 5
    assert cfg.model.hyperparams.max_depth == 14           # untouched defaults survive
    assert load(p, seed=9).seed == 9


@pytest.mark.parametrize("data", [{"bogus": 1}, {"model": {"folds": 1}}, {"stats": {"bin_kind": "log"}},
                                  {"model": {"hyperparams": {"n_estimators": 0}}}, {"seed": "x"},
                                  {"analysis": {"nope": 2}}, {"synth": [1]}, {"sampling": {"cap_per_bin": -1}},
                                  {"paths": {"aliases": "/does/not/exist.json"}}])
def test_bad_configs_raise(data):
    with pytest.raises(ConfigError):
        from_dict(data)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    with pytest.raises(ConfigError, match="YAML"):
        load(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        load(tmp_path / "list.yaml")


def test_hash_ignores_paths_but_not_settings(tmp_path):
    a = RunConfig()
    b = from_dict({"paths": {"inputs": str(tmp_path)}})
    c = from_dict({"seed": 1})
    assert a.hash() == b.hash() != c.hash()
    assert a.module_seed("cv") != a.module_seed("forest") and a.module_seed("cv") == RunConfig().module_seed("cv")


def test_synth_overrides_flow_through():
    cfg = from_dict({"synth_preset": "small", "synth": {"n_users": 500}})
    sc = cfg.synth_config()
    assert sc.n_users == 500 and sc.seed == cfg.seed and sc.start_ts == cfg.analysis.start_ts
    with pytest.raises(ConfigError):
        from_dict({"synth": {"homophily": 3.0}}).synth_config()
    with pytest.raises(ConfigError):
        from_dict({"synth_preset": "nope"}).synth_config()
