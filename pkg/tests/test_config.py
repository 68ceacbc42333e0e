"""Configuration loading, overrides, validation, derived reports."""

import copy

import pytest
import yaml

from samplab.errors import ConfigError
from samplab.config import (
    DEFAULTS,
    apply_overrides,
    build_designs,
    build_frame,
    build_plot_design,
    build_region,
    build_study_config,
    build_synthesis_spec,
    canonical_yaml,
    config_hash,
    demo_config,
    derived_report,
    ladder_esr_bounds,
    load_config_file,
    validate_config,
)


def test_defaults_are_valid():
    assert validate_config(copy.deepcopy(DEFAULTS)) == []


def test_demo_config_is_valid():
    cfg = demo_config()
    assert cfg["mode"] == "demo"
    assert validate_config(cfg) == []


def test_canonical_yaml_round_trips():
    cfg = copy.deepcopy(DEFAULTS)
    text = canonical_yaml(cfg)
    assert yaml.safe_load(text) == cfg


def test_config_hash_tracks_content():
    a = copy.deepcopy(DEFAULTS)
    b = copy.deepcopy(DEFAULTS)
    assert config_hash(a) == config_hash(b)
    b["master_seed"] = 999
    assert config_hash(a) != config_hash(b)


def test_load_config_file_merges_over_defaults(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("master_seed: 7\nframe:\n  n_cols: 12\n")
    cfg = load_config_file(path)
    assert cfg["master_seed"] == 7
    assert cfg["frame"]["n_cols"] == 12
    assert cfg["frame"]["n_rows"] == DEFAULTS["frame"]["n_rows"]
    assert cfg["replication"] == DEFAULTS["replication"]


def test_load_config_file_rejects_non_mapping(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config_file(path)


def test_overrides_reach_nested_and_list_entries():
    cfg = copy.deepcopy(DEFAULTS)
    cfg = apply_overrides(cfg, [
        "master_seed=7",
        "frame.n_cols=40",
        "designs.0.n=36",
        "figures.enabled=false",
        "superpopulation.beta=[1, 2, 3]",
    ])
    assert cfg["master_seed"] == 7
    assert cfg["frame"]["n_cols"] == 40
    assert cfg["designs"][0]["n"] == 36
    assert cfg["figures"]["enabled"] is False
    assert cfg["superpopulation"]["beta"] == [1, 2, 3]


def test_override_errors_name_the_path():
    cfg = copy.deepcopy(DEFAULTS)
    with pytest.raises(ConfigError) as err:
        apply_overrides(cfg, ["frame.n_colz=40"])
    assert "n_colz" in str(err.value)
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["designs.9.n=36"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["master_seed"])  # missing '='


def test_validate_collects_many_problems_at_once():
    cfg = copy.deepcopy(DEFAULTS)
    cfg["mode"] = "turbo"
    cfg["estimators"] = ["HT", "BOGUS"]
    cfg["ladder"]["esr_start"] = 2.0
    cfg["ladder"]["esr_end"] = 1.0
    cfg["speling"] = 1
    problems = validate_config(cfg)
    text = "\n".join(problems)
    assert len(problems) >= 3
    assert "turbo" in text
    assert "BOGUS" in text
    assert "speling" in text
    assert "esr" in text


def test_validate_checks_design_fit_to_frame():
    cfg = copy.deepcopy(DEFAULTS)
    cfg["designs"] = [{"kind": "SYS", "n": 49}]  # 7 does not divide 30
    problems = validate_config(cfg)
    assert any("7" in p or "49" in p for p in problems)


def test_builders_produce_typed_objects():
    cfg = copy.deepcopy(DEFAULTS)
    fr = build_frame(cfg)
    assert fr.n_cols == 30 and fr.n_rows == 30
    lo, hi = ladder_esr_bounds(cfg, fr)
    assert lo == pytest.approx(0.03 * 30.0)
    assert hi == pytest.approx(30.0)
    designs = build_designs(cfg)
    assert [d.kind for d in designs] == ["SRS", "SYS"]
    study = build_study_config(cfg, designs=designs)
    assert study.replications == 400
    assert study.estimators == ("HT", "GREG1", "GREG2")
    region = build_region(cfg)
    assert region.width == 500.0 and region.height == 700.0
    synth = build_synthesis_spec(cfg)
    assert synth.n_trees == 83801
    plot_design = build_plot_design(cfg)
    assert plot_design.sample_size == 35


def test_build_designs_rejects_unknown_keys():
    cfg = copy.deepcopy(DEFAULTS)
    cfg["designs"] = [{"kind": "SRS", "n": 25, "replicas": 3}]
    with pytest.raises(ConfigError) as err:
        build_designs(cfg)
    assert "replicas" in str(err.value)


def test_derived_report_mentions_key_quantities():
    cfg = copy.deepcopy(DEFAULTS)
    text = "\n".join(derived_report(cfg))
    assert "900" in text          # frame cells
    assert "SRS" in text and "SYS" in text
    cfg["mode"] = "stemmap"
    text = "\n".join(derived_report(cfg))
    assert "3500" in text         # raster cells
