import pytest

from veritext.config import GRID_CELLS, ConfigError, ExperimentConfig, check_pair, parse_cells
from veritext.corpus import Pipeline


def test_defaults_cover_everything():
    cfg = ExperimentConfig.default()
    assert cfg.seed == 42
    assert len(cfg.cells) == 10 and cfg.cells[-1] == ("encoder", "tokens")
    assert cfg.pipeline("baseline") is Pipeline.CLASSIC and cfg.pipeline("encoder") is Pipeline.RAW
    assert cfg.word2vec_params().dim == 300
    assert cfg.forest_params("tfidf").max_depth == 40 and cfg.forest_params("word2vec").max_depth is None


def test_unknown_section_and_key():
    with pytest.raises(ConfigError, match="section"):
        ExperimentConfig.from_text("[nope]\nx = 1\n", env={})
    with pytest.raises(ConfigError, match="key"):
        ExperimentConfig.from_text("[svm]\nlambda = 1\n", env={})


def test_bad_values():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[split]\nratio = 1.5\n", env={})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[experiment]\nseed = abc\n", env={})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("this is not ini", env={})


def test_forbidden_pairs():
    with pytest.raises(ConfigError, match="Naive Bayes"):
        check_pair("nb", "word2vec")
    with pytest.raises(ConfigError):
        check_pair("encoder", "tfidf")
    with pytest.raises(ConfigError):
        check_pair("svm", "tokens")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[experiment]\ncells = nb:word2vec\n", env={})


def test_seed_env_override():
    cfg = ExperimentConfig.from_text("[experiment]\nseed = 1\n", env={"VERITEXT_SEED": "9"})
    assert cfg.seed == 9 and cfg.seed_overridden
    assert ExperimentConfig.from_text("", env={}).seed_overridden is False


def test_snapshot_roundtrip():
    cfg = ExperimentConfig.from_text("[svm]\nepochs = 3\n[experiment]\ncells = svm:tfidf,\n  nb:tfidf\n", env={})
    again = ExperimentConfig.from_text(cfg.snapshot(), env={})
    assert again.snapshot() == cfg.snapshot()
    assert again.svm_params().epochs == 3 and again.cells == [("svm", "tfidf"), ("nb", "tfidf")]


def test_split_seed_defaults_to_global():
    assert ExperimentConfig.from_text("[experiment]\nseed = 5\n", env={}).split_spec().seed == 5
    assert ExperimentConfig.from_text("[split]\nseed = 8\n", env={}).split_spec().seed == 8


def test_parse_cells():
    assert len(parse_cells(GRID_CELLS)) == 10
    assert parse_cells("") == []
    with pytest.raises(ConfigError):
        parse_cells("svm")


def test_paths_relative_to_config(tmp_path):
    path = tmp_path / "x.config"
    path.write_text("[data]\ntrain = d/t.csv\n")
    assert ExperimentConfig.from_file(path).path("data", "train") == tmp_path / "d" / "t.csv"
