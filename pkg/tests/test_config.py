import pytest

from fpa3d.config import RunConfig, parse_config, parse_config_text, parse_positions
from fpa3d.errors import ArgumentError, ConfigError


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("", encoding="utf-8")
    assert parse_config(path) == RunConfig()
    cfg = RunConfig()
    assert (cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.eps) == (1e-4, 0.9, 0.999, 1e-8)
    assert (cfg.model.t, cfg.model.h, cfg.model.w, cfg.model.channels, cfg.model.hidden) == (24, 32, 32, (8, 16, 24), 64)
    assert cfg.train.batch_size == 4 and cfg.fpa_configs() == {}


def test_values_and_comments():
    cfg = parse_config_text(
        "# learning rate\n"
        "train.lr = 0.0001   # trailing comment\n"
        "\n"
        "model.channels = 4, 8, 12\n"
        "fpa.batchnorm = off\n"
        "paths.data = corpus dir\n"
    )
    assert cfg.train.lr == 1e-4
    assert cfg.model.channels == (4, 8, 12)
    assert cfg.fpa.batchnorm is False
    assert cfg.paths.data == "corpus dir"


def test_single_position_is_3d_at_f2():
    cfg = parse_config_text("fpa.positions = f2\n")
    fpas = cfg.fpa_configs()
    assert list(fpas) == ["f2"] and fpas["f2"].variant == "spatiotemporal_3d"
    lip = cfg.lipnet_config()
    assert list(lip.fpa) == ["f2"]


def test_position_lists():
    assert parse_positions("f2:3d, input:2d") == {"f2": "spatiotemporal_3d", "input": "spatial_2d"}
    assert parse_positions("") == {}
    with pytest.raises(ArgumentError):
        parse_positions("f3")
    with pytest.raises(ArgumentError):
        parse_positions("f1,f1:2d")


@pytest.mark.parametrize("text, line", [
    ("train.lr = 1e-4\ntrain.speed = 3\n", 2),
    ("model.hidden = big\n", 1),
    ("\n\nno equals sign\n", 3),
    ("bogus.key = 1\n", 1),
    ("fpa.batchnorm = maybe\n", 1),
])
def test_errors_name_the_line(text, line):
    with pytest.raises(ConfigError, match=f":{line}:"):
        parse_config_text(text, "x.cfg")


def test_bad_positions_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_text("fpa.positions = f9\n")
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.cfg")
