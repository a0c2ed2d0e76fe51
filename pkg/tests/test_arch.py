import pytest

from specnet import nn
from specnet.arch import (
    ConfigError,
    RunConfig,
    apply_overrides,
    build_lenet5,
    build_lenet7,
    build_network,
    lenet5_layers,
    parse_config,
    serialize_config,
    validate_chain,
)


def map_sides(net):
    return [shape[1] for shape in net.shapes if len(shape) == 3]


def test_lenet5_60_dimension_chain():
    net = build_lenet5(60)
    assert map_sides(net) == [60, 56, 56, 56, 56, 28, 26, 26, 26, 26, 13, 1, 1]
    assert net.shapes[-1] == (3,)


def test_lenet5_28_dimension_chain():
    net = build_lenet5(28)
    assert map_sides(net) == [28, 24, 24, 24, 24, 12, 10, 10, 10, 10, 5, 1, 1]
    assert net.shapes[-1] == (3,)


def test_lenet7_dimension_chain():
    net = build_lenet7(60)
    assert map_sides(net) == [60, 56, 56, 56, 56, 14, 10, 10, 10, 10, 5, 1, 1]
    assert net.shapes[-1] == (3,)


def test_parameter_counts():
    assert build_lenet5(60).n_parameters() == 326043
    assert build_lenet7(60).n_parameters() == 65499
    # the 28x28 variant only shrinks the final convolution
    n60, n28 = build_lenet5(60).n_parameters(), build_lenet5(28).n_parameters()
    assert n60 - n28 == 16 * 120 * (13 * 13 - 5 * 5)


def test_l2_pooling_variant_builds():
    net = build_lenet5(60, pooling="l2pool")
    assert any(isinstance(layer, nn.LpPool) for layer in net.layers)
    assert not any(isinstance(layer, nn.SubsPool) for layer in net.layers)
    assert map_sides(net)[-1] == 1


def test_unsupported_input_sides_rejected():
    with pytest.raises(ValueError, match="60 or 28"):
        build_lenet5(32)
    with pytest.raises(ValueError, match="60"):
        build_lenet7(28)


def test_validate_chain_ok_and_diagnostics():
    assert validate_chain(lenet5_layers(60), (1, 60, 60)) == "ok"
    msg = validate_chain(lenet5_layers(60), (1, 59, 59))
    assert msg != "ok"
    assert "layer" in msg and "SubsPool" in msg and "55x55" in msg
    # a chain ending before 1x1 maps is flagged at the classifier boundary
    msg = validate_chain([nn.Conv(1, 2, 3, 3)], (1, 10, 10))
    assert "classifier boundary" in msg


def test_build_network_dispatch():
    assert build_network(RunConfig(arch="lenet5", input_side=28)).shapes[0] == (1, 28, 28)
    assert build_network(RunConfig(arch="lenet7")).n_parameters() == 65499


def test_run_config_validation():
    with pytest.raises(ValueError, match="architecture"):
        RunConfig(arch="alexnet")
    with pytest.raises(ValueError, match="pooling"):
        RunConfig(pooling="avg")


CONFIG = """\
# training setup
root = /data/run7
arch = lenet5
input = 28
pooling = l2pool
eta0 = 0.02
decay = 0.5   # inverse-time decay
epochs = 30
seed = 7
imgs = ${root}/imgs
lists = ${root}/spectra_sets
out = ${root}/out
"""


def test_parse_config_full():
    cfg = parse_config(CONFIG)
    assert cfg == RunConfig(
        arch="lenet5",
        input_side=28,
        pooling="l2pool",
        eta0=0.02,
        decay=0.5,
        epochs=30,
        seed=7,
        imgs="/data/run7/imgs",
        lists="/data/run7/spectra_sets",
        out="/data/run7/out",
    )


def test_parse_config_defaults_and_round_trip():
    cfg = parse_config("arch = lenet7\n")
    assert cfg.input_side == 60 and cfg.pooling == "subs"
    assert parse_config(serialize_config(cfg)) == cfg
    full = parse_config(CONFIG)
    assert parse_config(serialize_config(full)) == full


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("arch lenet5\n", "key = value"),
        ("arch = lenet5\nwidth = 3\n", "unknown key"),
        ("input = 60\n", "missing required key"),
        ("arch = lenet5\nepochs = soon\n", "invalid value"),
        ("arch = lenet5\nout = ${nowhere}\n", "undefined variable"),
        ("arch = lenet5\nimgs = ${out}\nout = ${imgs}\n", "circular"),
        ("arch = resnet\n", "architecture"),
    ],
)
def test_parse_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_apply_overrides():
    cfg = parse_config("arch = lenet5\n")
    cfg = apply_overrides(cfg, {"input": "28", "eta0": "0.5", "out": "elsewhere"})
    assert cfg.input_side == 28 and cfg.eta0 == 0.5 and cfg.out == "elsewhere"
    with pytest.raises(ConfigError, match="unknown override"):
        apply_overrides(cfg, {"root": "/x"})
