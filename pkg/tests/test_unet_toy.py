import numpy as np
import pytest

from mel_refine.core.tensor import FeatureMap
from mel_refine.models.rng import GaussianStream
from mel_refine.models.unet_toy import BlockCapture, UNetConfig, build_unet, conv2d, forward, Conv
from mel_refine.refine.params import PRESETS, RefineParams
from mel_refine.utils.exceptions import ValidationError

SMALL = UNetConfig(levels=2, base_channels=4, spatial=(8, 8))


def test_gaussian_stream_is_reproducible():
    a, b = GaussianStream(7), GaussianStream(7)
    assert np.array_equal(a.normal((3, 5)), b.normal((3, 5)))
    assert not np.array_equal(GaussianStream(8).normal((3, 5)), GaussianStream(7).normal((3, 5)))


def test_gaussian_stream_uniforms_are_open_interval():
    u = GaussianStream(0).uniform(10_000)
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02


def test_gaussian_stream_moments():
    z = GaussianStream(3).normal((20_000,), std=2.0)
    assert abs(z.mean()) < 0.05
    assert z.std() == pytest.approx(2.0, rel=0.03)


def test_same_config_same_checksum():
    assert build_unet(UNetConfig()).checksum() == build_unet(UNetConfig()).checksum()


def test_seed_changes_checksum():
    assert build_unet(UNetConfig(seed=0)).checksum() != build_unet(UNetConfig(seed=1)).checksum()


def test_two_level_net_has_two_hook_sites():
    net = build_unet(SMALL)
    assert net.hook_sites == 2
    assert len(net.layers()) == 5


def test_layer_shapes_and_zero_biases():
    net = build_unet(UNetConfig(levels=3, base_channels=8))
    assert [c.weight.shape for c in net.encoder] == [(8, 1, 3, 3), (16, 8, 3, 3), (32, 16, 3, 3)]
    assert [c.weight.shape for c in net.decoder] == [(32, 64, 3, 3), (16, 48, 3, 3), (8, 24, 3, 3)]
    assert net.head.weight.shape == (1, 8, 1, 1)
    assert all(not c.bias.any() for c in net.layers())


@pytest.mark.parametrize(
    "kwargs",
    [{"levels": 1}, {"spatial": (30, 32)}, {"spatial": (4, 4)}, {"activation": "gelu"}, {"base_channels": 0}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        UNetConfig(**kwargs)


def test_conv2d_identity_kernel(rng):
    weight = np.zeros((1, 1, 3, 3), dtype=np.float32)
    weight[0, 0, 1, 1] = 1.0
    x = rng.standard_normal((1, 1, 5, 6))
    out = conv2d(x, Conv(weight=weight, bias=np.zeros(1, dtype=np.float32)))
    assert np.allclose(out, x)


def test_forward_preserves_dims(random_map):
    net = build_unet(SMALL)
    out = forward(net, random_map(2, 1, 8, 8), 0.5)
    assert out.dims == (2, 1, 8, 8)


def test_zero_input_at_t_zero_gives_zero_output():
    net = build_unet(UNetConfig())
    out = forward(net, FeatureMap(np.zeros((1, 1, 32, 32))), 0.0, PRESETS["tango2"])
    assert not out.data.any()


def test_forward_validates_inputs(random_map):
    net = build_unet(SMALL)
    with pytest.raises(ValidationError):
        forward(net, random_map(1, 1, 16, 16), 0.5)
    with pytest.raises(ValidationError):
        forward(net, random_map(1, 1, 8, 8), 1.5)


def test_identity_params_match_hookless_forward(random_map):
    net = build_unet(UNetConfig(seed=4))
    x = random_map(1, 1, 32, 32)
    assert forward(net, x, 0.3).bitwise_equal(forward(net, x, 0.3, RefineParams()))


def test_tango2_changes_output(random_map):
    net = build_unet(UNetConfig())
    x = random_map(1, 1, 32, 32)
    diff = np.abs(forward(net, x, 0.7).data - forward(net, x, 0.7, PRESETS["tango2"]).data)
    assert diff.max() > 0


def test_capture_shapes():
    net = build_unet(UNetConfig(levels=3, base_channels=8, spatial=(32, 32)))
    captures = []
    forward(net, FeatureMap(np.random.default_rng(0).standard_normal((1, 1, 32, 32))), 0.5, capture=captures)
    assert [c.block_index for c in captures] == [0, 1, 2]
    assert all(isinstance(c, BlockCapture) for c in captures)
    assert captures[0].x.dims == (1, 32, 8, 8) and captures[0].h.dims == (1, 32, 8, 8)
    assert captures[2].x.dims == (1, 16, 32, 32) and captures[2].h.dims == (1, 8, 32, 32)


def test_second_block_gains_leave_first_block_untouched(random_map):
    net = build_unet(UNetConfig())
    x = random_map(1, 1, 32, 32)
    base = PRESETS["tango2"]
    other = base.model_copy(update={"s2": 1.5, "b2": 0.3})
    first, second = [], []
    forward(net, x, 0.9, base, capture=first)
    forward(net, x, 0.9, other, capture=second)
    for part in ("x", "h", "xr", "hr"):
        assert getattr(first[0], part).bitwise_equal(getattr(second[0], part))
    assert not first[1].hr.bitwise_equal(second[1].hr)
