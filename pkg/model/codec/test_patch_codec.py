import numpy as np
import pytest
import torch

from model.codec.patch_codec import encode, decode, forbid_decode, latent_shape_for
from model.utils.errors import ShapeNotPatchable


def test_desk_shape():
    g = encode(np.zeros((8, 64, 64, 3), dtype=np.float32), patch=(1, 8, 8))
    assert g.data.shape == (8, 8, 8, 192)
    assert not g.data.any()
    assert g.source_shape == (8, 64, 64, 3)


def test_round_trip_is_exact():
    rng = np.random.RandomState(0)
    for _ in range(1000):
        x = rng.rand(2, 16, 16, 3).astype(np.float32)
        assert np.array_equal(decode(encode(x, patch=(1, 8, 8))), x)
    x = torch.randn(3, 4, 32, 32, 3)
    assert torch.equal(decode(encode(x, patch=(2, 8, 8))), x)


def test_linear_and_norm_preserving():
    rng = np.random.RandomState(1)
    x, y = rng.randn(4, 16, 16, 3), rng.randn(4, 16, 16, 3)
    a, b = 0.5, -2.0
    lhs = encode(a * x + b * y, patch=(1, 8, 8)).data
    rhs = a * encode(x, patch=(1, 8, 8)).data + b * encode(y, patch=(1, 8, 8)).data
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)
    assert np.isclose(np.linalg.norm(encode(x, patch=(1, 8, 8)).data), np.linalg.norm(x))


def test_channel_layout_keeps_rgb_innermost():
    x = np.zeros((1, 8, 8, 3), dtype=np.float32)
    x[0, 0, 1, 2] = 1.
    g = encode(x, patch=(1, 8, 8))
    assert g.data[0, 0, 0, 1 * 3 + 2] == 1.


def test_not_patchable():
    with pytest.raises(ShapeNotPatchable):
        encode(np.zeros((8, 60, 64, 3)), patch=(1, 8, 8))
    with pytest.raises(ShapeNotPatchable):
        latent_shape_for(3, (64, 64), (2, 8, 8))


def test_forbid_decode():
    g = encode(np.zeros((1, 8, 8, 3)), patch=(1, 8, 8))
    with forbid_decode():
        with pytest.raises(RuntimeError):
            decode(g)
    decode(g)
