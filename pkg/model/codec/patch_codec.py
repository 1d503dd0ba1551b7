# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Invertible space-to-depth codec standing in for a video VAE.

A video (..., F, H, W, 3) becomes a latent grid (..., T, h, w, c) with
T = F/pt, h = H/ph, w = W/pw and c = 3*pt*ph*pw. The transform is a pure
reshape, so it is linear, norm-preserving and exactly invertible.
"""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import contextlib
from dataclasses import dataclass

from einops import rearrange

from model.utils.config import cfg
from model.utils.errors import ShapeNotPatchable

_decode_forbidden = [0]


@dataclass
class LatentGrid(object):
    data: object
    patch: tuple
    source_shape: tuple

    @property
    def latent_shape(self):
        return tuple(self.data.shape[-4:])


def latent_shape_for(frames, hw, patch=None):
    pt, ph, pw = tuple(patch or cfg.CODEC.PATCH)
    if frames % pt or hw[0] % ph or hw[1] % pw:
        raise ShapeNotPatchable()
    return (frames // pt, hw[0] // ph, hw[1] // pw, 3 * pt * ph * pw)


def encode(video, patch=None):
    patch = tuple(patch or cfg.CODEC.PATCH)
    if video.ndim < 4 or video.shape[-1] != 3:
        raise ShapeNotPatchable('expected (..., F, H, W, 3), got {}'.format(tuple(video.shape)))
    F, H, W = video.shape[-4:-1]
    latent_shape_for(F, (H, W), patch)
    pt, ph, pw = patch
    data = rearrange(video, '... (T pt) (h ph) (w pw) c -> ... T h w (pt ph pw c)', pt=pt, ph=ph, pw=pw)
    return LatentGrid(data=data, patch=patch, source_shape=(F, H, W, 3))


def decode(grid):
    if _decode_forbidden[0]:
        raise RuntimeError('decode called on a latent-only path')
    pt, ph, pw = grid.patch
    return rearrange(grid.data, '... T h w (pt ph pw c) -> ... (T pt) (h ph) (w pw) c', pt=pt, ph=ph, pw=pw, c=3)


def decode_data(data, patch=None):
    patch = tuple(patch or cfg.CODEC.PATCH)
    return decode(LatentGrid(data=data, patch=patch, source_shape=None))


@contextlib.contextmanager
def forbid_decode():
    """Any decode() inside this block raises; used to keep reward paths in latent space."""
    _decode_forbidden[0] += 1
    try:
        yield
    finally:
        _decode_forbidden[0] -= 1
