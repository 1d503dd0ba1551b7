import copy

import numpy as np
import pytest
import torch

import _init_path  # noqa: F401

from model.utils.config import cfg, _merge_a_into_b
from model.Denoisers import ModelConfig
from model.OmniDiT import Conditions, omniDiT

TINY_LATENT = (4, 4, 4, 192)


@pytest.fixture
def tiny_cfg():
    """Shrinks the global options to a 4-frame 32x32 world and a 2-block model."""
    saved = copy.deepcopy(cfg)
    cfg.WORLD.FRAMES = 4
    cfg.WORLD.HEIGHT = 32
    cfg.WORLD.WIDTH = 32
    cfg.WORLD.SIZE_RANGE = [0.16, 0.22]
    cfg.WORLD.MAX_SPEED = 1.5
    cfg.MODEL.LAYERS = 2
    cfg.MODEL.WIDTH = 48
    cfg.MODEL.HEADS = 2
    cfg.DIFFUSION.STEPS = 100
    cfg.DIFFUSION.SAMPLER_STEPS = 4
    cfg.TRAIN.LIRM.BLOCKS = 2
    cfg.EVAL.N_SAMPLES = 4
    try:
        yield cfg
    finally:
        _merge_a_into_b(saved, cfg)


def tiny_config(**kw):
    args = dict(layers=2, width=48, heads=2, latent_shape=TINY_LATENT, n_max=3, vocab=48)
    args.update(kw)
    return ModelConfig(**args)


@pytest.fixture
def tiny_model():
    torch.manual_seed(0)
    return omniDiT(tiny_config()).double()


def random_conditions(config, batch=1, n_refs=2, seed=0, dtype=torch.float64):
    """Full condition set with n_refs valid reference slots and random controls."""
    g = torch.Generator().manual_seed(seed)
    T, h, w, C = config.latent_shape
    n = config.n_max
    caption = torch.randint(2, config.vocab, (batch, 8), generator=g)
    caption[:, 6:] = 0
    ref_groups = torch.full((batch, n), -1, dtype=torch.long)
    ref_groups[:, :n_refs] = torch.arange(n_refs)
    box_groups = (torch.rand(batch, T, h, w, n, generator=g) < 0.3).to(dtype)
    box_groups[..., n_refs:] = 0
    traj_groups = (torch.rand(batch, T, h, w, n, generator=g) < 0.2).to(dtype)
    traj_groups[..., n_refs:] = 0
    return Conditions(caption=caption,
                      z_ref=torch.randn(batch, n, h, w, C, generator=g, dtype=dtype),
                      ref_groups=ref_groups,
                      z_box=torch.randn(batch, T, h, w, C, generator=g, dtype=dtype),
                      box_groups=box_groups,
                      traj_map=torch.randn(batch, T, h, w, config.width, generator=g, dtype=dtype),
                      traj_groups=traj_groups)


@pytest.fixture
def make_conditions():
    return random_conditions


@pytest.fixture
def rng():
    return np.random.RandomState(0)
