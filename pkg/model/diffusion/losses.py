# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
import numpy as np
import torch

from model.utils.config import cfg
from model.conditioning.box_utils import box_footprint_latent


def box_mask_latent(tracks, latent_shape, patch=None):
    """T x h x w float mask: 1 where a cell's pixel footprint meets any box of its frames."""
    patch = tuple(patch or cfg.CODEC.PATCH)
    mask = np.zeros(tuple(latent_shape[:3]), dtype=bool)
    for tr in tracks:
        mask |= box_footprint_latent(tr.boxes, latent_shape, patch)
    return mask.astype(np.float32)


def reweighted_mse(eps_pred, eps, mask, lambda1):
    """mean((1 + lambda1 M) * (eps - eps_pred)^2); mask M is (B, T, h, w)."""
    assert lambda1 >= 0.
    err = (eps_pred - eps).pow(2)
    if mask is None or lambda1 == 0.:
        return err.mean()
    w = 1. + lambda1 * mask.to(err.dtype)[..., None]
    return (w * err).mean()


def sft_loss(batch, model, lambda1, schedule, generator):
    """Noise a clean batch at uniform training steps and score the prediction.

    batch: dict with 'z0' (B, T, h, w, C), 'cond' (Conditions) and 'box_mask' (B, T, h, w).
    Returns (loss, t).
    """
    z0 = batch['z0']
    t = schedule.sample_timesteps(z0.shape[0], generator).to(z0.device)
    eps = torch.randn(z0.shape, generator=generator, dtype=z0.dtype).to(z0.device)
    z_t = schedule.q_sample(z0, t, eps)
    pred = model(z_t, t, batch['cond'])
    return reweighted_mse(pred, eps, batch.get('box_mask'), lambda1), t
