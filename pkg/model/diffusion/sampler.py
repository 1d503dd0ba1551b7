# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Deterministic DDIM sampling with classifier-free guidance on the caption."""
import torch

from model.utils.config import cfg


def guided_epsilon(model, z, t, cond, scale):
    """eps_u + s (eps_c - eps_u). Both branches share one batched forward;
    scale 1 runs the conditional branch alone."""
    if scale == 1.:
        return model(z, t, cond)
    both = model(torch.cat([z, z], dim=0), torch.cat([t, t], dim=0), cond.cat(cond.null_text()))
    eps_c, eps_u = both.chunk(2, dim=0)
    return eps_u + scale * (eps_c - eps_u)


def ddim_update(z, eps, schedule, t_from, t_to):
    a_from, b_from = schedule.coefficients(t_from, z)
    a_to, b_to = schedule.coefficients(t_to, z)
    z0 = (z - b_from * eps) / a_from
    return a_to * z0 + b_to * eps


def solver_step(model, schedule, z, t_from, t_to, cond, scale=None):
    """One guided DDIM step from level t_from down to t_to."""
    scale = cfg.DIFFUSION.CFG_SCALE if scale is None else scale
    t = torch.full((z.shape[0],), int(t_from), dtype=torch.long, device=z.device)
    eps = guided_epsilon(model, z, t, cond, scale)
    return ddim_update(z, eps, schedule, t_from, t_to)


def initial_noise(shape, seed, dtype=torch.float32, device='cpu'):
    g = torch.Generator().manual_seed(int(seed))
    return torch.randn(shape, generator=g, dtype=dtype).to(device)


def sample(model, schedule, cond, seed, n_steps=None, scale=None, noise=None):
    """Latents (B, T, h, w, C) from pure noise by n_steps solver steps.
    A fixed seed and checkpoint give the same latents on every run."""
    T, h, w, C = model.config.latent_shape
    levels = schedule.sampler_timesteps(n_steps)
    device = model.patch_embedding.weight.device
    z = initial_noise((cond.batch_size, T, h, w, C), seed, model.dtype, device) if noise is None else noise
    with torch.no_grad():
        for i in reversed(range(len(levels) - 1)):
            z = solver_step(model, schedule, z, levels[i + 1], levels[i], cond, scale)
    return z
