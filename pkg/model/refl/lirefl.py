# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Reward feedback fine-tuning in latent space.

A rollout denoises from pure noise without autograd down to level t_{m+1},
then takes a single tracked solver step to z_{t_m}. The frozen reward model
scores z_{t_m} directly, so the reward gradient reaches the generator through
that one step only.
"""
from dataclasses import dataclass

import numpy as np
import torch

from model.utils.config import cfg
from model.utils.net_utils import check_finite, clip_gradient
from model.codec.patch_codec import forbid_decode
from model.diffusion.losses import sft_loss
from model.diffusion.sampler import initial_noise, solver_step

TM_POLICIES = ('all_steps', 'last_k')


@dataclass
class ReflConfig(object):
    lambda2: float = 0.1
    tm_policy: str = 'all_steps'
    last_k: int = 3
    sampler_steps: int = 10
    sft_interleave: bool = True
    rollouts: int = 1
    cfg_scale: float = 5.0

    def __post_init__(self):
        assert self.lambda2 >= 0.
        if self.tm_policy not in TM_POLICIES:
            raise ValueError('unknown t_m policy {}'.format(self.tm_policy))
        assert 1 <= self.last_k <= self.sampler_steps

    @classmethod
    def from_cfg(cls, c=None):
        c = cfg if c is None else c
        r = c.TRAIN.REFL
        return cls(lambda2=r.LAMBDA2, tm_policy=r.TM_POLICY, last_k=min(r.TM_LAST_K, c.DIFFUSION.SAMPLER_STEPS),
                   sampler_steps=c.DIFFUSION.SAMPLER_STEPS, sft_interleave=r.SFT_INTERLEAVE,
                   rollouts=r.ROLLOUTS, cfg_scale=r.CFG_SCALE)


def sample_tm(rcfg, rng):
    """Index m of the tracked step levels[m+1] -> levels[m]; m = 0 ends at the clean level."""
    if rcfg.tm_policy == 'all_steps':
        return int(rng.randint(rcfg.sampler_steps))
    return int(rng.randint(rcfg.last_k))


def rollout(generator, schedule, cond, seed, m, rcfg):
    """Untracked denoising to levels[m+1], then one tracked step. Returns (z_tm, t_m)."""
    levels = schedule.sampler_timesteps(rcfg.sampler_steps)
    if not 0 <= m < len(levels) - 1:
        raise ValueError('t_m index {} outside the sampler schedule'.format(m))
    T, h, w, C = generator.config.latent_shape
    device = generator.patch_embedding.weight.device
    z = initial_noise((cond.batch_size, T, h, w, C), seed, generator.dtype, device)
    with torch.no_grad():
        for i in range(len(levels) - 2, m, -1):
            z = solver_step(generator, schedule, z, levels[i + 1], levels[i], cond, rcfg.cfg_scale)
    z = z.detach()
    with torch.enable_grad():
        z_tm = solver_step(generator, schedule, z, levels[m + 1], levels[m], cond, rcfg.cfg_scale)
    return z_tm, levels[m]


def reward_feedback_loss(reward_model, z_tm, t_m, cond):
    """-E[r]; latent only, any decode on this path raises."""
    t = torch.full((z_tm.shape[0],), int(t_m), dtype=torch.long, device=z_tm.device)
    with forbid_decode():
        r = reward_model(z_tm, t, cond.z_ref, cond.ref_groups, cond.caption)
    return -r.mean(), r.detach()


def combined_objective(sft, refl, lambda2):
    assert lambda2 >= 0.
    if refl is None:
        return sft
    return sft + lambda2 * refl


def assert_frozen(reward_model):
    assert all(not p.requires_grad for p in reward_model.parameters()), 'reward model must be frozen'


def lirefl_step(generator, reward_model, optimizer, sft_batch, rollout_cond, rcfg, schedule, seed,
                lambda1=None, clip_norm=None, step=0):
    """One optimizer step of L = L_sft + lambda2 * L_reward.

    With lambda2 = 0 the reward path is skipped, so the update is exactly an SFT update.
    """
    assert_frozen(reward_model)
    lambda1 = cfg.DIFFUSION.LAMBDA1 if lambda1 is None else lambda1
    rng = np.random.RandomState(seed % (2 ** 32))
    g = torch.Generator().manual_seed(int(seed))

    optimizer.zero_grad()
    sft = None
    if rcfg.sft_interleave or rcfg.lambda2 == 0.:
        sft, _ = sft_loss(sft_batch, generator, lambda1, schedule, g)
    refl, rewards, tms, tracked = None, [], [], []
    if rcfg.lambda2 > 0.:
        terms = []
        for k in range(rcfg.rollouts):
            m = sample_tm(rcfg, rng)
            before = generator.tracked_forward_count
            z_tm, t_m = rollout(generator, schedule, rollout_cond, int(rng.randint(2 ** 31 - 1)), m, rcfg)
            tracked.append(generator.tracked_forward_count - before)
            term, r = reward_feedback_loss(reward_model, z_tm, t_m, rollout_cond)
            terms.append(term)
            rewards.append(float(r.mean()))
            tms.append(t_m)
        refl = torch.stack(terms).mean()
    if sft is None:
        loss = rcfg.lambda2 * refl
    else:
        loss = combined_objective(sft, refl, rcfg.lambda2)
    check_finite(loss, step)
    loss.backward()
    grad_norm = clip_gradient(generator, clip_norm) if clip_norm else None
    optimizer.step()
    return {
        'loss': float(loss),
        'sft_loss': None if sft is None else float(sft),
        'refl_loss': None if refl is None else float(refl),
        'reward': float(np.mean(rewards)) if rewards else None,
        't_m': tms,
        'tracked_forwards': tracked,
        'grad_norm': grad_norm,
    }
