# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Cosine noise schedule for epsilon-prediction diffusion."""
import math

import numpy as np
import torch

from model.utils.config import cfg


class NoiseSchedule(object):
    """alpha_bar[t] for t = 0..steps, with alpha_bar[0] = 1 exactly and
    strictly decreasing down to min_alpha_bar at t = steps."""

    def __init__(self, steps=None, cosine_s=None, min_alpha_bar=None):
        self.steps = cfg.DIFFUSION.STEPS if steps is None else int(steps)
        self.cosine_s = cfg.DIFFUSION.COSINE_S if cosine_s is None else cosine_s
        self.min_alpha_bar = cfg.DIFFUSION.MIN_ALPHA_BAR if min_alpha_bar is None else min_alpha_bar
        assert self.steps >= 1 and 0. < self.min_alpha_bar < 1.
        u = np.arange(self.steps + 1, dtype=np.float64) / self.steps
        f = np.cos((u + self.cosine_s) / (1. + self.cosine_s) * math.pi / 2.) ** 2
        ab = self.min_alpha_bar + (1. - self.min_alpha_bar) * (f - f[-1]) / (f[0] - f[-1])
        ab[0] = 1.
        self.alpha_bar = ab

    def __len__(self):
        return self.steps + 1

    def coefficients(self, t, like):
        """sqrt(alpha_bar), sqrt(1 - alpha_bar) at integer steps t, shaped to broadcast over like."""
        t = torch.as_tensor(t).long().reshape(-1).cpu().numpy()
        if t.min() < 0 or t.max() > self.steps:
            raise ValueError('timestep outside the schedule [0, {}]'.format(self.steps))
        ab = self.alpha_bar[t]
        shape = (-1,) + (1,) * (like.dim() - 1)
        a = torch.as_tensor(np.sqrt(ab), dtype=like.dtype, device=like.device).reshape(shape)
        b = torch.as_tensor(np.sqrt(1. - ab), dtype=like.dtype, device=like.device).reshape(shape)
        return a, b

    def q_sample(self, z0, t, eps):
        """z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps; returns z0 unchanged at t = 0."""
        a, b = self.coefficients(t, z0)
        return a * z0 + b * eps

    def sampler_timesteps(self, n_steps=None):
        """Integer levels t(i) = round(i * steps / n) for i = 0..n."""
        n_steps = cfg.DIFFUSION.SAMPLER_STEPS if n_steps is None else n_steps
        assert 1 <= n_steps <= self.steps
        return [int(round(i * self.steps / float(n_steps))) for i in range(n_steps + 1)]

    def sample_timesteps(self, batch, generator=None):
        """Training steps drawn uniformly from 1..steps."""
        return torch.randint(1, self.steps + 1, (batch,), generator=generator)
