# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
from dataclasses import dataclass, fields, replace

import torch
from torch import nn

from model.Denoisers import denoiser, ModelConfig
from model.dit.layers import ZeroConv3d
from model.dit.layout import NO_GROUP, assemble_layout, compact
from model.dit.rope import rope_angles
from model.utils.errors import CapacityExceeded, LatentShapeError
from datasets.captions import null_caption


@dataclass
class Conditions(object):
    """Batched condition set. Any of the control entries may be None.

    caption:     B x L token ids
    z_ref:       B x S x h x w x C clean reference latents, S <= n_max
    ref_groups:  B x S group id per slot, -1 for padding
    z_box:       B x T x h x w x C box-video latents
    box_groups:  B x T x h x w x n_max box footprints per group
    traj_map:    B x T x h x w x d scattered trajectory codes
    traj_groups: B x T x h x w x n_max cells written per group
    """
    caption: torch.Tensor
    z_ref: torch.Tensor = None
    ref_groups: torch.Tensor = None
    z_box: torch.Tensor = None
    box_groups: torch.Tensor = None
    traj_map: torch.Tensor = None
    traj_groups: torch.Tensor = None

    @property
    def batch_size(self):
        return self.caption.shape[0]

    def _map(self, fn):
        return Conditions(**dict((f.name, None if getattr(self, f.name) is None else fn(getattr(self, f.name)))
                                 for f in fields(self)))

    def to(self, device=None, dtype=None):
        def move(x):
            if x.is_floating_point():
                return x.to(device=device, dtype=dtype)
            return x.to(device=device)
        return self._map(move)

    def repeat(self, n):
        return self._map(lambda x: x.repeat_interleave(n, dim=0))

    def null_text(self):
        """Copy with every caption replaced by the null caption."""
        null = torch.as_tensor(null_caption(self.caption.shape[1]), device=self.caption.device)
        return replace(self, caption=null[None].expand_as(self.caption).clone())

    def cat(self, other):
        out = {}
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            assert (a is None) == (b is None), 'cannot concatenate {} with a missing entry'.format(f.name)
            out[f.name] = None if a is None else torch.cat([a, b], dim=0)
        return Conditions(**out)


class omniDiT(denoiser):
    """Multi-subject motion-conditioned DiT.

    Trajectory and reference tokens join the video tokens in one sequence;
    box latents are injected into the video tokens through zero-initialized
    1x1x1 convolutions at the input and after every block.
    """

    def __init__(self, config):
        super(omniDiT, self).__init__(config)
        # generator forwards run with autograd tracking, audited by the reward stage
        self.tracked_forward_count = 0

    def _init_modules(self):
        super(omniDiT, self)._init_modules()
        c = self.config
        d, C = c.width, c.latent_shape[-1]
        self.box_embedding = nn.Linear(C, d)
        self.traj_embedding = nn.Linear(d, d)
        self.group_embeddings = nn.Parameter(torch.zeros(c.n_max, d))
        self.object_embedding = nn.Parameter(torch.zeros(d))
        self.control_embedding = nn.Parameter(torch.zeros(d))
        self.box_in = ZeroConv3d(d)
        self.box_layers = nn.ModuleList([ZeroConv3d(d) for _ in range(c.layers)]) if c.hier_injection \
            else nn.ModuleList()

    def _init_weights(self):
        super(omniDiT, self)._init_weights()
        for p in (self.group_embeddings, self.object_embedding, self.control_embedding):
            nn.init.normal_(p, mean=0.0, std=0.02)
        # ZeroConv3d zeroes itself; the generic init above only touches Linear and Embedding

    def _check_shapes(self, z_t, cond):
        T, h, w, C = self.config.latent_shape
        if tuple(z_t.shape[1:]) != (T, h, w, C):
            raise LatentShapeError('expected latents (B, {}, {}, {}, {}), got {}'.format(T, h, w, C, tuple(z_t.shape)))
        if cond.z_ref is not None:
            if cond.z_ref.shape[1] > self.config.n_max:
                raise CapacityExceeded()
            if tuple(cond.z_ref.shape[2:]) != (h, w, C):
                raise LatentShapeError('bad reference latent shape {}'.format(tuple(cond.z_ref.shape)))
        if cond.z_box is not None and tuple(cond.z_box.shape[1:]) != (T, h, w, C):
            raise LatentShapeError('bad box latent shape {}'.format(tuple(cond.z_box.shape)))

    def _group_map(self, groups):
        if groups is None or not self.config.group_emb:
            return 0.
        return torch.matmul(groups.to(self.dtype), self.group_embeddings)

    def box_features(self, cond):
        if cond.z_box is None:
            return None
        return self.box_embedding(cond.z_box.to(self.dtype)) + self.control_embedding + self._group_map(cond.box_groups)

    def _trajectory_tokens(self, cond, B):
        T, h, w, _ = self.config.latent_shape
        if cond.traj_map is None:
            traj_map = torch.zeros(B, T, h, w, self.config.width, dtype=self.dtype,
                                   device=self.patch_embedding.weight.device)
        else:
            traj_map = cond.traj_map.to(self.dtype)
        x = self.traj_embedding(traj_map) + self.control_embedding + self._group_map(cond.traj_groups)
        if cond.traj_groups is None:
            ids = torch.full((B, T * h * w), NO_GROUP, dtype=torch.long, device=x.device)
        else:
            g = cond.traj_groups.flatten(1, 3).float()
            ids = torch.where(g.sum(-1) > 0, g.argmax(dim=-1), torch.full_like(g[..., 0], NO_GROUP, dtype=torch.long))
        return x.flatten(1, 3), ids

    def _reference_tokens(self, cond, B):
        h, w = self.config.latent_shape[1:3]
        d = self.config.width
        if cond.z_ref is None:
            groups = torch.full((B, self.config.n_max), -1, dtype=torch.long, device=self.patch_embedding.weight.device)
            return torch.zeros(B, self.config.n_max, h * w, d, dtype=self.dtype, device=groups.device), groups
        groups = cond.ref_groups.long()
        x = self.patch_embedding(cond.z_ref.to(self.dtype)) + self.object_embedding
        if self.config.group_emb:
            g = self.group_embeddings[groups.clamp(min=0)] * (groups >= 0)[..., None].to(self.dtype)
            x = x + g[:, :, None, None, :]
        return x.flatten(2, 3), groups

    def layout(self, z_t, cond):
        B = z_t.shape[0]
        x = self.patch_embedding(z_t.to(self.dtype))
        box = self.box_features(cond)
        if box is not None:
            x = x + self.box_in(box)
        traj, traj_ids = self._trajectory_tokens(cond, B)
        refs, ref_groups = self._reference_tokens(cond, B)
        layout = assemble_layout(x.flatten(1, 3), traj, refs, ref_groups, self.config.latent_shape,
                                 cond_rope=self.config.cond_rope, traj_groups=traj_ids)
        return layout, box

    def forward(self, z_t, t, cond):
        """Noise prediction for z_t (B, T, h, w, C) at timesteps t (B,)."""
        self._check_shapes(z_t, cond)
        if torch.is_grad_enabled() and any(p.requires_grad for p in self.parameters()):
            self.tracked_forward_count += 1
        layout, box = self.layout(z_t, cond)
        layout = compact(layout)
        n = layout.num_video
        key_mask = None if bool(layout.attn_mask.all()) else layout.attn_mask
        angles = rope_angles(layout.rope_index, self.config.head_dim, self.config.rope_theta)
        context, context_mask = self.embed_text(cond.caption)
        t_emb, t_mod = self.embed_time(t)

        x = layout.tokens
        for l, block in enumerate(self.blocks):
            x = block(x, context, t_mod, angles, key_mask, context_mask)
            if box is not None and self.config.hier_injection:
                x = torch.cat([x[:, :n] + self.box_layers[l](box).flatten(1, 3), x[:, n:]], dim=1)
        out = self.head(x[:, :n], t_emb)
        return out.reshape(z_t.shape)


def build_generator(c=None):
    return omniDiT(ModelConfig.from_cfg(c))
