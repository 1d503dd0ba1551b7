# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
import abc
from dataclasses import dataclass, asdict

import torch
from torch import nn

from model.utils.config import cfg
from model.codec.patch_codec import latent_shape_for
from model.dit.layers import DiTBlock, Head, init_linear, sinusoidal_embedding_1d
from model.dit.rope import rope_angles, rope_axis_dims
from model.dit.layout import grid_index
from datasets.captions import PAD


@dataclass
class ModelConfig(object):
    layers: int
    width: int
    heads: int
    latent_shape: tuple  # (T, h, w, C)
    n_max: int
    vocab: int
    ffn_ratio: int = 4
    rope_theta: float = 10000.
    eps: float = 1e-6
    cond_rope: bool = True
    hier_injection: bool = True
    group_emb: bool = True

    def __post_init__(self):
        self.latent_shape = tuple(int(v) for v in self.latent_shape)
        assert self.width % self.heads == 0, 'width must be divisible by heads'
        rope_axis_dims(self.head_dim)

    @property
    def head_dim(self):
        return self.width // self.heads

    @property
    def t_ref(self):
        return self.latent_shape[0]

    @property
    def t_pad(self):
        return self.latent_shape[0] + 1

    def to_dict(self):
        d = asdict(self)
        d['latent_shape'] = list(self.latent_shape)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_cfg(cls, c=None):
        c = cfg if c is None else c
        latent = latent_shape_for(c.WORLD.FRAMES, (c.WORLD.HEIGHT, c.WORLD.WIDTH), c.CODEC.PATCH)
        return cls(layers=c.MODEL.LAYERS, width=c.MODEL.WIDTH, heads=c.MODEL.HEADS, latent_shape=latent,
                   n_max=c.MODEL.N_MAX, vocab=c.MODEL.VOCAB, ffn_ratio=c.MODEL.FFN_RATIO,
                   rope_theta=c.MODEL.ROPE_THETA, eps=c.MODEL.EPS, cond_rope=c.MODEL.COND_ROPE,
                   hier_injection=c.MODEL.HIER_INJECTION, group_emb=c.MODEL.GROUP_EMB)


class denoiser(nn.Module):
    """Plain DiT trunk: patch, caption and timestep embeddings, blocks and head.

    Subclasses add conditioning tokens; the trunk alone is what the reward
    model borrows as its backbone.
    """
    __metaclass__ = abc.ABCMeta

    def __init__(self, config):
        super(denoiser, self).__init__()
        self.config = config
        self._init_modules()
        self._init_weights()

    def _init_modules(self):
        c = self.config
        d, C = c.width, c.latent_shape[-1]
        self.patch_embedding = nn.Linear(C, d)
        self.text_embedding = nn.Embedding(c.vocab, d)
        self.text_proj = nn.Sequential(nn.Linear(d, d), nn.GELU(approximate='tanh'), nn.Linear(d, d))
        self.time_embedding = nn.Sequential(nn.Linear(d, d), nn.SiLU(), nn.Linear(d, d))
        self.time_projection = nn.Sequential(nn.SiLU(), nn.Linear(d, 6 * d))
        self.blocks = nn.ModuleList([DiTBlock(d, c.heads, c.ffn_ratio * d, c.eps) for _ in range(c.layers)])
        self.head = Head(d, C, c.eps)

    def _init_weights(self):
        for m in self.modules():
            init_linear(m)

    @property
    def dtype(self):
        return self.patch_embedding.weight.dtype

    def embed_text(self, tokens):
        """(B, L) ids -> context (B, L, d) and key mask; all-padding rows attend everywhere."""
        tokens = tokens.long()
        pos = sinusoidal_embedding_1d(self.config.width, torch.arange(tokens.shape[1], device=tokens.device))
        context = self.text_proj(self.text_embedding(tokens) + pos.to(self.dtype)[None])
        mask = tokens != PAD
        mask = mask | ~mask.any(dim=1, keepdim=True)
        return context, mask

    def embed_time(self, t):
        t = torch.as_tensor(t, device=self.patch_embedding.weight.device).reshape(-1)
        t_emb = self.time_embedding(sinusoidal_embedding_1d(self.config.width, t).to(self.dtype))
        t_mod = self.time_projection(t_emb).unflatten(1, (6, self.config.width))
        return t_emb, t_mod

    def grid_angles(self, frames, batch):
        h, w = self.config.latent_shape[1:3]
        index = grid_index(frames, h, w, self.patch_embedding.weight.device)
        angles = rope_angles(index, self.config.head_dim, self.config.rope_theta)
        return angles[None].expand(batch, -1, -1)

    def trunk_features(self, z, t, caption, n_blocks=None):
        """Run the first n_blocks blocks on latent video tokens only.

        z: (B, T', h, w, C) with any T'; returns (B, T' h w, d).
        """
        B, Tz = z.shape[0], z.shape[1]
        n_blocks = len(self.blocks) if n_blocks is None else n_blocks
        x = self.patch_embedding(z.to(self.dtype)).flatten(1, 3)
        context, context_mask = self.embed_text(caption)
        _, t_mod = self.embed_time(t)
        angles = self.grid_angles(Tz, B)
        for block in self.blocks[:n_blocks]:
            x = block(x, context, t_mod, angles, None, context_mask)
        return x

    @abc.abstractmethod
    def forward(self, z_t, t, conditions):
        pass
