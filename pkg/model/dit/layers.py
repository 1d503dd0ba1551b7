# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from model.dit.rope import rope_rotate


def modulate(x, shift, scale):
    return x * (1 + scale) + shift


def sinusoidal_embedding_1d(dim, position):
    sinusoid = torch.outer(position.type(torch.float64), torch.pow(
        10000, -torch.arange(dim // 2, dtype=torch.float64, device=position.device).div(dim // 2)))
    return torch.cat([torch.cos(sinusoid), torch.sin(sinusoid)], dim=1)


def masked_attention(q, k, v, num_heads, key_mask=None):
    """q: (B, Nq, d), k/v: (B, Nk, d); key_mask (B, Nk) bool, False keys are ignored."""
    q = rearrange(q, "b s (n d) -> b n s d", n=num_heads)
    k = rearrange(k, "b s (n d) -> b n s d", n=num_heads)
    v = rearrange(v, "b s (n d) -> b n s d", n=num_heads)
    mask = None if key_mask is None else key_mask[:, None, None, :]
    x = F.scaled_dot_product_attention(q, k, v, attn_mask=mask)
    return rearrange(x, "b n s d -> b s (n d)")


class RMSNorm(nn.Module):
    def __init__(self, dim, eps=1e-6):
        super(RMSNorm, self).__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim))

    def forward(self, x):
        return x * torch.rsqrt(x.pow(2).mean(dim=-1, keepdim=True) + self.eps) * self.weight


class SelfAttention(nn.Module):
    def __init__(self, dim, num_heads, eps=1e-6):
        super(SelfAttention, self).__init__()
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads

        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.o = nn.Linear(dim, dim)
        self.norm_q = RMSNorm(dim, eps=eps)
        self.norm_k = RMSNorm(dim, eps=eps)

    def _rotate(self, x, angles):
        x = rearrange(x, "b s (n d) -> b n s d", n=self.num_heads)
        x = rope_rotate(x, angles.unsqueeze(1))
        return rearrange(x, "b n s d -> b s (n d)")

    def forward(self, x, angles, key_mask=None):
        # angles: (B, N, head_dim // 2)
        q = self._rotate(self.norm_q(self.q(x)), angles)
        k = self._rotate(self.norm_k(self.k(x)), angles)
        v = self.v(x)
        return self.o(masked_attention(q, k, v, self.num_heads, key_mask))


class CrossAttention(nn.Module):
    def __init__(self, dim, num_heads, eps=1e-6):
        super(CrossAttention, self).__init__()
        self.num_heads = num_heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.o = nn.Linear(dim, dim)
        self.norm_q = RMSNorm(dim, eps=eps)
        self.norm_k = RMSNorm(dim, eps=eps)

    def forward(self, x, context, context_mask=None):
        q = self.norm_q(self.q(x))
        k = self.norm_k(self.k(context))
        v = self.v(context)
        return self.o(masked_attention(q, k, v, self.num_heads, context_mask))


class DiTBlock(nn.Module):
    """Self-attention with RoPE, caption cross-attention and a feed-forward layer,
    modulated by the timestep embedding."""

    def __init__(self, dim, num_heads, ffn_dim, eps=1e-6):
        super(DiTBlock, self).__init__()
        self.self_attn = SelfAttention(dim, num_heads, eps)
        self.cross_attn = CrossAttention(dim, num_heads, eps)
        self.norm1 = nn.LayerNorm(dim, eps=eps, elementwise_affine=False)
        self.norm2 = nn.LayerNorm(dim, eps=eps, elementwise_affine=False)
        self.norm3 = nn.LayerNorm(dim, eps=eps)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_dim), nn.GELU(approximate='tanh'), nn.Linear(ffn_dim, dim))
        self.modulation = nn.Parameter(torch.randn(1, 6, dim) / dim ** 0.5)

    def forward(self, x, context, t_mod, angles, key_mask=None, context_mask=None):
        shift_msa, scale_msa, gate_msa, shift_mlp, scale_mlp, gate_mlp = \
            (self.modulation + t_mod).chunk(6, dim=1)
        x = x + gate_msa * self.self_attn(modulate(self.norm1(x), shift_msa, scale_msa), angles, key_mask)
        x = x + self.cross_attn(self.norm3(x), context, context_mask)
        x = x + gate_mlp * self.ffn(modulate(self.norm2(x), shift_mlp, scale_mlp))
        return x


class Head(nn.Module):
    def __init__(self, dim, out_dim, eps=1e-6):
        super(Head, self).__init__()
        self.norm = nn.LayerNorm(dim, eps=eps, elementwise_affine=False)
        self.head = nn.Linear(dim, out_dim)
        self.modulation = nn.Parameter(torch.randn(1, 2, dim) / dim ** 0.5)

    def forward(self, x, t_emb):
        shift, scale = (self.modulation + t_emb.unsqueeze(1)).chunk(2, dim=1)
        return self.head(self.norm(x) * (1 + scale) + shift)


class ZeroConv3d(nn.Module):
    """1x1x1 convolution with zero weight and bias; outputs exact zeros until trained."""

    def __init__(self, channels):
        super(ZeroConv3d, self).__init__()
        self.conv = nn.Conv3d(channels, channels, kernel_size=1)
        nn.init.zeros_(self.conv.weight)
        nn.init.zeros_(self.conv.bias)

    def forward(self, x):
        # x: (B, T, h, w, C) channels-last
        return rearrange(self.conv(rearrange(x, "b t h w c -> b c t h w")), "b c t h w -> b t h w c")


def init_linear(module, std=0.02):
    if isinstance(module, nn.Linear):
        nn.init.normal_(module.weight, mean=0.0, std=std)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.Embedding):
        nn.init.normal_(module.weight, mean=0.0, std=std)
