# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""3-D rotary position embedding over (t, y, x) token indices.

The head dimension is split into a temporal part and two equal spatial
parts; every part rotates interleaved channel pairs with transformer-style
frequencies.
"""
import torch


def rope_axis_dims(head_dim):
    """(dt, dy, dx) channel counts; each must be even."""
    dy = dx = 2 * (head_dim // 6)
    dt = head_dim - dy - dx
    if dt % 2 or dy == 0:
        raise ValueError('head dim {} cannot be split into three even RoPE axes'.format(head_dim))
    return dt, dy, dx


def _axis_freqs(dim, theta):
    return 1.0 / (theta ** (torch.arange(0, dim, 2, dtype=torch.float64) / dim))


def rope_angles(index, head_dim, theta=10000.):
    """index: (..., 3) integer (t, y, x) -> (..., head_dim // 2) float64 angles."""
    index = index.to(torch.float64)
    parts = []
    for axis, dim in enumerate(rope_axis_dims(head_dim)):
        freqs = _axis_freqs(dim, theta).to(index.device)
        parts.append(index[..., axis:axis + 1] * freqs)
    return torch.cat(parts, dim=-1)


def rope_rotate(x, angles):
    """Rotate pairs (x[2i], x[2i+1]) of x (..., N, head_dim) by angles broadcastable
    to (..., N, head_dim // 2)."""
    cos = torch.cos(angles).to(x.dtype)
    sin = torch.sin(angles).to(x.dtype)
    x1, x2 = x[..., 0::2], x[..., 1::2]
    out = torch.stack([x1 * cos - x2 * sin, x1 * sin + x2 * cos], dim=-1)
    return out.flatten(-2)
