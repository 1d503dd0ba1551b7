# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Token sequence assembly.

The sequence is [video | trajectory | reference slots], each block laid out
frame-major over the h x w latent grid. Reference slots without an image are
padding: they take the shared padding time index and are excluded as keys.
"""
from dataclasses import dataclass

import torch

ROLE_VIDEO, ROLE_TRAJECTORY, ROLE_REFERENCE, ROLE_PADDING = 0, 1, 2, 3
NO_GROUP = -1


@dataclass
class TokenLayout(object):
    tokens: torch.Tensor       # B x N x d
    rope_index: torch.Tensor   # B x N x 3, (t, y, x)
    group_id: torch.Tensor     # B x N, NO_GROUP where unset
    role: torch.Tensor         # B x N
    attn_mask: torch.Tensor    # B x N, False keys are ignored
    num_video: int

    @property
    def num_tokens(self):
        return self.tokens.shape[1]

    def video_tokens(self, x=None):
        x = self.tokens if x is None else x
        return x[:, :self.num_video]


def grid_index(T, h, w, device):
    t, y, x = torch.meshgrid(torch.arange(T, device=device), torch.arange(h, device=device),
                             torch.arange(w, device=device), indexing='ij')
    return torch.stack([t, y, x], dim=-1).reshape(-1, 3)


def build_rope_index(latent_shape, ref_groups, cond_rope=True):
    """Per-token (t, y, x), role, group and key mask for a batch.

    With cond_rope, trajectory tokens reuse the video t, references share
    t_ref = T and padding shares t_pad = T + 1. Without it every block gets
    fresh sequential t values after the video.
    """
    T, h, w = latent_shape[:3]
    B, S = ref_groups.shape
    device = ref_groups.device
    video = grid_index(T, h, w, device)
    traj = video.clone()
    if not cond_rope:
        traj[:, 0] += T
    yx = grid_index(1, h, w, device)[:, 1:]
    valid = ref_groups >= 0

    slot = torch.arange(S, device=device)[None, :].expand(B, S)
    if cond_rope:
        t_slot = torch.where(valid, torch.full_like(slot, T), torch.full_like(slot, T + 1))
    else:
        t_slot = 2 * T + slot
    ref_t = t_slot[:, :, None].expand(B, S, h * w)
    ref_yx = yx[None, None].expand(B, S, h * w, 2)
    ref_index = torch.cat([ref_t[..., None], ref_yx], dim=-1).reshape(B, S * h * w, 3)

    n_video = T * h * w
    rope_index = torch.cat([video[None].expand(B, -1, -1), traj[None].expand(B, -1, -1), ref_index], dim=1)
    ref_role = torch.where(valid, torch.full_like(slot, ROLE_REFERENCE), torch.full_like(slot, ROLE_PADDING))
    role = torch.cat([torch.full((B, n_video), ROLE_VIDEO, dtype=torch.long, device=device),
                      torch.full((B, n_video), ROLE_TRAJECTORY, dtype=torch.long, device=device),
                      ref_role[:, :, None].expand(B, S, h * w).reshape(B, -1)], dim=1)
    ref_group = torch.where(valid, ref_groups, torch.full_like(ref_groups, NO_GROUP))
    group = torch.cat([torch.full((B, 2 * n_video), NO_GROUP, dtype=torch.long, device=device),
                       ref_group[:, :, None].expand(B, S, h * w).reshape(B, -1)], dim=1)
    return rope_index, role, group, role != ROLE_PADDING


def assemble_layout(video, traj, refs, ref_groups, latent_shape, cond_rope=True, traj_groups=None):
    """video, traj: B x (T h w) x d; refs: B x S x (h w) x d.

    traj_groups (B x (T h w), NO_GROUP where unset) labels trajectory tokens
    with the group whose tracks wrote them.
    """
    B = video.shape[0]
    rope_index, role, group, attn_mask = build_rope_index(latent_shape, ref_groups, cond_rope)
    if traj_groups is not None:
        n = video.shape[1]
        group = group.clone()
        group[:, n:2 * n] = traj_groups
    tokens = torch.cat([video, traj, refs.reshape(B, -1, refs.shape[-1])], dim=1)
    return TokenLayout(tokens=tokens, rope_index=rope_index, group_id=group, role=role,
                       attn_mask=attn_mask, num_video=video.shape[1])


def compact(layout):
    """Drop padding tokens when every sample pads the same slots.

    The result carries an all-true mask, so attention never sees the removed
    tokens and the output does not depend on how many slots were padded.
    """
    mask = layout.attn_mask
    if bool(mask.all()) or not bool((mask == mask[:1]).all()):
        return layout
    keep = mask[0]
    return TokenLayout(tokens=layout.tokens[:, keep], rope_index=layout.rope_index[:, keep],
                       group_id=layout.group_id[:, keep], role=layout.role[:, keep],
                       attn_mask=layout.attn_mask[:, keep], num_video=layout.num_video)
