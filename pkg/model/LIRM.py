# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Latent identity reward model.

A copy of the generator's first K blocks extracts features from a noised video
latent and from clean one-frame reference latents. Reference features query
the video features through a bias-free multi-head cross-attention; a residual
fusion and a two-layer head give one scalar per sample.
"""
from dataclasses import replace

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from model.Denoisers import denoiser
from model.dit.layers import masked_attention
from model.utils.config import cfg
from model.utils.net_utils import set_requires_grad, weights_normal_init


class latentBackbone(denoiser):
    """Trunk prefix: embeddings plus the first K blocks, no output head."""

    def _init_modules(self):
        super(latentBackbone, self)._init_modules()
        del self.head

    @classmethod
    def from_generator(cls, generator, n_blocks):
        assert 1 <= n_blocks <= generator.config.layers
        net = cls(replace(generator.config, layers=n_blocks)).to(generator.dtype)
        own = net.state_dict()
        state = dict((k, v) for k, v in generator.state_dict().items() if k in own)
        net.load_state_dict(state, strict=True)
        return net

    def forward(self, z, t, caption):
        return self.trunk_features(z, t, caption)


class LIRM(nn.Module):

    def __init__(self, config, n_blocks=None, ref_as_query=True):
        super(LIRM, self).__init__()
        self.config = config
        self.ref_as_query = ref_as_query
        self.num_heads = config.heads
        n_blocks = config.layers if n_blocks is None else n_blocks
        self.backbone = latentBackbone(replace(config, layers=n_blocks))
        self._init_modules()
        self._init_weights()

    def _init_modules(self):
        d = self.config.width
        self.W_Q = nn.Linear(d, d, bias=False)
        self.W_K = nn.Linear(d, d, bias=False)
        self.W_V = nn.Linear(d, d, bias=False)
        self.reward_head = nn.Sequential(nn.Linear(d, d), nn.GELU(approximate='tanh'), nn.Linear(d, 1))

    def _init_weights(self):
        weights_normal_init([self.W_Q, self.W_K, self.W_V, self.reward_head], dev=0.02)

    @classmethod
    def from_generator(cls, generator, n_blocks=None, ref_as_query=True):
        n_blocks = generator.config.layers if n_blocks is None else n_blocks
        net = cls(generator.config, n_blocks, ref_as_query).to(generator.dtype)
        net.backbone = latentBackbone.from_generator(generator, n_blocks)
        return net

    @property
    def dtype(self):
        return self.W_Q.weight.dtype

    @property
    def n_blocks(self):
        return len(self.backbone.blocks)

    def freeze_embeddings(self, flag=True):
        """Freeze (or release) the text and patch embeddings of the backbone."""
        for m in (self.backbone.text_embedding, self.backbone.text_proj, self.backbone.patch_embedding):
            set_requires_grad(m, not flag)

    def frozen_parameters(self):
        return [p for p in self.parameters() if not p.requires_grad]

    def param_groups(self, lr_backbone, lr_head):
        backbone = [p for p in self.backbone.parameters() if p.requires_grad]
        ids = set(id(p) for p in self.backbone.parameters())
        head = [p for p in self.parameters() if p.requires_grad and id(p) not in ids]
        return [{'params': backbone, 'lr': lr_backbone}, {'params': head, 'lr': lr_head}]

    def reference_features(self, z_ref, caption):
        """Clean (t = 0) features of every reference slot: (B, S * h * w, d)."""
        B, S = z_ref.shape[:2]
        refs = z_ref.reshape((B * S, 1) + tuple(z_ref.shape[2:]))
        t0 = torch.zeros(B * S, dtype=torch.long, device=z_ref.device)
        feats = self.backbone(refs, t0, caption.repeat_interleave(S, dim=0))
        return feats.reshape(B, S * feats.shape[1], feats.shape[2])

    def attend(self, query_feats, kv_feats, kv_mask=None):
        """Multi-head cross-attention; returns (h_attn, Q)."""
        q = self.W_Q(query_feats)
        h = masked_attention(q, self.W_K(kv_feats), self.W_V(kv_feats), self.num_heads, kv_mask)
        return h, q

    def forward(self, z_v, t, z_ref, ref_groups, caption):
        """Scalar reward per sample for noised video latents z_v at steps t."""
        z_v = z_v.to(self.dtype)
        z_ref = z_ref.to(self.dtype)
        valid = ref_groups >= 0
        assert bool(valid.any(dim=1).all()), 'every sample needs at least one reference'
        f_v = self.backbone(z_v, t, caption)
        f_ref = self.reference_features(z_ref, caption)
        hw = f_ref.shape[1] // z_ref.shape[1]
        ref_mask = valid.repeat_interleave(hw, dim=1)
        if self.ref_as_query:
            h, q = self.attend(f_ref, f_v)
            weights = ref_mask.to(self.dtype)
        else:
            h, q = self.attend(f_v, f_ref, ref_mask)
            weights = torch.ones(f_v.shape[:2], dtype=self.dtype, device=f_v.device)
        r = self.reward_head(h + q).squeeze(-1)
        return (r * weights).sum(dim=1) / weights.sum(dim=1)


def build_lirm(generator, c=None):
    c = cfg if c is None else c
    net = LIRM.from_generator(generator, min(c.TRAIN.LIRM.BLOCKS, generator.config.layers),
                              c.TRAIN.LIRM.REF_AS_QUERY)
    net.freeze_embeddings(c.TRAIN.LIRM.FREEZE_EMBED)
    return net


def lirm_bce_loss(r_win, r_lose):
    """BCE in logit form; winners carry label 1 and losers label 0."""
    r = torch.cat([r_win, r_lose])
    y = torch.cat([torch.ones_like(r_win), torch.zeros_like(r_lose)])
    return F.binary_cross_entropy_with_logits(r, y)


def bt_loss(r_win, r_lose):
    return -F.logsigmoid(r_win - r_lose).mean()


def reward_loss(r_win, r_lose, kind='bce'):
    if kind == 'bce':
        return lirm_bce_loss(r_win, r_lose)
    if kind == 'bt':
        return bt_loss(r_win, r_lose)
    raise ValueError('unknown reward loss {}'.format(kind))


def bin_edges(n_bins):
    return np.linspace(0., 1., n_bins + 1)


def bin_label(lo, hi):
    return '[{:.1f},{:.1f}]'.format(lo, hi) if lo == 0. else '({:.1f},{:.1f}]'.format(lo, hi)


def pairwise_accuracy_by_bin(r_win, r_lose, t, steps, n_bins=5):
    """Fraction of pairs with r(win) > r(lose) per normalized-t bin; ties count wrong.

    The first bin is closed on both ends, later bins are left-open. Empty bins are None.
    """
    r_win, r_lose = np.asarray(r_win, dtype=np.float64), np.asarray(r_lose, dtype=np.float64)
    u = np.asarray(t, dtype=np.float64) / float(steps)
    correct = r_win > r_lose
    edges = bin_edges(n_bins)
    report = {}
    for k in range(n_bins):
        lo, hi = edges[k], edges[k + 1]
        sel = (u >= lo) & (u <= hi) if k == 0 else (u > lo) & (u <= hi)
        report[bin_label(lo, hi)] = float(correct[sel].mean()) if sel.any() else None
    report['overall'] = float(correct.mean()) if len(correct) else None
    return report


def bin_timesteps(k, n_bins, steps):
    """Integer steps t whose normalized value t / steps falls in bin k."""
    edges = bin_edges(n_bins)
    lo = int(np.floor(edges[k] * steps)) + (0 if k == 0 else 1)
    hi = int(np.floor(edges[k + 1] * steps + 1e-9))
    return lo, hi


def score_pairs(reward_model, batch, schedule, t, eps):
    """Rewards of win and lose latents noised at the same t with the same eps."""
    z_win = schedule.q_sample(batch['z_win'].to(reward_model.dtype), t, eps)
    z_lose = schedule.q_sample(batch['z_lose'].to(reward_model.dtype), t, eps)
    r_win = reward_model(z_win, t, batch['z_ref'], batch['ref_groups'], batch['caption'])
    r_lose = reward_model(z_lose, t, batch['z_ref'], batch['ref_groups'], batch['caption'])
    return r_win, r_lose


def heldout_accuracy(reward_model, batches, schedule, seed=0, n_bins=5):
    """Pairwise accuracy per normalized-t bin; every pair is scored once in every bin.

    Returns (report, per-corruption accuracy).
    """
    g = torch.Generator().manual_seed(int(seed))
    r_w, r_l, ts, kinds = [], [], [], []
    reward_model.eval()
    with torch.no_grad():
        for batch in batches:
            B = batch['z_win'].shape[0]
            for k in range(n_bins):
                lo, hi = bin_timesteps(k, n_bins, schedule.steps)
                t = torch.randint(lo, hi + 1, (B,), generator=g).to(batch['z_win'].device)
                eps = torch.randn(batch['z_win'].shape, generator=g, dtype=reward_model.dtype)
                eps = eps.to(batch['z_win'].device)
                r_win, r_lose = score_pairs(reward_model, batch, schedule, t, eps)
                r_w += r_win.cpu().tolist()
                r_l += r_lose.cpu().tolist()
                ts += t.cpu().tolist()
                kinds += list(batch['corruption'])
    report = pairwise_accuracy_by_bin(r_w, r_l, ts, schedule.steps, n_bins)
    correct = np.asarray(r_w) > np.asarray(r_l)
    kinds = np.asarray(kinds)
    by_kind = dict((str(c), float(correct[kinds == c].mean())) for c in sorted(set(kinds.tolist())))
    return report, by_kind
