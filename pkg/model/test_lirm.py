import math

import numpy as np
import pytest
import torch
from torch import nn

from conftest import random_conditions
from model.LIRM import LIRM, bin_timesteps, bt_loss, heldout_accuracy, lirm_bce_loss, pairwise_accuracy_by_bin, \
    reward_loss
from model.diffusion.schedule import NoiseSchedule
from model.utils.net_utils import param_hash


@pytest.fixture
def lirm(tiny_model):
    torch.manual_seed(1)
    return LIRM.from_generator(tiny_model, n_blocks=2)


def _reward_inputs(config, batch=2, seed=0):
    g = torch.Generator().manual_seed(seed)
    cond = random_conditions(config, batch=batch, n_refs=2, seed=seed)
    z_v = torch.randn((batch,) + config.latent_shape, generator=g, dtype=torch.float64)
    t = torch.tensor([100, 400][:batch])
    return z_v, t, cond


def test_bce_values():
    zero = torch.zeros(1, dtype=torch.float64)
    assert float(lirm_bce_loss(zero, torch.full((1,), -1e4, dtype=torch.float64))) == pytest.approx(math.log(2.) / 2)
    assert float(lirm_bce_loss(torch.full((1,), 50., dtype=torch.float64), torch.full((1,), -50., dtype=torch.float64))) < 1e-20
    r = torch.tensor([0.7], dtype=torch.float64)
    s = torch.sigmoid(r)
    both = 2 * float(lirm_bce_loss(r, r))
    assert both == pytest.approx(float(-torch.log(s) - torch.log(1 - s)), rel=1e-12)


def test_bt_loss():
    assert float(bt_loss(torch.zeros(3), torch.zeros(3))) == pytest.approx(math.log(2.))
    assert float(reward_loss(torch.ones(2), torch.zeros(2), 'bt')) < math.log(2.)
    with pytest.raises(ValueError):
        reward_loss(torch.ones(2), torch.zeros(2), 'hinge')


def test_accuracy_bins():
    r_win = [1., 1., 0.5, 2., 0.]
    r_lose = [0., 2., 0.5, 1., -1.]
    t = [0, 100, 500, 1000, 300]
    acc = pairwise_accuracy_by_bin(r_win, r_lose, t, steps=1000, n_bins=5)
    assert acc['[0.0,0.2]'] == 0.5
    assert acc['(0.2,0.4]'] == 1.
    assert acc['(0.4,0.6]'] == 0.  # tie
    assert acc['(0.6,0.8]'] is None
    assert acc['(0.8,1.0]'] == 1.
    assert acc['overall'] == pytest.approx(0.6)


def test_hand_computed_attention(lirm):
    eye = nn.Linear(4, 4, bias=False).double()
    with torch.no_grad():
        eye.weight.copy_(torch.eye(4))
    lirm.W_Q, lirm.W_K, lirm.W_V = eye, eye, eye
    lirm.num_heads = 1
    q = torch.tensor([[[1., 0., 0., 0.]]], dtype=torch.float64)
    kv = torch.tensor([[[2., 0., 0., 0.], [0., 1., 0., 3.]]], dtype=torch.float64)
    h, q_out = lirm.attend(q, kv)
    s = np.array([2., 0.]) / 2.  # q.k / sqrt(d)
    w = np.exp(s) / np.exp(s).sum()
    expected = w[0] * kv[0, 0].numpy() + w[1] * kv[0, 1].numpy()
    assert np.allclose(h[0, 0].numpy(), expected, atol=1e-12)
    assert torch.equal(q_out, q)


def test_backbone_copies_the_generator_prefix(tiny_model, lirm):
    assert lirm.n_blocks == 2 and not hasattr(lirm.backbone, 'head')
    assert torch.equal(lirm.backbone.blocks[1].ffn[0].weight, tiny_model.blocks[1].ffn[0].weight)
    assert lirm.backbone.blocks[0].ffn[0].weight is not tiny_model.blocks[0].ffn[0].weight
    assert lirm.dtype == torch.float64


def test_reward_gradient_wrt_video_latent(lirm):
    z_v, t, cond = _reward_inputs(lirm.config, batch=1)
    z_v.requires_grad_(True)
    r = lirm(z_v, t, cond.z_ref, cond.ref_groups, cond.caption).sum()
    grad, = torch.autograd.grad(r, z_v)
    g = torch.Generator().manual_seed(5)
    flat = torch.randint(0, z_v.numel(), (16,), generator=g)
    eps = 1e-6
    base = z_v.detach()
    for i in flat.tolist():
        idx = np.unravel_index(i, tuple(z_v.shape))
        with torch.no_grad():
            zp, zm = base.clone(), base.clone()
            zp[idx] += eps
            zm[idx] -= eps
            up = float(lirm(zp, t, cond.z_ref, cond.ref_groups, cond.caption).sum())
            down = float(lirm(zm, t, cond.z_ref, cond.ref_groups, cond.caption).sum())
        numeric = (up - down) / (2 * eps)
        analytic = float(grad[idx])
        assert abs(analytic - numeric) <= 1e-3 * max(abs(analytic), abs(numeric), 1e-6)


@pytest.mark.parametrize('ref_as_query', [True, False])
def test_reward_ignores_reference_slot_order(tiny_model, ref_as_query):
    torch.manual_seed(2)
    net = LIRM.from_generator(tiny_model, n_blocks=2, ref_as_query=ref_as_query)
    z_v, t, cond = _reward_inputs(net.config)
    with torch.no_grad():
        a = net(z_v, t, cond.z_ref, cond.ref_groups, cond.caption)
        perm = [2, 0, 1]
        b = net(z_v, t, cond.z_ref[:, perm], cond.ref_groups[:, perm], cond.caption)
    assert torch.allclose(a, b, rtol=0, atol=1e-10)


def test_padding_slots_do_not_change_the_reward(lirm):
    z_v, t, cond = _reward_inputs(lirm.config)
    with torch.no_grad():
        a = lirm(z_v, t, cond.z_ref, cond.ref_groups, cond.caption)
        garbage = cond.z_ref.clone()
        garbage[:, 2] = 1e3
        b = lirm(z_v, t, garbage, cond.ref_groups, cond.caption)
    assert torch.allclose(a, b, rtol=0, atol=1e-10)


def test_frozen_embeddings_stay_put(lirm):
    lirm.freeze_embeddings(True)
    frozen = lirm.frozen_parameters()
    assert frozen and all(not p.requires_grad for p in lirm.backbone.patch_embedding.parameters())
    before = param_hash(frozen)
    groups = lirm.param_groups(1e-3, 1e-2)
    opt = torch.optim.AdamW(groups, weight_decay=0.1)
    z_v, t, cond = _reward_inputs(lirm.config)
    for _ in range(2):
        opt.zero_grad()
        r = lirm(z_v, t, cond.z_ref, cond.ref_groups, cond.caption)
        lirm_bce_loss(r[:1], r[1:]).backward()
        opt.step()
    assert param_hash(frozen) == before
    assert len(groups[0]['params']) + len(groups[1]['params']) == len([p for p in lirm.parameters() if p.requires_grad])


def test_bin_timesteps_cover_the_schedule():
    ranges = [bin_timesteps(k, 5, 1000) for k in range(5)]
    assert ranges == [(0, 200), (201, 400), (401, 600), (601, 800), (801, 1000)]
    report = pairwise_accuracy_by_bin([1.] * 5, [0.] * 5, [hi for _, hi in ranges], 1000, 5)
    assert all(v == 1. for v in report.values())


def test_heldout_accuracy_scores_every_bin(lirm):
    config = lirm.config
    cond = random_conditions(config, batch=2, n_refs=2, seed=3)
    g = torch.Generator().manual_seed(0)
    z = torch.randn((2,) + config.latent_shape, generator=g, dtype=torch.float64)
    batch = {'z_win': z, 'z_lose': z.flip(0), 'z_ref': cond.z_ref, 'ref_groups': cond.ref_groups,
             'caption': cond.caption, 'corruption': ['hue_shift', 'static_paste']}
    report, by_kind = heldout_accuracy(lirm, [batch], NoiseSchedule(100), seed=0, n_bins=5)
    assert len(report) == 6 and all(v is not None for v in report.values())
    assert set(by_kind) == {'hue_shift', 'static_paste'}
    again, _ = heldout_accuracy(lirm, [batch], NoiseSchedule(100), seed=0, n_bins=5)
    assert again == report
