import numpy as np
import pytest
import torch

from conftest import random_conditions
from model.conditioning.box_utils import BoxTrack
from model.diffusion.losses import box_mask_latent, reweighted_mse, sft_loss
from model.diffusion.sampler import ddim_update, guided_epsilon, sample, solver_step
from model.diffusion.schedule import NoiseSchedule
from model.OmniDiT import Conditions


class OracleEps(torch.nn.Module):
    """Returns the exact noise of a known clean latent."""

    def __init__(self, z0, schedule):
        super(OracleEps, self).__init__()
        self.z0, self.schedule = z0, schedule

    def forward(self, z, t, cond):
        a, b = self.schedule.coefficients(t, z)
        return (z - a * self.z0) / b


class CaptionEps(torch.nn.Module):
    """eps = 1 for real captions and 0 for the null caption."""

    def forward(self, z, t, cond):
        real = (cond.caption[:, 0] != 1).to(z.dtype).reshape(-1, *([1] * (z.dim() - 1)))
        return torch.ones_like(z) * real


# schedule

def test_schedule_shape_and_monotonicity():
    s = NoiseSchedule(steps=1000, cosine_s=0.008, min_alpha_bar=1e-4)
    ab = s.alpha_bar
    assert len(ab) == 1001 and ab[0] == 1.
    assert (np.diff(ab) < 0).all()
    assert ab.min() > 0. and ab[-1] == pytest.approx(1e-4)


def test_q_sample_at_zero_is_identity():
    s = NoiseSchedule(steps=100)
    z0 = torch.randn(3, 4, 2, 2, 5)
    assert torch.equal(s.q_sample(z0, torch.zeros(3, dtype=torch.long), torch.randn_like(z0)), z0)
    with pytest.raises(ValueError):
        s.q_sample(z0, torch.full((3,), 101), z0)


def test_sampler_timesteps():
    s = NoiseSchedule(steps=1000)
    assert s.sampler_timesteps(10) == list(range(0, 1001, 100))
    levels = NoiseSchedule(steps=100).sampler_timesteps(3)
    assert levels[0] == 0 and levels[-1] == 100 and len(levels) == 4


# loss

def test_box_mask_latent():
    shape = (4, 8, 8)
    assert not box_mask_latent([], shape, (1, 8, 8)).any()
    full = BoxTrack(0, np.tile(np.array([[0., 0., 64., 64.]]), (4, 1)))
    assert box_mask_latent([full], shape, (1, 8, 8)).all()
    small = BoxTrack(0, np.tile(np.array([[0., 0., 16., 16.]]), (4, 1)))
    m = box_mask_latent([small], shape, (1, 8, 8))
    assert m.sum() == 4 * 4 and m[:, :2, :2].all()


def test_reweighted_mse():
    g = torch.Generator().manual_seed(0)
    pred = torch.randn(2, 4, 3, 3, 6, generator=g, dtype=torch.float64)
    eps = torch.randn(2, 4, 3, 3, 6, generator=g, dtype=torch.float64)
    ones = torch.ones(2, 4, 3, 3, dtype=torch.float64)
    plain = (pred - eps).pow(2).mean()
    assert torch.equal(reweighted_mse(pred, eps, ones, 0.), plain)
    assert torch.allclose(reweighted_mse(pred, eps, ones, 2.), 3. * plain, rtol=1e-12)
    assert reweighted_mse(eps, eps, ones, 2.) == 0.
    half = (torch.rand(2, 4, 3, 3, generator=g) < 0.5).double()
    values = [float(reweighted_mse(pred, eps, half, lam)) for lam in (0., 0.5, 1., 2., 4.)]
    assert values == sorted(values)


def test_sft_loss_of_a_perfect_predictor():
    s = NoiseSchedule(steps=50)
    z0 = torch.randn(2, 4, 4, 4, 8, dtype=torch.float64)
    batch = {'z0': z0, 'cond': None, 'box_mask': torch.ones(2, 4, 4, 4)}
    loss, t = sft_loss(batch, OracleEps(z0, s), 2., s, torch.Generator().manual_seed(1))
    assert float(loss) < 1e-20
    assert t.min() >= 1 and t.max() <= 50


def test_sft_loss_trains_the_generator(tiny_model):
    s = NoiseSchedule(steps=100)
    cfg_ = tiny_model.config
    z0 = torch.randn((2,) + cfg_.latent_shape, dtype=torch.float64)
    batch = {'z0': z0, 'cond': random_conditions(cfg_, batch=2), 'box_mask': torch.ones((2,) + cfg_.latent_shape[:3])}
    loss, _ = sft_loss(batch, tiny_model, 2., s, torch.Generator().manual_seed(0))
    loss.backward()
    assert torch.isfinite(loss)
    assert tiny_model.patch_embedding.weight.grad.abs().sum() > 0


# sampler

def test_ddim_step_with_true_noise_matches_closed_form():
    s = NoiseSchedule(steps=100)
    z0 = torch.tensor([[0.7]], dtype=torch.float64)
    eps = torch.tensor([[-1.3]], dtype=torch.float64)
    z_from = s.q_sample(z0, torch.tensor([80]), eps)
    z_to = solver_step(OracleEps(z0, s), s, z_from, 80, 40, None, scale=1.)
    expected = s.q_sample(z0, torch.tensor([40]), eps)
    assert torch.allclose(z_to, expected, rtol=0, atol=1e-12)
    # lower noise level: closer to the clean latent
    assert abs(float(z_to - z0)) < abs(float(z_from - z0))
    assert torch.allclose(ddim_update(z_from, eps, s, 80, 0), z0, atol=1e-12)


def test_guidance_combines_branches():
    cond = Conditions(caption=torch.tensor([[5, 6, 0], [7, 2, 0]]))
    z = torch.zeros(2, 2, 2, 2, 3, dtype=torch.float64)
    t = torch.ones(2, dtype=torch.long)
    out = guided_epsilon(CaptionEps(), z, t, cond, 5.)
    assert torch.allclose(out, torch.full_like(z, 5.))


def test_guidance_scale_one_is_the_conditional_branch(tiny_model):
    cond = random_conditions(tiny_model.config)
    z = torch.randn((1,) + tiny_model.config.latent_shape, dtype=torch.float64)
    t = torch.tensor([30])
    with torch.no_grad():
        assert torch.equal(guided_epsilon(tiny_model, z, t, cond, 1.), tiny_model(z, t, cond))


def test_sampling_is_deterministic(tiny_model):
    s = NoiseSchedule(steps=100)
    cond = random_conditions(tiny_model.config)
    a = sample(tiny_model, s, cond, seed=7, n_steps=3, scale=5.)
    b = sample(tiny_model, s, cond, seed=7, n_steps=3, scale=5.)
    c = sample(tiny_model, s, cond, seed=8, n_steps=3, scale=5.)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)
    assert a.shape == (1,) + tiny_model.config.latent_shape
