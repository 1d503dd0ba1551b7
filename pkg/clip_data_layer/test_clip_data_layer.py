import numpy as np
import pytest
import torch

from clip_data_layer.minibatch import ARRAY_KEYS, get_minibatch
from clip_data_layer.clipbatchLoader import sampler, sftClipbatchLoader, collate_clips, split_indices, \
    endless_batches
from clip_data_layer.cliplist import combined_cliplist, filter_clipdb
from datasets.clipdb import synthetic_clipdb
from datasets.captions import NULL
from datasets.synthetic_world import generate_clip
from model.conditioning.box_utils import box_footprint_latent
from model.utils.blob import reference_latents, video_to_latent, latent_to_video
from model.OmniDiT import build_generator


@pytest.fixture
def clip2(tiny_cfg):
    return generate_clip(11, n_subjects=2)


def test_minibatch_shapes(tiny_cfg, clip2):
    b = get_minibatch(clip2, seed=3)
    assert b['z0'].shape == (4, 4, 4, 192)
    assert b['z_ref'].shape == (3, 4, 4, 192)
    assert b['z_box'].shape == (4, 4, 4, 192)
    assert b['traj_map'].shape == (4, 4, 4, 48)
    assert b['traj_groups'].shape == b['box_groups'].shape == (4, 4, 4, 3)
    assert list(b['ref_groups']) == [0, 1, -1]
    assert b['box_mask'].shape == (4, 4, 4) and b['box_mask'].any()
    assert b['slots'] == 4


def test_minibatch_is_reproducible(tiny_cfg, clip2):
    a, b = get_minibatch(clip2, seed=5), get_minibatch(clip2, seed=5)
    for k in ARRAY_KEYS:
        assert np.array_equal(a[k], b[k]), k


def test_evaluation_minibatch_keeps_every_control(tiny_cfg, clip2):
    tiny_cfg.COND.TEXT_DROP = 1.
    tiny_cfg.COND.DROP_PROB = 1.
    b = get_minibatch(clip2, seed=0, training=False)
    assert b['dropped'] == 0
    assert np.array_equal(b['caption'], clip2.caption_tokens)
    assert b['traj_mode'] == 'object_aware'
    t = get_minibatch(clip2, seed=0, training=True)
    assert t['dropped'] == t['slots']
    assert t['caption'][0] == NULL and t['text_dropped']


def test_swapped_controls_follow_the_other_subject(tiny_cfg, clip2):
    b = get_minibatch(clip2, seed=0, training=False, control_order=[1, 0])
    latent = b['box_groups'].shape[:3]
    other = box_footprint_latent(clip2.boxes[1, :4], latent, (1, 8, 8))
    assert np.array_equal(b['box_groups'][..., 0].astype(bool), other)
    with pytest.raises(AssertionError):
        get_minibatch(clip2, seed=0, control_order=[0, 0])


def test_reference_latents_of_a_white_image(tiny_cfg):
    z = reference_latents(np.ones((2, 32, 32, 3), dtype=np.float32))
    assert z.shape == (2, 4, 4, 192) and (z == 1.).all()


def test_latent_video_conversion(tiny_cfg, clip2):
    video = clip2.video[:4]
    assert np.allclose(latent_to_video(video_to_latent(video)), video, atol=1e-6)


def test_sampler_replays_with_seed():
    a, b = list(sampler(10, 4)), list(sampler(10, 4))
    assert a == b and sorted(a) == list(range(10))
    s = sampler(10, 4)
    assert list(s) != list(s)


def test_collated_batch_runs_through_the_generator(tiny_cfg):
    db = synthetic_clipdb('t', 0, 3)
    ds = sftClipbatchLoader(db, seed=1)
    batch = collate_clips([ds[0], ds[1]])
    assert batch['z0'].shape == (2, 4, 4, 4, 192)
    assert batch['cond'].ref_groups.dtype == torch.int64
    torch.manual_seed(0)
    model = build_generator(tiny_cfg)
    with torch.no_grad():
        out = model(batch['z0'], torch.tensor([10, 50]), batch['cond'])
    assert out.shape == batch['z0'].shape and torch.isfinite(out).all()
    # a second visit of the same clip draws new conditions
    first, again = ds[0], ds[0]
    assert first['seed'] != again['seed']


def test_endless_batches(tiny_cfg):
    ds = sftClipbatchLoader(synthetic_clipdb('t', 0, 3), seed=0)
    it = endless_batches(ds, 2, seed=0, collate=collate_clips)
    for _ in range(3):
        assert next(it)['z0'].shape[0] == 2


def test_split_indices_are_disjoint():
    train, held = split_indices(20, 0.1, seed=0)
    assert len(held) == 2 and not set(train) & set(held)
    assert sorted(train + held) == list(range(20))


def test_motion_filter(tiny_cfg):
    db = synthetic_clipdb('t', 0, 4)
    tiny_cfg.COND.STABILITY_IOU = 0.
    assert filter_clipdb(db).num_clips == 4
    tiny_cfg.COND.MIN_MOTION = 1e6
    assert filter_clipdb(db).num_clips == 0


def test_combined_cliplist(tiny_cfg):
    db = combined_cliplist('synthetic_8+synthetic_8', training=False)
    assert db.num_clips == 16
    assert db.clip_at(8).seed == db.clip_at(0).seed
