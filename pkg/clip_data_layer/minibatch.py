# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import numpy as np

from model.utils.config import cfg
from model.utils.errors import NoForeground
from model.utils.augmentations import augment_reference
from model.utils.blob import video_to_latent, reference_latents
from model.codec.patch_codec import latent_shape_for
from model.conditioning.box_utils import clip_box_tracks
from model.conditioning.box_render import assign_box_colors
from model.conditioning.trajectory import BACKGROUND, TrajectorySet, sample_trajectories, drop_trajectories
from model.conditioning.triplet import ControlTriplet, drop_conditions, count_dropped, pack_conditions, \
    pad_reference_images
from model.diffusion.losses import box_mask_latent
from datasets.captions import null_caption
from datasets.synthetic_world import make_reference_image

# keys of a minibatch that are stacked into tensors
ARRAY_KEYS = ('z0', 'caption', 'z_ref', 'ref_groups', 'z_box', 'box_groups', 'traj_map', 'traj_groups',
              'box_mask')


def _sub_seeds(seed, n):
    return [int(s) for s in np.random.RandomState(seed % (2 ** 32)).randint(0, 2 ** 31 - 1, size=n)]


def _sample_motion(clip, seed, training):
    """Hybrid grid / object-aware trajectories; a random fraction of tracks is kept while training."""
    rng = np.random.RandomState(seed % (2 ** 32))
    mode = 'grid' if training and rng.rand() < cfg.COND.GRID_PROB else 'object_aware'
    frames = clip.spec.frames
    try:
        trajs = sample_trajectories(clip, mode, cfg.COND.TRAJ_POINTS, seed, frames)
    except NoForeground:
        mode = 'grid'
        trajs = sample_trajectories(clip, mode, cfg.COND.TRAJ_POINTS, seed, frames)
    if training:
        keep = rng.uniform(cfg.COND.TRAJ_KEEP_MIN, 1.)
        trajs = drop_trajectories(trajs, 1. - keep, seed + 1)
    return trajs, mode


def get_minibatch(clip, seed, training=True, control_order=None):
    """Condition arrays and latents for one training or evaluation sample.

    control_order[g] names the subject index whose box and trajectories are
    bound to the reference of subject g; None keeps every subject's own
    controls. Evaluation (training=False) uses object-aware points, keeps every
    control and never augments or drops the caption.
    """
    s_traj, s_color, s_drop, s_aug, s_text = _sub_seeds(seed, 5)
    spec = clip.spec
    F, hw = spec.frames, spec.hw
    patch = tuple(cfg.CODEC.PATCH)
    latent_shape = latent_shape_for(F, hw, patch)
    sids = clip.subject_ids
    S = len(sids)
    order = list(range(S)) if control_order is None else list(control_order)
    assert sorted(order) == list(range(S)), 'control_order must permute the subjects'

    gt_tracks = clip_box_tracks(clip, F, assign_box_colors(S, s_color))
    trajs, mode = _sample_motion(clip, s_traj, training)

    triplets = []
    for g in range(S):
        img = make_reference_image(clip, sids[g], clip.pool, clip.window)
        if training:
            img = augment_reference(img, s_aug + g, cfg.COND.AUG_PROB)
        src = order[g]
        triplets.append(ControlTriplet(group_id=g, reference_image=img, box_track=gt_tracks[src],
                                       trajectories=trajs.of_subject(sids[src])))
    if training:
        triplets = drop_conditions(triplets, cfg.COND.DROP_PROB, s_drop)
    background = trajs.of_subject(BACKGROUND) if mode == 'grid' else TrajectorySet()
    packed = pack_conditions(triplets, hw, F, latent_shape, cfg.MODEL.N_MAX, cfg.MODEL.WIDTH, patch,
                             background_trajs=background)

    caption = clip.caption_tokens.copy()
    text_dropped = training and np.random.RandomState(s_text).rand() < cfg.COND.TEXT_DROP
    if text_dropped:
        caption = null_caption(len(caption))

    dropped, slots = count_dropped(triplets)
    blobs = {
        'z0': video_to_latent(clip.video[:F], patch),
        'caption': caption.astype(np.int64),
        'z_ref': reference_latents(packed['refs'], patch),
        'ref_groups': packed['ref_groups'],
        'z_box': video_to_latent(packed['box_video'], patch),
        'box_groups': packed['box_groups'],
        'traj_map': packed['traj_map'],
        'traj_groups': packed['traj_groups'],
        'box_mask': box_mask_latent(gt_tracks, latent_shape, patch),
        'seed': seed,
        'dropped': dropped,
        'slots': slots,
        'text_dropped': bool(text_dropped),
        'traj_mode': mode,
        'triplets': triplets,
        'trajectories': trajs,
        'box_video': packed['box_video'],
    }
    return blobs


def get_minibatch_pair(pair, patch=None):
    """Win / lose latents of a preference pair with the clean reference latents."""
    patch = tuple(patch or cfg.CODEC.PATCH)
    refs, groups = pad_reference_images(list(enumerate(pair.refs)), cfg.MODEL.N_MAX, pair.win.shape[1:3])
    return {
        'z_win': video_to_latent(pair.win, patch),
        'z_lose': video_to_latent(pair.lose, patch),
        'z_ref': reference_latents(refs, patch),
        'ref_groups': groups,
        'caption': pair.caption_tokens.astype(np.int64),
        'corruption': pair.corruption,
        'seed': pair.seed,
    }
