# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Per-subject control triplets (reference, box track, trajectories), condition
dropout and packing into the arrays the generator consumes."""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

from dataclasses import dataclass, replace

import numpy as np

from model.utils.config import cfg
from model.utils.errors import CapacityExceeded
from model.conditioning.box_utils import box_footprint_latent
from model.conditioning.box_render import render_box_video
from model.conditioning.trajectory import TrajectorySet, encode_trajectory_tokens, trajectory_group_map


@dataclass
class ControlTriplet(object):
    group_id: int
    reference_image: np.ndarray = None
    box_track: object = None
    trajectories: TrajectorySet = None

    @property
    def is_empty(self):
        return self.reference_image is None and self.box_track is None and self.trajectories is None

    @property
    def subject_id(self):
        if self.box_track is not None:
            return self.box_track.subject_id
        if self.trajectories is not None and len(self.trajectories):
            return self.trajectories.tracks[0].subject_id
        return None


def build_triplets(subject_ids, refs, box_tracks, trajs):
    """One triplet per subject; group ids follow the subject order."""
    assert len(subject_ids) == len(refs) == len(box_tracks)
    triplets = []
    for g, sid in enumerate(subject_ids):
        assert box_tracks[g].subject_id == sid
        triplets.append(ControlTriplet(group_id=g, reference_image=refs[g], box_track=box_tracks[g],
                                       trajectories=trajs.of_subject(sid) if trajs is not None else None))
    ids = [t.group_id for t in triplets]
    assert len(set(ids)) == len(ids), 'group ids must be unique'
    return triplets


def drop_conditions(triplets, p, seed):
    """Independently replace each box and each trajectory subset by ABSENT with
    probability p. References are left alone."""
    assert 0. <= p <= 1.
    rng = np.random.RandomState(seed % (2 ** 32))
    out = []
    for t in triplets:
        drop_box, drop_traj = rng.rand() < p, rng.rand() < p
        out.append(replace(t, box_track=None if drop_box else t.box_track,
                           trajectories=None if drop_traj else t.trajectories))
    return out


def count_dropped(triplets):
    """(dropped, total) over box and trajectory slots."""
    dropped = sum(int(t.box_track is None) + int(t.trajectories is None) for t in triplets)
    return dropped, 2 * len(triplets)


def pad_reference_images(images, n_max, hw):
    """Stack up to n_max (group_id, image) pairs in listing order; empty slots
    are zero images with group -1."""
    if len(images) > n_max:
        raise CapacityExceeded()
    H, W = hw
    out = np.zeros((n_max, H, W, 3), dtype=np.float32)
    groups = np.full((n_max,), -1, dtype=np.int64)
    for k, (g, img) in enumerate(images):
        out[k] = img
        groups[k] = g
    return out, groups


def pack_conditions(triplets, hw, frames, latent_shape, n_max=None, d_model=None, patch=None,
                    background_trajs=None):
    """Arrays for one sample. Group maps are indexed by group id; reference
    slots keep the listing order of the triplets.

    box_video:   F x H x W x 3, present boxes only
    traj_map:    T x h x w x d
    traj_groups: T x h x w x n_max
    box_groups:  T x h x w x n_max
    refs, ref_groups: n_max reference slots in listing order, group -1 when empty
    """
    n_max = cfg.MODEL.N_MAX if n_max is None else n_max
    d_model = cfg.MODEL.WIDTH if d_model is None else d_model
    patch = tuple(patch or cfg.CODEC.PATCH)
    if len(triplets) > n_max or any(t.group_id >= n_max for t in triplets):
        raise CapacityExceeded()
    T, h, w = latent_shape[:3]
    listed = triplets
    triplets = sorted(triplets, key=lambda t: t.group_id)

    boxes = [t.box_track for t in triplets if t.box_track is not None]
    box_video = render_box_video(boxes, hw, frames)
    box_groups = np.zeros((T, h, w, n_max), dtype=np.float32)
    for t in triplets:
        if t.box_track is not None:
            box_groups[..., t.group_id] = box_footprint_latent(t.box_track.boxes, latent_shape, patch)

    tracks = []
    group_of_subject = {}
    for t in triplets:
        if t.trajectories is not None:
            tracks += t.trajectories.tracks
            for tr in t.trajectories.tracks:
                group_of_subject[tr.subject_id] = t.group_id
    if background_trajs is not None:
        tracks += background_trajs.tracks
    trajs = TrajectorySet(sorted(tracks, key=lambda tr: tr.track_id))
    traj_map = encode_trajectory_tokens(trajs, latent_shape, d_model, patch)
    traj_groups = trajectory_group_map(trajs, latent_shape, group_of_subject, n_max, patch)

    refs, ref_groups = pad_reference_images(
        [(t.group_id, t.reference_image) for t in listed if t.reference_image is not None], n_max, hw)
    return {'box_video': box_video, 'traj_map': traj_map, 'traj_groups': traj_groups,
            'box_groups': box_groups, 'refs': refs, 'ref_groups': ref_groups}
