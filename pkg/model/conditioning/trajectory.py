# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Point trajectories: sampling, mask classification, dropping and scattering
into latent-aligned token maps."""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from model.utils.config import cfg
from model.utils.errors import NoForeground
from datasets.synthetic_world import local_point, subject_point_track

BACKGROUND = -1


@dataclass
class Track(object):
    track_id: int
    subject_id: int
    coords: np.ndarray  # F x 2, (x, y)
    visible: np.ndarray  # F


@dataclass
class TrajectorySet(object):
    tracks: list = field(default_factory=list)

    def __len__(self):
        return len(self.tracks)

    @property
    def track_ids(self):
        return [t.track_id for t in self.tracks]

    def of_subject(self, subject_id):
        return TrajectorySet([t for t in self.tracks if t.subject_id == subject_id])

    def without_subject(self, subject_id):
        return TrajectorySet([t for t in self.tracks if t.subject_id != subject_id])

    def select(self, keep):
        return TrajectorySet([t for t, k in zip(self.tracks, keep) if k])


def _pixel(pt, hw):
    x, y = int(round(float(pt[0]))), int(round(float(pt[1])))
    if 0 <= x < hw[1] and 0 <= y < hw[0]:
        return y, x
    return None


def classify_tracks(points, masks, subject_ids):
    """Owner of each frame-0 point: the subject whose mask holds it, else BACKGROUND."""
    hw = masks.shape[-2:]
    owners = []
    for p in points:
        pix = _pixel(p, hw)
        owner = BACKGROUND
        if pix is not None:
            for i, sid in enumerate(subject_ids):
                if masks[i][pix]:
                    owner = sid
                    break
        owners.append(owner)
    return owners


def _follow(clip, point, owner, frames):
    hw = clip.spec.hw
    if owner == BACKGROUND:
        pan = np.asarray(clip.spec.camera_pan, dtype=np.float64)
        coords = np.asarray(point, dtype=np.float64)[None, :] + np.arange(frames)[:, None] * pan[None, :]
    else:
        i = clip.subject_index(owner)
        subject, motion = clip.spec.subjects[i], clip.spec.motions[i]
        uv = local_point(subject, motion, point, 0)
        coords = subject_point_track(subject, motion, uv, frames)
    visible = np.zeros(frames, dtype=bool)
    union = clip.masks[:, :frames].any(axis=0)
    for f in range(frames):
        pix = _pixel(coords[f], hw)
        if pix is None:
            continue
        if owner == BACKGROUND:
            visible[f] = not union[f][pix]
        else:
            visible[f] = bool(clip.masks[clip.subject_index(owner), f][pix])
    return coords.astype(np.float32), visible


def _grid_points(rng, n_points, hw):
    H, W = hw
    g = int(math.ceil(math.sqrt(n_points)))
    pts = []
    for r in range(g):
        for c in range(g):
            pts.append(((c + rng.uniform(0.2, 0.8)) * W / g, (r + rng.uniform(0.2, 0.8)) * H / g))
    pts = np.array(pts, dtype=np.float64)
    order = np.sort(rng.permutation(len(pts))[:n_points])
    return pts[order]


def _object_points(rng, clip, n_points):
    union = clip.masks[:, 0].any(axis=0)
    if not union.any():
        raise NoForeground()
    inner = ndimage.binary_erosion(union)
    if not inner.any():
        inner = union
    ys, xs = np.nonzero(inner)
    idx = rng.choice(len(xs), n_points, replace=len(xs) < n_points)
    return np.stack([xs[idx], ys[idx]], axis=1).astype(np.float64)


def sample_trajectories(clip, mode, n_points, seed, frames=None):
    """Grid or object-aware points on frame 0, carried along the ground-truth motion."""
    assert n_points >= 1
    frames = clip.spec.frames if frames is None else frames
    rng = np.random.RandomState(seed % (2 ** 32))
    if mode == 'grid':
        points = _grid_points(rng, n_points, clip.spec.hw)
    elif mode == 'object_aware':
        points = _object_points(rng, clip, n_points)
    else:
        raise ValueError('unknown sampling mode {}'.format(mode))
    owners = classify_tracks(points, clip.masks[:, 0], clip.subject_ids)
    tracks = []
    for k, (p, owner) in enumerate(zip(points, owners)):
        coords, visible = _follow(clip, p, owner, frames)
        tracks.append(Track(track_id=k, subject_id=owner, coords=coords, visible=visible))
    return TrajectorySet(tracks)


def drop_trajectories(trajs, rate, seed):
    """Keep each track independently with probability 1 - rate."""
    keep = np.random.RandomState(seed % (2 ** 32)).rand(len(trajs)) >= rate
    return trajs.select(keep)


def motion_magnitude(clip, frames=None):
    """Mean per-frame displacement over all ground-truth tracks."""
    frames = clip.spec.frames if frames is None else frames
    tracks = [t for t in clip.tracks if len(t)] + ([clip.background_tracks] if len(clip.background_tracks) else [])
    if not tracks:
        return 0.
    all_tracks = np.concatenate(tracks, axis=0)[:, :frames]
    return float(np.linalg.norm(np.diff(all_tracks, axis=1), axis=-1).mean())


def track_code(track_id, d_model):
    """Transformer-style sinusoid over the track id."""
    half = d_model // 2
    freqs = np.power(10000., -np.arange(half, dtype=np.float64) / half)
    ang = float(track_id + 1) * freqs
    return np.concatenate([np.cos(ang), np.sin(ang)])


def _cell(coord, latent_shape, patch, f):
    T, h, w = latent_shape[:3]
    pt, ph, pw = patch
    t = min(f // pt, T - 1)
    r = int(np.clip(math.floor(coord[1] / ph), 0, h - 1))
    c = int(np.clip(math.floor(coord[0] / pw), 0, w - 1))
    return t, r, c


def encode_trajectory_tokens(trajs, latent_shape, d_model, patch=None):
    """T x h x w x d map; each visible point writes its track code at its latent cell.
    Codes meeting in one cell are averaged; out-of-grid cells are clamped."""
    assert d_model % 2 == 0, 'd_model must be even'
    patch = tuple(patch or cfg.CODEC.PATCH)
    T, h, w = latent_shape[:3]
    acc = np.zeros((T, h, w, d_model), dtype=np.float64)
    cnt = np.zeros((T, h, w), dtype=np.float64)
    for tr in trajs.tracks:
        code = track_code(tr.track_id, d_model)
        for f in range(min(len(tr.coords), T * patch[0])):
            if not tr.visible[f]:
                continue
            t, r, c = _cell(tr.coords[f], latent_shape, patch, f)
            acc[t, r, c] += code
            cnt[t, r, c] += 1.
    out = acc / np.maximum(cnt, 1.)[..., None]
    return out.astype(np.float32)


def trajectory_group_map(trajs, latent_shape, group_of_subject, n_max, patch=None):
    """T x h x w x n_max indicator of cells written by each group's tracks."""
    patch = tuple(patch or cfg.CODEC.PATCH)
    T, h, w = latent_shape[:3]
    out = np.zeros((T, h, w, n_max), dtype=np.float32)
    for tr in trajs.tracks:
        g = group_of_subject.get(tr.subject_id)
        if g is None:
            continue
        for f in range(min(len(tr.coords), T * patch[0])):
            if tr.visible[f]:
                t, r, c = _cell(tr.coords[f], latent_shape, patch, f)
                out[t, r, c, g] = 1.
    return out
