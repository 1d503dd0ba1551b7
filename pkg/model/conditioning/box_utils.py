# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Box tracks, overlaps and the adjacent-frame stability filter.

Boxes are continuous (x0, y0, x1, y1) with exclusive far edges, so areas
carry no +1 term.
"""
from dataclasses import dataclass

import numpy as np


@dataclass
class BoxTrack(object):
    subject_id: int
    boxes: np.ndarray  # F x 4
    assigned_color: tuple = (0., 0., 0.)

    @property
    def num_frames(self):
        return self.boxes.shape[0]


def box_area(b):
    return max(float(b[2]) - float(b[0]), 0.) * max(float(b[3]) - float(b[1]), 0.)


def iou(a, b):
    """IoU of two boxes; any zero-area box gives 0."""
    area_a, area_b = box_area(a), box_area(b)
    if area_a <= 0. or area_b <= 0.:
        return 0.
    iw = min(float(a[2]), float(b[2])) - max(float(a[0]), float(b[0]))
    ih = min(float(a[3]), float(b[3])) - max(float(a[1]), float(b[1]))
    if iw <= 0. or ih <= 0.:
        return 0.
    inter = iw * ih
    return inter / (area_a + area_b - inter)


def bbox_overlaps(boxes, query_boxes):
    """
    boxes: (N, 4) ndarray of float
    query_boxes: (K, 4) ndarray of float

    overlaps: (N, K) ndarray of overlap between boxes and query_boxes
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    query_boxes = np.asarray(query_boxes, dtype=np.float64).reshape(-1, 4)
    area_b = np.clip(boxes[:, 2] - boxes[:, 0], 0, None) * np.clip(boxes[:, 3] - boxes[:, 1], 0, None)
    area_q = np.clip(query_boxes[:, 2] - query_boxes[:, 0], 0, None) * \
        np.clip(query_boxes[:, 3] - query_boxes[:, 1], 0, None)
    iw = np.minimum(boxes[:, None, 2], query_boxes[None, :, 2]) - np.maximum(boxes[:, None, 0], query_boxes[None, :, 0])
    ih = np.minimum(boxes[:, None, 3], query_boxes[None, :, 3]) - np.maximum(boxes[:, None, 1], query_boxes[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = area_b[:, None] + area_q[None, :] - inter
    valid = (area_b[:, None] > 0) & (area_q[None, :] > 0)
    return np.where(valid, inter / np.where(union > 0, union, 1.), 0.)


def adjacent_ious(track):
    b = track.boxes if isinstance(track, BoxTrack) else np.asarray(track)
    return np.array([iou(b[f], b[f + 1]) for f in range(len(b) - 1)])


def stability_filter(track, threshold):
    """True iff every adjacent-frame IoU reaches the threshold."""
    ious = adjacent_ious(track)
    assert len(ious) >= 1, 'stability filter needs at least two frames'
    return bool(ious.min() >= threshold)


def interpolate_box_track(keyframes, keyboxes, frames):
    """Dense per-frame boxes from sparse keyframes by linear interpolation.
    Frames outside the keyframe range hold the nearest keyframe box."""
    keyframes = np.asarray(keyframes, dtype=np.float64)
    keyboxes = np.asarray(keyboxes, dtype=np.float64).reshape(-1, 4)
    order = np.argsort(keyframes)
    keyframes, keyboxes = keyframes[order], keyboxes[order]
    f = np.arange(frames, dtype=np.float64)
    out = np.stack([np.interp(f, keyframes, keyboxes[:, k]) for k in range(4)], axis=1)
    return out.astype(np.float32)


def clip_box_tracks(clip, frames=None, colors=None):
    """BoxTracks of all subjects of an AnnotatedClip, restricted to its window."""
    frames = clip.spec.frames if frames is None else frames
    tracks = []
    for i, sid in enumerate(clip.subject_ids):
        color = tuple(colors[i]) if colors is not None else (0., 0., 0.)
        tracks.append(BoxTrack(subject_id=sid, boxes=clip.boxes[i, :frames].copy(), assigned_color=color))
    return tracks


def box_footprint_latent(boxes, latent_shape, patch):
    """T x h x w bool: latent cells whose pixel footprint meets the box of any
    frame they cover. Zero-area boxes mark nothing."""
    T, h, w = latent_shape[:3]
    pt, ph, pw = patch
    out = np.zeros((T, h, w), dtype=bool)
    cols = np.arange(w, dtype=np.float64) * pw
    rows = np.arange(h, dtype=np.float64) * ph
    for f in range(min(len(boxes), T * pt)):
        x0, y0, x1, y1 = [float(v) for v in boxes[f]]
        if x1 <= x0 or y1 <= y0:
            continue
        cx = (cols < x1) & (cols + pw > x0)
        cy = (rows < y1) & (rows + ph > y0)
        out[f // pt] |= cy[:, None] & cx[None, :]
    return out
