# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Oracle metrics on synthetic videos: color detection, box mIoU, template
tracking EPE, a toy identity descriptor and swapped-control binding checks."""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import json
import math
from dataclasses import dataclass, field, asdict, replace

import cv2
import numpy as np

from model.utils.config import cfg, cfg_to_dict
from model.utils.blob import latent_to_video
from model.conditioning.box_utils import iou
from model.diffusion.sampler import sample
from datasets.synthetic_world import generate_clip, hue_of
from clip_data_layer.minibatch import get_minibatch
from clip_data_layer.clipbatchLoader import conditions_from_blobs


def _hsv(frame):
    return cv2.cvtColor(np.clip(np.asarray(frame, dtype=np.float32), 0., 1.), cv2.COLOR_RGB2HSV)


def _hue_dist(h, target):
    d = np.abs(h - target) % 360.
    return np.minimum(d, 360. - d)


def detect_subjects(video, subjects, hue_tol=None, sat_min=None):
    """Per subject, per frame: the tight box of the largest connected component
    of saturated pixels nearest in hue to the subject's color, or None."""
    hue_tol = cfg.EVAL.HUE_TOL if hue_tol is None else hue_tol
    sat_min = cfg.EVAL.SAT_MIN if sat_min is None else sat_min
    hues = np.array([hue_of(s.color) for s in subjects], dtype=np.float64)
    out = [[None] * len(video) for _ in subjects]
    if not len(subjects):
        return out
    for f, frame in enumerate(video):
        hsv = _hsv(frame)
        dist = np.stack([_hue_dist(hsv[..., 0], h) for h in hues], axis=0)
        owner = np.argmin(dist, axis=0)
        fg = (hsv[..., 1] >= sat_min) & (dist.min(axis=0) <= hue_tol)
        for i in range(len(subjects)):
            mask = (fg & (owner == i)).astype(np.uint8)
            if not mask.any():
                continue
            n, _, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
            k = 1 + int(np.argmax(stats[1:, cv2.CC_STAT_AREA]))
            x, y = stats[k, cv2.CC_STAT_LEFT], stats[k, cv2.CC_STAT_TOP]
            w, h = stats[k, cv2.CC_STAT_WIDTH], stats[k, cv2.CC_STAT_HEIGHT]
            out[i][f] = np.array([x, y, x + w, y + h], dtype=np.float32)
    return out


def miou(detected, targets):
    """Mean IoU over subjects and frames; a missing detection scores 0.
    Frames whose target box is empty are skipped."""
    scores = []
    for det, tgt in zip(detected, targets):
        for d, t in zip(det, tgt):
            if (t[2] - t[0]) <= 0 or (t[3] - t[1]) <= 0:
                continue
            scores.append(0. if d is None else iou(d, t))
    return float(np.mean(scores)) if scores else 0.


def _subpixel(c_m, c_0, c_p):
    den = c_m - 2. * c_0 + c_p
    if den >= 0.:
        return 0.
    return float(np.clip(0.5 * (c_m - c_p) / den, -0.5, 0.5))


def track_points(video, query, template=None, search=None):
    """Follow query points (P x 2, x/y) from frame 0 by normalized cross-correlation.

    Each frame the template around the previous estimate is matched inside a
    +-search window of the next frame; the peak is refined to sub-pixel unless
    the match is exact. Points pushed outside the frame are clamped and flagged.
    """
    template = cfg.EVAL.TEMPLATE if template is None else template
    search = cfg.EVAL.SEARCH if search is None else search
    video = np.clip(np.asarray(video, dtype=np.float32), 0., 1.)
    F, H, W = video.shape[:3]
    P = len(query)
    out = np.zeros((P, F, 2), dtype=np.float64)
    flags = np.zeros(P, dtype=bool)
    out[:, 0] = np.asarray(query, dtype=np.float64)
    win = template + 2 * search
    for p in range(P):
        pos = out[p, 0].copy()
        for f in range(1, F):
            tpl = cv2.getRectSubPix(video[f - 1], (template, template), (float(pos[0]), float(pos[1])))
            region = cv2.getRectSubPix(video[f], (win, win), (float(pos[0]), float(pos[1])))
            score = cv2.matchTemplate(region, tpl, cv2.TM_CCOEFF_NORMED)
            score = np.nan_to_num(score, nan=-1.)
            r, c = np.unravel_index(int(np.argmax(score)), score.shape)
            dx, dy = float(c - search), float(r - search)
            if score[r, c] < 1. - cfg.EVAL.EXACT_MATCH:
                if 0 < c < score.shape[1] - 1:
                    dx += _subpixel(score[r, c - 1], score[r, c], score[r, c + 1])
                if 0 < r < score.shape[0] - 1:
                    dy += _subpixel(score[r - 1, c], score[r, c], score[r + 1, c])
            pos = pos + np.array([dx, dy])
            if not (0. <= pos[0] <= W - 1 and 0. <= pos[1] <= H - 1):
                flags[p] = True
                pos = np.clip(pos, 0., [W - 1, H - 1])
            out[p, f] = pos
    return out, flags


def epe(video, query, targets, visible=None, template=None, search=None):
    """Mean distance between tracked and target trajectories over frames > 0.

    visible (P x F) restricts the mean to frames where the point has been in
    view since frame 0; after an occlusion the template has nothing to follow.
    Returns (epe_px, epe normalized by the frame diagonal, per-point left-frame flags).
    """
    targets = np.asarray(targets, dtype=np.float64)
    if not len(targets) or targets.shape[1] < 2:
        return 0., 0., np.zeros(len(targets), dtype=bool)
    tracked, flags = track_points(video, query, template, search)
    d = np.linalg.norm(tracked[:, 1:] - targets[:, 1:], axis=-1)
    if visible is not None:
        seen = np.logical_and.accumulate(np.asarray(visible, dtype=bool)[:, :targets.shape[1]], axis=1)[:, 1:]
        d = d[seen]
    H, W = np.asarray(video).shape[1:3]
    px = float(d.mean()) if d.size else 0.
    return px, px / math.hypot(H, W), flags


def _foreground(patch, sat_min):
    hsv = _hsv(patch)
    return hsv, hsv[..., 1] >= sat_min


def identity_descriptor(patch, bins=None, bands=None, shape_weight=None, sat_min=None):
    """Unit descriptor of the saturated foreground of an image patch, or None if empty.

    Color part: hue histogram in brightness bands. Shape part: the seven
    normalized central moments of the foreground mask. The two unit parts are
    weighted so that the cosine of two descriptors is the weighted mean of the
    part cosines.
    """
    bins = cfg.EVAL.HIST_BINS if bins is None else bins
    bands = cfg.EVAL.VALUE_BANDS if bands is None else bands
    w = cfg.EVAL.SHAPE_WEIGHT if shape_weight is None else shape_weight
    sat_min = cfg.EVAL.SAT_MIN if sat_min is None else sat_min
    hsv, fg = _foreground(patch, sat_min)
    if fg.sum() < 3:
        return None
    hue = hsv[..., 0][fg]
    val = hsv[..., 2][fg]
    hist, _, _ = np.histogram2d(np.minimum(val, 1. - 1e-6), hue, bins=(bands, bins), range=((0., 1.), (0., 360.)))
    hist = hist.ravel() / max(np.linalg.norm(hist), 1e-12)
    m = cv2.moments(fg.astype(np.uint8), binaryImage=True)
    nu = np.array([m[k] for k in ('nu20', 'nu11', 'nu02', 'nu30', 'nu21', 'nu12', 'nu03')], dtype=np.float64)
    nu = nu / max(np.linalg.norm(nu), 1e-12)
    return np.concatenate([math.sqrt(1. - w) * hist, math.sqrt(w) * nu])


def _cosine(a, b):
    return float(np.dot(a, b) / max(np.linalg.norm(a) * np.linalg.norm(b), 1e-12))


def _crop(frame, box):
    H, W = frame.shape[:2]
    x0, y0 = max(int(math.floor(box[0])), 0), max(int(math.floor(box[1])), 0)
    x1, y1 = min(int(math.ceil(box[2])), W), min(int(math.ceil(box[3])), H)
    if x1 <= x0 or y1 <= y0:
        return None
    return frame[y0:y1, x0:x1]


def identity_similarity(video, reference, boxes):
    """Cosine between the frame-averaged crop descriptor and the reference
    descriptor. Returns (similarity, flagged); an empty crop gives (0, True)."""
    ref = identity_descriptor(reference)
    descs = []
    for frame, box in zip(video, boxes):
        crop = _crop(np.asarray(frame), box)
        d = None if crop is None else identity_descriptor(crop)
        if d is not None:
            descs.append(d)
    if ref is None or not descs:
        return 0., True
    return _cosine(np.mean(descs, axis=0), ref), False


def binding_accuracy(runs):
    """runs: list of (detected, assigned) with assigned S x F x 4 control boxes per
    subject. 1 iff every subject matches its assigned boxes strictly better than
    any other subject's in every run. Returns (value or None, flagged)."""
    if not runs or len(runs[0][1]) < 2:
        return None, False
    for detected, assigned in runs:
        for s, det in enumerate(detected):
            if all(d is None for d in det):
                return 0, True
            own = miou([det], [assigned[s]])
            other = max(miou([det], [assigned[k]]) for k in range(len(assigned)) if k != s)
            if not own > other:
                return 0, False
    return 1, False


@dataclass
class EvalReport(object):
    version: str
    metadata: dict
    samples: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)

    def summarize(self):
        def mean_of(key):
            vals = [s[key] for s in self.samples if s.get(key) is not None]
            return float(np.mean(vals)) if vals else None
        ids = [v for s in self.samples for v in s['identity_sim']]
        self.aggregate = {
            'n_samples': len(self.samples),
            'miou': mean_of('miou'),
            'epe_px': mean_of('epe_px'),
            'epe_norm': mean_of('epe_norm'),
            'identity_sim': float(np.mean(ids)) if ids else None,
            'binding_accuracy': mean_of('binding_accuracy'),
            'n_binding': sum(s.get('binding_accuracy') is not None for s in self.samples),
            'oracle_miou': mean_of('oracle_miou'),
            'tracker_floor_px': mean_of('oracle_epe_px'),
            'n_flagged': sum(bool(s['flags']) for s in self.samples),
        }
        return self.aggregate

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def evaluate_clip(clip, video, blobs, swapped=None):
    """Metrics of one generated video (F x H x W x 3) against the controls it was made from.

    swapped: optional (video, control_order) generated with permuted controls.
    """
    F = clip.spec.frames
    targets = clip.boxes[:, :F]
    subjects = clip.spec.subjects
    det = detect_subjects(video, subjects)
    tracks = blobs['trajectories'].tracks
    query = np.array([t.coords[0] for t in tracks]).reshape(-1, 2)
    traj_targets = np.array([t.coords[:F] for t in tracks]).reshape(-1, F, 2)
    traj_visible = np.array([t.visible[:F] for t in tracks], dtype=bool).reshape(-1, F)
    epe_px, epe_norm, left = epe(video, query, traj_targets, traj_visible)
    refs = [t.reference_image for t in blobs['triplets']]
    ids, id_flags = [], []
    for s in range(len(subjects)):
        sim, flagged = identity_similarity(video, refs[s], targets[s])
        ids.append(sim)
        id_flags.append(flagged)

    gt_video = clip.video[:F]
    oracle_epe, _, _ = epe(gt_video, query, traj_targets, traj_visible)
    sample = {
        'seed': int(clip.seed),
        'n_subjects': len(subjects),
        'miou': miou(det, targets),
        'epe_px': epe_px,
        'epe_norm': epe_norm,
        'identity_sim': ids,
        'binding_accuracy': None,
        'oracle_miou': miou(detect_subjects(gt_video, subjects), targets),
        'oracle_epe_px': oracle_epe,
        'flags': [],
    }
    if left.any():
        sample['flags'].append('track_left_frame')
    if any(id_flags):
        sample['flags'].append('empty_crop')
    if swapped is not None and len(subjects) >= 2:
        sw_video, order = swapped
        runs = [(det, targets), (detect_subjects(sw_video, subjects), targets[list(order)])]
        value, flagged = binding_accuracy(runs)
        sample['binding_accuracy'] = value
        if flagged:
            sample['flags'].append('binding_detection_failed')
    return sample


def evaluate_generator(generator, schedule, n_samples=None, seed=0, n_steps=None, scale=None, seed_offset=None,
                       metadata=None, unconditional=False):
    """Sample the held-out clips' controls with generator and score them.

    unconditional drops the box and trajectory conditions at sampling time; the
    metrics still compare against the held-out controls.
    """
    n_samples = cfg.EVAL.N_SAMPLES if n_samples is None else n_samples
    seed_offset = cfg.EVAL.SEED_OFFSET if seed_offset is None else seed_offset
    device = generator.patch_embedding.weight.device
    patch = tuple(cfg.CODEC.PATCH)

    def generate(blobs, s):
        cond = conditions_from_blobs([blobs], generator.dtype).to(device)
        if unconditional:
            cond = replace(cond, z_box=None, box_groups=None, traj_map=None, traj_groups=None)
        z = sample(generator, schedule, cond, seed=s, n_steps=n_steps, scale=scale)
        return latent_to_video(z[0], patch)

    meta = dict(metadata or {})
    meta.update(seed=seed, n_samples=n_samples, unconditional=bool(unconditional), config=cfg_to_dict(cfg))
    report = EvalReport(version=cfg.REPORT_VERSION, metadata=meta)
    generator.eval()
    for i in range(n_samples):
        clip = generate_clip(seed_offset + i)
        s = seed + i
        blobs = get_minibatch(clip, s, training=False)
        video = generate(blobs, s)
        swapped = None
        S = len(clip.subject_ids)
        if S >= 2:
            order = [(g + 1) % S for g in range(S)]
            sw_blobs = get_minibatch(clip, s, training=False, control_order=order)
            swapped = (generate(sw_blobs, s), order)
        report.samples.append(evaluate_clip(clip, video, blobs, swapped))
        print('[eval][%3d/%3d] miou: %.3f, epe: %.2f px' % (i + 1, n_samples, report.samples[-1]['miou'],
                                                           report.samples[-1]['epe_px']))
    report.summarize()
    return report
