# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Procedural world of textured 2-D shapes with exact annotations.

Coordinates are in pixels with pixel (row y, column x) centered at the
integer point (x, y). Boxes are (x0, y0, x1, y1) with x1, y1 exclusive.
"""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import colorsys
import math
from dataclasses import dataclass, field, replace, asdict

import cv2
import numpy as np

from model.utils.config import cfg
from model.utils.errors import SceneInfeasible, SubjectNotVisible
from datasets.captions import COLOR_NAMES, caption_words, tokenize

SHAPES = ('circle', 'square', 'triangle')
LOCAL_MODES = ('none', 'spin', 'pulse', 'wobble')
PATH_KINDS = ('linear', 'sine', 'arc')
CORRUPTIONS = ('identity_swap', 'hue_shift', 'static_paste')

# 12 saturated hues, 30 degrees apart; value scaling by the texture keeps hue and saturation
PALETTE_HUES = [30. * i for i in range(12)]
PALETTE = [tuple(float(c) for c in colorsys.hsv_to_rgb(h / 360., 0.9, 0.95)) for h in PALETTE_HUES]

TEXTURE_CELLS = 8
TEXTURE_RANGE = (0.7, 1.0)
WOBBLE_AMP = 1.5
LOCAL_PERIOD = 4.
_TRIANGLE = np.array([[0., -1.], [math.sqrt(3) / 2, 0.5], [-math.sqrt(3) / 2, 0.5]])
_SQUARE = np.array([[-1., -1.], [1., -1.], [1., 1.], [-1., 1.]])


@dataclass(frozen=True)
class SubjectSpec(object):
    subject_id: int
    shape: str
    color: tuple
    size: int
    texture_seed: int
    color_name: str = ''


@dataclass(frozen=True)
class GlobalPath(object):
    """linear: (x0, y0, vx, vy); sine: (x0, y0, vx, vy, amp, period); arc: (cx, cy, radius, theta0, omega)."""
    kind: str
    params: tuple

    def center_at(self, f):
        p = self.params
        if self.kind == 'linear':
            return p[0] + p[2] * f, p[1] + p[3] * f
        if self.kind == 'sine':
            speed = math.hypot(p[2], p[3])
            nx, ny = (-p[3] / speed, p[2] / speed) if speed > 0 else (0., 1.)
            a = p[4] * math.sin(2 * math.pi * f / p[5])
            return p[0] + p[2] * f + a * nx, p[1] + p[3] * f + a * ny
        if self.kind == 'arc':
            th = p[3] + p[4] * f
            return p[0] + p[2] * math.cos(th), p[1] + p[2] * math.sin(th)
        raise ValueError('unknown path kind {}'.format(self.kind))


@dataclass(frozen=True)
class MotionSpec(object):
    subject_id: int
    global_path: GlobalPath
    local_mode: str
    camera_pan: tuple


@dataclass(frozen=True)
class SceneSpec(object):
    seed: int
    frames: int
    hw: tuple
    subjects: tuple
    motions: tuple
    pool_frames: int = 0

    @property
    def camera_pan(self):
        return self.motions[0].camera_pan if self.motions else (0, 0)

    @property
    def total_frames(self):
        return self.frames + self.pool_frames


@dataclass
class AnnotatedClip(object):
    video: np.ndarray
    masks: np.ndarray
    boxes: np.ndarray
    tracks: list
    background_tracks: np.ndarray
    caption_tokens: np.ndarray
    seed: int
    spec: SceneSpec
    background: np.ndarray = field(default=None, repr=False)

    @property
    def window(self):
        """Frames of the training window; later frames form the reference pool."""
        return list(range(self.spec.frames))

    @property
    def pool(self):
        return list(range(self.spec.frames, self.spec.total_frames))

    @property
    def subject_ids(self):
        return [s.subject_id for s in self.spec.subjects]

    def subject_index(self, subject_id):
        return self.subject_ids.index(subject_id)


def scene_from_dict(d):
    subjects = tuple(SubjectSpec(**dict(s, color=tuple(s['color']))) for s in d['subjects'])
    motions = tuple(MotionSpec(subject_id=m['subject_id'],
                               global_path=GlobalPath(m['global_path']['kind'], tuple(m['global_path']['params'])),
                               local_mode=m['local_mode'], camera_pan=tuple(m['camera_pan']))
                    for m in d['motions'])
    return SceneSpec(seed=d['seed'], frames=d['frames'], hw=tuple(d['hw']), subjects=subjects,
                     motions=motions, pool_frames=d.get('pool_frames', 0))


def scene_to_dict(spec):
    return asdict(spec)


def color_distance(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _bounding_radius(size):
    return size / 2. * math.sqrt(2) + WOBBLE_AMP + 1.


def _sample_path(rng, radius, frames, hw, static_prob, max_speed):
    H, W = hw
    lo_x, hi_x = radius, W - 1 - radius
    lo_y, hi_y = radius, H - 1 - radius
    if lo_x >= hi_x or lo_y >= hi_y:
        return None
    x0, y0 = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
    if rng.rand() < static_prob:
        return GlobalPath('linear', (x0, y0, 0., 0.))
    kind = PATH_KINDS[rng.randint(len(PATH_KINDS))]
    speed = rng.uniform(0.5, max_speed)
    theta = rng.uniform(0, 2 * math.pi)
    vx, vy = speed * math.cos(theta), speed * math.sin(theta)
    if kind == 'linear':
        return GlobalPath('linear', (x0, y0, vx, vy))
    if kind == 'sine':
        return GlobalPath('sine', (x0, y0, vx, vy, rng.uniform(1.5, 3.5), float(rng.randint(4, 9))))
    r = rng.uniform(5., 12.)
    th0 = rng.uniform(0, 2 * math.pi)
    omega = speed / r * (1 if rng.rand() < 0.5 else -1)
    return GlobalPath('arc', (x0 - r * math.cos(th0), y0 - r * math.sin(th0), r, th0, omega))


def _path_fits(path, radius, total_frames, hw):
    H, W = hw
    for f in range(total_frames):
        x, y = path.center_at(f)
        if x < radius or x > W - 1 - radius or y < radius or y > H - 1 - radius:
            return False
    return True


def generate_scene(seed, n_subjects, frames=None, hw=None, pool_frames=None):
    """Sample a SceneSpec. Equal arguments give equal specs."""
    frames = cfg.WORLD.FRAMES if frames is None else frames
    hw = (cfg.WORLD.HEIGHT, cfg.WORLD.WIDTH) if hw is None else tuple(hw)
    pool_frames = cfg.WORLD.REF_POOL_FRAMES if pool_frames is None else pool_frames
    assert 1 <= n_subjects <= len(PALETTE), 'n_subjects out of range'
    assert frames >= 4, 'frames must be >= 4'
    assert min(hw) >= 32, 'frame sides must be >= 32'
    total = frames + pool_frames
    rng = np.random.RandomState(seed % (2 ** 32))

    if rng.rand() < cfg.WORLD.PAN_PROB:
        m = cfg.WORLD.MAX_PAN
        pan = (0, 0)
        while pan == (0, 0):
            pan = (int(rng.randint(-m, m + 1)), int(rng.randint(-m, m + 1)))
    else:
        pan = (0, 0)

    color_ids = rng.choice(len(PALETTE), n_subjects, replace=False)
    subjects = []
    for i, ci in enumerate(color_ids):
        frac = rng.uniform(*cfg.WORLD.SIZE_RANGE)
        size = int(round(frac * min(hw)))
        size = int(min(max(size, cfg.WORLD.MIN_SIZE), min(hw) // 2))
        subjects.append(SubjectSpec(subject_id=i, shape=SHAPES[rng.randint(len(SHAPES))],
                                    color=PALETTE[ci], size=size,
                                    texture_seed=int(rng.randint(0, 2 ** 31 - 1)),
                                    color_name=COLOR_NAMES[ci]))
    for a in range(n_subjects):
        for b in range(a + 1, n_subjects):
            assert color_distance(subjects[a].color, subjects[b].color) >= cfg.WORLD.MIN_COLOR_DIST

    local_modes = [LOCAL_MODES[rng.randint(len(LOCAL_MODES))] for _ in subjects]
    for attempt in range(cfg.WORLD.PLACEMENT_RETRIES):
        paths = []
        for s in subjects:
            radius = _bounding_radius(s.size)
            path = None
            for _ in range(20):
                cand = _sample_path(rng, radius, total, hw, cfg.WORLD.STATIC_PROB, cfg.WORLD.MAX_SPEED)
                if cand is not None and _path_fits(cand, radius, total, hw):
                    path = cand
                    break
            if path is None:
                break
            paths.append(path)
        if len(paths) != n_subjects:
            continue
        if _paths_disjoint(subjects, paths, total):
            motions = tuple(MotionSpec(s.subject_id, p, lm, pan) for s, p, lm in zip(subjects, paths, local_modes))
            return SceneSpec(seed=int(seed), frames=int(frames), hw=tuple(int(v) for v in hw),
                             subjects=tuple(subjects), motions=motions, pool_frames=int(pool_frames))
    raise SceneInfeasible()


def _paths_disjoint(subjects, paths, total):
    for f in range(total):
        centers = [p.center_at(f) for p in paths]
        for a in range(len(subjects)):
            for b in range(a + 1, len(subjects)):
                d = math.hypot(centers[a][0] - centers[b][0], centers[a][1] - centers[b][1])
                if d < _bounding_radius(subjects[a].size) + _bounding_radius(subjects[b].size):
                    return False
    return True


def _shape_extent(shape, angle):
    if shape == 'circle':
        return 2., 2.
    verts = _SQUARE if shape == 'square' else _TRIANGLE
    c, s = math.cos(angle), math.sin(angle)
    x = c * verts[:, 0] - s * verts[:, 1]
    y = s * verts[:, 0] + c * verts[:, 1]
    return x.max() - x.min(), y.max() - y.min()


def subject_pose(subject, motion, f):
    """(cx, cy, angle, scale) of a subject at frame f. Centers sit on the integer grid."""
    cx, cy = motion.global_path.center_at(f)
    cx, cy = float(round(cx)), float(round(cy))
    angle, scale = 0., 1.
    if motion.local_mode == 'spin':
        angle = math.radians(cfg.WORLD.SPIN_RATE * f)
        ex0, ey0 = _shape_extent(subject.shape, 0.)
        ex, ey = _shape_extent(subject.shape, angle)
        # shrink while turning so the bounding box stays put
        scale = min(ex0 / ex, ey0 / ey)
    elif motion.local_mode == 'pulse':
        scale = 1. - 0.15 * (0.5 - 0.5 * math.cos(2 * math.pi * f / LOCAL_PERIOD))
    elif motion.local_mode == 'wobble':
        cx += float(round(WOBBLE_AMP * math.sin(2 * math.pi * f / LOCAL_PERIOD)))
    return cx, cy, angle, scale


def _local_coords(pose, size, xs, ys):
    cx, cy, angle, scale = pose
    r = size / 2. * scale
    c, s = math.cos(angle), math.sin(angle)
    dx, dy = xs - cx, ys - cy
    return (c * dx + s * dy) / r, (-s * dx + c * dy) / r


def inside_shape(shape, u, v, shrink=1.):
    u, v = u / shrink, v / shrink
    if shape == 'circle':
        return u * u + v * v <= 1.
    if shape == 'square':
        return np.maximum(np.abs(u), np.abs(v)) <= 1.
    k = math.sqrt(3) / 2
    return (v <= 0.5) & (-k * u - 0.5 * v <= 0.5) & (k * u - 0.5 * v <= 0.5)


def _texture(subject):
    rs = np.random.RandomState(subject.texture_seed % (2 ** 32))
    return rs.uniform(TEXTURE_RANGE[0], TEXTURE_RANGE[1], (TEXTURE_CELLS, TEXTURE_CELLS))


def _texture_lookup(tex, u, v):
    iu = np.clip(np.floor((u + 1.) / 2. * TEXTURE_CELLS), 0, TEXTURE_CELLS - 1).astype(np.int64)
    iv = np.clip(np.floor((v + 1.) / 2. * TEXTURE_CELLS), 0, TEXTURE_CELLS - 1).astype(np.int64)
    return tex[iv, iu]


def render_background(seed, hw, f, pan, offset=(0, 0)):
    """Low-contrast gray gradient with faint speckle, translated by pan*f + offset."""
    H, W = hw
    ys, xs = np.mgrid[0:H, 0:W]
    X = xs - int(pan[0]) * f - int(offset[0])
    Y = ys - int(pan[1]) * f - int(offset[1])
    table = np.random.RandomState((seed * 7919 + 17) % (2 ** 32)).rand(256, 256)
    g = 0.42 + 0.12 * (X + Y) / float(W + H) + 0.08 * (table[Y % 256, X % 256] - 0.5)
    g = np.clip(g, 0., 1.).astype(np.float32)
    return np.repeat(g[:, :, None], 3, axis=2)


def render_subject(subject, motion, f, hw):
    """(mask, rgb) of one subject at frame f."""
    H, W = hw
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    u, v = _local_coords(subject_pose(subject, motion, f), subject.size, xs, ys)
    mask = inside_shape(subject.shape, u, v)
    shade = _texture_lookup(_texture(subject), u, v)
    rgb = (shade[:, :, None] * np.asarray(subject.color)[None, None, :]).astype(np.float32)
    return mask, rgb


def box_from_mask(mask):
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return np.zeros(4, dtype=np.float32)
    return np.array([xs.min(), ys.min(), xs.max() + 1, ys.max() + 1], dtype=np.float32)


def subject_point_track(subject, motion, uv, frames):
    """World positions over frames of a point fixed in subject-local coordinates."""
    out = np.zeros((frames, 2), dtype=np.float64)
    for f in range(frames):
        cx, cy, angle, scale = subject_pose(subject, motion, f)
        r = subject.size / 2. * scale
        c, s = math.cos(angle), math.sin(angle)
        out[f, 0] = cx + r * (c * uv[0] - s * uv[1])
        out[f, 1] = cy + r * (s * uv[0] + c * uv[1])
    return out


def local_point(subject, motion, xy, f=0):
    """Inverse of subject_point_track at frame f."""
    u, v = _local_coords(subject_pose(subject, motion, f), subject.size, np.float64(xy[0]), np.float64(xy[1]))
    return float(u), float(v)


def _pixel(pt, hw):
    x, y = int(round(pt[0])), int(round(pt[1]))
    if 0 <= x < hw[1] and 0 <= y < hw[0]:
        return y, x
    return None


def _sample_object_tracks(rng, subject, motion, masks_s, n, frames, hw):
    tracks = []
    for _ in range(n * 40):
        if len(tracks) == n:
            break
        uv = rng.uniform(-0.6, 0.6, 2)
        if not inside_shape(subject.shape, uv[0], uv[1], shrink=0.6):
            continue
        tr = subject_point_track(subject, motion, uv, frames)
        ok = True
        for f in range(frames):
            p = _pixel(tr[f], hw)
            if p is None or not masks_s[f][p]:
                ok = False
                break
        if ok:
            tracks.append(tr)
    return np.array(tracks, dtype=np.float32).reshape(-1, frames, 2)


def _sample_background_tracks(rng, pan, union, n, frames, hw):
    H, W = hw
    tracks = []
    for _ in range(n * 40):
        if len(tracks) == n:
            break
        p0 = np.array([rng.randint(W), rng.randint(H)], dtype=np.float64)
        tr = p0[None, :] + np.arange(frames)[:, None] * np.asarray(pan, dtype=np.float64)[None, :]
        ok = True
        for f in range(frames):
            p = _pixel(tr[f], hw)
            if p is None or union[f][p]:
                ok = False
                break
        if ok:
            tracks.append(tr)
    return np.array(tracks, dtype=np.float32).reshape(-1, frames, 2)


def render_clip(spec, n_object_tracks=None, n_background_tracks=None):
    """Render a SceneSpec into an AnnotatedClip. Pure function of the spec."""
    n_obj = cfg.WORLD.N_OBJECT_TRACKS if n_object_tracks is None else n_object_tracks
    n_bg = cfg.WORLD.N_BACKGROUND_TRACKS if n_background_tracks is None else n_background_tracks
    H, W = spec.hw
    F = spec.total_frames
    S = len(spec.subjects)
    video = np.zeros((F, H, W, 3), dtype=np.float32)
    background = np.zeros((F, H, W, 3), dtype=np.float32)
    masks = np.zeros((S, F, H, W), dtype=bool)
    boxes = np.zeros((S, F, 4), dtype=np.float32)
    for f in range(F):
        bg = render_background(spec.seed, spec.hw, f, spec.camera_pan)
        background[f] = bg
        frame = bg.copy()
        for i, (s, m) in enumerate(zip(spec.subjects, spec.motions)):
            mask, rgb = render_subject(s, m, f, spec.hw)
            frame[mask] = rgb[mask]
            masks[i, f] = mask
            boxes[i, f] = box_from_mask(mask)
        video[f] = frame

    rng = np.random.RandomState((spec.seed + 1) % (2 ** 32))
    tracks = [_sample_object_tracks(rng, s, m, masks[i], n_obj, F, spec.hw)
              for i, (s, m) in enumerate(zip(spec.subjects, spec.motions))]
    union = masks.any(axis=0)
    bg_tracks = _sample_background_tracks(rng, spec.camera_pan, union, n_bg, F, spec.hw)
    caption = tokenize(caption_words(spec), cfg.WORLD.CAPTION_LEN)
    return AnnotatedClip(video=video, masks=masks, boxes=boxes, tracks=tracks,
                         background_tracks=bg_tracks, caption_tokens=caption,
                         seed=spec.seed, spec=spec, background=background)


def generate_clip(seed, n_subjects=None, frames=None, hw=None):
    """Scene + render; n_subjects defaults to a seeded draw in 1..MAX_SUBJECTS.
    Infeasible scenes are retried with derived seeds."""
    for k in range(8):
        s = seed * 8 + k
        n = n_subjects if n_subjects is not None else \
            1 + np.random.RandomState(s % (2 ** 32)).randint(cfg.WORLD.MAX_SUBJECTS)
        try:
            return render_clip(generate_scene(s, n, frames, hw))
        except SceneInfeasible:
            continue
    raise SceneInfeasible()


def make_reference_image(clip, subject_id, frame_pool, train_window=None):
    """Subject isolated on white, its tight crop centered in a frame-sized canvas."""
    pool = sorted(set(int(f) for f in frame_pool))
    if train_window is not None:
        assert not set(pool) & set(train_window), 'reference pool overlaps the training window'
    i = clip.subject_index(subject_id)
    areas = [int(clip.masks[i, f].sum()) for f in pool]
    if not areas or max(areas) == 0:
        raise SubjectNotVisible()
    f = pool[int(np.argmax(areas))]
    mask = clip.masks[i, f]
    x0, y0, x1, y1 = [int(v) for v in box_from_mask(mask)]
    H, W = mask.shape
    crop = clip.video[f, y0:y1, x0:x1]
    cm = mask[y0:y1, x0:x1]
    canvas = np.ones((H, W, 3), dtype=np.float32)
    oy, ox = (H - (y1 - y0)) // 2, (W - (x1 - x0)) // 2
    region = canvas[oy:oy + y1 - y0, ox:ox + x1 - x0]
    region[cm] = crop[cm]
    return canvas


@dataclass
class PreferencePair(object):
    win: np.ndarray
    lose: np.ndarray
    refs: list
    caption_tokens: np.ndarray
    corruption: str
    subject_id: int
    seed: int
    label_win: int = 1
    label_lose: int = 0


def rotate_hue(rgb, degrees):
    """Rotate the hue of float RGB pixels (..., 3) in [0,1]."""
    rgb = np.asarray(rgb, dtype=np.float32)
    flat = rgb.reshape(-1, 1, 3)
    hsv = cv2.cvtColor(flat, cv2.COLOR_RGB2HSV)
    hsv[..., 0] = np.mod(hsv[..., 0] + degrees, 360.)
    out = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    return np.clip(out, 0., 1.).reshape(rgb.shape)


def hue_of(rgb):
    return float(cv2.cvtColor(np.asarray(rgb, dtype=np.float32).reshape(1, 1, 3), cv2.COLOR_RGB2HSV)[0, 0, 0])


def _free_hue_shift(spec, i):
    others = [hue_of(s.color) for j, s in enumerate(spec.subjects) if j != i]
    h = hue_of(spec.subjects[i].color)
    for shift in (120., 240., 150., 210., 180., 90., 270.):
        nh = (h + shift) % 360.
        if all(min(abs(nh - o), 360. - abs(nh - o)) >= 30. for o in others):
            return shift
    return 180.


def _pick_donor(spec, i, donors):
    subj = spec.subjects[i]
    for d in donors:
        if (d.shape, d.color) == (subj.shape, subj.color):
            continue
        if all(color_distance(d.color, s.color) >= cfg.WORLD.MIN_COLOR_DIST
               for j, s in enumerate(spec.subjects) if j != i):
            return d
    return None


def make_preference_pair(clip, corruption, donors=(), seed=0):
    """Win is the clip's training window; lose corrupts one subject's identity.

    identity_swap falls back to hue_shift when no distinct donor is available.
    'background_jitter' is a diagnostic negative that only moves the background.
    """
    assert len(clip.spec.subjects) >= 1
    rng = np.random.RandomState(seed % (2 ** 32))
    spec = clip.spec
    i = int(rng.randint(len(spec.subjects)))
    F = spec.frames
    win = clip.video[:F].copy()
    lose = win.copy()
    mask = clip.masks[i, :F]

    if corruption == 'identity_swap':
        donor = _pick_donor(spec, i, donors)
        if donor is None:
            corruption = 'hue_shift'
        else:
            subj = spec.subjects[i]
            new = replace(donor, subject_id=subj.subject_id, size=subj.size)
            subjects = tuple(new if j == i else s for j, s in enumerate(spec.subjects))
            lose = render_clip(replace(spec, subjects=subjects), 0, 0).video[:F].copy()

    if corruption == 'hue_shift':
        shift = _free_hue_shift(spec, i)
        if mask.any():
            lose[mask] = rotate_hue(win[mask], shift)
    elif corruption == 'static_paste':
        first = clip.masks[i, 0]
        for f in range(F):
            lose[f][mask[f]] = clip.background[f][mask[f]]
            lose[f][first] = clip.video[0][first]
    elif corruption == 'background_jitter':
        union = clip.masks[:, :F].any(axis=0)
        for f in range(F):
            bg = render_background(spec.seed, spec.hw, f, spec.camera_pan, offset=(2, 1))
            lose[f][~union[f]] = bg[~union[f]]
    elif corruption != 'identity_swap':
        raise ValueError('unknown corruption {}'.format(corruption))

    refs = [make_reference_image(clip, sid, clip.pool, clip.window) for sid in clip.subject_ids]
    return PreferencePair(win=win, lose=lose, refs=refs, caption_tokens=clip.caption_tokens.copy(),
                          corruption=corruption, subject_id=spec.subjects[i].subject_id, seed=int(seed))
