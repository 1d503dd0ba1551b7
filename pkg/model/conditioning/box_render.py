# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Box videos: colored boxes on white, averaged where boxes overlap."""
import numpy as np

from model.utils.config import cfg

# Fixed 12-color palette for control boxes; each sample draws a seeded shuffle
BOX_PALETTE = [
    (1., 0., 0.), (0., 0., 1.), (0., 0.75, 0.), (1., 0.6, 0.), (0.6, 0., 0.8), (0., 0.8, 0.8),
    (0.9, 0., 0.6), (0.5, 0.35, 0.1), (0.45, 0.7, 0.), (0., 0.35, 0.6), (0.35, 0.35, 0.35), (0.8, 0.8, 0.),
]


def assign_box_colors(n, seed):
    assert n <= len(BOX_PALETTE), 'more boxes than palette colors'
    order = np.random.RandomState(seed % (2 ** 32)).permutation(len(BOX_PALETTE))
    return [BOX_PALETTE[i] for i in order[:n]]


def _pixel_span(lo, hi, size):
    """Pixels whose centers lie in [lo, hi)."""
    a = int(np.clip(np.ceil(lo - 0.5), 0, size))
    b = int(np.clip(np.ceil(hi - 0.5), 0, size))
    return a, b


def render_box_video(tracks, hw=None, frames=None):
    """F x H x W x 3 video: white background, mean of the colors of all covering boxes."""
    hw = (cfg.WORLD.HEIGHT, cfg.WORLD.WIDTH) if hw is None else tuple(hw)
    frames = cfg.WORLD.FRAMES if frames is None else frames
    H, W = hw
    acc = np.zeros((frames, H, W, 3), dtype=np.float64)
    cnt = np.zeros((frames, H, W, 1), dtype=np.float64)
    for tr in tracks:
        color = np.asarray(tr.assigned_color, dtype=np.float64)
        for f in range(frames):
            x0, y0, x1, y1 = tr.boxes[f]
            ya, yb = _pixel_span(y0, y1, H)
            xa, xb = _pixel_span(x0, x1, W)
            if ya < yb and xa < xb:
                acc[f, ya:yb, xa:xb] += color
                cnt[f, ya:yb, xa:xb] += 1.
    video = np.where(cnt > 0, acc / np.maximum(cnt, 1.), 1.)
    return video.astype(np.float32)
