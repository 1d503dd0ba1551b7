# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
import os

import numpy as np
import cv2
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt


def fig2data(fig):
    """
    @brief Convert a Matplotlib figure to a numpy array with RGB channels
    @param fig a matplotlib figure
    @return a numpy 3D array of RGB values
    """
    fig.canvas.draw()
    buf = np.asarray(fig.canvas.buffer_rgba())
    return np.ascontiguousarray(buf[:, :, :3])


def to_uint8(video):
    return (np.clip(np.asarray(video, dtype=np.float32), 0., 1.) * 255. + 0.5).astype(np.uint8)


# Numpy data viewer to overlay control signals and detections on video frames.
class dataViewer(object):
    def __init__(self, scale=4):
        self.color_pool = [(255, 207, 136), (68, 187, 92), (0, 153, 255), (187, 68, 163), (255, 119, 119),
                           (116, 68, 187), (163, 187, 68), (0, 204, 255), (204, 0, 255), (255, 204, 0)]
        self.scale = scale

    def group_color(self, g):
        return self.color_pool[g % len(self.color_pool)]

    def upscale(self, frame):
        frame = to_uint8(frame) if frame.dtype != np.uint8 else frame
        return cv2.resize(frame, None, fx=self.scale, fy=self.scale, interpolation=cv2.INTER_NEAREST)

    def draw_single_box(self, img, box, color, text_str=None):
        s = self.scale
        p0 = (int(round(box[0] * s)), int(round(box[1] * s)))
        p1 = (int(round(box[2] * s)) - 1, int(round(box[3] * s)) - 1)
        cv2.rectangle(img, p0, p1, color, 1)
        if text_str:
            cv2.putText(img, text_str, (p0[0] + 2, p0[1] + 12), cv2.FONT_HERSHEY_PLAIN, 1, color, thickness=1)
        return img

    def draw_trajectory(self, img, coords, f, color):
        """Polyline of a track up to frame f with a dot at the current point."""
        s = self.scale
        pts = np.round(np.asarray(coords[:f + 1]) * s + s / 2.).astype(np.int32)
        if len(pts) > 1:
            cv2.polylines(img, [pts.reshape(-1, 1, 2)], False, color, 1)
        cv2.circle(img, tuple(int(v) for v in pts[-1]), 2, color, -1)
        return img

    def draw_controls(self, video, triplets=None, detections=None):
        """
        :param video: F x H x W x 3 float video in [0,1]
        :param triplets: control triplets; boxes and tracks are drawn in the group color
        :param detections: per-subject lists of detected boxes (or None), drawn in white
        :return: F x sH x sW x 3 uint8 frames
        """
        out = []
        for f, frame in enumerate(video):
            img = np.ascontiguousarray(self.upscale(frame))
            for t in triplets or []:
                color = self.group_color(t.group_id)
                if t.box_track is not None and f < t.box_track.num_frames:
                    self.draw_single_box(img, t.box_track.boxes[f], color, str(t.group_id))
                if t.trajectories is not None:
                    for tr in t.trajectories.tracks:
                        self.draw_trajectory(img, tr.coords, min(f, len(tr.coords) - 1), color)
            for det in detections or []:
                if det[f] is not None:
                    self.draw_single_box(img, det[f], (255, 255, 255))
            out.append(img)
        return np.stack(out)

    def draw_references(self, images):
        """Reference images side by side."""
        if not len(images):
            return np.zeros((self.scale, self.scale, 3), dtype=np.uint8)
        return np.concatenate([self.upscale(im) for im in images], axis=1)

    def save_frames(self, frames, dirname, prefix='frame'):
        if not os.path.exists(dirname):
            os.makedirs(dirname)
        paths = []
        for f, img in enumerate(frames):
            path = os.path.join(dirname, '%s_%03d.png' % (prefix, f))
            cv2.imwrite(path, cv2.cvtColor(img, cv2.COLOR_RGB2BGR))
            paths.append(path)
        return paths

    def draw_bin_accuracy(self, report, title='pairwise accuracy'):
        """Bar chart of a per-t-bin accuracy report as an RGB array."""
        labels = [k for k in report if k != 'overall']
        values = [report[k] if report[k] is not None else 0. for k in labels]
        fig = plt.figure(figsize=(4, 3))
        ax = fig.add_subplot(111)
        ax.bar(range(len(labels)), values, color='#44BB5C')
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, fontsize=7)
        ax.set_ylim(0., 1.)
        ax.axhline(0.5, color='gray', lw=0.8, ls='--')
        ax.set_title(title, fontsize=9)
        fig.tight_layout()
        img = fig2data(fig)
        plt.close(fig)
        return img
