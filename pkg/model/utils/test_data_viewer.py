import numpy as np

from clip_data_layer.minibatch import get_minibatch
from datasets.omni_eval import detect_subjects
from datasets.synthetic_world import generate_clip
from model.utils.data_viewer import dataViewer, to_uint8


def test_overlay_shapes_and_saved_frames(tmpdir):
    clip = generate_clip(4)
    F = clip.spec.frames
    blobs = get_minibatch(clip, 0, training=False)
    viewer = dataViewer(scale=2)
    det = detect_subjects(clip.video[:F], clip.spec.subjects)
    frames = viewer.draw_controls(clip.video[:F], blobs['triplets'], det)
    H, W = clip.spec.hw
    assert frames.shape == (F, 2 * H, 2 * W, 3) and frames.dtype == np.uint8
    assert not np.array_equal(frames[0], viewer.upscale(clip.video[0]))
    paths = viewer.save_frames(frames, str(tmpdir.join('vis')))
    assert len(paths) == F and all(tmpdir.join('vis').join(p.split('/')[-1]).check() for p in paths)


def test_bin_accuracy_chart():
    img = dataViewer().draw_bin_accuracy({'[0.0,0.5]': 0.75, '(0.5,1.0]': None, 'overall': 0.75})
    assert img.ndim == 3 and img.shape[2] == 3


def test_to_uint8_clips():
    assert (to_uint8(np.array([-1., 0.5, 2.])) == [0, 128, 255]).all()
