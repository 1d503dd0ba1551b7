import cv2
import numpy as np
import pytest

from datasets.synthetic_world import (GlobalPath, MotionSpec, PALETTE, SceneSpec, SubjectSpec,
                                      generate_clip, make_reference_image, render_clip)
from model.conditioning.box_render import assign_box_colors, render_box_video
from model.conditioning.box_utils import (BoxTrack, bbox_overlaps, box_footprint_latent, clip_box_tracks,
                                          interpolate_box_track, iou, stability_filter)
from model.conditioning.trajectory import (BACKGROUND, Track, TrajectorySet, classify_tracks, drop_trajectories,
                                           encode_trajectory_tokens, motion_magnitude, sample_trajectories,
                                           track_code)
from model.conditioning.triplet import (ControlTriplet, build_triplets, count_dropped, drop_conditions,
                                        pack_conditions)
from model.utils.augmentations import augment_reference
from model.utils.errors import CapacityExceeded, NoForeground


def static_clip(pan=(0, 0), size=16):
    subject = SubjectSpec(subject_id=0, shape='square', color=PALETTE[0], size=size, texture_seed=7,
                          color_name='red')
    motion = MotionSpec(0, GlobalPath('linear', (32., 32., 0., 0.)), 'none', pan)
    spec = SceneSpec(seed=5, frames=8, hw=(64, 64), subjects=(subject,), motions=(motion,), pool_frames=2)
    return render_clip(spec)


def drifting_track(step, frames=8, size=16.):
    return BoxTrack(0, np.array([[step * f, 0., step * f + size, size] for f in range(frames)], dtype=np.float32))


# boxes

def test_iou_cases():
    assert iou((0, 0, 4, 4), (0, 0, 4, 4)) == 1.
    assert iou((0, 0, 2, 2), (5, 5, 6, 6)) == 0.
    assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1. / 7.)
    assert iou((1, 1, 1, 3), (1, 1, 1, 3)) == 0.


def test_bbox_overlaps_matches_scalar_iou():
    rng = np.random.RandomState(0)
    a = np.sort(rng.rand(5, 2, 2) * 20, axis=1).transpose(0, 2, 1).reshape(5, 4)[:, [0, 2, 1, 3]]
    b = np.sort(rng.rand(3, 2, 2) * 20, axis=1).transpose(0, 2, 1).reshape(3, 4)[:, [0, 2, 1, 3]]
    ov = bbox_overlaps(a, b)
    for i in range(5):
        for j in range(3):
            assert ov[i, j] == pytest.approx(iou(a[i], b[j]))


def test_stability_filter():
    assert stability_filter(drifting_track(0.), 1.0)
    teleport = drifting_track(0.)
    teleport.boxes[4] = [40., 40., 56., 56.]
    assert not stability_filter(teleport, 0.01)
    # 16 px box, 2 px/frame: 14*16 / (2*256 - 224) = 0.778
    assert stability_filter(drifting_track(2.), 0.3)
    assert not stability_filter(drifting_track(2.), 0.8)


def test_stability_filter_is_monotone():
    track = drifting_track(3.)
    results = [stability_filter(track, th) for th in np.linspace(0., 1., 21)]
    assert results == sorted(results, reverse=True)


def test_interpolate_box_track():
    out = interpolate_box_track([0, 4], [[0, 0, 10, 10], [8, 4, 18, 14]], 6)
    np.testing.assert_allclose(out[2], [4, 2, 14, 12])
    np.testing.assert_allclose(out[5], [8, 4, 18, 14])


def test_box_footprint_latent():
    boxes = np.tile(np.array([[0., 0., 16., 16.]]), (8, 1))
    m = box_footprint_latent(boxes, (8, 8, 8), (1, 8, 8))
    assert m.sum() == 8 * 4
    assert m[:, :2, :2].all()


# box video

def test_render_box_video_empty_is_white():
    v = render_box_video([], (32, 32), 4)
    assert v.shape == (4, 32, 32, 3)
    assert (v == 1.).all()


def test_render_box_video_full_frame_and_overlap():
    full = BoxTrack(0, np.tile(np.array([[0., 0., 32., 32.]]), (2, 1)), (0.2, 0.4, 0.6))
    v = render_box_video([full], (32, 32), 2)
    np.testing.assert_allclose(v.reshape(-1, 3), np.tile([[0.2, 0.4, 0.6]], (2 * 32 * 32, 1)), atol=1e-7)

    red = BoxTrack(0, np.tile(np.array([[0., 0., 16., 16.]]), (2, 1)), (1., 0., 0.))
    blue = BoxTrack(1, np.tile(np.array([[8., 8., 24., 24.]]), (2, 1)), (0., 0., 1.))
    v = render_box_video([red, blue], (32, 32), 2)
    np.testing.assert_allclose(v[0, 10, 10], [0.5, 0., 0.5])
    np.testing.assert_allclose(v[0, 2, 2], [1., 0., 0.])
    np.testing.assert_allclose(v[0, 20, 20], [0., 0., 1.])
    np.testing.assert_allclose(v[0, 30, 30], [1., 1., 1.])
    assert np.array_equal(v, render_box_video([blue, red], (32, 32), 2))


def test_box_colors_are_seeded_and_unique():
    a = assign_box_colors(3, 11)
    assert a == assign_box_colors(3, 11)
    assert len(set(a)) == 3


# trajectories

def test_object_aware_points_start_inside_the_mask():
    clip = generate_clip(21, n_subjects=1)
    trajs = sample_trajectories(clip, 'object_aware', 32, seed=4)
    assert len(trajs) == 32
    for tr in trajs.tracks:
        x, y = int(round(tr.coords[0, 0])), int(round(tr.coords[0, 1]))
        assert clip.masks[0, 0, y, x]
        assert tr.subject_id == clip.subject_ids[0]


def test_object_aware_without_foreground():
    clip = static_clip()
    clip.masks[:] = False
    with pytest.raises(NoForeground):
        sample_trajectories(clip, 'object_aware', 4, seed=0)


def test_grid_over_static_scene_is_constant():
    clip = static_clip()
    trajs = sample_trajectories(clip, 'grid', 25, seed=1)
    assert len(trajs) == 25
    for tr in trajs.tracks:
        assert np.allclose(tr.coords, tr.coords[0:1])
    owners = set(tr.subject_id for tr in trajs.tracks)
    assert BACKGROUND in owners
    assert motion_magnitude(clip) == 0.


def test_grid_background_follows_pan():
    clip = static_clip(pan=(1, -1))
    trajs = sample_trajectories(clip, 'grid', 16, seed=2)
    bg = [tr for tr in trajs.tracks if tr.subject_id == BACKGROUND]
    assert bg
    np.testing.assert_allclose(np.diff(bg[0].coords, axis=0), np.tile([[1., -1.]], (7, 1)))


def test_classify_tracks():
    masks = np.zeros((2, 8, 8), dtype=bool)
    masks[0, :4, :4] = True
    masks[1, 4:, 4:] = True
    assert classify_tracks([(1, 1), (6, 6), (6, 1), (20, 20)], masks, [3, 5]) == [3, 5, BACKGROUND, BACKGROUND]


def test_drop_trajectories_is_seeded():
    clip = generate_clip(3)
    trajs = sample_trajectories(clip, 'grid', 40, seed=0)
    a = drop_trajectories(trajs, 0.5, seed=9)
    b = drop_trajectories(trajs, 0.5, seed=9)
    assert a.track_ids == b.track_ids
    assert 10 <= len(a) <= 30
    assert len(drop_trajectories(trajs, 0., seed=9)) == 40
    assert len(drop_trajectories(trajs, 1., seed=9)) == 0


def _one_track(track_id, x, y, frames=4):
    return Track(track_id, 0, np.tile(np.array([[x, y]], dtype=np.float32), (frames, 1)), np.ones(frames, bool))


def test_encode_trajectory_tokens():
    empty = encode_trajectory_tokens(TrajectorySet(), (4, 8, 8), 16, patch=(1, 8, 8))
    assert empty.shape == (4, 8, 8, 16) and not empty.any()

    assert np.linalg.norm(track_code(0, 16) - track_code(1, 16)) > 0

    m = encode_trajectory_tokens(TrajectorySet([_one_track(0, 8., 8.)]), (4, 8, 8), 16, patch=(1, 8, 8))
    nz = np.argwhere(np.abs(m).sum(-1) > 0)
    assert sorted(map(tuple, nz)) == [(t, 1, 1) for t in range(4)]
    np.testing.assert_allclose(m[0, 1, 1], track_code(0, 16), atol=1e-6)


def test_encode_averages_collisions_and_clamps():
    tracks = [_one_track(0, 8., 8.), _one_track(1, 9., 9.), _one_track(2, 200., -5.)]
    m = encode_trajectory_tokens(TrajectorySet(tracks), (4, 8, 8), 16, patch=(1, 8, 8))
    np.testing.assert_allclose(m[0, 1, 1], (track_code(0, 16) + track_code(1, 16)) / 2., atol=1e-6)
    np.testing.assert_allclose(m[0, 0, 7], track_code(2, 16), atol=1e-6)


def test_encode_skips_invisible_points():
    tr = _one_track(0, 8., 8.)
    tr.visible[2] = False
    m = encode_trajectory_tokens(TrajectorySet([tr]), (4, 8, 8), 16, patch=(1, 8, 8))
    assert not m[2].any() and m[1].any()


def test_encode_is_permutation_invariant():
    clip = generate_clip(8)
    trajs = sample_trajectories(clip, 'grid', 30, seed=3)
    shuffled = TrajectorySet([trajs.tracks[i] for i in np.random.RandomState(0).permutation(30)])
    a = encode_trajectory_tokens(trajs, (8, 8, 8), 48)
    b = encode_trajectory_tokens(shuffled, (8, 8, 8), 48)
    np.testing.assert_allclose(a, b, atol=1e-6)


# reference augmentation

def _mean_hue(image):
    hsv = cv2.cvtColor(np.clip(image, 0., 1.).astype(np.float32), cv2.COLOR_RGB2HSV)
    sel = hsv[..., 1] >= 0.45
    ang = np.deg2rad(hsv[..., 0][sel])
    return np.rad2deg(np.angle(np.exp(1j * ang).mean()))


def test_augment_reference():
    clip = generate_clip(17, n_subjects=1)
    ref = make_reference_image(clip, clip.subject_ids[0], clip.pool, clip.window)
    assert np.array_equal(augment_reference(ref, 3, 0.), ref)
    assert np.array_equal(augment_reference(ref, 3, 1.), augment_reference(ref, 3, 1.))
    base = _mean_hue(ref)
    shifts = []
    for seed in range(100):
        h = _mean_hue(augment_reference(ref, seed, 1.))
        shifts.append(abs((h - base + 180.) % 360. - 180.))
    assert max(shifts) < 5.


# triplets

def _triplets(clip, seed=0):
    trajs = sample_trajectories(clip, 'object_aware', 16, seed=seed)
    refs = [make_reference_image(clip, sid, clip.pool, clip.window) for sid in clip.subject_ids]
    return build_triplets(clip.subject_ids, refs, clip_box_tracks(clip, colors=assign_box_colors(3, seed)), trajs)


def test_drop_conditions_extremes():
    triplets = _triplets(generate_clip(5, n_subjects=2))
    kept = drop_conditions(triplets, 0., seed=1)
    assert all(a is b for t, u in zip(triplets, kept) for a, b in
               [(t.box_track, u.box_track), (t.trajectories, u.trajectories)])
    gone = drop_conditions(triplets, 1., seed=1)
    assert all(t.box_track is None and t.trajectories is None for t in gone)
    assert all(t.reference_image is not None for t in gone)


def test_drop_conditions_rate():
    t = ControlTriplet(0, np.zeros((4, 4, 3)), BoxTrack(0, np.zeros((2, 4))), TrajectorySet())
    dropped = total = 0
    for s in range(1000):
        d, n = count_dropped(drop_conditions([t], 0.5, seed=s))
        dropped += d
        total += n
    assert 0.45 <= dropped / float(total) <= 0.55


def test_pack_conditions():
    clip = generate_clip(9, n_subjects=2)
    triplets = _triplets(clip)
    packed = pack_conditions(triplets, (64, 64), 8, (8, 8, 8), n_max=3, d_model=48)
    assert packed['box_video'].shape == (8, 64, 64, 3)
    assert packed['traj_map'].shape == (8, 8, 8, 48)
    assert packed['refs'].shape == (3, 64, 64, 3)
    assert packed['ref_groups'].tolist() == [0, 1, -1]
    assert not packed['refs'][2].any()
    assert packed['box_groups'][..., 0].any() and packed['box_groups'][..., 1].any()
    assert not packed['box_groups'][..., 2].any()
    # listing order only permutes the reference slots
    swapped = pack_conditions(triplets[::-1], (64, 64), 8, (8, 8, 8), n_max=3, d_model=48)
    for k in ('box_video', 'traj_map', 'traj_groups', 'box_groups'):
        assert np.array_equal(packed[k], swapped[k])
    assert swapped['ref_groups'].tolist() == [1, 0, -1]
    assert np.array_equal(swapped['refs'][0], packed['refs'][1])


def test_pack_conditions_capacity():
    clip = generate_clip(9, n_subjects=2)
    triplets = _triplets(clip)
    with pytest.raises(CapacityExceeded):
        pack_conditions(triplets, (64, 64), 8, (8, 8, 8), n_max=1, d_model=48)
