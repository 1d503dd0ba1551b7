# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""On-disk clip and preference-pair archives.

One directory per item: raw little-endian float32 arrays plus manifest.json.
The archive root holds index.json with the item list and generation params.
"""
import os
import json

import numpy as np

from datasets.synthetic_world import AnnotatedClip, PreferencePair, scene_from_dict, scene_to_dict


def _write_array(dirname, name, arr):
    arr = np.ascontiguousarray(np.asarray(arr, dtype='<f4'))
    arr.tofile(os.path.join(dirname, name + '.f32'))
    return {'file': name + '.f32', 'shape': list(arr.shape), 'dtype': '<f4'}


def _read_array(dirname, entry):
    arr = np.fromfile(os.path.join(dirname, entry['file']), dtype=entry['dtype'])
    return arr.reshape(entry['shape'])


def save_clip(clip, dirname):
    if not os.path.exists(dirname):
        os.makedirs(dirname)
    manifest = {
        'kind': 'clip',
        'seed': int(clip.seed),
        'spec': scene_to_dict(clip.spec),
        'boxes': clip.boxes.tolist(),
        'tracks': [t.tolist() for t in clip.tracks],
        'background_tracks': clip.background_tracks.tolist(),
        'caption_tokens': clip.caption_tokens.tolist(),
        'arrays': {
            'video': _write_array(dirname, 'video', clip.video),
            'masks': _write_array(dirname, 'masks', clip.masks),
            'background': _write_array(dirname, 'background', clip.background),
        },
    }
    with open(os.path.join(dirname, 'manifest.json'), 'w') as f:
        json.dump(manifest, f, sort_keys=True)


def load_clip(dirname):
    with open(os.path.join(dirname, 'manifest.json'), 'r') as f:
        m = json.load(f)
    assert m['kind'] == 'clip', '{} is not a clip directory'.format(dirname)
    arrays = m['arrays']
    F = m['spec']['frames'] + m['spec'].get('pool_frames', 0)
    return AnnotatedClip(
        video=_read_array(dirname, arrays['video']),
        masks=_read_array(dirname, arrays['masks']) > 0.5,
        boxes=np.array(m['boxes'], dtype=np.float32).reshape(-1, F, 4),
        tracks=[np.array(t, dtype=np.float32).reshape(-1, F, 2) for t in m['tracks']],
        background_tracks=np.array(m['background_tracks'], dtype=np.float32).reshape(-1, F, 2),
        caption_tokens=np.array(m['caption_tokens'], dtype=np.int64),
        seed=m['seed'],
        spec=scene_from_dict(m['spec']),
        background=_read_array(dirname, arrays['background']))


def save_pair(pair, dirname):
    if not os.path.exists(dirname):
        os.makedirs(dirname)
    manifest = {
        'kind': 'pair',
        'seed': int(pair.seed),
        'corruption': pair.corruption,
        'subject_id': int(pair.subject_id),
        'caption_tokens': pair.caption_tokens.tolist(),
        'labels': [pair.label_win, pair.label_lose],
        'arrays': {
            'win': _write_array(dirname, 'win', pair.win),
            'lose': _write_array(dirname, 'lose', pair.lose),
            'refs': _write_array(dirname, 'refs', np.stack(pair.refs)),
        },
    }
    with open(os.path.join(dirname, 'manifest.json'), 'w') as f:
        json.dump(manifest, f, sort_keys=True)


def load_pair(dirname):
    with open(os.path.join(dirname, 'manifest.json'), 'r') as f:
        m = json.load(f)
    assert m['kind'] == 'pair', '{} is not a pair directory'.format(dirname)
    refs = _read_array(dirname, m['arrays']['refs'])
    return PreferencePair(win=_read_array(dirname, m['arrays']['win']),
                          lose=_read_array(dirname, m['arrays']['lose']),
                          refs=[r for r in refs],
                          caption_tokens=np.array(m['caption_tokens'], dtype=np.int64),
                          corruption=m['corruption'], subject_id=m['subject_id'], seed=m['seed'],
                          label_win=m['labels'][0], label_lose=m['labels'][1])


def write_index(root, kind, items, params):
    with open(os.path.join(root, 'index.json'), 'w') as f:
        json.dump({'kind': kind, 'items': list(items), 'params': params}, f, indent=1, sort_keys=True)


def read_index(root):
    path = os.path.join(root, 'index.json')
    if not os.path.exists(path):
        raise FileNotFoundError('no archive index at {}'.format(path))
    with open(path, 'r') as f:
        return json.load(f)
