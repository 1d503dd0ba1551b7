# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Templated captions over a small closed vocabulary."""
import numpy as np

COLOR_NAMES = ['red', 'orange', 'yellow', 'lime', 'green', 'teal',
               'cyan', 'azure', 'blue', 'purple', 'magenta', 'pink']

VOCAB = ['<pad>', '<null>', 'and', 'moves', 'left', 'right', 'up', 'down', 'still',
         'straight', 'wave', 'arc', 'spins', 'pulses', 'wobbles', 'camera', 'pans',
         'static', 'slowly', 'quickly', 'circle', 'square', 'triangle'] + COLOR_NAMES

PAD, NULL = 0, 1
WORD2ID = dict((w, i) for i, w in enumerate(VOCAB))

_PATH_WORDS = {'linear': 'straight', 'sine': 'wave', 'arc': 'arc'}
_LOCAL_WORDS = {'spin': 'spins', 'pulse': 'pulses', 'wobble': 'wobbles'}


def direction_word(dx, dy, still=2.0):
    if max(abs(dx), abs(dy)) < still:
        return 'still'
    if abs(dx) >= abs(dy):
        return 'right' if dx > 0 else 'left'
    return 'down' if dy > 0 else 'up'


def caption_words(spec):
    words = []
    for i, (s, m) in enumerate(zip(spec.subjects, spec.motions)):
        if i:
            words.append('and')
        x0, y0 = m.global_path.center_at(0)
        x1, y1 = m.global_path.center_at(spec.frames - 1)
        d = direction_word(x1 - x0, y1 - y0)
        words += [s.color_name, s.shape, 'moves']
        if d != 'still':
            speed = np.hypot(x1 - x0, y1 - y0) / max(spec.frames - 1, 1)
            words.append('quickly' if speed > 1.5 else 'slowly')
        words += [d, _PATH_WORDS[m.global_path.kind]]
        if m.local_mode in _LOCAL_WORDS:
            words.append(_LOCAL_WORDS[m.local_mode])
    px, py = spec.camera_pan
    if px == 0 and py == 0:
        words += ['camera', 'static']
    else:
        words += ['camera', 'pans', direction_word(px, py, still=0.5)]
    return words


def tokenize(words, length):
    ids = [WORD2ID[w] for w in words][:length]
    return np.array(ids + [PAD] * (length - len(ids)), dtype=np.int64)


def null_caption(length):
    tokens = np.full((length,), PAD, dtype=np.int64)
    tokens[0] = NULL
    return tokens


def detokenize(tokens):
    return ' '.join(VOCAB[int(t)] for t in tokens if int(t) != PAD)
