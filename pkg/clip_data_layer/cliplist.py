# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Turn named clip databases into a filtered training clip list."""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import copy

from model.utils.config import cfg
from model.conditioning.box_utils import clip_box_tracks, stability_filter
from model.conditioning.trajectory import motion_magnitude
from datasets.factory import get_clipdb
from datasets.clipdb import combined_clipdb


def _keep_clip(clip):
    if motion_magnitude(clip) < cfg.COND.MIN_MOTION:
        return False
    return all(stability_filter(t, cfg.COND.STABILITY_IOU) for t in clip_box_tracks(clip))


def filter_clipdb(db):
    # drop clips that barely move or whose boxes jump between frames
    print('before filtering, there are %d clips...' % db.num_clips)
    keep = [key for i, key in enumerate(db.clip_index) if _keep_clip(db.clip_at(i))]
    out = copy.copy(db)
    out._clip_index = keep
    print('after filtering, there are %d clips...' % out.num_clips)
    return out


def combined_cliplist(clipdb_names, training=True):
    """
    Combine clip databases joined by '+'; filtering applies to training lists only.
    """
    def get_cliplist(name):
        db = get_clipdb(name)
        print('Loaded dataset `{:s}` for {}'.format(db.name, 'training' if training else 'evaluation'))
        return db

    dbs = [get_cliplist(s) for s in clipdb_names.split('+')]
    db = dbs[0]
    if len(dbs) > 1:
        db = combined_clipdb(clipdb_names, dbs)

    if training:
        db = filter_clipdb(db)
    return db
