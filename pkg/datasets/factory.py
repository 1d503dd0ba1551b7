# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

"""Factory method for easily getting clip databases by name or path."""
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import os

from model.utils.config import cfg
from model.utils.errors import UsageError
from datasets.clipdb import synthetic_clipdb, archive_clipdb, archive_pairdb
from datasets.clip_archive import read_index

__sets = {}

# Set up synthetic_<split>
__sets['synthetic_train'] = (lambda: synthetic_clipdb('synthetic_train', 0, cfg.TRAIN.SFT.N_CLIPS))
__sets['synthetic_heldout'] = (lambda: synthetic_clipdb('synthetic_heldout', cfg.EVAL.SEED_OFFSET,
                                                        cfg.EVAL.N_SAMPLES))
for n in [8, 50, 500]:
  name = 'synthetic_{}'.format(n)
  __sets[name] = (lambda n=n: synthetic_clipdb('synthetic_{}'.format(n), 0, n))


def get_clipdb(name):
  """Get a clip or pair database by registered name or archive path."""
  if name in __sets:
    return __sets[name]()
  if os.path.isdir(name):
    try:
      kind = read_index(name)['kind']
    except FileNotFoundError as e:
      raise UsageError(str(e))
    return archive_pairdb(name) if kind == 'pairs' else archive_clipdb(name)
  raise UsageError('Unknown dataset: {}'.format(name))


def list_clipdbs():
  """List all registered clip databases."""
  return list(__sets.keys())
