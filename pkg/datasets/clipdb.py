# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function


import os.path as osp

from datasets.synthetic_world import generate_clip
from datasets.clip_archive import load_clip, load_pair, read_index


class clipdb(object):
  """Clip database."""

  def __init__(self, name):
    self._name = name
    self._clip_index = []
    self._cache = {}

  @property
  def name(self):
    return self._name

  @property
  def clip_index(self):
    return self._clip_index

  @property
  def num_clips(self):
    return len(self._clip_index)

  def _load(self, key):
    raise NotImplementedError

  def clip_at(self, i):
    key = self._clip_index[i]
    if key not in self._cache:
      self._cache[key] = self._load(key)
    return self._cache[key]

  def clips(self):
    return [self.clip_at(i) for i in range(self.num_clips)]


class synthetic_clipdb(clipdb):
  """Procedural clips generated on demand from consecutive seeds."""

  def __init__(self, name, seed0, n, frames=None, hw=None):
    clipdb.__init__(self, name)
    self._clip_index = list(range(seed0, seed0 + n))
    self._frames = frames
    self._hw = hw

  def _load(self, seed):
    return generate_clip(seed, frames=self._frames, hw=self._hw)


class archive_clipdb(clipdb):
  """Clips written by `generate-data --kind clips`."""

  def __init__(self, root):
    index = read_index(root)
    assert index['kind'] == 'clips', '{} holds {}, not clips'.format(root, index['kind'])
    clipdb.__init__(self, 'archive_' + osp.basename(osp.normpath(root)))
    self._root = root
    self._clip_index = index['items']
    self.params = index['params']

  def _load(self, item):
    return load_clip(osp.join(self._root, item))


class archive_pairdb(clipdb):
  """Preference pairs written by `generate-data --kind pairs`."""

  def __init__(self, root):
    index = read_index(root)
    assert index['kind'] == 'pairs', '{} holds {}, not pairs'.format(root, index['kind'])
    clipdb.__init__(self, 'pairs_' + osp.basename(osp.normpath(root)))
    self._root = root
    self._clip_index = index['items']
    self.params = index['params']

  def _load(self, item):
    return load_pair(osp.join(self._root, item))

  def pair_at(self, i):
    return self.clip_at(i)


class combined_clipdb(clipdb):
  """Concatenation of several clip databases."""

  def __init__(self, name, dbs):
    clipdb.__init__(self, name)
    self._sources = list(dbs)
    self._clip_index = [(i, k) for i, d in enumerate(self._sources) for k in d.clip_index]

  def _load(self, key):
    return self._sources[key[0]]._load(key[1])
