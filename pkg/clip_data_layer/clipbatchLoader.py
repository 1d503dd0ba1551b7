# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import abc

import numpy as np
import torch
import torch.utils.data as data
from torch.utils.data.sampler import Sampler

from clip_data_layer.minibatch import ARRAY_KEYS, get_minibatch, get_minibatch_pair
from model.utils.blob import list_to_blob
from model.OmniDiT import Conditions


class sampler(Sampler):
    """Seeded epoch-wise permutation; the same seed replays the same order."""

    def __init__(self, train_size, seed):
        self.num_data = train_size
        self.seed = seed
        self.epoch = 0

    def __iter__(self):
        g = torch.Generator().manual_seed(self.seed * 7919 + self.epoch)
        self.epoch += 1
        return iter(torch.randperm(self.num_data, generator=g).tolist())

    def __len__(self):
        return self.num_data


class clipbatchLoader(data.Dataset):
    __metaclass__ = abc.ABCMeta

    def __init__(self, clipdb, seed=0, training=True):
        self._clipdb = clipdb
        self.seed = seed
        self.training = training
        self._draws = {}

    def _sample_seed(self, index):
        # every visit of a clip gets fresh condition draws, reproducible from the base seed
        k = self._draws.get(index, 0)
        self._draws[index] = k + 1
        return (self.seed * 1000003 + index * 7919 + k * 104729) % (2 ** 31)

    @abc.abstractmethod
    def __getitem__(self, index):
        raise NotImplementedError

    def __len__(self):
        return self._clipdb.num_clips


class sftClipbatchLoader(clipbatchLoader):

    def __getitem__(self, index):
        clip = self._clipdb.clip_at(index)
        seed = self._sample_seed(index) if self.training else self.seed + index
        blobs = get_minibatch(clip, seed, training=self.training)
        out = dict((k, blobs[k]) for k in ARRAY_KEYS)
        out.update(dropped=blobs['dropped'], slots=blobs['slots'], text_dropped=blobs['text_dropped'], seed=seed)
        return out


class pairbatchLoader(clipbatchLoader):

    def __getitem__(self, index):
        return get_minibatch_pair(self._clipdb.pair_at(index))


def conditions_from_blobs(samples, dtype=torch.float32):
    def stack(k):
        return list_to_blob([s[k] for s in samples], dtype)
    return Conditions(caption=stack('caption'), z_ref=stack('z_ref'), ref_groups=stack('ref_groups'),
                      z_box=stack('z_box'), box_groups=stack('box_groups'), traj_map=stack('traj_map'),
                      traj_groups=stack('traj_groups'))


def collate_clips(samples, dtype=torch.float32):
    return {
        'z0': list_to_blob([s['z0'] for s in samples], dtype),
        'cond': conditions_from_blobs(samples, dtype),
        'box_mask': list_to_blob([s['box_mask'] for s in samples], dtype),
        'dropped': int(sum(s['dropped'] for s in samples)),
        'slots': int(sum(s['slots'] for s in samples)),
        'text_dropped': int(sum(bool(s['text_dropped']) for s in samples)),
    }


def collate_pairs(samples, dtype=torch.float32):
    return {
        'z_win': list_to_blob([s['z_win'] for s in samples], dtype),
        'z_lose': list_to_blob([s['z_lose'] for s in samples], dtype),
        'z_ref': list_to_blob([s['z_ref'] for s in samples], dtype),
        'ref_groups': list_to_blob([s['ref_groups'] for s in samples]),
        'caption': list_to_blob([s['caption'] for s in samples]),
        'corruption': [s['corruption'] for s in samples],
    }


def batch_to(batch, device):
    out = {}
    for k, v in batch.items():
        if torch.is_tensor(v) or isinstance(v, Conditions):
            v = v.to(device)
        out[k] = v
    return out


def endless_batches(dataset, batch_size, seed, collate, num_workers=0):
    """Yield collated batches forever, reshuffling every epoch."""
    loader = data.DataLoader(dataset, batch_size=batch_size, sampler=sampler(len(dataset), seed),
                             num_workers=num_workers, collate_fn=collate, drop_last=len(dataset) >= batch_size)
    while True:
        for batch in loader:
            yield batch


def split_indices(n, heldout_fraction, seed):
    """Disjoint (train, heldout) index lists."""
    perm = np.random.RandomState(seed % (2 ** 32)).permutation(n)
    n_held = max(1, int(round(n * heldout_fraction))) if n > 1 else 0
    return sorted(perm[n_held:].tolist()), sorted(perm[:n_held].tolist())
