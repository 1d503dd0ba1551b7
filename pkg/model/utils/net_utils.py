# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

import os
import json
import hashlib

import torch
import torch.nn as nn
import numpy as np

from model.utils.errors import NonFiniteLoss

CHECKPOINT_FORMAT = 'omni-ckpt-1'


def save_net(dirname, net, meta=None):
    """Write a checkpoint directory: manifest.json + params.f32 (little-endian float32)."""
    if not os.path.exists(dirname):
        os.makedirs(dirname)
    params = []
    chunks = []
    offset = 0
    for k, v in net.state_dict().items():
        arr = np.ascontiguousarray(v.detach().cpu().numpy().astype('<f4'))
        params.append({'name': k, 'shape': list(arr.shape), 'offset': offset, 'count': int(arr.size)})
        chunks.append(arr.tobytes())
        offset += int(arr.size)
    blob = b''.join(chunks)
    manifest = {
        'format': CHECKPOINT_FORMAT,
        'dtype': '<f4',
        'params': params,
        'sha256': hashlib.sha256(blob).hexdigest(),
        'meta': meta or {},
    }
    with open(os.path.join(dirname, 'params.f32'), 'wb') as f:
        f.write(blob)
    with open(os.path.join(dirname, 'manifest.json'), 'w') as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest['sha256']


def load_manifest(dirname):
    path = os.path.join(dirname, 'manifest.json')
    if not os.path.exists(path):
        raise FileNotFoundError('no checkpoint manifest at {}'.format(path))
    with open(path, 'r') as f:
        manifest = json.load(f)
    assert manifest['format'] == CHECKPOINT_FORMAT, 'unknown checkpoint format {}'.format(manifest['format'])
    return manifest


def load_net(dirname, net, strict=True):
    manifest = load_manifest(dirname)
    flat = np.fromfile(os.path.join(dirname, 'params.f32'), dtype='<f4')
    state = net.state_dict()
    loaded = set()
    for p in manifest['params']:
        if p['name'] not in state:
            if strict:
                raise KeyError('unexpected parameter {} in checkpoint'.format(p['name']))
            continue
        arr = flat[p['offset']:p['offset'] + p['count']].reshape(p['shape'])
        v = state[p['name']]
        with torch.no_grad():
            v.copy_(torch.from_numpy(arr.copy()).to(v.dtype))
        loaded.add(p['name'])
    if strict:
        missing = set(state.keys()) - loaded
        if missing:
            raise KeyError('checkpoint misses parameters: {}'.format(sorted(missing)))
    return manifest


def checkpoint_hash(dirname):
    return load_manifest(dirname)['sha256']


def param_hash(params):
    """sha256 over a list of tensors, used to audit frozen parameters."""
    h = hashlib.sha256()
    for p in params:
        h.update(p.detach().cpu().numpy().astype('<f4').tobytes())
    return h.hexdigest()


def weights_normal_init(module, dev=0.02, bias=0):
    if isinstance(module, list):
        for m in module:
            weights_normal_init(m, dev, bias)
    else:
        for m in module.modules():
            if isinstance(m, (nn.Linear, nn.Embedding)):
                nn.init.normal_(m.weight, 0.0, dev)
                if getattr(m, 'bias', None) is not None:
                    nn.init.constant_(m.bias, bias)


def set_requires_grad(module, flag):
    for p in module.parameters():
        p.requires_grad = flag


def clip_gradient(model, clip_norm):
    """Computes a gradient clipping coefficient based on gradient norm."""
    totalnorm = 0
    for p in model.parameters():
        if p.requires_grad and p.grad is not None:
            modulenorm = p.grad.data.norm()
            totalnorm += modulenorm ** 2
    if not torch.is_tensor(totalnorm):
        return 0.
    totalnorm = np.sqrt(totalnorm.item())

    norm = clip_norm / max(totalnorm, clip_norm)
    for p in model.parameters():
        if p.requires_grad and p.grad is not None:
            p.grad.mul_(norm)
    return totalnorm


def warmup_learning_rate(optimizer, step, warmup, base_lrs):
    """Linear warmup to the per-group base learning rate, constant afterwards."""
    factor = min(1., float(step + 1) / float(max(warmup, 1)))
    for group, lr in zip(optimizer.param_groups, base_lrs):
        group['lr'] = lr * factor
    return factor


def check_finite(loss, step):
    if not torch.isfinite(loss).all():
        raise NonFiniteLoss('non-finite loss at step {}'.format(step))
