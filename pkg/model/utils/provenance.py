# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
"""Run directories: config snapshot, input hashes and an INCOMPLETE marker."""
import os
import json
import hashlib

from model.utils.config import cfg, render_cfg, cfg_to_json

INCOMPLETE = 'INCOMPLETE'


def content_hash(path):
    """sha256 of a file, of a directory tree (relative names + bytes), or of a plain name."""
    h = hashlib.sha256()
    if os.path.isfile(path):
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 20), b''):
                h.update(chunk)
    elif os.path.isdir(path):
        for root, dirs, files in os.walk(path):
            dirs.sort()
            for name in sorted(files):
                full = os.path.join(root, name)
                h.update(os.path.relpath(full, path).replace(os.sep, '/').encode('utf-8'))
                with open(full, 'rb') as f:
                    for chunk in iter(lambda: f.read(1 << 20), b''):
                        h.update(chunk)
    else:
        h.update(('name:' + str(path)).encode('utf-8'))
    return h.hexdigest()


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    return str(v)


def begin_run(out, command, args, inputs=()):
    """Create out, write cfg.yml and run.json and mark the run incomplete."""
    if not os.path.exists(out):
        os.makedirs(out)
    with open(os.path.join(out, INCOMPLETE), 'w') as f:
        f.write(command + '\n')
    with open(os.path.join(out, 'cfg.yml'), 'w') as f:
        f.write(render_cfg(cfg))
    run = {
        'command': command,
        'args': dict((k, _plain(v)) for k, v in sorted(vars(args).items())),
        'seed': int(cfg.RNG_SEED),
        'cfg_sha256': hashlib.sha256(cfg_to_json(cfg).encode('utf-8')).hexdigest(),
        'inputs': dict((str(p), content_hash(p)) for p in inputs if p is not None),
    }
    with open(os.path.join(out, 'run.json'), 'w') as f:
        json.dump(run, f, indent=1, sort_keys=True)
    return run


def finish_run(out):
    marker = os.path.join(out, INCOMPLETE)
    if os.path.exists(marker):
        os.remove(marker)


def is_complete(out):
    return os.path.isdir(out) and not os.path.exists(os.path.join(out, INCOMPLETE))


def write_json(path, obj):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=True)
