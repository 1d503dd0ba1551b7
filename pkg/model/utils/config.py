# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------
from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import os
import os.path as osp
import copy
import json
import argparse
import pprint
# `pip install easydict` if you don't have it
from easydict import EasyDict as edict
import yaml


__C = edict()
# Consumers can get config by:
#   from model.utils.config import cfg
cfg = __C

#
# Synthetic world
#
__C.WORLD = edict()
__C.WORLD.FRAMES = 8 # Frames in the training window
__C.WORLD.HEIGHT = 64
__C.WORLD.WIDTH = 64
__C.WORLD.MAX_SUBJECTS = 3
# Frames rendered after the training window, used only for reference images
__C.WORLD.REF_POOL_FRAMES = 2
# Subject size range as a fraction of the smaller frame side
__C.WORLD.SIZE_RANGE = [0.18, 0.28]
__C.WORLD.MIN_SIZE = 4 # Absolute floor in pixels
__C.WORLD.MIN_COLOR_DIST = 0.3 # L-inf distance between subject colors in one scene
__C.WORLD.MAX_SPEED = 3.0 # Max global path speed, px/frame
__C.WORLD.STATIC_PROB = 0.1 # Probability that a subject keeps a constant path
__C.WORLD.PAN_PROB = 0.4 # Probability that the camera pans
__C.WORLD.MAX_PAN = 2 # Max integer pan per axis, px/frame (magnitude stays <= 4)
__C.WORLD.SPIN_RATE = 10. # Degrees per frame for the spin mode
__C.WORLD.PLACEMENT_RETRIES = 100
__C.WORLD.N_OBJECT_TRACKS = 4 # Object tracks per subject stored in the clip
__C.WORLD.N_BACKGROUND_TRACKS = 8
__C.WORLD.CAPTION_LEN = 32

#
# Latent codec
#
__C.CODEC = edict()
__C.CODEC.PATCH = [1, 8, 8] # (pt, ph, pw)

#
# Conditioning
#
__C.COND = edict()
__C.COND.DROP_PROB = 0.5 # Box / trajectory dropout per triplet
__C.COND.AUG_PROB = 0.5 # Reference augmentation probability
__C.COND.TRAJ_POINTS = 16 # Points sampled per clip
__C.COND.GRID_PROB = 0.5 # Grid vs object-aware sampling during training
__C.COND.TRAJ_KEEP_MIN = 0.5 # Lower bound of the random fraction of tracks kept
__C.COND.STABILITY_IOU = 0.3 # Adjacent-frame IoU threshold of the stability filter
__C.COND.MIN_MOTION = 0.0 # Motion-magnitude filter, mean px/frame
__C.COND.TEXT_DROP = 0.1 # Caption dropout for classifier-free guidance

#
# Toy diffusion transformer
#
__C.MODEL = edict()
__C.MODEL.LAYERS = 8
__C.MODEL.WIDTH = 192
__C.MODEL.HEADS = 6
__C.MODEL.FFN_RATIO = 4
__C.MODEL.N_MAX = 3 # Reference slots
__C.MODEL.VOCAB = 48
__C.MODEL.ROPE_THETA = 10000.
__C.MODEL.EPS = 1e-6
# Ablation switches
__C.MODEL.COND_ROPE = True # Condition-aware RoPE indices; False gives flat sequential indices
__C.MODEL.HIER_INJECTION = True # Box latents after every block, not only at the input
__C.MODEL.GROUP_EMB = True # Group and role embeddings

#
# Diffusion
#
__C.DIFFUSION = edict()
__C.DIFFUSION.STEPS = 1000 # Training noise levels
__C.DIFFUSION.COSINE_S = 0.008
__C.DIFFUSION.MIN_ALPHA_BAR = 1e-4
__C.DIFFUSION.SAMPLER_STEPS = 10
__C.DIFFUSION.CFG_SCALE = 5.0
__C.DIFFUSION.LAMBDA1 = 2.0 # Box reweighting of the SFT loss

#
# Training options
#
__C.TRAIN = edict()
__C.TRAIN.SFT = edict()
__C.TRAIN.LIRM = edict()
__C.TRAIN.REFL = edict()

__C.TRAIN.SFT.LEARNING_RATE = 5e-4
__C.TRAIN.SFT.WEIGHT_DECAY = 1e-3
__C.TRAIN.SFT.WARMUP_STEPS = 100
__C.TRAIN.SFT.MAX_STEPS = 2000
__C.TRAIN.SFT.BATCH_SIZE = 8
__C.TRAIN.SFT.CLIP_NORM = 1.0
__C.TRAIN.SFT.DISPLAY = 20 # Steps between console / log records
__C.TRAIN.SFT.SNAPSHOT_ITERS = 500 # Steps between checkpoints
__C.TRAIN.SFT.N_CLIPS = 500

# Differential learning rates: attention + head vs backbone
__C.TRAIN.LIRM.LR_HEAD = 1e-4
__C.TRAIN.LIRM.LR_BACKBONE = 1e-5
__C.TRAIN.LIRM.WEIGHT_DECAY = 1e-2
__C.TRAIN.LIRM.WARMUP_STEPS = 50
__C.TRAIN.LIRM.MAX_STEPS = 1500
__C.TRAIN.LIRM.BATCH_SIZE = 8
__C.TRAIN.LIRM.BLOCKS = 8 # Backbone prefix length K
__C.TRAIN.LIRM.REF_AS_QUERY = True
__C.TRAIN.LIRM.LOSS = 'bce' # 'bce' or 'bt'
__C.TRAIN.LIRM.FREEZE_EMBED = True
__C.TRAIN.LIRM.HELDOUT_FRACTION = 0.1
__C.TRAIN.LIRM.N_BINS = 5
__C.TRAIN.LIRM.N_PAIRS = 600
__C.TRAIN.LIRM.DISPLAY = 20
__C.TRAIN.LIRM.SNAPSHOT_ITERS = 500

__C.TRAIN.REFL.LAMBDA2 = 0.1
__C.TRAIN.REFL.TM_POLICY = 'all_steps' # 'all_steps' or 'last_k'
__C.TRAIN.REFL.TM_LAST_K = 3
__C.TRAIN.REFL.LEARNING_RATE = 5e-5
__C.TRAIN.REFL.WEIGHT_DECAY = 1e-3
__C.TRAIN.REFL.WARMUP_STEPS = 20
__C.TRAIN.REFL.MAX_STEPS = 2000
__C.TRAIN.REFL.ROLLOUTS = 1 # Rollouts per optimizer step
__C.TRAIN.REFL.SFT_INTERLEAVE = True
__C.TRAIN.REFL.CFG_SCALE = 5.0
__C.TRAIN.REFL.CLIP_NORM = 1.0
__C.TRAIN.REFL.DISPLAY = 20
__C.TRAIN.REFL.SNAPSHOT_ITERS = 500

#
# Evaluation
#
__C.EVAL = edict()
__C.EVAL.N_SAMPLES = 100
__C.EVAL.SEED_OFFSET = 1000000 # Held-out clips are generated from seeds past this offset
__C.EVAL.TEMPLATE = 8 # Template side of the tracker
__C.EVAL.SEARCH = 8 # Search radius of the tracker
__C.EVAL.EXACT_MATCH = 1e-4 # Correlation shortfall below which a match is exact and not refined
__C.EVAL.HIST_BINS = 16
__C.EVAL.HUE_TOL = 15. # Degrees
__C.EVAL.SAT_MIN = 0.45
__C.EVAL.SHAPE_WEIGHT = 0.25 # Weight of the shape-moment part of the identity descriptor
__C.EVAL.VALUE_BANDS = 3 # Brightness bands of the hue histogram

#
# MISC
#
__C.RNG_SEED = 3
__C.EXP_DIR = 'desk'
__C.OUTPUT_ROOT = os.environ.get('OMNI_OUTPUT_ROOT', 'output')
__C.CUDA = False
__C.REPORT_VERSION = '1.0'

# Root directory of project
__C.ROOT_DIR = osp.abspath(osp.join(osp.dirname(__file__), '..', '..'))

_DEFAULTS = copy.deepcopy(__C)


def get_default_cfg():
  """Fresh copy of the default options, independent of the global cfg."""
  return copy.deepcopy(_DEFAULTS)


def get_output_dir(name, c=None):
  """Return the directory where experimental artifacts are placed.
  A canonical path is built from OUTPUT_ROOT, EXP_DIR and the run name.
  """
  c = __C if c is None else c
  outdir = osp.abspath(osp.join(c.OUTPUT_ROOT, c.EXP_DIR, name))
  if not os.path.exists(outdir):
    os.makedirs(outdir)
  return outdir


def _merge_a_into_b(a, b):
  """Merge config dictionary a into config dictionary b, clobbering the
  options in b whenever they are also specified in a.
  """
  if not isinstance(a, dict):
    return

  for k, v in a.items():
    # a must specify keys that are in b
    if k not in b:
      raise KeyError('{} is not a valid config key'.format(k))

    # the types must match, too
    old_type = type(b[k])
    if old_type is not type(v):
      if old_type is float and type(v) is int:
        v = float(v)
      elif isinstance(b[k], edict) and isinstance(v, dict):
        v = edict(v)
      else:
        raise ValueError(('Type mismatch ({} vs. {}) '
                          'for config key: {}').format(type(b[k]),
                                                       type(v), k))

    # recursively merge dicts
    if type(v) is edict:
      try:
        _merge_a_into_b(v, b[k])
      except:
        print(('Error under config key: {}'.format(k)))
        raise
    else:
      b[k] = v


def cfg_from_file(filename, c=None):
  """Load a config file and merge it into the default options."""
  with open(filename, 'r') as f:
    yaml_cfg = edict(yaml.safe_load(f) or {})

  _merge_a_into_b(yaml_cfg, __C if c is None else c)


def cfg_from_list(cfg_list, c=None):
  """Set config keys via list (e.g., from command line)."""
  from ast import literal_eval
  assert len(cfg_list) % 2 == 0
  d0 = __C if c is None else c
  for k, v in zip(cfg_list[0::2], cfg_list[1::2]):
    key_list = k.split('.')
    d = d0
    for subkey in key_list[:-1]:
      if subkey not in d:
        raise KeyError('{} is not a valid config key'.format(k))
      d = d[subkey]
    subkey = key_list[-1]
    if subkey not in d:
      raise KeyError('{} is not a valid config key'.format(k))
    try:
      value = literal_eval(v)
    except (ValueError, SyntaxError):
      # handle the case when v is a string literal
      value = v
    if type(d[subkey]) is float and type(value) is int:
      value = float(value)
    if type(value) != type(d[subkey]):
      raise ValueError('type {} does not match original type {} for {}'.format(
        type(value), type(d[subkey]), k))
    d[subkey] = value


def cfg_to_dict(c):
  """Plain nested dict of a config, ROOT_DIR excluded (machine dependent)."""
  out = {}
  for k, v in c.items():
    if k == 'ROOT_DIR':
      continue
    if isinstance(v, dict):
      out[k] = cfg_to_dict(v)
    elif isinstance(v, tuple):
      out[k] = list(v)
    else:
      out[k] = v
  return out


def render_cfg(c=None):
  """Canonical human-editable form."""
  return yaml.safe_dump(cfg_to_dict(__C if c is None else c), sort_keys=True, default_flow_style=False)


def cfg_to_json(c=None):
  """Canonical JSON form, equivalent to render_cfg."""
  return json.dumps(cfg_to_dict(__C if c is None else c), sort_keys=True, separators=(',', ':'))


def parse_cfg(text):
  """Inverse of render_cfg / cfg_to_json: merge the text onto fresh defaults."""
  c = get_default_cfg()
  _merge_a_into_b(edict(yaml.safe_load(text) or {}), c)
  return c


def load_cfg_snapshot(c):
  """Replace the global options in place by a rendered snapshot."""
  snap = parse_cfg(render_cfg(c)) if isinstance(c, dict) else parse_cfg(c)
  for k in list(__C.keys()):
    if k != 'ROOT_DIR':
      del __C[k]
  for k, v in snap.items():
    if k != 'ROOT_DIR':
      __C[k] = v


ABLATION_ARMS = ('full', 'rope-off', 'no-hier', 'no-group', 'lirm-ref-kv', 'lirm-bt',
                 'lirm-tune-embed', 'tm-last3', 'lambda2-sweep')


def parse_args(argv=None):
  """
  Parse input arguments
  """
  parser = argparse.ArgumentParser(description='Omni-motion video diffusion lab')
  parser.add_argument('--cfg', dest='cfg_file',
                      help='optional config file', default=None, type=str)
  parser.add_argument('--cuda', dest='cuda',
                      help='whether use CUDA', action='store_true')
  parser.add_argument('--use_tfboard', dest='use_tfboard',
                      help='whether use tensorboard', action='store_true')
  parser.add_argument('--s', dest='session',
                      help='training session', default=1, type=int)
  # --set comes last on every command: it takes the rest of the line as KEY VALUE pairs
  common = argparse.ArgumentParser(add_help=False)
  common.add_argument('--set', dest='set_cfgs',
                      help='set config keys', default=None, nargs=argparse.REMAINDER)
  sub = parser.add_subparsers(dest='command')

  p = sub.add_parser('generate-data', parents=[common], help='render a synthetic clip or preference-pair archive')
  p.add_argument('--n-clips', dest='n_clips', required=True, type=int)
  p.add_argument('--seed', dest='seed', default=0, type=int)
  p.add_argument('--frames', dest='frames', default=None, type=int)
  p.add_argument('--hw', dest='hw', default=None, type=int, nargs=2)
  p.add_argument('--kind', dest='kind', default='clips', choices=('clips', 'pairs'))
  p.add_argument('--out', dest='out', required=True, type=str)
  p.add_argument('--vis', dest='vis', action='store_true')

  p = sub.add_parser('train-sft', parents=[common], help='stage-1 supervised fine-tuning')
  p.add_argument('--data', dest='data', required=True, type=str)
  p.add_argument('--config', dest='config', default=None, type=str)
  p.add_argument('--init-ckpt', dest='init_ckpt', default=None, type=str,
                 help='continue from a generator checkpoint')
  p.add_argument('--out', dest='out', required=True, type=str)

  p = sub.add_parser('train-lirm', parents=[common], help='train the latent identity reward model')
  p.add_argument('--pairs', dest='pairs', required=True, type=str)
  p.add_argument('--init-ckpt', dest='init_ckpt', required=True, type=str)
  p.add_argument('--out', dest='out', required=True, type=str)

  p = sub.add_parser('train-lirefl', parents=[common], help='stage-2 reward feedback learning')
  p.add_argument('--data', dest='data', required=True, type=str)
  p.add_argument('--sft-ckpt', dest='sft_ckpt', required=True, type=str)
  p.add_argument('--lirm-ckpt', dest='lirm_ckpt', required=True, type=str)
  p.add_argument('--lambda2', dest='lambda2', default=None, type=float)
  p.add_argument('--tm-policy', dest='tm_policy', default=None, choices=('all_steps', 'last_k'))
  p.add_argument('--out', dest='out', required=True, type=str)

  p = sub.add_parser('sample', parents=[common], help='sample one held-out scene')
  p.add_argument('--ckpt', dest='ckpt', required=True, type=str)
  p.add_argument('--seed', dest='seed', default=0, type=int)
  p.add_argument('--out', dest='out', default=None, type=str)
  p.add_argument('--vis', dest='vis', action='store_true')

  p = sub.add_parser('evaluate', parents=[common], help='evaluate a checkpoint on held-out scenes')
  p.add_argument('--ckpt', dest='ckpt', required=True, type=str)
  p.add_argument('--n-samples', dest='n_samples', default=None, type=int)
  p.add_argument('--seed', dest='seed', default=0, type=int)
  p.add_argument('--report', dest='report', required=True, type=str)
  p.add_argument('--unconditional', dest='unconditional', action='store_true',
                 help='drop box and trajectory conditions')

  p = sub.add_parser('ablate', parents=[common], help='run one ablation arm')
  p.add_argument('arm', choices=ABLATION_ARMS)
  p.add_argument('--data', dest='data', default=None, type=str)
  p.add_argument('--pairs', dest='pairs', default=None, type=str)
  p.add_argument('--sft-ckpt', dest='sft_ckpt', default=None, type=str)
  p.add_argument('--lirm-ckpt', dest='lirm_ckpt', default=None, type=str)
  p.add_argument('--n-samples', dest='n_samples', default=None, type=int)
  p.add_argument('--seed', dest='seed', default=0, type=int)
  p.add_argument('--out', dest='out', default=None, type=str)

  args = parser.parse_args(argv)
  if args.command is None:
    parser.print_usage()
    parser.exit(2, 'a command is required\n')
  return args


def read_cfgs(argv=None):
  args = parse_args(argv)
  print('Called with args:')
  print(args)
  if args.cfg_file is not None:
    print("Using cfg file: " + args.cfg_file)
    cfg_from_file(args.cfg_file)
  if getattr(args, 'config', None) is not None:
    print("Using cfg file: " + args.config)
    cfg_from_file(args.config)
  if args.set_cfgs is not None:
    cfg_from_list(args.set_cfgs)
  if args.cuda:
    cfg.CUDA = True
  print('Using config:')
  pprint.pprint(cfg)
  return args
