# --------------------------------------------------------
# Omni-Motion Video Diffusion Lab
# Licensed under The MIT License [see LICENSE for details]
# --------------------------------------------------------

from __future__ import absolute_import
from __future__ import division
from __future__ import print_function

import os
import sys
import copy
import time

import numpy as np
import torch
import torch.utils.data as data

import _init_path  # noqa: F401

from model.utils.config import cfg, cfg_from_list, cfg_to_dict, get_output_dir, read_cfgs, _merge_a_into_b
from model.utils.errors import OmniError, UsageError, DataError
from model.utils.net_utils import save_net, load_net, load_manifest, checkpoint_hash, clip_gradient, \
    warmup_learning_rate, check_finite, set_requires_grad
from model.utils.logger import Logger, JsonlLogger
from model.utils.data_viewer import dataViewer
from model.utils.provenance import begin_run, finish_run, write_json
from model.utils.blob import latent_to_video

from model.Denoisers import ModelConfig
from model.OmniDiT import omniDiT, build_generator
from model.LIRM import LIRM, build_lirm, reward_loss, score_pairs, heldout_accuracy
from model.diffusion.schedule import NoiseSchedule
from model.diffusion.losses import sft_loss
from model.diffusion.sampler import sample as sample_latents
from model.refl.lirefl import ReflConfig, lirefl_step

from clip_data_layer.cliplist import combined_cliplist
from clip_data_layer.clipbatchLoader import sftClipbatchLoader, pairbatchLoader, collate_clips, collate_pairs, \
    conditions_from_blobs, batch_to, endless_batches, split_indices
from clip_data_layer.minibatch import get_minibatch, get_minibatch_pair
from datasets.factory import get_clipdb
from datasets.clipdb import archive_pairdb
from datasets.clip_archive import save_clip, save_pair, load_pair, write_index
from datasets.synthetic_world import CORRUPTIONS, generate_clip, make_preference_pair
from datasets.omni_eval import evaluate_generator


def get_device():
    return torch.device('cuda' if cfg.CUDA and torch.cuda.is_available() else 'cpu')


def init_seeds():
    np.random.seed(cfg.RNG_SEED)
    torch.manual_seed(cfg.RNG_SEED)


def init_loggers(out, args):
    logger = Logger(os.path.join(out, 'tb')) if args.use_tfboard else None
    return logger, JsonlLogger(os.path.join(out, 'log.jsonl'))


def generator_meta(net, **extra):
    meta = {'kind': 'generator', 'model_config': net.config.to_dict(), 'cfg': cfg_to_dict(cfg)}
    meta.update(extra)
    return meta


def load_generator(ckpt, device):
    manifest = load_manifest(ckpt)
    meta = manifest['meta']
    if meta.get('kind') != 'generator':
        raise UsageError('{} is not a generator checkpoint'.format(ckpt))
    net = omniDiT(ModelConfig.from_dict(meta['model_config']))
    load_net(ckpt, net)
    return net.to(device)


def load_reward_model(ckpt, device):
    manifest = load_manifest(ckpt)
    meta = manifest['meta']
    if meta.get('kind') != 'lirm':
        raise UsageError('{} is not a reward model checkpoint'.format(ckpt))
    net = LIRM(ModelConfig.from_dict(meta['model_config']), meta['n_blocks'], meta['ref_as_query'])
    load_net(ckpt, net)
    set_requires_grad(net, False)
    return net.to(device).eval()


def adopt_archive_world(db):
    """Training on an archive uses the frame count and size it was rendered with."""
    params = getattr(db, 'params', None)
    if not params:
        return
    if params.get('frames') is not None:
        cfg.WORLD.FRAMES = int(params['frames'])
    if params.get('hw') is not None:
        cfg.WORLD.HEIGHT, cfg.WORLD.WIDTH = [int(v) for v in params['hw']]


def display(args, step, max_steps, loss, lr, start):
    print("[session %d][step %5d/%5d] loss: %.4f, lr: %.2e" % (args.session, step, max_steps, loss, lr))
    print('\t\t\ttime cost: %f' % (time.time() - start,))


def generate_data(args):
    if args.n_clips < 1:
        raise UsageError('--n-clips must be positive')
    if args.frames is not None:
        cfg.WORLD.FRAMES = args.frames
    if args.hw is not None:
        cfg.WORLD.HEIGHT, cfg.WORLD.WIDTH = args.hw
    init_seeds()
    begin_run(args.out, 'generate-data', args)
    frames, hw = cfg.WORLD.FRAMES, [cfg.WORLD.HEIGHT, cfg.WORLD.WIDTH]
    params = {'seed': args.seed, 'n_clips': args.n_clips, 'frames': frames, 'hw': hw}
    visualizer = dataViewer() if args.vis else None
    items, diagnostic = [], []
    donors = ()
    for i in range(args.n_clips):
        clip = generate_clip(args.seed + i, frames=frames, hw=hw)
        if args.kind == 'clips':
            name = 'clip_%06d' % i
            save_clip(clip, os.path.join(args.out, name))
        else:
            name = 'pair_%06d' % i
            pair = make_preference_pair(clip, CORRUPTIONS[i % len(CORRUPTIONS)], donors, seed=args.seed + i)
            save_pair(pair, os.path.join(args.out, name))
            diag = 'diag_%06d' % i
            save_pair(make_preference_pair(clip, 'background_jitter', seed=args.seed + i),
                      os.path.join(args.out, diag))
            diagnostic.append(diag)
            donors = clip.spec.subjects
        items.append(name)
        if visualizer is not None and i < 4:
            blobs = get_minibatch(clip, args.seed + i, training=False)
            frames_vis = visualizer.draw_controls(clip.video[:frames], blobs['triplets'])
            visualizer.save_frames(frames_vis, os.path.join(args.out, 'data_vis'), prefix=name)
        if (i + 1) % 50 == 0:
            print('rendered %d / %d clips' % (i + 1, args.n_clips))
    if diagnostic:
        params['diagnostic'] = diagnostic
    write_index(args.out, args.kind, items, params)
    finish_run(args.out)
    print('wrote {} {} to {}'.format(len(items), args.kind, args.out))


def train_sft(args, data_name, out, init_ckpt=None):
    """Stage 1: box-reweighted denoising on the clip list. Returns a summary dict."""
    init_seeds()
    device = get_device()
    db = combined_cliplist(data_name, training=True)
    if db.num_clips == 0:
        raise DataError('no clips left in {} after filtering'.format(data_name))
    adopt_archive_world(db)
    begin_run(out, 'train-sft', args, inputs=[data_name, init_ckpt])
    logger, jsonl = init_loggers(out, args)

    tc = cfg.TRAIN.SFT
    dataset = sftClipbatchLoader(db, seed=cfg.RNG_SEED, training=True)
    batches = endless_batches(dataset, tc.BATCH_SIZE, cfg.RNG_SEED, collate_clips)
    generator = load_generator(init_ckpt, device) if init_ckpt else build_generator().to(device)
    generator.train()
    optimizer = torch.optim.AdamW(generator.parameters(), lr=tc.LEARNING_RATE, weight_decay=tc.WEIGHT_DECAY)
    base_lrs = [g['lr'] for g in optimizer.param_groups]
    schedule = NoiseSchedule()
    g = torch.Generator().manual_seed(cfg.RNG_SEED)
    print('{:d} clips, {:d} steps'.format(len(dataset), tc.MAX_STEPS))

    loss_temp, n_temp, dropped, slots, text_dropped, seen = 0., 0, 0, 0, 0, 0
    history = []
    start = time.time()
    for step in range(1, tc.MAX_STEPS + 1):
        warmup_learning_rate(optimizer, step - 1, tc.WARMUP_STEPS, base_lrs)
        batch = next(batches)
        dropped += batch['dropped']
        slots += batch['slots']
        text_dropped += batch['text_dropped']
        seen += batch['z0'].shape[0]
        batch = batch_to(batch, device)

        loss, _ = sft_loss(batch, generator, cfg.DIFFUSION.LAMBDA1, schedule, g)
        check_finite(loss, step)
        optimizer.zero_grad()
        loss.backward()
        clip_gradient(generator, tc.CLIP_NORM)
        optimizer.step()
        loss_temp += loss.item()
        n_temp += 1

        if step % tc.DISPLAY == 0 or step == tc.MAX_STEPS:
            lr = optimizer.param_groups[0]['lr']
            loss_temp /= n_temp
            display(args, step, tc.MAX_STEPS, loss_temp, lr, start)
            record = {'step': step, 'loss': loss_temp, 'lr': lr, 'seed': cfg.RNG_SEED,
                      'drop_rate': dropped / float(max(slots, 1)), 'text_drop_rate': text_dropped / float(max(seen, 1))}
            jsonl.log(**record)
            history.append(record)
            if logger is not None:
                logger.scalar_summary('sft/loss', loss_temp, step)
                logger.scalar_summary('sft/lr', lr, step)
            loss_temp, n_temp = 0., 0
            start = time.time()

        if step % tc.SNAPSHOT_ITERS == 0 and step != tc.MAX_STEPS:
            save_name = os.path.join(out, 'snapshots', 'step_%d' % step)
            save_net(save_name, generator, generator_meta(generator, step=step))
            print('save model: {}'.format(save_name))

    ckpt = os.path.join(out, 'ckpt')
    save_net(ckpt, generator, generator_meta(generator, step=tc.MAX_STEPS))
    # audit: the observed control dropout should match the configured rate
    drop_rate = dropped / float(max(slots, 1))
    print('dropout audit: %.3f of box/trajectory controls dropped (configured %.3f)' % (drop_rate, cfg.COND.DROP_PROB))
    summary = {'ckpt': ckpt, 'ckpt_sha256': checkpoint_hash(ckpt), 'final_loss': history[-1]['loss'],
               'drop_rate': drop_rate, 'text_drop_rate': text_dropped / float(max(seen, 1)), 'steps': tc.MAX_STEPS}
    write_json(os.path.join(out, 'summary.json'), summary)
    jsonl.close()
    if logger is not None:
        logger.close()
    finish_run(out)
    return summary


def _pair_loader(dataset, indices):
    return data.DataLoader(data.Subset(dataset, indices), batch_size=cfg.TRAIN.LIRM.BATCH_SIZE, shuffle=False,
                           collate_fn=collate_pairs)


def train_lirm(args, pairs_path, init_ckpt, out):
    """Reward model on preference pairs with a held-out per-bin accuracy report."""
    init_seeds()
    device = get_device()
    db = get_clipdb(pairs_path)
    if not isinstance(db, archive_pairdb):
        raise UsageError('{} is not a preference-pair archive'.format(pairs_path))
    begin_run(out, 'train-lirm', args, inputs=[pairs_path, init_ckpt])
    logger, jsonl = init_loggers(out, args)

    tc = cfg.TRAIN.LIRM
    generator = load_generator(init_ckpt, device)
    reward = build_lirm(generator).to(device)
    del generator
    dataset = pairbatchLoader(db, seed=cfg.RNG_SEED)
    train_idx, held_idx = split_indices(len(dataset), tc.HELDOUT_FRACTION, cfg.RNG_SEED)
    if not train_idx:
        raise DataError('{} holds too few pairs to train on'.format(pairs_path))
    batches = endless_batches(data.Subset(dataset, train_idx), tc.BATCH_SIZE, cfg.RNG_SEED, collate_pairs)
    optimizer = torch.optim.AdamW(reward.param_groups(tc.LR_BACKBONE, tc.LR_HEAD), weight_decay=tc.WEIGHT_DECAY)
    base_lrs = [g['lr'] for g in optimizer.param_groups]
    schedule = NoiseSchedule()
    g = torch.Generator().manual_seed(cfg.RNG_SEED)
    print('{:d} training pairs, {:d} held out, {:d} backbone blocks'.format(len(train_idx), len(held_idx),
                                                                          reward.n_blocks))

    loss_temp, acc_temp, n_temp = 0., 0., 0
    start = time.time()
    reward.train()
    for step in range(1, tc.MAX_STEPS + 1):
        warmup_learning_rate(optimizer, step - 1, tc.WARMUP_STEPS, base_lrs)
        batch = batch_to(next(batches), device)
        B = batch['z_win'].shape[0]
        t = torch.randint(0, schedule.steps + 1, (B,), generator=g).to(device)
        eps = torch.randn(batch['z_win'].shape, generator=g, dtype=reward.dtype).to(device)
        r_win, r_lose = score_pairs(reward, batch, schedule, t, eps)
        loss = reward_loss(r_win, r_lose, tc.LOSS)
        check_finite(loss, step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        loss_temp += loss.item()
        acc_temp += float((r_win > r_lose).float().mean())
        n_temp += 1

        if step % tc.DISPLAY == 0 or step == tc.MAX_STEPS:
            lr = optimizer.param_groups[-1]['lr']
            display(args, step, tc.MAX_STEPS, loss_temp / n_temp, lr, start)
            print('\t\t\tpairwise acc: %.3f' % (acc_temp / n_temp,))
            jsonl.log(step=step, loss=loss_temp / n_temp, lr=lr, seed=cfg.RNG_SEED, train_acc=acc_temp / n_temp)
            if logger is not None:
                logger.scalar_summary('lirm/loss', loss_temp / n_temp, step)
                logger.scalar_summary('lirm/train_acc', acc_temp / n_temp, step)
            loss_temp, acc_temp, n_temp = 0., 0., 0
            start = time.time()

    report, by_kind = heldout_accuracy(reward, [batch_to(b, device) for b in _pair_loader(dataset, held_idx)],
                                       schedule, cfg.RNG_SEED, tc.N_BINS) if held_idx else ({}, {})
    result = {'heldout': report, 'by_corruption': by_kind, 'n_train': len(train_idx), 'n_heldout': len(held_idx)}
    diag = db.params.get('diagnostic', [])
    if diag:
        samples = [get_minibatch_pair(load_pair(os.path.join(db._root, d))) for d in diag]
        diag_batches = [batch_to(collate_pairs(samples[i:i + tc.BATCH_SIZE]), device)
                        for i in range(0, len(samples), tc.BATCH_SIZE)]
        result['diagnostic'], _ = heldout_accuracy(reward, diag_batches, schedule, cfg.RNG_SEED, tc.N_BINS)
    for k, v in sorted(report.items()):
        print('held-out accuracy %-12s %s' % (k, 'n/a' if v is None else '%.3f' % v))

    ckpt = os.path.join(out, 'ckpt')
    save_net(ckpt, reward, {'kind': 'lirm', 'model_config': reward.config.to_dict(), 'n_blocks': reward.n_blocks,
                            'ref_as_query': reward.ref_as_query, 'freeze_embed': tc.FREEZE_EMBED, 'loss': tc.LOSS,
                            'cfg': cfg_to_dict(cfg)})
    result['ckpt'] = ckpt
    result['ckpt_sha256'] = checkpoint_hash(ckpt)
    write_json(os.path.join(out, 'lirm_report.json'), result)
    if report:
        visualizer = dataViewer()
        chart = visualizer.draw_bin_accuracy(report, 'held-out pairwise accuracy')
        visualizer.save_frames(chart[None], out, prefix='bin_accuracy')
        if logger is not None:
            logger.image_summary('lirm/bin_accuracy', [chart / 255.], tc.MAX_STEPS)
    jsonl.close()
    if logger is not None:
        logger.close()
    finish_run(out)
    return result


def train_lirefl(args, data_name, sft_ckpt, lirm_ckpt, out, lambda2=None, tm_policy=None):
    """Stage 2: SFT interleaved with reward feedback through one tracked solver step."""
    init_seeds()
    device = get_device()
    db = combined_cliplist(data_name, training=True)
    if db.num_clips == 0:
        raise DataError('no clips left in {} after filtering'.format(data_name))
    adopt_archive_world(db)
    if lambda2 is not None:
        cfg.TRAIN.REFL.LAMBDA2 = float(lambda2)
    if tm_policy is not None:
        cfg.TRAIN.REFL.TM_POLICY = tm_policy
    begin_run(out, 'train-lirefl', args, inputs=[data_name, sft_ckpt, lirm_ckpt])
    logger, jsonl = init_loggers(out, args)

    tc = cfg.TRAIN.REFL
    rcfg = ReflConfig.from_cfg()
    generator = load_generator(sft_ckpt, device)
    generator.train()
    reward = load_reward_model(lirm_ckpt, device)
    dataset = sftClipbatchLoader(db, seed=cfg.RNG_SEED + 1, training=True)
    batches = endless_batches(dataset, cfg.TRAIN.SFT.BATCH_SIZE, cfg.RNG_SEED + 1, collate_clips)
    optimizer = torch.optim.AdamW(generator.parameters(), lr=tc.LEARNING_RATE, weight_decay=tc.WEIGHT_DECAY)
    base_lrs = [g['lr'] for g in optimizer.param_groups]
    schedule = NoiseSchedule()
    print('lambda2 %.3f, t_m policy %s, %d sampler steps' % (rcfg.lambda2, rcfg.tm_policy, rcfg.sampler_steps))

    acc = {'loss': [], 'sft_loss': [], 'reward': []}
    t_ms, history = [], []
    start = time.time()
    for step in range(1, tc.MAX_STEPS + 1):
        warmup_learning_rate(optimizer, step - 1, tc.WARMUP_STEPS, base_lrs)
        batch = batch_to(next(batches), device)
        info = lirefl_step(generator, reward, optimizer, batch, batch['cond'], rcfg, schedule,
                           seed=cfg.RNG_SEED * 100003 + step, clip_norm=tc.CLIP_NORM, step=step)
        for k in acc:
            if info[k] is not None:
                acc[k].append(info[k])
        t_ms += info['t_m']

        if step % tc.DISPLAY == 0 or step == tc.MAX_STEPS:
            lr = optimizer.param_groups[0]['lr']
            record = dict((k, float(np.mean(v)) if v else None) for k, v in acc.items())
            display(args, step, tc.MAX_STEPS, record['loss'], lr, start)
            if record['reward'] is not None:
                print('\t\t\tsft: %.4f, reward: %.4f' % (record['sft_loss'] or 0., record['reward']))
            record.update(step=step, lr=lr, seed=cfg.RNG_SEED, t_m=list(t_ms))
            jsonl.log(**record)
            history.append(record)
            if logger is not None:
                for k in ('loss', 'sft_loss', 'reward'):
                    if record[k] is not None:
                        logger.scalar_summary('refl/' + k, record[k], step)
                if t_ms:
                    logger.histo_summary('refl/t_m', t_ms, step)
            acc = dict((k, []) for k in acc)
            t_ms = []
            start = time.time()

        if step % tc.SNAPSHOT_ITERS == 0 and step != tc.MAX_STEPS:
            save_name = os.path.join(out, 'snapshots', 'step_%d' % step)
            save_net(save_name, generator, generator_meta(generator, step=step, stage='lirefl'))
            print('save model: {}'.format(save_name))

    ckpt = os.path.join(out, 'ckpt')
    save_net(ckpt, generator, generator_meta(generator, step=tc.MAX_STEPS, stage='lirefl', lambda2=rcfg.lambda2))
    rewards = [r['reward'] for r in history if r['reward'] is not None]
    summary = {'ckpt': ckpt, 'ckpt_sha256': checkpoint_hash(ckpt), 'lambda2': rcfg.lambda2,
               'tm_policy': rcfg.tm_policy, 'final_loss': history[-1]['loss'],
               'final_sft_loss': history[-1]['sft_loss'],
               'reward_first': rewards[0] if rewards else None, 'reward_last': rewards[-1] if rewards else None,
               'reward_trend': float(np.polyfit(np.arange(len(rewards)), rewards, 1)[0]) if len(rewards) > 1 else None}
    write_json(os.path.join(out, 'summary.json'), summary)
    jsonl.close()
    if logger is not None:
        logger.close()
    finish_run(out)
    return summary


def evaluate(args, ckpt, report_path, n_samples=None, seed=0, unconditional=False):
    init_seeds()
    device = get_device()
    out = os.path.dirname(os.path.abspath(report_path))
    begin_run(out, 'evaluate', args, inputs=[ckpt])
    generator = load_generator(ckpt, device)
    report = evaluate_generator(generator, NoiseSchedule(), n_samples=n_samples, seed=seed,
                                metadata={'ckpt': ckpt, 'ckpt_sha256': checkpoint_hash(ckpt)},
                                unconditional=unconditional)
    with open(report_path, 'w') as f:
        f.write(report.to_json())
    for k, v in sorted(report.aggregate.items()):
        print('%-18s %s' % (k, v))
    finish_run(out)
    return report


def sample(args):
    init_seeds()
    device = get_device()
    out = args.out or get_output_dir('sample_seed%d' % args.seed)
    begin_run(out, 'sample', args, inputs=[args.ckpt])
    generator = load_generator(args.ckpt, device).eval()
    clip = generate_clip(cfg.EVAL.SEED_OFFSET + args.seed)
    blobs = get_minibatch(clip, args.seed, training=False)
    cond = conditions_from_blobs([blobs], generator.dtype).to(device)
    z = sample_latents(generator, NoiseSchedule(), cond, seed=args.seed)
    video = latent_to_video(z[0], tuple(cfg.CODEC.PATCH))
    video.astype('<f4').tofile(os.path.join(out, 'video.f32'))
    write_json(os.path.join(out, 'manifest.json'), {
        'file': 'video.f32', 'shape': list(video.shape), 'dtype': '<f4', 'seed': args.seed,
        'clip_seed': int(clip.seed), 'caption_tokens': clip.caption_tokens.tolist(),
        'ckpt_sha256': checkpoint_hash(args.ckpt)})
    if args.vis:
        visualizer = dataViewer()
        frames = visualizer.draw_controls(video, blobs['triplets'])
        visualizer.save_frames(frames, os.path.join(out, 'vis'))
        visualizer.save_frames(visualizer.draw_references([t.reference_image for t in blobs['triplets']])[None],
                               os.path.join(out, 'vis'), prefix='references')
    finish_run(out)
    print('wrote {}'.format(out))


class cfg_override(object):
    """Apply KEY VALUE overrides to the global cfg and restore it on exit."""

    def __init__(self, set_cfgs):
        self.set_cfgs = list(set_cfgs)

    def __enter__(self):
        self.saved = copy.deepcopy(cfg)
        cfg_from_list(self.set_cfgs)
        return cfg

    def __exit__(self, *exc):
        _merge_a_into_b(self.saved, cfg)
        return False


GENERATOR_ARMS = {
    'full': [],
    'rope-off': ['MODEL.COND_ROPE', 'False'],
    'no-hier': ['MODEL.HIER_INJECTION', 'False'],
    'no-group': ['MODEL.GROUP_EMB', 'False'],
}
LIRM_ARMS = {
    'lirm-ref-kv': ['TRAIN.LIRM.REF_AS_QUERY', 'False'],
    'lirm-bt': ['TRAIN.LIRM.LOSS', 'bt'],
    'lirm-tune-embed': ['TRAIN.LIRM.FREEZE_EMBED', 'False'],
}
LAMBDA2_SWEEP = (0.0, 0.1, 1.0)


def _require(args, *names):
    missing = ['--' + n.replace('_', '-') for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError('ablate {} needs {}'.format(args.arm, ', '.join(missing)))


def ablate(args):
    out = args.out or get_output_dir('ablate_' + args.arm)
    begin_run(out, 'ablate', args, inputs=[args.data, args.pairs, args.sft_ckpt, args.lirm_ckpt])
    summary = {'arm': args.arm, 'seed': cfg.RNG_SEED}

    def run_eval(ckpt, name, unconditional=False):
        report = evaluate(args, ckpt, os.path.join(out, name, 'report.json'), args.n_samples, args.seed, unconditional)
        return report.aggregate

    if args.arm in GENERATOR_ARMS:
        with cfg_override(GENERATOR_ARMS[args.arm]):
            summary['overrides'] = GENERATOR_ARMS[args.arm]
            summary['sft'] = train_sft(args, args.data or 'synthetic_500', os.path.join(out, 'sft'))
            summary['eval'] = run_eval(summary['sft']['ckpt'], 'eval')
            if args.arm == 'full':
                summary['eval_unconditional'] = run_eval(summary['sft']['ckpt'], 'eval_unconditional', True)
    elif args.arm in LIRM_ARMS:
        _require(args, 'pairs', 'sft_ckpt')
        summary['overrides'] = LIRM_ARMS[args.arm]
        summary['baseline'] = train_lirm(args, args.pairs, args.sft_ckpt, os.path.join(out, 'baseline'))['heldout']
        with cfg_override(LIRM_ARMS[args.arm]):
            summary['variant'] = train_lirm(args, args.pairs, args.sft_ckpt, os.path.join(out, 'variant'))['heldout']
    elif args.arm == 'tm-last3':
        _require(args, 'data', 'sft_ckpt', 'lirm_ckpt')
        for name, policy in (('all_steps', 'all_steps'), ('last3', 'last_k')):
            with cfg_override(['TRAIN.REFL.TM_LAST_K', '3']):
                run = train_lirefl(args, args.data, args.sft_ckpt, args.lirm_ckpt, os.path.join(out, name),
                                   tm_policy=policy)
                summary[name] = {'train': run, 'eval': run_eval(run['ckpt'], name)}
    elif args.arm == 'lambda2-sweep':
        _require(args, 'data', 'sft_ckpt', 'lirm_ckpt')
        summary['stage1'] = run_eval(args.sft_ckpt, 'stage1')
        for lam in LAMBDA2_SWEEP:
            name = 'lambda2_%g' % lam
            with cfg_override([]):
                run = train_lirefl(args, args.data, args.sft_ckpt, args.lirm_ckpt, os.path.join(out, name),
                                   lambda2=lam)
            summary[name] = {'train': run, 'eval': run_eval(run['ckpt'], name)}
        hi, mid = summary['lambda2_1']['train'], summary['lambda2_0.1']['train']
        if hi['final_sft_loss'] is not None and mid['final_sft_loss']:
            summary['sft_loss_ratio_1_vs_0.1'] = hi['final_sft_loss'] / mid['final_sft_loss']
    write_json(os.path.join(out, 'summary.json'), summary)
    finish_run(out)
    print('wrote {}'.format(os.path.join(out, 'summary.json')))
    return summary


def run_command(args):
    if args.command == 'generate-data':
        generate_data(args)
    elif args.command == 'train-sft':
        train_sft(args, args.data, args.out, args.init_ckpt)
    elif args.command == 'train-lirm':
        train_lirm(args, args.pairs, args.init_ckpt, args.out)
    elif args.command == 'train-lirefl':
        train_lirefl(args, args.data, args.sft_ckpt, args.lirm_ckpt, args.out, args.lambda2, args.tm_policy)
    elif args.command == 'sample':
        sample(args)
    elif args.command == 'evaluate':
        evaluate(args, args.ckpt, args.report, args.n_samples, args.seed, args.unconditional)
    elif args.command == 'ablate':
        ablate(args)
    else:
        raise UsageError('unknown command {}'.format(args.command))


def main(argv=None):
    try:
        args = read_cfgs(argv)
    except (KeyError, ValueError, FileNotFoundError) as e:
        print('config error: {}'.format(e), file=sys.stderr)
        return UsageError.exit_code
    try:
        run_command(args)
    except OmniError as e:
        print('{}: {}'.format(type(e).__name__, e), file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print('missing input: {}'.format(e), file=sys.stderr)
        return UsageError.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
