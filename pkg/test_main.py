import json
import os

import pytest
import torch

import main
from model.utils.config import cfg
from model.utils.net_utils import save_net, load_manifest
from model.utils.provenance import is_complete
from model.OmniDiT import build_generator
from datasets.clip_archive import read_index

TINY = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'cfgs', 'tiny.yml')


@pytest.fixture
def tiny_ckpt(tiny_cfg, tmpdir):
    torch.manual_seed(0)
    net = build_generator()
    d = str(tmpdir.join('ckpt'))
    save_net(d, net, main.generator_meta(net))
    return d


def _read(path):
    with open(path, 'rb') as f:
        return f.read()


def test_sample_is_byte_identical_across_runs(tiny_ckpt, tmpdir):
    outs = [str(tmpdir.join('s%d' % i)) for i in range(2)]
    for out in outs:
        assert main.main(['--cfg', TINY, 'sample', '--ckpt', tiny_ckpt, '--seed', '7', '--out', out]) == 0
        assert is_complete(out)
    for name in ('video.f32', 'manifest.json'):
        assert _read(os.path.join(outs[0], name)) == _read(os.path.join(outs[1], name))
    with open(os.path.join(outs[0], 'manifest.json')) as f:
        manifest = json.load(f)
    assert manifest['shape'] == [4, 32, 32, 3]
    assert os.path.getsize(os.path.join(outs[0], 'video.f32')) == 4 * 4 * 32 * 32 * 3


def test_usage_errors_exit_with_code_2(tiny_ckpt, tmpdir):
    report = str(tmpdir.join('r', 'report.json'))
    assert main.main(['evaluate', '--ckpt', str(tmpdir.join('missing')), '--report', report]) == 2
    assert main.main(['--cfg', TINY, 'train-lirm', '--pairs', 'synthetic_8', '--init-ckpt', tiny_ckpt,
                      '--out', str(tmpdir.join('l'))]) == 2
    assert main.main(['sample', '--ckpt', tiny_ckpt, '--set', 'MODEL.NOT_A_KEY', '1']) == 2
    assert main.main(['ablate', 'tm-last3', '--out', str(tmpdir.join('a'))]) == 2


def test_generate_pairs_writes_diagnostic_negatives(tiny_cfg, tmpdir):
    out = str(tmpdir.join('pairs'))
    assert main.main(['generate-data', '--n-clips', '3', '--kind', 'pairs', '--frames', '4', '--hw', '32', '32',
                      '--out', out]) == 0
    index = read_index(out)
    assert index['kind'] == 'pairs' and len(index['items']) == 3
    assert len(index['params']['diagnostic']) == 3
    assert index['params']['hw'] == [32, 32]
    assert is_complete(out)


def test_tiny_pipeline_runs_end_to_end(tiny_cfg, tmpdir):
    steps = ['--set', 'TRAIN.SFT.MAX_STEPS', '2', 'TRAIN.LIRM.MAX_STEPS', '2', 'TRAIN.REFL.MAX_STEPS', '2',
             'TRAIN.SFT.BATCH_SIZE', '2', 'TRAIN.LIRM.BATCH_SIZE', '2']
    pairs, sft, lirm, refl = [str(tmpdir.join(n)) for n in ('pairs', 'sft', 'lirm', 'refl')]
    assert main.main(['--cfg', TINY, 'generate-data', '--n-clips', '4', '--kind', 'pairs', '--out', pairs]) == 0
    assert main.main(['--cfg', TINY, 'train-sft', '--data', 'synthetic_8', '--out', sft] + steps) == 0
    assert load_manifest(os.path.join(sft, 'ckpt'))['meta']['kind'] == 'generator'
    assert os.path.exists(os.path.join(sft, 'log.jsonl'))

    assert main.main(['--cfg', TINY, 'train-lirm', '--pairs', pairs, '--init-ckpt', os.path.join(sft, 'ckpt'),
                      '--out', lirm] + steps) == 0
    with open(os.path.join(lirm, 'lirm_report.json')) as f:
        report = json.load(f)
    assert 'overall' in report['heldout'] and 'overall' in report['diagnostic']
    assert load_manifest(os.path.join(lirm, 'ckpt'))['meta']['kind'] == 'lirm'

    assert main.main(['--cfg', TINY, 'train-lirefl', '--data', 'synthetic_8', '--sft-ckpt', os.path.join(sft, 'ckpt'),
                      '--lirm-ckpt', os.path.join(lirm, 'ckpt'), '--out', refl] + steps) == 0
    with open(os.path.join(refl, 'summary.json')) as f:
        summary = json.load(f)
    assert summary['lambda2'] == pytest.approx(0.1)
    assert all(is_complete(d) for d in (pairs, sft, lirm, refl))


def test_train_sft_continues_from_a_checkpoint(tiny_ckpt, tmpdir):
    out = str(tmpdir.join('cont'))
    assert main.main(['--cfg', TINY, 'train-sft', '--data', 'synthetic_8', '--init-ckpt', tiny_ckpt, '--out', out,
                      '--set', 'TRAIN.SFT.MAX_STEPS', '1', 'TRAIN.SFT.BATCH_SIZE', '2']) == 0
    with open(os.path.join(out, 'run.json')) as f:
        run = json.load(f)
    assert tiny_ckpt in run['inputs']
    assert load_manifest(os.path.join(out, 'ckpt'))['meta']['model_config'] == \
        load_manifest(tiny_ckpt)['meta']['model_config']
    assert main.main(['--cfg', TINY, 'train-sft', '--data', 'synthetic_8', '--init-ckpt', str(tmpdir.join('none')),
                      '--out', str(tmpdir.join('bad'))]) == 2
