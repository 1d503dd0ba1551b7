import json

import pytest

from model.utils.config import cfg, get_default_cfg, cfg_from_list, cfg_to_dict, render_cfg, cfg_to_json, \
    parse_cfg, parse_args, _merge_a_into_b
from easydict import EasyDict as edict


def test_render_parse_round_trip():
    c = get_default_cfg()
    c.TRAIN.REFL.LAMBDA2 = 1.0
    c.WORLD.SIZE_RANGE = [0.1, 0.2]
    back = parse_cfg(render_cfg(c))
    assert cfg_to_dict(back) == cfg_to_dict(c)
    assert json.loads(cfg_to_json(back)) == cfg_to_dict(c)


def test_unknown_key_rejected():
    c = get_default_cfg()
    with pytest.raises(KeyError):
        _merge_a_into_b(edict({'MODEL': {'DEPTH': 3}}), c)
    with pytest.raises(KeyError):
        cfg_from_list(['TRAIN.SFT.NOPE', '1'], c)


def test_type_mismatch_rejected():
    c = get_default_cfg()
    with pytest.raises(ValueError):
        _merge_a_into_b(edict({'MODEL': {'LAYERS': 'eight'}}), c)


def test_list_overrides_and_int_to_float():
    c = get_default_cfg()
    cfg_from_list(['TRAIN.REFL.LAMBDA2', '1', 'MODEL.COND_ROPE', 'False', 'TRAIN.LIRM.LOSS', 'bt'], c)
    assert c.TRAIN.REFL.LAMBDA2 == 1.0 and isinstance(c.TRAIN.REFL.LAMBDA2, float)
    assert c.MODEL.COND_ROPE is False
    assert c.TRAIN.LIRM.LOSS == 'bt'


def test_defaults_are_independent_of_global():
    c = get_default_cfg()
    c.MODEL.LAYERS = 99
    assert cfg.MODEL.LAYERS != 99


def test_set_follows_the_command():
    args = parse_args(['--s', '3', 'sample', '--ckpt', 'c', '--seed', '7', '--set', 'DIFFUSION.SAMPLER_STEPS', '4'])
    assert args.command == 'sample'
    assert args.session == 3 and args.seed == 7
    assert args.set_cfgs == ['DIFFUSION.SAMPLER_STEPS', '4']


def test_missing_command_exits_with_usage_code():
    with pytest.raises(SystemExit) as e:
        parse_args([])
    assert e.value.code == 2


def test_train_sft_takes_an_optional_checkpoint():
    args = parse_args(['train-sft', '--data', 'synthetic_8', '--out', 'o'])
    assert args.init_ckpt is None
    args = parse_args(['train-sft', '--data', 'synthetic_8', '--out', 'o', '--init-ckpt', 'ckpt'])
    assert args.init_ckpt == 'ckpt'
