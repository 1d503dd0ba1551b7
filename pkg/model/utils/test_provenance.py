import argparse
import json
import os

from model.utils.config import cfg
from model.utils.logger import JsonlLogger, read_jsonl
from model.utils.provenance import begin_run, finish_run, is_complete, content_hash, INCOMPLETE


def test_run_dir_is_marked_until_finished(tmpdir):
    out = str(tmpdir.join('run'))
    src = tmpdir.join('input.txt')
    src.write('abc')
    args = argparse.Namespace(command='sample', seed=7, hw=(32, 32))
    run = begin_run(out, 'sample', args, inputs=[str(src), None])
    assert os.path.exists(os.path.join(out, INCOMPLETE))
    assert not is_complete(out)
    with open(os.path.join(out, 'run.json')) as f:
        written = json.load(f)
    assert written == run
    assert written['seed'] == cfg.RNG_SEED
    assert written['args']['hw'] == [32, 32]
    assert written['inputs'] == {str(src): content_hash(str(src))}
    assert os.path.exists(os.path.join(out, 'cfg.yml'))
    finish_run(out)
    assert is_complete(out)


def test_directory_hash_follows_content(tmpdir):
    a = tmpdir.mkdir('a')
    a.join('x.bin').write('1')
    h1 = content_hash(str(a))
    a.join('x.bin').write('2')
    assert content_hash(str(a)) != h1
    assert content_hash('synthetic_500') == content_hash('synthetic_500')


def test_jsonl_records_round_trip(tmpdir):
    path = str(tmpdir.join('log.jsonl'))
    log = JsonlLogger(path)
    log.log(step=1, loss=0.5, lr=1e-3, seed=3)
    log.log(step=2, loss=0.25, lr=1e-3, seed=3, t_m=[40, 80])
    log.close()
    recs = read_jsonl(path)
    assert [r['step'] for r in recs] == [1, 2]
    assert recs[1]['t_m'] == [40, 80]
