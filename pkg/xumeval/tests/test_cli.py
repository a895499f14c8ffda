# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
End-to-end tests of the evaluation and the ``xumevalx`` command line
interface on a small fixture built in a temporary directory
"""

import io
import os
import copy
import json
import shutil
import tempfile
import unittest
from contextlib import redirect_stdout
from unittest import mock

import numpy as np

import xumeval.xumeval_rc as rc
import xumeval.libs.xum_dirs as dirs
from xumeval.libs import xum_io_lib as io_lib
from xumeval.xumevalx import main
from xumeval.dataset import load_manifest
from xumeval.embeddings import EmbeddingSet
from xumeval.evaluator import Evaluator, EvalReport, parse_metric_list
from xumeval.libs.xum_lib import ArgumentError

TEXT_A = "[f03] A chef chops onions. [f07] The dish is plated."
TEXT_B = "[f01] A chef chops onions. [f02] The dish is plated."


def uniform_logits(frame, position):
    return {'position': position, 'frame_index': frame,
            'tens_logits': [0.] * 10, 'ones_logits': [0.] * 10,
            'decoded_tens_id': frame // 10, 'decoded_ones_id': frame % 10}


class CliTestCase(unittest.TestCase):
    """
    Fixture with three videos: 'a' predicted perfectly (with logits and
    predicted sentence embeddings), 'b' predicted partly and 'c' without
    prediction. Frame and sentence embeddings are basis vectors of one
    joint space, frame k is e_k.
    """

    def setUp(self):
        self.params = copy.deepcopy(rc.params)
        self.tmp = tempfile.mkdtemp()
        eye = np.eye(100)
        io_lib.write_xemb(self.p('frames.xemb'), eye)
        io_lib.write_xemb(self.p('text_a.xemb'), eye[[3, 7]])
        io_lib.write_xemb(self.p('text_b.xemb'), eye[[1, 2]])
        scores_a = [0.] * 100
        scores_a[3] = scores_a[7] = 1.

        def video(vid, gt, text, **kwargs):
            return dict({'video_id': vid, 'duration_s': 100., 'frame_count': 100, 'fps': 1,
                         'gt_video_summary': gt, 'gt_text_summary': text, 'split': 'test',
                         'frame_emb': 'frames.xemb'}, **kwargs)

        self.manifest = self.write_jsonl('manifest.jsonl', [
            video('a', [3, 7], TEXT_A, text_emb='text_a.xemb', gt_frame_scores=scores_a),
            video('b', [1, 2], TEXT_B, text_emb='text_b.xemb'),
            video('c', [4], "[f04] Nothing happens.")])
        self.write_jsonl('logits_a.jsonl', [uniform_logits(7, 1), uniform_logits(3, 0)])
        self.predictions = self.write_jsonl('predictions.jsonl', [
            {'video_id': 'b', 'output': "[f02] A chef is cooking. [f05] People eat."},
            {'video_id': 'a', 'output': TEXT_A, 'logits': 'logits_a.jsonl',
             'text_emb': 'text_a.xemb'},
            {'video_id': 'zzz', 'output': "[f01] unknown video."}])
        self.config = dirs.TMPL_CONF_DIR_FILE

    def tearDown(self):
        rc.params.clear()
        rc.params.update(self.params)
        shutil.rmtree(self.tmp)

    def p(self, name):
        return os.path.join(self.tmp, name)

    def write_jsonl(self, name, objs):
        with open(self.p(name), 'w', encoding='utf-8') as f:
            for o in objs:
                f.write(json.dumps(o) + "\n")
        return self.p(name)

    def run_cli(self, *argv):
        """ run main() in-process, return exit code and stdout """
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = main(list(argv) + ['--config', self.config, '-q'])
        return code, buf.getvalue()


class TestEval(CliTestCase):

    def run_eval(self, *extra):
        code, out = self.run_cli('eval', '--manifest', self.manifest,
                                 '--predictions', self.predictions, *extra)
        self.assertEqual(code, 0)
        return json.loads(out)

    def test_report(self):
        rep = self.run_eval()
        a, b = rep['per_video']['a'], rep['per_video']['b']
        # perfect prediction
        self.assertEqual(a['v2v']['f1'], 1.0)
        self.assertEqual(a['v2v']['spearman'], 1.0)
        self.assertEqual(a['v2v']['kendall'], 1.0)
        self.assertEqual(a['clip']['f_clip'], 1.0)
        self.assertEqual(a['cross_f_clip'], 1.0)
        self.assertEqual(a['vt_clip_score'], 1.0)
        self.assertEqual(a['text']['bleu4'], 1.0)
        self.assertEqual(a['text']['rouge_l'], 1.0)
        self.assertEqual(a['importance']['mean_score'], 0.01)
        # half of the frames right
        self.assertEqual(b['v2v']['f1'], 0.5)
        self.assertEqual(b['clip'], {'r_clip': 0.5, 'p_clip': 0.5, 'f_clip': 0.5})
        self.assertNotIn('cross_f_clip', b) # no predicted sentence embeddings
        self.assertNotIn('spearman', b['v2v'])

        self.assertEqual(rep['corpus_means']['v2v']['f1'], 0.75)
        self.assertEqual(rep['counts']['v2v']['f1'], 2)
        self.assertEqual(rep['counts']['cross_f_clip'], 1)
        self.assertEqual(rep['missing'], ['c'])
        self.assertEqual(list(rep['per_video']), ['a', 'b'])
        self.assertEqual(rep['errors'], {})
        self.assertTrue(rep['config_echo'])
        self.assertEqual(rep['provenance']['frame_emb'], [self.p('frames.xemb')])

    def test_deterministic(self):
        out1, out2 = self.p('r1.json'), self.p('r2.json')
        for out in (out1, out2):
            code, _ = self.run_cli('eval', '--manifest', self.manifest,
                                   '--predictions', self.predictions, '--out', out)
            self.assertEqual(code, 0)
        with open(out1, 'rb') as f1, open(out2, 'rb') as f2:
            self.assertEqual(f1.read(), f2.read())
        self.assertTrue(os.path.isfile(self.p('r1.txt')))

    def test_round_trip(self):
        rep = self.run_eval()
        self.assertEqual(EvalReport.from_dict(rep).to_dict(), rep)

    def test_metric_selection(self):
        rep = self.run_eval('--metrics', 'f1,fclip')
        self.assertEqual(set(rep['per_video']['a']), {'v2v', 'clip', 'importance'})
        self.assertNotIn('spearman', rep['per_video']['a']['v2v'])
        code, _ = self.run_cli('eval', '--manifest', self.manifest,
                               '--predictions', self.predictions, '--metrics', 'meteor')
        self.assertEqual(code, 2)

    def test_table(self):
        code, out = self.run_cli('eval', '--manifest', self.manifest, '--predictions',
                                 self.predictions, '--format', 'table', '--percent')
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertTrue(lines[0].startswith('video_id'))
        self.assertTrue(any(l.startswith('MEAN') for l in lines))
        self.assertIn('100.000000', lines[2]) # F1 of 'a' in percent
        self.assertIn('missing: c', out)

    def test_empty_predictions(self):
        self.predictions = self.write_jsonl('empty.jsonl', [])
        rep = self.run_eval()
        self.assertEqual(rep['missing'], ['a', 'b', 'c'])
        self.assertEqual(rep['per_video'], {})
        self.assertEqual(rep['corpus_means'], {})

    def test_corrupt_embedding(self):
        with open(self.p('frames.xemb'), 'wb') as f:
            f.write(b'JUNK')
        rep = self.run_eval()
        self.assertIn('a', rep['errors'])
        self.assertNotIn('clip', rep['per_video']['a'])
        self.assertEqual(rep['per_video']['a']['v2v']['f1'], 1.0)

    def test_unparseable_output(self):
        self.predictions = self.write_jsonl('video_only.jsonl', [
            {'video_id': 'a', 'output': "no tokens", 'task': 'VIDEO'}])
        rep = self.run_eval()
        self.assertIn('parse', rep['errors']['a'][0])
        self.assertEqual(rep['per_video']['a'], {})

    def test_bad_inputs(self):
        code, _ = self.run_cli('eval', '--manifest', self.p('nope.jsonl'),
                               '--predictions', self.predictions)
        self.assertEqual(code, 1)
        bad = self.write_jsonl('bad_manifest.jsonl', [{'video_id': 'x'}])
        code, _ = self.run_cli('eval', '--manifest', bad, '--predictions', self.predictions)
        self.assertEqual(code, 1)

    def test_repeated_token_logits(self):
        """ repeated tokens with one logit record per occurrence keep the first """
        self.write_jsonl('logits_a.jsonl', [uniform_logits(3, 0), uniform_logits(7, 1),
                                            uniform_logits(3, 2)])
        self.predictions = self.write_jsonl('repeated.jsonl', [
            {'video_id': 'a', 'output': "[f03] [f07] [f03]", 'task': 'VIDEO',
             'logits': 'logits_a.jsonl'}])
        rep = self.run_eval()
        a = rep['per_video']['a']
        self.assertEqual(rep['errors'], {})
        self.assertEqual(a['v2v']['f1'], 1.0)
        self.assertEqual(a['v2v']['spearman'], 1.0)
        self.assertEqual(a['v2v']['kendall'], 1.0)
        self.assertEqual(a['importance']['mean_score'], 0.01)

    def test_invalid_utf8(self):
        bad_pred = self.p('bad_predictions.jsonl')
        with open(bad_pred, 'wb') as f:
            f.write(b'{"video_id": "a", "output": "\xe9"}\n')
        code, _ = self.run_cli('eval', '--manifest', self.manifest, '--predictions', bad_pred)
        self.assertEqual(code, 1)
        with open(self.manifest, 'ab') as f:
            f.write(b'\xff\xfe\n')
        code, _ = self.run_cli('eval', '--manifest', self.manifest,
                               '--predictions', self.predictions)
        self.assertEqual(code, 1)
        code, _ = self.run_cli('parse', self.manifest)
        self.assertEqual(code, 1)


class TestEvaluator(CliTestCase):

    def test_jobs(self):
        """ the report doesn't depend on the number of parallel jobs """
        records = load_manifest(self.manifest)
        ev = Evaluator(records)
        preds = ev.load_predictions(self.predictions)
        self.assertEqual(sorted(preds), ['a', 'b'])
        self.assertEqual(ev.run(preds, jobs=1).to_dict(), ev.run(preds, jobs=4).to_dict())

    def test_reference_sentences_from_provider(self):
        """ reference text embeddings come from the provider when the manifest has none """
        manifest = self.write_jsonl('no_text_emb.jsonl', [
            {'video_id': 'a', 'duration_s': 100., 'frame_count': 100, 'gt_video_summary': [3, 7],
             'gt_text_summary': TEXT_A, 'split': 'test', 'frame_emb': 'frames.xemb'}])
        provider = mock.Mock()
        provider.url = 'http://embed.local/embed'
        provider.fetch.return_value = EmbeddingSet.from_array(np.eye(100)[[3, 7]],
                                                              source=provider.url)
        ev = Evaluator(load_manifest(manifest), provider=provider)
        rep = ev.run(ev.load_predictions(self.predictions)).to_dict()
        provider.fetch.assert_called_once_with(["A chef chops onions.", "The dish is plated."],
                                               'text')
        self.assertEqual(rep['per_video']['a']['cross_f_clip'], 1.0)
        self.assertEqual(rep['provenance']['text_emb'], [provider.url])

    def test_metric_list(self):
        self.assertEqual(parse_metric_list('all'), list(rc.ALL_METRICS))
        self.assertEqual(parse_metric_list('cider, F1'), ['f1', 'cider'])
        self.assertEqual(parse_metric_list(['all']), list(rc.ALL_METRICS))
        self.assertRaises(ArgumentError, parse_metric_list, 'bleu')


class TestCommands(CliTestCase):

    def test_parse(self):
        path = self.p('out.txt')
        with open(path, 'w', encoding='utf-8') as f:
            f.write("[f02] A chef chops.")
        code, out = self.run_cli('parse', path)
        self.assertEqual(code, 0)
        d = json.loads(out)
        self.assertEqual((d['indices'], d['text']), ([2], "A chef chops."))

        with open(path, 'w', encoding='utf-8') as f:
            f.write("[f07] [f03]")
        code, out = self.run_cli('parse', path, '--task', 'VIDEO', '--canonical')
        self.assertEqual(json.loads(out)['indices'], [3, 7])
        self.assertEqual(json.loads(out)['text'], "")

        with open(path, 'w', encoding='utf-8') as f:
            f.write("No tokens here.")
        code, _ = self.run_cli('parse', path, '--task', 'VIDEO')
        self.assertEqual(code, 2)

    def test_scores(self):
        code, out = self.run_cli('scores', self.p('logits_a.jsonl'))
        self.assertEqual(code, 0)
        d = json.loads(out)
        self.assertEqual(len(d['scores']), 100)
        self.assertEqual(d['scores'][3], 0.01)
        self.assertEqual(d['mean_score'], 0.01)
        empty = self.write_jsonl('no_logits.jsonl', [])
        self.assertEqual(self.run_cli('scores', empty)[0], 2)

    def test_filter(self):
        io_lib.write_xsim(self.p('sims.xsim'), [[1., .95, .5], [.95, 1., .6], [.5, .6, 1.]])
        code, out = self.run_cli('filter', '--sim-file', self.p('sims.xsim'))
        self.assertEqual(code, 0)
        d = json.loads(out)
        self.assertEqual(d['kept'], [0, 2])
        self.assertEqual(d['threshold'], 0.93)
        code, out = self.run_cli('filter', '--embeddings', self.p('text_a.xemb'),
                                 '--threshold', '0.5')
        self.assertEqual(json.loads(out)['kept'], [0, 1])
        e = np.eye(2)
        for name, rows in (('tok0.xemb', [e[0]]), ('tok1.xemb', [e[0], e[1]]),
                           ('tok2.xemb', [-e[0]])):
            io_lib.write_xemb(self.p(name), rows)
        code, out = self.run_cli('filter', '--token-embeddings', self.p('tok0.xemb'),
                                 self.p('tok1.xemb'), self.p('tok2.xemb'), '--threshold', '0.5')
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['kept'], [0, 2]) # 2 / 3 between captions 0 and 1

    def test_stats(self):
        out_file = self.p('stats.json')
        code, _ = self.run_cli('stats', '--manifest', self.manifest, '--out', out_file)
        self.assertEqual(code, 0)
        with open(out_file, encoding='utf-8') as f:
            d = json.load(f)
        self.assertEqual(d['n_videos'], 3)
        self.assertEqual(d['mean_duration_s'], 100.0)
        self.assertEqual(d['splits'], {'train': 0, 'val': 0, 'test': 3})
        self.assertIn('histograms', d)

    def test_encode(self):
        code, out = self.run_cli('encode', '--frame-count', '200', '--prompt', 'BOTH')
        self.assertEqual(code, 0)
        d = json.loads(out)
        self.assertEqual(d['entries'][50], {'token': '[f50]', 'slot': 100, 'time_s': 100.0})
        self.assertTrue(d['prompt'].endswith("Please generate a BOTH summarization for this video."))
        code, _ = self.run_cli('encode', '--frame-count', '500', '--target-frames', '150')
        self.assertEqual(code, 2)

if __name__ == '__main__':
    unittest.main()
