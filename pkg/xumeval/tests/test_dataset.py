# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Test suite for manifest loading, curation filters and corpus statistics
"""

import os
import json
import math
import shutil
import tempfile
import unittest
import numpy as np
from numpy.testing import assert_allclose

from xumeval import dataset as ds
from xumeval.embeddings import EmbeddingSet
from xumeval.libs.xum_lib import ArgumentError, LoadError, SemanticError


def video(i, **kwargs):
    """ manifest entry with duration 100 + 10 i s and i + 1 summary frames """
    d = {'video_id': 'v{0:02d}'.format(i), 'duration_s': 100. + 10 * i,
         'frame_count': 100 + 10 * i, 'fps': 1,
         'gt_video_summary': list(range(0, 2 * (i + 1), 2)),
         'gt_text_summary': "[f00] " + " ".join(['word'] * (i + 1)) + ".",
         'split': 'test'}
    d.update(kwargs)
    return d


class ManifestTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def write(self, objs, name='manifest.jsonl'):
        path = os.path.join(self.tmp, name)
        with open(path, 'w', encoding='utf-8') as f:
            for o in objs:
                f.write((o if isinstance(o, str) else json.dumps(o)) + "\n")
        return path


class TestLoadManifest(ManifestTestCase):

    def test_load(self):
        recs = ds.load_manifest(self.write([video(0, frame_emb='emb/v00.xemb'), video(1)]))
        self.assertEqual([r.video_id for r in recs], ['v00', 'v01'])
        self.assertEqual(recs[0].gt_video_summary, (0,))
        self.assertEqual(recs[0].clean_text, "word.")
        self.assertEqual(recs[0].frame_emb, os.path.join(self.tmp, 'emb', 'v00.xemb'))
        self.assertIsNone(recs[1].frame_emb)
        self.assertEqual(recs[1].lineno, 2)

    def test_canonical_gt(self):
        recs = ds.load_manifest(self.write([video(0, gt_video_summary=[7, 3, 7])]))
        self.assertEqual(recs[0].gt_video_summary, (3, 7))

    def test_out_of_range(self):
        with self.assertRaises(LoadError) as cm:
            ds.load_manifest(self.write([video(0), video(1, gt_video_summary=[150])]))
        self.assertEqual(list(cm.exception.lines), [2])
        self.assertIn("150", str(cm.exception))
        self.assertEqual(cm.exception.exit_code, 1)

    def test_duplicate_ids(self):
        with self.assertRaises(LoadError) as cm:
            ds.load_manifest(self.write([video(0), video(1), video(0)]))
        self.assertEqual(sorted(cm.exception.lines), [1, 3])

    def test_schema(self):
        bad = [video(0, frame_count=300),  # doesn't match duration
               video(1, split='holdout'),
               video(2, gt_frame_scores=[0.] * 5),
               {'video_id': 'x'}]
        with self.assertRaises(LoadError) as cm:
            ds.load_manifest(self.write(bad))
        self.assertEqual(sorted(cm.exception.lines), [1, 2, 3, 4])

    def test_frame_scores(self):
        recs = ds.load_manifest(self.write([video(0, gt_frame_scores=[0.5] * 100)]))
        self.assertEqual(recs[0].gt_frame_scores.shape, (100,))

    def test_target_frames(self):
        recs = ds.load_manifest(self.write([video(0, gt_video_summary=[149])]),
                                target_frames=150, token_width=3)
        self.assertEqual(recs[0].gt_video_summary, (149,))

    def test_original_frames(self):
        """ ground truth on the original timeline is projected (200 -> 100 frames) """
        obj = video(10, gt_original_frames=[100, 101, 199, 0])
        del obj['gt_video_summary']
        recs = ds.load_manifest(self.write([obj]))
        self.assertEqual(recs[0].gt_video_summary, (0, 50, 99))
        bad = [video(0, gt_original_frames=[1]), dict(obj, gt_original_frames=[200])]
        with self.assertRaises(LoadError) as cm:
            ds.load_manifest(self.write(bad))
        self.assertEqual(sorted(cm.exception.lines), [1, 2])


class TestStatistics(ManifestTestCase):

    def setUp(self):
        super().setUp()
        self.records = ds.load_manifest(self.write([video(i) for i in range(10)]))

    def test_corpus_stats(self):
        st = ds.corpus_stats(self.records)
        self.assertEqual(st.n_videos, 10)
        self.assertAlmostEqual(st.mean_duration_s, 145., delta=1e-12)
        self.assertAlmostEqual(st.mean_video_summary_frames, 5.5, delta=1e-12)
        # "word word ... ." has i + 1 words and one period
        self.assertAlmostEqual(st.mean_text_tokens, 6.5, delta=1e-12)
        ratio = math.fsum((i + 1) / (100 + 10 * i) for i in range(10)) / 10
        self.assertAlmostEqual(st.mean_compression_ratio, ratio, delta=1e-15)
        self.assertRaises(ArgumentError, ds.corpus_stats, [])

    def test_histograms(self):
        h = ds.corpus_histograms(self.records, bins=5)
        self.assertEqual(h['duration_s']['counts'], [2, 2, 2, 2, 2])
        self.assertEqual(len(h['duration_s']['edges']), 6)
        self.assertEqual(sum(h['video_summary_frames']['counts']), 10)

    def test_split_counts(self):
        self.assertEqual(ds.split_counts(self.records), (0, 0, 10))
        with self.assertLogs('xumeval.dataset', level='WARNING'):
            ds.split_counts(self.records, check_expected=True)

    def test_split_labels(self):
        splits = ['train'] * 25 + ['val'] + ['test'] * 4
        records = ds.load_manifest(self.write([video(i, split=s) for i, s in enumerate(splits)],
                                              name='splits.jsonl'))
        self.assertEqual(ds.split_counts(records, check_expected=True), (25, 1, 4))
        rec = records[0]
        object.__setattr__(rec, 'split', 'dev')
        self.assertRaises(SemanticError, ds.split_counts, [rec])

    def test_duration_filter(self):
        kept = ds.duration_filter(self.records, 120, 150)
        self.assertEqual([r.video_id for r in kept], ['v02', 'v03', 'v04', 'v05'])
        self.assertEqual(len(ds.duration_filter(self.records)), 10) # 40 ... 940 s

    def test_summary_sentences(self):
        self.assertEqual(ds.summary_sentences(self.records[1]), ["word word."])


class TestRedundancyFilter(unittest.TestCase):

    def test_fixture(self):
        sims = [[1., .95, .5], [.95, 1., .6], [.5, .6, 1.]]
        self.assertEqual(ds.redundancy_filter(sims, 0.93), [0, 2])
        self.assertEqual(ds.redundancy_filter(sims), [0, 2]) # default 0.93

    def test_edge_cases(self):
        self.assertEqual(ds.redundancy_filter(np.zeros((0, 0))), [])
        self.assertEqual(ds.redundancy_filter([[1.]]), [0])
        self.assertEqual(ds.redundancy_filter(np.ones((4, 4))), [0])
        self.assertRaises(ArgumentError, ds.redundancy_filter, [[1.]], 0.)
        self.assertRaises(ArgumentError, ds.redundancy_filter, [[1.]], 1.5)
        self.assertRaises(ArgumentError, ds.redundancy_filter, np.ones((2, 3)))

    def test_random_properties(self):
        rng = np.random.default_rng(93)
        for _ in range(500):
            n = int(rng.integers(1, 12))
            a = rng.uniform(-1, 1, size=(n, n))
            sims = (a + a.T) / 2
            np.fill_diagonal(sims, 1.)
            t = float(rng.uniform(0.05, 1.))
            kept = ds.redundancy_filter(sims, t)
            # ascending subset, frame 0 always kept
            self.assertEqual(kept, sorted(set(kept)))
            self.assertTrue(set(kept) <= set(range(n)))
            self.assertEqual(kept[0], 0)
            # kept frames are pairwise below the threshold
            for i in kept:
                for j in kept:
                    if i < j:
                        self.assertLess(sims[i, j], t)
            # every removed frame is too similar to an earlier kept one
            for i in set(range(n)) - set(kept):
                self.assertTrue(any(sims[i, k] >= t for k in kept if k < i))
            # idempotence
            sub = sims[np.ix_(kept, kept)]
            self.assertEqual(ds.redundancy_filter(sub, t), list(range(len(kept))))
            # nothing is removed when all similarities are below the threshold
            self.assertEqual(ds.redundancy_filter(np.clip(sims, -1., .99), 1.), list(range(n)))

    def test_embeddings(self):
        emb = EmbeddingSet.from_array([[1., 0.], [1., 0.01], [0., 1.]])
        self.assertEqual(ds.redundancy_filter(emb, 0.93), [0, 2])

    def test_threshold_not_monotone(self):
        """
        A lower threshold removes more frames next to each kept frame, but the
        keep-first scan can then keep frames a higher threshold removed.
        """
        sims = np.eye(4)
        sims[0, 1] = sims[1, 0] = .8
        sims[1, 2] = sims[2, 1] = sims[1, 3] = sims[3, 1] = .95
        self.assertEqual(ds.redundancy_filter(sims, .9), [0, 1])
        self.assertEqual(ds.redundancy_filter(sims, .7), [0, 2, 3])
        # the properties that hold for every threshold
        for t in (.5, .7, .8, .9, .95, 1.):
            kept = ds.redundancy_filter(sims, t)
            self.assertEqual(kept[0], 0)
            self.assertTrue(all(sims[i, j] < t for i in kept for j in kept if i < j))
        self.assertEqual(ds.redundancy_filter(sims, 1.), [0, 1, 2, 3])
        self.assertEqual(ds.redundancy_filter(sims, .5), [0, 2, 3])


class TestCaptionSimilarity(unittest.TestCase):

    def test_matrix(self):
        e = np.eye(2)
        sets = [EmbeddingSet.from_array([e[0]]), EmbeddingSet.from_array([e[0], e[1]]),
                EmbeddingSet.from_array([-e[0]])]
        sims = ds.caption_similarity_matrix(sets)
        assert_allclose(np.diag(sims), 1.)
        self.assertAlmostEqual(sims[0, 1], 2 / 3, delta=1e-12)
        self.assertAlmostEqual(sims[1, 0], 2 / 3, delta=1e-12)
        self.assertEqual(sims[0, 2], 0.) # negative similarity, harmonic mean is 0

if __name__ == '__main__':
    unittest.main()
