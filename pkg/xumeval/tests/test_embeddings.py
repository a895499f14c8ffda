# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Test suite for embedding sets, the XEMB / XSIM formats and the embedding
provider client
"""

import os
import shutil
import struct
import tempfile
import threading
import unittest
from unittest import mock
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.testing import assert_allclose
import requests

from xumeval import embeddings as emb
from xumeval.embeddings import EmbeddingSet, EmbeddingProvider
from xumeval.libs import xum_io_lib as io_lib
from xumeval.libs.xum_lib import (ArgumentError, FormatError, NumericError,
                                  ProviderError)


class TestEmbeddingSet(unittest.TestCase):

    def test_normalization(self):
        s = EmbeddingSet.from_array([[3., 4.], [0., 2.]])
        assert_allclose(s.vectors, [[.6, .8], [0., 1.]])
        self.assertEqual(len(s), 2)
        self.assertEqual(s.dim, 2)
        # normalizing twice changes nothing
        assert_allclose(EmbeddingSet.from_array(s.vectors).vectors, s.vectors, atol=1e-15)

    def test_invalid_vectors(self):
        with self.assertRaises(ArgumentError) as cm:
            EmbeddingSet.from_array([[1., 0.], [0., 0.]])
        self.assertIn("row 1", str(cm.exception))
        self.assertRaises(NumericError, EmbeddingSet.from_array, [[np.nan, 1.]])
        self.assertRaises(ArgumentError, EmbeddingSet.from_array, [[1., 0.]], labels=['a', 'b'])
        self.assertRaises(ArgumentError, EmbeddingSet.from_array, [[1., 0.], [0., 1.]],
                          labels=['a', 'a'])

    def test_read_only(self):
        s = EmbeddingSet.from_array([[1., 0.]])
        with self.assertRaises(ValueError):
            s.vectors[0, 0] = 2.

    def test_select(self):
        s = EmbeddingSet.from_array(np.eye(4), labels=[10, 11, 12, 13])
        sub = s.select([12, 10])
        assert_allclose(sub.vectors, [[0, 0, 1, 0], [1, 0, 0, 0]])
        self.assertEqual(sub.labels, ('12', '10'))
        self.assertRaises(ArgumentError, s.select, [14])
        # unlabelled sets are addressed by row
        assert_allclose(EmbeddingSet.from_array(np.eye(3)).select([2]).vectors, [[0, 0, 1]])

    def test_similarity(self):
        a = EmbeddingSet.from_array([[1., 0.], [-1., 0.]])
        b = EmbeddingSet.from_array([[1., 1.]])
        assert_allclose(a.similarity_matrix(b), [[np.sqrt(.5)], [0.]])
        self.assertAlmostEqual(emb.clamped_cosine([1., 0.], [-1., 0.]), 0.)
        self.assertAlmostEqual(emb.clamped_cosine([1., 0.], [1., 0.]), 1.)
        self.assertRaises(ArgumentError, emb.clamped_cosine, [1., 0.], [1., 0., 0.])

    def test_mean_pooled(self):
        s = EmbeddingSet.from_array([[1., 0.], [0., 1.]])
        assert_allclose(emb.mean_pooled(s), [np.sqrt(.5), np.sqrt(.5)])
        self.assertRaises(ArgumentError, emb.mean_pooled,
                          EmbeddingSet.from_array([[1., 0.], [-1., 0.]]))


class TestEmbeddingFiles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.path = os.path.join(self.tmp, 'emb.xemb')

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_save_load(self):
        rng = np.random.default_rng(3)
        s = EmbeddingSet.from_array(rng.normal(size=(5, 8)), labels=range(5))
        emb.save_embedding_file(self.path, s)
        t = emb.load_embedding_file(self.path)
        assert_allclose(t.vectors, s.vectors, atol=1e-6)
        self.assertEqual(t.labels, ('0', '1', '2', '3', '4'))
        self.assertTrue(np.allclose(np.linalg.norm(t.vectors, axis=1), 1., atol=1e-12))
        self.assertEqual(t.source, self.path)

    def test_without_labels(self):
        io_lib.write_xemb(self.path, np.array([[2., 0.], [0., 3.]]))
        t = emb.load_embedding_file(self.path)
        self.assertIsNone(t.labels)
        assert_allclose(t.vectors, np.eye(2))

    def test_bad_magic(self):
        with open(self.path, 'wb') as f:
            f.write(b'XEMZ' + struct.pack('<HII', 1, 1, 2) + b'\x00' * 8)
        with self.assertRaises(FormatError) as cm:
            emb.load_embedding_file(self.path)
        self.assertEqual(cm.exception.offset, 0)
        self.assertEqual(cm.exception.exit_code, 1)

    def test_truncated(self):
        with open(self.path, 'wb') as f:
            f.write(b'XEMB' + struct.pack('<HII', 1, 2, 4) + b'\x00' * 20)
        with self.assertRaises(FormatError) as cm:
            emb.load_embedding_file(self.path)
        self.assertEqual(cm.exception.offset, 34)
        self.assertIn("Truncated", str(cm.exception))

    def test_zero_vector(self):
        io_lib.write_xemb(self.path, np.array([[1., 0.], [0., 0.]]))
        with self.assertRaises(FormatError) as cm:
            emb.load_embedding_file(self.path)
        self.assertEqual(cm.exception.offset, 14 + 8)

    def test_trailing_bytes(self):
        io_lib.write_xemb(self.path, np.array([[1., 0.]]))
        with open(self.path, 'ab') as f:
            f.write(b'\x00\x00')
        self.assertRaises(FormatError, emb.load_embedding_file, self.path)

    def test_similarity_file(self):
        path = os.path.join(self.tmp, 'sims.xsim')
        sims = np.array([[1., .5], [.5, 1.]])
        emb.save_similarity_file(path, sims)
        assert_allclose(emb.load_similarity_file(path), sims)
        with open(path, 'ab') as f:
            f.write(b'\x00')
        self.assertRaises(FormatError, emb.load_similarity_file, path)


class TestProvider(unittest.TestCase):

    def make_provider(self, *responses, retries=3):
        session = mock.Mock()
        session.post.side_effect = list(responses)
        return EmbeddingProvider('http://embed.local', endpoint='/embed', retries=retries,
                                 backoff=0., session=session), session

    @staticmethod
    def response(status=200, body=None, headers=None):
        r = mock.Mock()
        r.status_code = status
        r.headers = headers or {}
        r.json.return_value = body
        return r

    def test_fetch(self):
        p, session = self.make_provider(self.response(body={'dim': 2,
                                                            'vectors': [[3., 4.], [1., 0.]]}))
        s = p.fetch(["A chef chops.", "The dish is plated."])
        assert_allclose(s.vectors, [[.6, .8], [1., 0.]])
        self.assertEqual(p.dim, 2)
        self.assertEqual(s.source, 'http://embed.local/embed')
        session.post.assert_called_once_with(
            'http://embed.local/embed', timeout=p.timeout,
            json={'inputs': ["A chef chops.", "The dish is plated."], 'kind': 'text'})

    def test_retry(self):
        ok = self.response(body={'dim': 2, 'vectors': [[1., 0.]]})
        p, session = self.make_provider(self.response(503),
                                        requests.ConnectionError("down"), ok)
        self.assertEqual(len(p.fetch(["x"])), 1)
        self.assertEqual(session.post.call_count, 3)

    def test_give_up(self):
        p, _ = self.make_provider(self.response(429, headers={'Retry-After': '5'}),
                                  self.response(429, headers={'Retry-After': '5'}), retries=2)
        with self.assertRaises(ProviderError) as cm:
            p.fetch(["x"])
        self.assertEqual(cm.exception.attempts, 2)
        self.assertEqual(cm.exception.status, 429)
        self.assertEqual(cm.exception.retry_after, '5')

    def test_client_error_no_retry(self):
        p, session = self.make_provider(self.response(400))
        self.assertRaises(ProviderError, p.fetch, ["x"])
        self.assertEqual(session.post.call_count, 1)

    def test_mismatches(self):
        p, _ = self.make_provider(self.response(body={'dim': 2, 'vectors': [[1., 0.]]}))
        self.assertRaises(ProviderError, p.fetch, ["x", "y"])
        p, _ = self.make_provider(self.response(body={'dim': 2, 'vectors': [[1., 0.]]}),
                                  self.response(body={'dim': 3, 'vectors': [[1., 0., 0.]]}))
        p.fetch(["x"])
        self.assertRaises(ProviderError, p.fetch, ["y"])

    def test_arguments(self):
        p, _ = self.make_provider()
        self.assertRaises(ArgumentError, p.fetch, [])
        self.assertRaises(ArgumentError, p.fetch, ["x"], 'audio')
        self.assertRaises(ArgumentError, EmbeddingProvider, '')

    def test_session_per_thread(self):
        with mock.patch.object(emb.requests, 'Session', side_effect=lambda: mock.Mock()):
            p = EmbeddingProvider('http://embed.local')
            sessions = []
            workers = [threading.Thread(target=lambda: sessions.append(p.session))
                       for _ in range(3)]
            for w in workers:
                w.start()
            for w in workers:
                w.join()
            self.assertEqual(len({id(s) for s in sessions}), 3)
            self.assertIs(p.session, p.session)

    def test_shared_provider(self):
        """ one provider used by several worker threads """
        ok = self.response(body={'dim': 2, 'vectors': [[1., 0.]]})
        p, session = self.make_provider()
        session.post.side_effect = None
        session.post.return_value = ok
        with ThreadPoolExecutor(max_workers=4) as pool:
            sets = list(pool.map(lambda i: p.fetch(["x{0}".format(i)]), range(20)))
        self.assertEqual([len(s) for s in sets], [1] * 20)
        self.assertEqual(p.dim, 2)

if __name__ == '__main__':
    unittest.main()
