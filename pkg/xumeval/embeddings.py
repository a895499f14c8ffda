# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Frame and sentence embeddings: loading / saving XEMB files, unit
normalization, clamped cosine similarity and an optional client for a remote
embedding service.

Embeddings are never computed here; they are produced upstream by a
(CLIP-like) encoder with a joint frame / text space.
"""
import time
import threading
from dataclasses import dataclass

import logging
logger = logging.getLogger(__name__)

import numpy as np
import requests

from xumeval.libs.xum_lib import (ArgumentError, FormatError, ProviderError,
                                  check_finite)
from xumeval.libs import xum_io_lib as io_lib
import xumeval.xumeval_rc as rc

NORM_TOL = 1e-6 #: tolerance for the unit norm of stored vectors

#------------------------------------------------------------------------------
def normalize_rows(data, source="embedding"):
    """
    Return a float64 copy of the 2D array `data` with unit norm rows.

    Raises
    ------
    NumericError
        for NaN / Inf entries

    ArgumentError
        for zero vectors (they have no direction), the message names the row
    """
    data = check_finite(data, source)
    if data.ndim != 2:
        raise ArgumentError("Expected a 2D array of vectors, got shape {0}".format(data.shape))
    norms = np.linalg.norm(data, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ArgumentError("{0}: zero vector in row {1}".format(source, int(zero[0])))
    return data / norms[:, np.newaxis]

#==============================================================================
@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """
    Ordered set of unit norm vectors (frames or sentences) as rows of
    ``vectors`` with optional unique ``labels`` (frame indices or sentence
    ordinals as strings). ``source`` identifies where the vectors came from
    and is echoed into reports.

    Use :meth:`from_array` to construct a set from raw vectors.
    """
    vectors: np.ndarray
    labels: tuple = None
    source: str = ''

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ArgumentError("Embedding set needs a 2D array, got shape {0}"
                                .format(self.vectors.shape))
        if self.labels is not None:
            if len(self.labels) != len(self.vectors):
                raise ArgumentError("{0} labels for {1} vectors"
                                    .format(len(self.labels), len(self.vectors)))
            if len(set(self.labels)) != len(self.labels):
                raise ArgumentError("Labels of an embedding set must be unique")
        self.vectors.setflags(write=False)

    @classmethod
    def from_array(cls, data, labels=None, source=''):
        """ Normalize the rows of `data` and wrap them in a set """
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        labels = None if labels is None else tuple(str(l) for l in labels)
        return cls(normalize_rows(data, source or "embedding"), labels, source)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def __getitem__(self, i):
        return self.vectors[i]

    def label_index(self):
        """ Dict label -> row, rows are labelled '0', '1', ... when unlabelled """
        labels = self.labels if self.labels is not None else [str(i) for i in range(len(self))]
        return {l: i for i, l in enumerate(labels)}

    def select(self, labels):
        """
        Return the subset with the given `labels` (e.g. frame indices) in the
        given order.

        Raises
        ------
        ArgumentError
            when a label is unknown
        """
        lut = self.label_index()
        keys = [str(l) for l in labels]
        missing = [k for k in keys if k not in lut]
        if missing:
            raise ArgumentError("{0}: unknown label(s) {1}".format(self.source or "embedding set",
                                                                   missing[:5]))
        rows = [lut[k] for k in keys]
        return EmbeddingSet(self.vectors[rows], tuple(keys), self.source)

    def similarity_matrix(self, other, clamp=True):
        """
        Matrix of cosine similarities between the rows of this set (rows) and
        of `other` (columns), clamped to ``[0, 1]`` when `clamp` is True so
        only non-negative similarities count.
        """
        if self.dim != other.dim:
            raise ArgumentError("Dimension mismatch: {0} vs. {1}".format(self.dim, other.dim))
        sims = self.vectors @ other.vectors.T
        return np.clip(sims, 0., 1.) if clamp else sims

#------------------------------------------------------------------------------
def clamped_cosine(a, b):
    """
    Clamped cosine similarity ``max(a . b, 0)`` of two unit vectors, only
    non-negative similarities count.

    Raises
    ------
    ArgumentError
        when the dimensions differ
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ArgumentError("Dimension mismatch: {0} vs. {1}".format(a.shape, b.shape))
    return float(min(max(np.dot(a, b), 0.), 1.))

#------------------------------------------------------------------------------
def mean_pooled(emb_set):
    """
    Mean of all vectors of `emb_set`, renormalized to unit length.

    Raises
    ------
    ArgumentError
        for an empty set or when the vectors cancel out
    """
    if len(emb_set) == 0:
        raise ArgumentError("Cannot pool an empty embedding set")
    mean = emb_set.vectors.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise ArgumentError("Mean pooled vector of {0} is zero".format(emb_set.source or "set"))
    return mean / norm

#------------------------------------------------------------------------------
def load_embedding_file(path):
    """
    Load an XEMB file and normalize all vectors to unit length.

    Raises
    ------
    FormatError
        for bad magic, truncated payloads, bad label blocks or zero vectors,
        the message identifies the byte offset
    """
    data, labels = io_lib.read_xemb(path)
    if data.shape[0] > 0:
        norms = np.linalg.norm(data, axis=1)
        bad = np.flatnonzero(~np.isfinite(norms) | (norms == 0))
        if bad.size:
            # header is 14 bytes, each vector dim * 4 bytes
            offset = 14 + int(bad[0]) * data.shape[1] * 4
            raise FormatError("Zero or non-finite vector in row {0}".format(int(bad[0])),
                              offset=offset, path=path)
    try:
        emb = EmbeddingSet(data / np.linalg.norm(data, axis=1, keepdims=True)
                           if data.shape[0] else data,
                           None if labels is None else tuple(labels), str(path))
    except ArgumentError as e:
        raise FormatError(str(e), path=path)
    logger.debug("Loaded {0} embeddings with dim {1} from '{2}'".format(len(emb), emb.dim, path))
    return emb

#------------------------------------------------------------------------------
def save_embedding_file(path, emb_set):
    """ Write `emb_set` (vectors and labels) as XEMB file """
    io_lib.write_xemb(path, emb_set.vectors, emb_set.labels)

#------------------------------------------------------------------------------
def load_similarity_file(path):
    """ Load an XSIM similarity matrix """
    return io_lib.read_xsim(path)

def save_similarity_file(path, sims):
    """ Write a square similarity matrix as XSIM file """
    io_lib.write_xsim(path, sims)

#==============================================================================
class EmbeddingProvider(object):
    """
    Client for a remote embedding service. The service receives a POST
    request with the JSON body ``{"inputs": [...], "kind": "text"|"frame"}``
    and answers ``{"dim": D, "vectors": [[...], ...]}`` with one vector per
    input in the same order.

    The dimension of the first response is remembered, later responses
    with another dimension are rejected. One provider can be shared by worker
    threads: each thread gets its own :class:`requests.Session` unless a
    session is passed in.
    """

    def __init__(self, url, endpoint=None, timeout=None, retries=None, backoff=None,
                 session=None):
        par = rc.params['Provider']
        if not url:
            raise ArgumentError("No provider URL given (--provider-url or {0})"
                                .format(rc.PROVIDER_ENV))
        self.url = url.rstrip('/') + (par['endpoint'] if endpoint is None else endpoint)
        self.timeout = par['timeout_s'] if timeout is None else timeout
        self.retries = max(1, par['retries'] if retries is None else retries)
        self.backoff = par['backoff_s'] if backoff is None else backoff
        self._session = session
        self._local = threading.local()
        self._lock = threading.Lock()
        self.dim = None

    @property
    def session(self):
        if self._session is not None:
            return self._session
        if not hasattr(self._local, 'session'):
            self._local.session = requests.Session()
        return self._local.session

    #--------------------------------------------------------------------------
    def _post(self, payload):
        """
        POST `payload`, retrying on network errors and on 429 / 5xx responses
        with exponential backoff. Return the decoded JSON response.
        """
        status = None
        retry_after = None
        for attempt in range(1, self.retries + 1):
            try:
                r = self.session.post(self.url, json=payload, timeout=self.timeout)
                status = r.status_code
                if status == 200:
                    return r.json()
                retry_after = r.headers.get('Retry-After')
                if status != 429 and status < 500:
                    raise ProviderError("Provider '{0}' answered with status {1}"
                                        .format(self.url, status), attempt, status, retry_after)
                logger.warning("Provider '{0}' answered with status {1} (attempt {2}/{3})"
                               .format(self.url, status, attempt, self.retries))
            except ValueError as e: # invalid JSON body
                raise ProviderError("Invalid JSON from provider: {0}".format(e), attempt, status)
            except requests.RequestException as e:
                logger.warning("Request to '{0}' failed (attempt {1}/{2}): {3}"
                               .format(self.url, attempt, self.retries, e))
                status = None
            if attempt < self.retries:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        raise ProviderError("Provider '{0}' unreachable".format(self.url), self.retries,
                            status, retry_after)

    #--------------------------------------------------------------------------
    def fetch(self, payload, kind='text'):
        """
        Embed all items of `payload` (sentences or frame references).

        Returns
        -------
        EmbeddingSet
            one normalized vector per item, labels '0' ... 'n-1'

        Raises
        ------
        ArgumentError
            for an empty payload or unknown `kind`

        ProviderError
            for network failures, error responses, count mismatches or a
            dimension that disagrees with earlier responses
        """
        payload = [str(p) for p in payload]
        if not payload:
            raise ArgumentError("Empty payload, nothing to embed")
        if kind not in ('text', 'frame'):
            raise ArgumentError("Unknown kind '{0}', use 'text' or 'frame'".format(kind))

        resp = self._post({'inputs': payload, 'kind': kind})
        try:
            vectors = np.asarray(resp['vectors'], dtype=np.float64)
            dim = int(resp.get('dim', vectors.shape[-1]))
        except (KeyError, TypeError, ValueError) as e:
            raise ProviderError("Malformed provider response ({0})".format(e), 1, 200)

        if vectors.ndim != 2 or vectors.shape[0] != len(payload):
            raise ProviderError("Count mismatch: {0} inputs, {1} vectors"
                                .format(len(payload), vectors.shape[0] if vectors.ndim else 0),
                                1, 200)
        with self._lock:
            if vectors.shape[1] != dim or (self.dim is not None and dim != self.dim):
                raise ProviderError("Dimension mismatch: got {0}, expected {1}"
                                    .format(vectors.shape[1], self.dim or dim), 1, 200)
            self.dim = dim
        try:
            return EmbeddingSet.from_array(vectors, labels=range(len(payload)), source=self.url)
        except ArgumentError as e:
            raise ProviderError("Unusable vectors from provider ({0})".format(e), 1, 200)

#------------------------------------------------------------------------------
def fetch_remote(provider_url, payload, kind='text', **kwargs):
    """
    Convenience wrapper: embed `payload` with a one-off
    :class:`EmbeddingProvider` for `provider_url`.
    """
    return EmbeddingProvider(provider_url, **kwargs).fetch(payload, kind)
