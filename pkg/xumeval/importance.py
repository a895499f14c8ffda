# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Per-frame importance scores from the language model's logits.

For every decoded temporal token the logits of its digit positions are turned
into probabilities with a softmax, the probability of the decoded frame number
is approximated by the product of the probabilities of its digits. Each
selected frame gets its own probability as importance score, unselected
frames get 0; the mean over the selected frames is reported as well.
"""
from dataclasses import dataclass

import logging
logger = logging.getLogger(__name__)

import numpy as np
import scipy.special

from xumeval.libs.xum_lib import (ArgumentError, DecodedIdError, EmptySummaryError,
                                  FormatError, check_finite, stable_mean)
from xumeval.libs.xum_io_lib import read_jsonl

#------------------------------------------------------------------------------
def softmax(logits):
    """
    Numerically stable softmax (the maximum is subtracted before
    exponentiation, huge logits don't overflow).

    Raises
    ------
    NumericError
        for NaN or Inf entries

    ArgumentError
        for an empty vector
    """
    logits = check_finite(logits, "logits")
    if logits.ndim != 1 or logits.size == 0:
        raise ArgumentError("Expected a non-empty 1D logit vector, got shape {0}"
                            .format(logits.shape))
    return scipy.special.softmax(logits)

#==============================================================================
@dataclass(frozen=True, eq=False)
class LogitRecord:
    """
    Logit vectors of the digit positions of one decoded temporal token.

    ``digit_logits[0]`` belongs to the most significant digit (the tens for
    two digit tokens) at output position ``position``, ``decoded_ids`` are the
    vocabulary ids that were actually emitted.
    """
    position: int
    frame_index: int
    digit_logits: tuple
    decoded_ids: tuple

    def __post_init__(self):
        if len(self.digit_logits) < 1 or len(self.digit_logits) != len(self.decoded_ids):
            raise ArgumentError("Need one decoded id per digit logit vector, got {0} / {1}"
                                .format(len(self.digit_logits), len(self.decoded_ids)))
        dims = {np.shape(l) for l in self.digit_logits}
        if len(dims) != 1 or len(dims.pop()) != 1:
            raise ArgumentError("All digit logit vectors must be 1D with identical dimension")
        if np.size(self.digit_logits[0]) < 2:
            raise ArgumentError("Logit vectors need a dimension >= 2")
        if self.frame_index < 0:
            raise ArgumentError("Negative frame index {0}".format(self.frame_index))

    @property
    def width(self):
        return len(self.digit_logits)

    @property
    def tens_logits(self):
        return self.digit_logits[0]

    @property
    def ones_logits(self):
        return self.digit_logits[-1]

    @property
    def decoded_tens_id(self):
        return self.decoded_ids[0]

    @property
    def decoded_ones_id(self):
        return self.decoded_ids[-1]

    @classmethod
    def from_digits(cls, position, frame_index, tens_logits, ones_logits,
                    decoded_tens_id, decoded_ones_id):
        """ Record of a two digit token """
        return cls(int(position), int(frame_index),
                   (np.asarray(tens_logits, dtype=np.float64),
                    np.asarray(ones_logits, dtype=np.float64)),
                   (int(decoded_tens_id), int(decoded_ones_id)))

    @classmethod
    def from_dict(cls, d):
        """
        Construct a record from the JSON representation, either with the keys
        ``tens_logits, ones_logits, decoded_tens_id, decoded_ones_id`` or, for
        tokens with more digits, ``digit_logits, decoded_ids``.
        """
        if 'digit_logits' in d:
            return cls(int(d['position']), int(d['frame_index']),
                       tuple(np.asarray(l, dtype=np.float64) for l in d['digit_logits']),
                       tuple(int(i) for i in d['decoded_ids']))
        return cls.from_digits(d['position'], d['frame_index'], d['tens_logits'],
                               d['ones_logits'], d['decoded_tens_id'], d['decoded_ones_id'])

#------------------------------------------------------------------------------
def digit_pair_probability(rec, vocab_subset=None):
    """
    Probability of the decoded frame number of `rec`, approximated by the
    product of the softmax probabilities of the emitted digit ids,
    ``p(tens, ones) = p(tens) * p(ones)`` (product over all digits for wider
    tokens).

    Parameters
    ----------
    rec : LogitRecord

    vocab_subset : sequence of int, optional
        vocabulary ids (usually the ten digit tokens) the softmax is restricted
        to. By default the softmax runs over the full logit vector.

    Raises
    ------
    DecodedIdError
        when a decoded id is not a valid index (or not in `vocab_subset`)
    """
    p = 1.0
    for logits, dec_id in zip(rec.digit_logits, rec.decoded_ids):
        logits = np.asarray(logits, dtype=np.float64)
        if not 0 <= dec_id < logits.size:
            raise DecodedIdError("Decoded id {0} outside logit vector of size {1}"
                                 .format(dec_id, logits.size))
        if vocab_subset is not None:
            subset = list(vocab_subset)
            if dec_id not in subset:
                raise DecodedIdError("Decoded id {0} not in vocabulary subset".format(dec_id))
            p *= softmax(logits[subset])[subset.index(dec_id)]
        else:
            p *= softmax(logits)[dec_id]
    return float(p)

#==============================================================================
@dataclass(frozen=True, eq=False)
class ImportanceVector:
    """
    Per-frame importance ``scores`` on the normalized timeline and the mean
    probability over the selected frames, ``mean_score``.
    """
    scores: np.ndarray
    mean_score: float
    n_selected: int

    def to_dict(self):
        return {'scores': [float(s) for s in self.scores],
                'mean_score': float(self.mean_score),
                'n_selected': self.n_selected}

#------------------------------------------------------------------------------
def importance_vector(records, timeline_len, vocab_subset=None):
    """
    Build the importance vector of one prediction.

    Parameters
    ----------
    records : list of LogitRecord
        one record per selected frame, frame indices must be unique

    timeline_len : int
        length of the normalized timeline

    Returns
    -------
    ImportanceVector
        ``scores[frame_index] = p_i``, 0 elsewhere; ``mean_score`` is
        ``(1/M) * sum(p_i)`` over the M records

    Raises
    ------
    EmptySummaryError
        when `records` is empty

    ArgumentError
        for duplicate or out of range frame indices
    """
    records = list(records)
    if not records:
        raise EmptySummaryError("No logit records, importance scores are undefined")
    if timeline_len < 1:
        raise ArgumentError("Timeline length must be >= 1")

    scores = np.zeros(timeline_len, dtype=np.float64)
    seen = set()
    probs = []
    for rec in records:
        if rec.frame_index in seen:
            raise ArgumentError("Duplicate frame index {0} in logit records".format(rec.frame_index))
        if not 0 <= rec.frame_index < timeline_len:
            raise ArgumentError("Frame index {0} outside timeline [0, {1})"
                                .format(rec.frame_index, timeline_len))
        seen.add(rec.frame_index)
        p = digit_pair_probability(rec, vocab_subset)
        scores[rec.frame_index] = p
        probs.append(p)

    return ImportanceVector(scores, stable_mean(probs), len(probs))

#------------------------------------------------------------------------------
def load_logit_records(path):
    """
    Read logit records from a JSON lines file, one record per line with the
    fields ``position, frame_index, tens_logits, ones_logits, decoded_tens_id,
    decoded_ones_id`` (or ``digit_logits, decoded_ids``).

    Raises
    ------
    FormatError
        for missing fields or invalid values, ``offset`` is the line number
    """
    records = []
    for lineno, obj in read_jsonl(path):
        try:
            records.append(LogitRecord.from_dict(obj))
        except KeyError as e:
            raise FormatError("Missing field {0}".format(e), offset=lineno, path=path)
        except (TypeError, ValueError) as e:
            raise FormatError("Invalid logit record ({0})".format(e), offset=lineno, path=path)
    records.sort(key=lambda r: r.position)
    return records

#------------------------------------------------------------------------------
def first_records(records, frame_indices=None):
    """
    Keep the first record (lowest ``position``) per frame index, optionally
    only for the frame indices in `frame_indices`. Matches the keep-first rule
    of the summary parser for repeated temporal tokens.
    """
    keep = None if frame_indices is None else set(frame_indices)
    seen = set()
    out = []
    for rec in sorted(records, key=lambda r: r.position):
        if rec.frame_index in seen or (keep is not None and rec.frame_index not in keep):
            continue
        seen.add(rec.frame_index)
        out.append(rec)
    if len(out) < len(records):
        logger.debug("Kept {0} of {1} logit records".format(len(out), len(records)))
    return out
