# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Evaluation metrics for video, text and cross-modal summaries:

- frame overlap precision / recall / F1 on the normalized timeline
- Spearman's rho and Kendall's tau-b between importance scores
- F_CLIP: greedy matching of clamped cosine similarities between reference
  and predicted embedding sets (recall, precision, harmonic mean)
- Cross-F_CLIP: mean of the two cross-modal F_CLIP values
- VT-CLIPScore: cosine of the mean pooled frame and sentence embeddings
- BLEU-4 (optionally smoothed), ROUGE-L and CIDEr-D for text summaries
"""
from dataclasses import dataclass, asdict
from typing import Optional

import logging
logger = logging.getLogger(__name__)

import numpy as np
import scipy.stats
from nltk.tokenize import wordpunct_tokenize
from nltk.translate.bleu_score import (modified_precision, brevity_penalty,
                                       closest_ref_length, sentence_bleu,
                                       SmoothingFunction)
from pycocoevalcap.rouge.rouge import Rouge
from pycocoevalcap.cider.cider import Cider

from xumeval.libs.xum_lib import (ArgumentError, UndefinedScoreError, harmonic_mean,
                                  check_finite, stable_mean)
from xumeval.embeddings import mean_pooled
import xumeval.xumeval_rc as rc

BLEU_N = 4

#==============================================================================
@dataclass
class V2VScore:
    """ Frame overlap scores and rank correlations of a video summary """
    precision: float
    recall: float
    f1: float
    spearman: Optional[float] = None
    kendall: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ClipScore:
    """ Greedy matching recall, precision and their harmonic mean """
    r_clip: float
    p_clip: float
    f_clip: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TextScore:
    bleu4: float
    rouge_l: float
    cider: float

    def to_dict(self):
        return asdict(self)

#==============================================================================
# Frame overlap and rank correlation
#==============================================================================
def f1_frame_overlap(pred, gt):
    """
    Precision, recall and F1 of the predicted frame set `pred` against the
    ground truth frame set `gt` (canonical index lists on the same normalized
    timeline).

    The hits are the overlap of the 0 / 1 selection vectors of both sets.
    An empty `pred` or `gt` makes the corresponding ratio 0.

    Raises
    ------
    UndefinedScoreError
        when both lists are empty

    ArgumentError
        for negative frame indices
    """
    pred, gt = set(pred), set(gt)
    if not pred and not gt:
        raise UndefinedScoreError("Both predicted and ground truth summaries are empty")
    if min(pred | gt) < 0:
        raise ArgumentError("Negative frame index {0}".format(min(pred | gt)))
    length = max(pred | gt) + 1
    hits = int(binary_selection_scores(pred, length) @ binary_selection_scores(gt, length))
    precision = hits / len(pred) if pred else 0.
    recall = hits / len(gt) if gt else 0.
    return V2VScore(precision, recall, harmonic_mean(precision, recall))

#------------------------------------------------------------------------------
def binary_selection_scores(indices, length):
    """ 0 / 1 vector of `length` frames with ones at the selected `indices` """
    scores = np.zeros(length, dtype=np.float64)
    scores[list(indices)] = 1.
    return scores

#------------------------------------------------------------------------------
def _rank_inputs(x, y):
    x = check_finite(x, "x")
    y = check_finite(y, "y")
    if x.ndim != 1 or x.shape != y.shape:
        raise ArgumentError("Score vectors must be 1D with equal length, got {0} and {1}"
                            .format(x.shape, y.shape))
    if x.size < 2:
        raise UndefinedScoreError("Rank correlation needs at least 2 values")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedScoreError("Rank correlation of a constant vector is undefined")
    return x, y

def spearman_rho(x, y):
    """
    Spearman's rank correlation (Pearson correlation of the ranks, ties get
    the average rank).

    Raises
    ------
    UndefinedScoreError
        for constant vectors or less than two values
    """
    x, y = _rank_inputs(x, y)
    rho = scipy.stats.spearmanr(x, y)[0]
    return float(rho)

def kendall_tau(x, y):
    """
    Kendall's tau-b, ``(n_c - n_d) / sqrt((n_0 - n_x)(n_0 - n_y))`` with tie
    corrections ``n_x, n_y``.

    Raises
    ------
    UndefinedScoreError
        for constant vectors or less than two values
    """
    x, y = _rank_inputs(x, y)
    tau = scipy.stats.kendalltau(x, y, variant='b')[0]
    return float(tau)

#==============================================================================
# CLIP based scores
#==============================================================================
def greedy_match(ref, pred, clamp=True):
    """
    Greedy matching of two embedding sets: every reference vector is matched
    with its most similar predicted vector (recall) and vice versa
    (precision).

    Parameters
    ----------
    ref, pred : EmbeddingSet
        non-empty sets with identical dimension

    clamp : bool
        count only non-negative similarities, ``max(cos, 0)``

    Returns
    -------
    tuple of float
        ``(recall, precision)``; precision is computed as the recall with the
        roles swapped, ``greedy_match(a, b)[1] == greedy_match(b, a)[0]``
    """
    if len(ref) == 0 or len(pred) == 0:
        raise ArgumentError("Greedy matching needs non-empty embedding sets")
    recall = float(np.mean(ref.similarity_matrix(pred, clamp).max(axis=1)))
    precision = float(np.mean(pred.similarity_matrix(ref, clamp).max(axis=1)))
    return recall, precision

def r_clip(ref, pred):
    """ Mean over the reference items of the best clamped cosine to `pred` """
    return greedy_match(ref, pred)[0]

def p_clip(ref, pred):
    """ Mean over the predicted items of the best clamped cosine to `ref` """
    return greedy_match(ref, pred)[1]

def f_clip(ref, pred):
    """
    :class:`ClipScore` with R_CLIP, P_CLIP and their harmonic mean F_CLIP
    (0 when both are 0).
    """
    r, p = greedy_match(ref, pred)
    return ClipScore(r, p, harmonic_mean(p, r))

def cross_f_clip(v, v_hat, t, t_hat):
    """
    Cross-modal F_CLIP ``(F_CLIP(v, t_hat) + F_CLIP(v_hat, t)) / 2`` of
    reference video `v` / text `t` and predicted video `v_hat` / text `t_hat`.
    Frame and sentence embeddings have to live in a joint space.

    Raises
    ------
    ArgumentError
        for empty sets or when the dimensions differ across modalities
    """
    dims = {s.dim for s in (v, v_hat, t, t_hat)}
    if len(dims) != 1:
        raise ArgumentError("Frame and sentence embeddings need identical dimensions, got {0}"
                            .format(sorted(dims)))
    return (f_clip(v, t_hat).f_clip + f_clip(v_hat, t).f_clip) / 2.

def vt_clip_score(v_hat, t_hat):
    """
    Clamped cosine between the mean pooled (renormalized) predicted frame
    embeddings and the mean pooled predicted sentence embeddings.
    """
    if len(v_hat) == 0 or len(t_hat) == 0:
        raise ArgumentError("VT-CLIPScore needs non-empty frame and sentence sets")
    if v_hat.dim != t_hat.dim:
        raise ArgumentError("Dimension mismatch: {0} vs. {1}".format(v_hat.dim, t_hat.dim))
    return float(np.clip(np.dot(mean_pooled(v_hat), mean_pooled(t_hat)), 0., 1.))

#==============================================================================
# Text metrics
#==============================================================================
def tokenize(text):
    """
    Lowercase `text` and split it into runs of word characters and runs of
    punctuation, e.g. ``'The dish, plated.' -> ['the', 'dish', ',', 'plated', '.']``
    """
    return wordpunct_tokenize(text.lower())

#------------------------------------------------------------------------------
def _smoothing_function(name):
    """ nltk smoothing method for `name`, None for 'none' """
    if name not in rc.BLEU_SMOOTHING:
        raise ArgumentError("Unknown BLEU smoothing '{0}', use one of {1}"
                            .format(name, ", ".join(rc.BLEU_SMOOTHING)))
    return None if name == 'none' else getattr(SmoothingFunction(), name)

def bleu4(pred, ref, smoothing=None):
    """
    Sentence BLEU-4 of the token list `pred` against one reference `ref`:
    geometric mean of the clipped n-gram precisions (n = 1 ... 4) times the
    brevity penalty.

    `smoothing` is 'none' (any zero precision gives 0) or one of the methods
    ``method0 ... method7`` of nltk's ``SmoothingFunction``, default
    ``rc.params['Metrics']['bleu_smoothing']``.
    """
    smooth = _smoothing_function(rc.params['Metrics']['bleu_smoothing']
                                 if smoothing is None else smoothing)
    if not pred:
        logger.warning("Empty prediction, BLEU-4 = 0")
        return 0.
    if not ref:
        logger.warning("Empty reference, BLEU-4 = 0")
        return 0.
    if smooth is not None:
        return float(sentence_bleu([ref], pred, weights=(1. / BLEU_N,) * BLEU_N,
                                   smoothing_function=smooth))
    precisions = [modified_precision([ref], pred, n) for n in range(1, BLEU_N + 1)]
    if any(p.numerator == 0 for p in precisions):
        logger.debug("Zero {0}-gram precision, BLEU-4 = 0"
                     .format(1 + [p.numerator for p in precisions].index(0)))
        return 0.
    log_p = np.mean([np.log(p.numerator / p.denominator) for p in precisions])
    bp = brevity_penalty(closest_ref_length([ref], len(pred)), len(pred))
    return float(bp * np.exp(log_p))

#------------------------------------------------------------------------------
def rouge_l(pred, ref, beta=None):
    """
    ROUGE-L F-measure from the longest common subsequence of the token lists,
    ``R = LCS / |ref|``, ``P = LCS / |pred|``,
    ``F = (1 + beta^2) P R / (R + beta^2 P)`` with beta = 1 by default.
    """
    if not pred or not ref:
        logger.warning("Empty {0}, ROUGE-L = 0".format("prediction" if not pred else "reference"))
        return 0.
    scorer = Rouge()
    scorer.beta = rc.params['Metrics']['rouge_beta'] if beta is None else beta
    return float(scorer.calc_score([" ".join(pred)], [" ".join(ref)]))

#------------------------------------------------------------------------------
def cider(preds, refs, n=None, sigma=None):
    """
    CIDEr-D of a corpus: TF-IDF weighted cosine of 1 ... n-grams with clipped
    counts and a Gaussian length penalty, averaged over n and scaled by 10.
    The IDF is computed from the reference corpus.

    Parameters
    ----------
    preds, refs : list of token lists
        aligned by index

    Returns
    -------
    scores : list of float
        per item scores

    mean : float
        corpus mean
    """
    if len(preds) != len(refs):
        raise ArgumentError("Corpora differ in length: {0} predictions, {1} references"
                            .format(len(preds), len(refs)))
    if not preds:
        raise ArgumentError("CIDEr needs a non-empty corpus")
    if len(preds) < 2:
        logger.warning("CIDEr on a single item corpus: IDF is degenerate, the score is 0")

    par = rc.params['Metrics']
    scorer = Cider(n=par['cider_n'] if n is None else n,
                   sigma=par['cider_sigma'] if sigma is None else sigma)
    # keys are zero padded so the scorer's dict order is the corpus order
    keys = ["{0:09d}".format(i) for i in range(len(preds))]
    gts = {k: [" ".join(r)] for k, r in zip(keys, refs)}
    res = {k: [" ".join(p)] for k, p in zip(keys, preds)}
    mean, scores = scorer.compute_score(gts, res)
    return [float(s) for s in scores], float(mean)

#------------------------------------------------------------------------------
def text_scores(preds, refs):
    """
    BLEU-4, ROUGE-L and CIDEr-D for aligned corpora of token lists.

    Returns
    -------
    list of TextScore
        one per item

    dict
        corpus means of the three scores
    """
    cider_scores, _ = cider(preds, refs)
    scores = [TextScore(bleu4(p, r), rouge_l(p, r), c)
              for p, r, c in zip(preds, refs, cider_scores)]
    means = {k: stable_mean(getattr(s, k) for s in scores)
             for k in ('bleu4', 'rouge_l', 'cider')}
    return scores, means
