# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Dataset manifests: loading and validation, the deterministic curation steps
(duration filter, redundancy filter of frame captions) and corpus statistics.

A manifest is a JSON lines file with one video per line::

    {"video_id": "v0001", "duration_s": 183.0, "frame_count": 183, "fps": 1,
     "gt_video_summary": [3, 17, 42], "gt_text_summary": "[f03] A man ...",
     "gt_frame_scores": [...], "split": "test",
     "frame_emb": "emb/v0001_frames.xemb", "text_emb": "emb/v0001_text.xemb"}

``gt_frame_scores``, ``frame_emb`` and ``text_emb`` are optional, relative
paths are resolved against the manifest directory.
"""
import math
from collections import Counter
from dataclasses import dataclass, asdict

import logging
logger = logging.getLogger(__name__)

import numpy as np

from xumeval.libs.xum_lib import (ArgumentError, LoadError, SemanticError,
                                  harmonic_mean, stable_mean)
from xumeval.libs.xum_io_lib import read_jsonl, resolve_path
from xumeval.embeddings import EmbeddingSet
from xumeval.metrics import greedy_match, tokenize
from xumeval.summary_parser import strip_tokens, split_sentences
from xumeval.temporal_codec import build_timeline_map, capacity
import xumeval.xumeval_rc as rc

SPLITS = ('train', 'val', 'test')

#==============================================================================
@dataclass(frozen=True, eq=False)
class VideoRecord:
    """ One manifest entry """
    video_id: str
    duration_s: float
    frame_count: int
    fps: float
    gt_video_summary: tuple
    gt_text_summary: str
    split: str
    gt_frame_scores: np.ndarray = None
    frame_emb: str = None
    text_emb: str = None
    lineno: int = 0

    @property
    def compression_ratio(self):
        return len(self.gt_video_summary) / self.frame_count

    @property
    def clean_text(self):
        """ Ground truth text summary without temporal tokens """
        return strip_tokens(self.gt_text_summary, rc.params['Timeline']['token_width'])


@dataclass(frozen=True)
class CorpusStats:
    n_videos: int
    mean_duration_s: float
    mean_text_tokens: float
    mean_video_summary_frames: float
    mean_compression_ratio: float

    def to_dict(self):
        return asdict(self)

#------------------------------------------------------------------------------
def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)

def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)

def _project_original(original, frame_count, target, fps, problems):
    """
    Ground truth frames given on the original timeline, projected to the
    normalized timeline. Appends to `problems` and returns None when that's
    not possible.
    """
    if not isinstance(original, list) or not all(_is_int(i) for i in original):
        problems.append("'gt_original_frames' must be a list of integers")
        return None
    if not _is_int(frame_count) or frame_count < 1:
        return None # reported with 'frame_count'
    bad = [i for i in original if not 0 <= i < frame_count]
    if bad:
        problems.append("original frame(s) {0} outside [0, {1})".format(bad, frame_count))
        return None
    try:
        tl_map = build_timeline_map(frame_count, target, fps)
    except ArgumentError as e:
        problems.append(str(e))
        return None
    return [tl_map.to_normalized(i) for i in original]

def _validate(obj, target, width):
    """
    Check one manifest object, return ``(problems, record_kwargs)``.
    """
    problems = []
    for key in ('video_id', 'duration_s', 'frame_count', 'gt_text_summary', 'split'):
        if key not in obj:
            problems.append("missing field '{0}'".format(key))
    if 'gt_video_summary' not in obj and 'gt_original_frames' not in obj:
        problems.append("missing field 'gt_video_summary' (or 'gt_original_frames')")
    if problems:
        return problems, None

    video_id = obj['video_id']
    if not isinstance(video_id, str) or not video_id:
        problems.append("'video_id' must be a non-empty string")
    fps = obj.get('fps', 1.)
    if not _is_number(fps) or fps <= 0:
        problems.append("'fps' must be a positive number")
        fps = 1.
    duration = obj['duration_s']
    if not _is_number(duration) or duration <= 0:
        problems.append("'duration_s' must be a positive number")
    frame_count = obj['frame_count']
    if not _is_int(frame_count) or frame_count < 1:
        problems.append("'frame_count' must be a positive integer")
    elif _is_number(duration) and abs(frame_count - duration * fps) > 1:
        problems.append("'frame_count' {0} doesn't match duration_s x fps = {1:g}"
                        .format(frame_count, duration * fps))

    limit = min(target, capacity(width))
    gt = obj.get('gt_video_summary')
    original = obj.get('gt_original_frames')
    if gt is not None and original is not None:
        problems.append("give either 'gt_video_summary' or 'gt_original_frames', not both")
        gt = []
    elif original is not None:
        gt = _project_original(original, frame_count, target, fps, problems) or []
    elif not isinstance(gt, list) or not all(_is_int(i) for i in gt):
        problems.append("'gt_video_summary' must be a list of integers")
        gt = []
    elif list(gt) != sorted(set(gt)):
        logger.warning("'{0}': gt_video_summary not sorted / unique, canonicalizing"
                       .format(video_id))
    bad = [i for i in gt if not 0 <= i < limit]
    if bad:
        problems.append("gt index(es) {0} outside normalized timeline [0, {1})"
                        .format(bad, limit))
    if not isinstance(obj['gt_text_summary'], str):
        problems.append("'gt_text_summary' must be a string")
    if obj['split'] not in SPLITS:
        problems.append("unknown split {0!r}, use one of {1}".format(obj['split'], SPLITS))

    scores = obj.get('gt_frame_scores')
    if scores is not None:
        if not isinstance(scores, list) or not all(_is_number(s) for s in scores):
            problems.append("'gt_frame_scores' must be a list of numbers")
        elif len(scores) != target:
            problems.append("'gt_frame_scores' has {0} entries, expected {1}"
                            .format(len(scores), target))
        else:
            scores = np.asarray(scores, dtype=np.float64)
            scores.setflags(write=False)
    for key in ('frame_emb', 'text_emb'):
        if obj.get(key) is not None and not isinstance(obj[key], str):
            problems.append("'{0}' must be a path string".format(key))

    if problems:
        return problems, None
    return [], dict(video_id=video_id, duration_s=float(duration), frame_count=frame_count,
                    fps=float(fps), gt_video_summary=tuple(sorted(set(gt))),
                    gt_text_summary=obj['gt_text_summary'], split=obj['split'],
                    gt_frame_scores=scores)

#------------------------------------------------------------------------------
def load_manifest(path, target_frames=None, token_width=None):
    """
    Read and validate a manifest.

    Parameters
    ----------
    path : str
        JSON lines manifest

    target_frames, token_width : int, optional
        normalized timeline length and token width, default from
        ``rc.params['Timeline']``

    Returns
    -------
    list of VideoRecord
        in file order

    Raises
    ------
    LoadError
        listing every offending line (schema violations, out of range
        indices, duplicate video ids naming both lines)
    """
    tl = rc.params['Timeline']
    target = tl['target_frames'] if target_frames is None else target_frames
    width = tl['token_width'] if token_width is None else token_width

    records = []
    problems = {}
    first_line = {}
    for lineno, obj in read_jsonl(path):
        errs, kwargs = _validate(obj, target, width)
        vid = obj.get('video_id')
        if isinstance(vid, str):
            if vid in first_line:
                errs.append("duplicate video_id '{0}' (first seen in line {1})"
                            .format(vid, first_line[vid]))
                problems.setdefault(first_line[vid], []).append(
                    "video_id '{0}' repeated in line {1}".format(vid, lineno))
            else:
                first_line[vid] = lineno
        if errs:
            problems.setdefault(lineno, []).extend(errs)
            continue
        kwargs['frame_emb'] = resolve_path(obj.get('frame_emb'), path)
        kwargs['text_emb'] = resolve_path(obj.get('text_emb'), path)
        records.append(VideoRecord(lineno=lineno, **kwargs))

    if problems:
        raise LoadError("Invalid manifest with {0} offending line(s)".format(len(problems)),
                        lines=problems, path=path)
    logger.info("Loaded {0} videos from manifest '{1}'".format(len(records), path))
    return records

#==============================================================================
# Curation
#==============================================================================
def duration_filter(records, min_s=None, max_s=None):
    """
    Keep the records with ``min_s <= duration_s <= max_s`` (40 ... 940 s by
    default).
    """
    par = rc.params['Filter']
    min_s = par['min_duration_s'] if min_s is None else min_s
    max_s = par['max_duration_s'] if max_s is None else max_s
    kept = [r for r in records if min_s <= r.duration_s <= max_s]
    if len(kept) < len(records):
        logger.info("Duration filter [{0:g}, {1:g}] s removed {2} of {3} videos"
                    .format(min_s, max_s, len(records) - len(kept), len(records)))
    return kept

#------------------------------------------------------------------------------
def _as_matrix(sims):
    """ Similarity matrix from an array or from an EmbeddingSet (raw cosines) """
    if isinstance(sims, EmbeddingSet):
        return sims.similarity_matrix(sims, clamp=False)
    sims = np.asarray(sims, dtype=np.float64)
    if sims.size == 0:
        return sims.reshape(0, 0)
    if sims.ndim != 2 or sims.shape[0] != sims.shape[1]:
        raise ArgumentError("Similarity matrix must be square, got shape {0}".format(sims.shape))
    return sims

def redundancy_filter(sims, threshold=None):
    """
    Remove redundant frames: scan the frames in temporal order, keep frame 0
    and keep frame i only when its similarity to every frame kept so far is
    below `threshold`.

    Parameters
    ----------
    sims : array_like or EmbeddingSet
        square matrix of pairwise similarities in [-1, 1], or caption
        embeddings whose cosine similarities are used

    threshold : float
        0 < threshold <= 1, default ``rc.params['Filter']['threshold']``
        (0.93)

    Returns
    -------
    list of int
        kept frame indices, ascending

    Notes
    -----
    The kept count is not monotone in `threshold`: a lower threshold can drop
    an early frame and thereby keep later frames that were only similar to it.
    """
    threshold = rc.params['Filter']['threshold'] if threshold is None else threshold
    if not 0 < threshold <= 1:
        raise ArgumentError("Threshold must be in (0, 1], got {0}".format(threshold))
    sims = _as_matrix(sims)
    kept = []
    for i in range(sims.shape[0]):
        if all(sims[i, k] < threshold for k in kept):
            kept.append(i)
    logger.debug("Redundancy filter kept {0} of {1} frames".format(len(kept), sims.shape[0]))
    return kept

#------------------------------------------------------------------------------
def caption_similarity_matrix(token_sets):
    """
    Pairwise BERTScore-style similarity of captions: F1 of the greedy
    matching (without clamping) between the token embedding sets of two
    captions. The diagonal is 1.

    Parameters
    ----------
    token_sets : list of EmbeddingSet
        contextual token embeddings of each caption

    Returns
    -------
    ndarray
        symmetric matrix with shape (n, n)
    """
    n = len(token_sets)
    sims = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            r, p = greedy_match(token_sets[i], token_sets[j], clamp=False)
            sims[i, j] = sims[j, i] = harmonic_mean(p, r)
    return sims

#==============================================================================
# Statistics
#==============================================================================
def summary_sentences(record):
    """ Sentences of the ground truth text summary, temporal tokens removed """
    return split_sentences(record.clean_text)

def corpus_stats(records):
    """
    Mean duration, text summary length (tokens of the token-stripped
    summary), video summary length (frames) and compression ratio
    ``|gt_video_summary| / frame_count`` of a corpus.

    Raises
    ------
    ArgumentError
        for an empty corpus
    """
    records = list(records)
    if not records:
        raise ArgumentError("Corpus statistics need at least one video")
    return CorpusStats(
        n_videos=len(records),
        mean_duration_s=stable_mean(r.duration_s for r in records),
        mean_text_tokens=stable_mean(len(tokenize(r.clean_text)) for r in records),
        mean_video_summary_frames=stable_mean(len(r.gt_video_summary) for r in records),
        mean_compression_ratio=stable_mean(r.compression_ratio for r in records))

#------------------------------------------------------------------------------
def corpus_histograms(records, bins=10):
    """
    Histograms (counts and bin edges) of the source durations, the video
    summary lengths and the text summary lengths.
    """
    records = list(records)
    if not records:
        raise ArgumentError("Histograms need at least one video")
    data = {'duration_s': [r.duration_s for r in records],
            'video_summary_frames': [len(r.gt_video_summary) for r in records],
            'text_tokens': [len(tokenize(r.clean_text)) for r in records]}
    hists = {}
    for key, values in data.items():
        counts, edges = np.histogram(values, bins=bins)
        hists[key] = {'counts': counts.tolist(), 'edges': edges.tolist()}
    return hists

#------------------------------------------------------------------------------
def split_counts(records, check_expected=False, tolerance=0.01):
    """
    Number of records per split as tuple ``(train, val, test)``.

    Parameters
    ----------
    check_expected : bool
        warn when the proportions deviate by more than `tolerance` from the
        expected 25000 / 1000 / 4000 split

    Raises
    ------
    SemanticError
        for an unknown split label
    """
    counts = Counter()
    for r in records:
        if r.split not in SPLITS:
            raise SemanticError("Unknown split label {0!r} for '{1}'".format(r.split, r.video_id))
        counts[r.split] += 1
    result = tuple(counts[s] for s in SPLITS)

    total = sum(result)
    if check_expected and total:
        exp_total = sum(rc.EXPECTED_SPLITS.values())
        for s, n in zip(SPLITS, result):
            expected = rc.EXPECTED_SPLITS[s] / exp_total
            if abs(n / total - expected) > tolerance:
                logger.warning("Split '{0}' holds {1:.2%} of the videos, expected {2:.2%}"
                               .format(s, n / total, expected))
    return result
