# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Corpus evaluation: parse the predictions, compute the requested metrics per
video and assemble the :class:`EvalReport`.

Per-video failures (unparseable output, unreadable embedding file, undefined
correlation, ...) are recorded under ``errors`` and the affected metrics are
left out of the corpus means; videos without prediction are listed under
``missing``.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import logging
logger = logging.getLogger(__name__)

from xumeval.version import __version__
from xumeval.libs.xum_lib import XumError, ArgumentError, stable_mean, round_floats
from xumeval.libs.xum_io_lib import read_jsonl, resolve_path
from xumeval import embeddings as emb
from xumeval import importance as imp
from xumeval import metrics as mt
from xumeval.dataset import summary_sentences
from xumeval.summary_parser import (TaskKind, parse_summary, validate_against_timeline,
                                    split_sentences)
import xumeval.xumeval_rc as rc

#: metric groups of a per-video entry and the fields belonging to them
GROUPS = (('v2v', ('precision', 'recall', 'f1', 'spearman', 'kendall')),
          ('clip', ('r_clip', 'p_clip', 'f_clip')),
          ('cross_f_clip', None),
          ('vt_clip_score', None),
          ('text', ('bleu4', 'rouge_l', 'cider')),
          ('importance', ('mean_score',)))

#: metric names accepted by ``--metrics`` and the fields they produce
METRIC_FIELDS = {'f1': [('v2v', 'precision'), ('v2v', 'recall'), ('v2v', 'f1')],
                 'spearman': [('v2v', 'spearman')],
                 'kendall': [('v2v', 'kendall')],
                 'fclip': [('clip', 'r_clip'), ('clip', 'p_clip'), ('clip', 'f_clip')],
                 'cross_fclip': [('cross_f_clip', None)],
                 'vt_clipscore': [('vt_clip_score', None)],
                 'bleu4': [('text', 'bleu4')],
                 'rouge_l': [('text', 'rouge_l')],
                 'cider': [('text', 'cider')]}

#: fields rendered in percent with ``--percent``
PERCENT_FIELDS = {'precision', 'recall', 'f1', 'r_clip', 'p_clip', 'f_clip',
                  'cross_f_clip', 'vt_clip_score'}

#------------------------------------------------------------------------------
def parse_metric_list(spec):
    """
    Convert ``'all'`` or a comma separated list (or a list) of metric names
    to a sorted-by-definition list.
    """
    if isinstance(spec, str):
        spec = [s.strip().lower() for s in spec.split(',') if s.strip()]
    spec = list(spec)
    if not spec or 'all' in spec:
        return list(rc.ALL_METRICS)
    unknown = [m for m in spec if m not in METRIC_FIELDS]
    if unknown:
        raise ArgumentError("Unknown metric(s) {0}, use {1} or 'all'"
                            .format(unknown, list(rc.ALL_METRICS)))
    return [m for m in rc.ALL_METRICS if m in spec]

#------------------------------------------------------------------------------
def _flat(entry):
    """ Iterate over ``((group, key), value)`` of a per-video entry """
    for group, keys in GROUPS:
        if group not in entry:
            continue
        if keys is None:
            yield (group, None), entry[group]
        else:
            for k in keys:
                if k in entry[group]:
                    yield (group, k), entry[group][k]

def _nest(flat):
    """ Inverse of :func:`_flat`, keeps the group order of ``GROUPS`` """
    out = {}
    for group, keys in GROUPS:
        if keys is None:
            if (group, None) in flat:
                out[group] = flat[(group, None)]
        else:
            sub = {k: flat[(group, k)] for k in keys if (group, k) in flat}
            if sub:
                out[group] = sub
    return out

#==============================================================================
@dataclass
class EvalReport:
    """
    Result of an evaluation run. ``corpus_means`` average the present per-video
    values, ``counts`` give the number of videos behind every mean.
    """
    per_video: dict
    corpus_means: dict
    counts: dict
    config_echo: dict
    provenance: dict
    missing: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self):
        return {'tool': 'xumeval',
                'tool_version': self.tool_version,
                'config_echo': self.config_echo,
                'provenance': self.provenance,
                'n_videos': len(self.per_video),
                'corpus_means': self.corpus_means,
                'counts': self.counts,
                'missing': self.missing,
                'errors': self.errors,
                'per_video': self.per_video}

    @classmethod
    def from_dict(cls, d):
        return cls(per_video=d['per_video'], corpus_means=d['corpus_means'],
                   counts=d['counts'], config_echo=d['config_echo'],
                   provenance=d['provenance'], missing=d.get('missing', []),
                   errors=d.get('errors', {}), tool_version=d['tool_version'])

    #--------------------------------------------------------------------------
    def to_table(self, percent=False, digits=None):
        """
        Aligned plain text table with one row per video and a final row with
        the corpus means.
        """
        digits = self.config_echo.get('float_digits', 6) if digits is None else digits
        cols = []
        for _, entry in sorted(self.per_video.items()):
            for key, _ in _flat(entry):
                if key not in cols:
                    cols.append(key)
        for key, _ in _flat(self.corpus_means):
            if key not in cols:
                cols.append(key)
        order = [k for g, ks in GROUPS for k in ([(g, None)] if ks is None else [(g, x) for x in ks])]
        cols = [c for c in order if c in cols]

        def fmt(key, val):
            if val is None:
                return '-'
            name = key[1] or key[0]
            if percent and name in PERCENT_FIELDS:
                val = 100. * val
            return "{0:.{1}f}".format(val, digits)

        header = ['video_id'] + [(k or g) for g, k in cols]
        rows = []
        for vid, entry in sorted(self.per_video.items()):
            flat = dict(_flat(entry))
            rows.append([vid] + [fmt(c, flat.get(c)) for c in cols])
        flat_means = dict(_flat(self.corpus_means))
        rows.append(['MEAN'] + [fmt(c, flat_means.get(c)) for c in cols])

        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w)
                           for i, (h, w) in enumerate(zip(r, widths)))
                 for r in [header] + rows]
        lines.insert(1, "  ".join('-' * w for w in widths))
        if self.missing:
            lines.append("missing: {0}".format(", ".join(self.missing)))
        if self.errors:
            lines.append("errors: {0}".format(", ".join(sorted(self.errors))))
        return "\n".join(lines) + "\n"

#==============================================================================
class Evaluator(object):
    """
    Evaluate the predictions for the videos of a manifest.

    Parameters
    ----------
    records : list of VideoRecord
        validated manifest

    metrics : list of str
        metrics to compute, see :data:`METRIC_FIELDS`

    provider : EmbeddingProvider, optional
        used to embed predicted sentences when a prediction has no
        ``text_emb`` file
    """

    def __init__(self, records, metrics=None, provider=None, token_width=None,
                 target_frames=None, vocab_subset=None):
        self.records = {r.video_id: r for r in records}
        self.metrics = parse_metric_list(rc.params['Eval']['metrics'] if metrics is None
                                         else metrics)
        self.provider = provider
        tl = rc.params['Timeline']
        self.width = tl['token_width'] if token_width is None else token_width
        self.target = tl['target_frames'] if target_frames is None else target_frames
        self.vocab_subset = vocab_subset
        self.fields = {f for m in self.metrics for f in METRIC_FIELDS[m]}

    def wants(self, *groups):
        return any(g == f[0] for f in self.fields for g in groups)

    #--------------------------------------------------------------------------
    def load_predictions(self, path):
        """
        Read the predictions file, return a dict video_id -> prediction dict
        with resolved paths. Predictions for unknown videos are dropped with
        a warning, for repeated video ids the last line wins.
        """
        preds = {}
        for lineno, obj in read_jsonl(path):
            vid = obj.get('video_id')
            if vid not in self.records:
                logger.warning("Prediction in line {0} for unknown video {1!r}, skipped"
                               .format(lineno, vid))
                continue
            if vid in preds:
                logger.warning("Repeated prediction for '{0}' in line {1}, using the last one"
                               .format(vid, lineno))
            preds[vid] = {'output': obj.get('output', ''),
                          'task': obj.get('task', TaskKind.BOTH.value),
                          'logits': resolve_path(obj.get('logits'), path),
                          'text_emb': resolve_path(obj.get('text_emb'), path)}
        return preds

    #--------------------------------------------------------------------------
    def _load_emb(self, path, what, errors):
        if not path:
            return None
        try:
            return emb.load_embedding_file(path)
        except (XumError, OSError) as e:
            logger.error("Cannot read {0} embeddings: {1}".format(what, e))
            errors.append("{0} embeddings: {1}".format(what, e))
            return None

    def evaluate_video(self, record, pred):
        """
        Compute the per-video metrics.

        Returns
        -------
        entry : dict
            nested metric groups (only present metrics)

        errors : list of str

        provenance : dict
            embedding sources used

        text_pair : tuple or None
            ``(predicted tokens, reference tokens)`` for the corpus level text
            metrics
        """
        errors = []
        flat = {}
        prov = {}
        try:
            summary = parse_summary(pred['output'], pred['task'], self.width)
            summary = validate_against_timeline(summary, target_count=self.target)
        except XumError as e:
            logger.error("'{0}': {1}".format(record.video_id, e))
            return {}, ["parse: {0}".format(e)], prov, None
        indices = list(summary.frame_indices)
        has_video = summary.task is not TaskKind.TEXT
        has_text = summary.task is not TaskKind.VIDEO

        # --- frame overlap and rank correlation --------------------------
        if has_video and self.wants('v2v'):
            try:
                v2v = mt.f1_frame_overlap(indices, record.gt_video_summary)
                if ('v2v', 'f1') in self.fields:
                    flat.update({('v2v', 'precision'): v2v.precision,
                                 ('v2v', 'recall'): v2v.recall, ('v2v', 'f1'): v2v.f1})
            except XumError as e:
                errors.append("f1: {0}".format(e))

        ivec = None
        if has_video and pred['logits']:
            try:
                records = imp.load_logit_records(pred['logits'])
                ivec = imp.importance_vector(imp.first_records(records, indices),
                                             self.target, self.vocab_subset)
                flat[('importance', 'mean_score')] = ivec.mean_score
            except (XumError, OSError) as e:
                errors.append("importance: {0}".format(e))
        if ivec is not None and record.gt_frame_scores is not None:
            for name, func in (('spearman', mt.spearman_rho), ('kendall', mt.kendall_tau)):
                if ('v2v', name) in self.fields:
                    try:
                        flat[('v2v', name)] = func(ivec.scores, record.gt_frame_scores)
                    except XumError as e:
                        errors.append("{0}: {1}".format(name, e))

        # --- embedding based scores --------------------------------------
        v = v_hat = t = t_hat = None
        if self.wants('clip', 'cross_f_clip', 'vt_clip_score'):
            frames = self._load_emb(record.frame_emb, "frame", errors)
            if frames is not None:
                prov['frame_emb'] = frames.source
                try:
                    v = frames.select(record.gt_video_summary) if record.gt_video_summary else None
                    v_hat = frames.select(indices) if (has_video and indices) else None
                except XumError as e:
                    errors.append("frame embeddings: {0}".format(e))
            t = self._load_emb(record.text_emb, "reference text", errors)
            if t is None and not record.text_emb and self.provider is not None:
                sentences = summary_sentences(record)
                if sentences:
                    try:
                        t = self.provider.fetch(sentences, 'text')
                    except XumError as e:
                        errors.append("provider: {0}".format(e))
            if t is not None:
                prov['text_emb'] = t.source
            if has_text and summary.clean_text:
                if pred['text_emb']:
                    t_hat = self._load_emb(pred['text_emb'], "predicted text", errors)
                elif self.provider is not None:
                    try:
                        t_hat = self.provider.fetch(split_sentences(summary.clean_text), 'text')
                    except XumError as e:
                        errors.append("provider: {0}".format(e))
                if t_hat is not None:
                    prov['pred_text_emb'] = t_hat.source

        try:
            if ('clip', 'f_clip') in self.fields and v is not None and v_hat is not None:
                cs = mt.f_clip(v, v_hat)
                flat.update({('clip', 'r_clip'): cs.r_clip, ('clip', 'p_clip'): cs.p_clip,
                             ('clip', 'f_clip'): cs.f_clip})
            if ('cross_f_clip', None) in self.fields and None not in (v, v_hat, t, t_hat):
                flat[('cross_f_clip', None)] = mt.cross_f_clip(v, v_hat, t, t_hat)
            if ('vt_clip_score', None) in self.fields and None not in (v_hat, t_hat):
                flat[('vt_clip_score', None)] = mt.vt_clip_score(v_hat, t_hat)
        except XumError as e:
            errors.append("clip: {0}".format(e))

        text_pair = None
        if has_text and self.wants('text'):
            text_pair = (mt.tokenize(summary.clean_text), mt.tokenize(record.clean_text))

        return _nest(flat), errors, prov, text_pair

    #--------------------------------------------------------------------------
    def run(self, predictions, jobs=None):
        """
        Evaluate all videos of the manifest.

        Parameters
        ----------
        predictions : dict
            video_id -> prediction, as returned by :meth:`load_predictions`

        jobs : int
            number of videos evaluated in parallel (threads); the report does
            not depend on it

        Returns
        -------
        EvalReport
        """
        jobs = max(1, rc.params['Eval']['jobs'] if jobs is None else jobs)
        vids = sorted(self.records)
        missing = [v for v in vids if v not in predictions]
        todo = [v for v in vids if v in predictions]
        if missing:
            logger.warning("{0} video(s) without prediction".format(len(missing)))

        def work(vid):
            return vid, self.evaluate_video(self.records[vid], predictions[vid])

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = dict(pool.map(work, todo))
        else:
            results = dict(map(work, todo))

        per_video = {}
        errors = {}
        provenance = {'encoder': rc.params['Provider']['encoder'],
                      'provider_url': self.provider.url if self.provider else None,
                      'frame_emb': set(), 'text_emb': set(), 'pred_text_emb': set()}
        text_vids = []
        for vid in todo:
            entry, errs, prov, text_pair = results[vid]
            per_video[vid] = entry
            if errs:
                errors[vid] = errs
            for k, src in prov.items():
                provenance[k].add(src)
            if text_pair is not None:
                text_vids.append((vid, text_pair))

        # --- corpus level text metrics ------------------------------------
        if text_vids:
            preds = [p for _, (p, _) in text_vids]
            refs = [r for _, (_, r) in text_vids]
            try:
                cider_scores = (mt.cider(preds, refs)[0] if ('text', 'cider') in self.fields
                                else [None] * len(preds))
            except XumError as e:
                logger.error("CIDEr: {0}".format(e))
                cider_scores = [None] * len(preds)
            for (vid, (p, r)), c in zip(text_vids, cider_scores):
                text = {}
                if ('text', 'bleu4') in self.fields:
                    text['bleu4'] = mt.bleu4(p, r)
                if ('text', 'rouge_l') in self.fields:
                    text['rouge_l'] = mt.rouge_l(p, r)
                if c is not None:
                    text['cider'] = c
                if text:
                    flat = dict(_flat(per_video[vid]))
                    flat.update({('text', k): val for k, val in text.items()})
                    per_video[vid] = _nest(flat)

        # --- corpus means -------------------------------------------------
        collected = {}
        for vid in todo:
            for key, val in _flat(per_video[vid]):
                if val is not None:
                    collected.setdefault(key, []).append(val)
        means = _nest({k: stable_mean(vals) for k, vals in collected.items()})
        counts = _nest({k: len(vals) for k, vals in collected.items()})

        config = rc.metric_config()
        config['metrics'] = list(self.metrics)
        digits = config['float_digits']
        provenance = {k: (sorted(os.fspath(s) for s in v) if isinstance(v, set) else v)
                      for k, v in provenance.items()}
        logger.info("Evaluated {0} video(s), {1} missing, {2} with errors"
                    .format(len(todo), len(missing), len(errors)))
        return EvalReport(per_video=round_floats(per_video, digits),
                          corpus_means=round_floats(means, digits),
                          counts=counts, config_echo=round_floats(config, digits),
                          provenance=provenance, missing=missing, errors=errors)
