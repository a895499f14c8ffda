# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Parse model generated summaries (video, text or both) into clean text and the
list of referenced frames, and generate the task instructions.
"""
import re
import enum
from dataclasses import dataclass, field, replace

import logging
logger = logging.getLogger(__name__)

from xumeval.libs.xum_lib import EmptySummaryError, ArgumentError
from xumeval.temporal_codec import (DEFAULT_WIDTH, capacity, find_temporal_tokens,
                                    interleave_prompt, token_regex)

INSTRUCTION_TEMPLATE = "Please generate a {0} summarization for this video."

# anything that looks like an attempt at a temporal token, e.g. '[f7]', '[f1x]'
_TOKEN_LIKE = re.compile(r'\[f[^\]\s]{0,8}\]')
_WHITESPACE = re.compile(r'\s+')
_SENTENCE_END = re.compile(r'(?<=[.!?])\s+')


class TaskKind(enum.Enum):
    """ Summarization task, the value is the word used in the instruction """
    VIDEO = 'VIDEO'
    TEXT = 'TEXT'
    BOTH = 'BOTH'

    @classmethod
    def parse(cls, name):
        """ Case insensitive lookup, also accepts V2V / V2T / V2VT """
        if isinstance(name, cls):
            return name
        aliases = {'V2V': 'VIDEO', 'V2T': 'TEXT', 'V2VT': 'BOTH'}
        key = str(name).strip().upper()
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ArgumentError("Unknown task '{0}', use one of {1}"
                                .format(name, [t.value for t in cls]))


@dataclass(frozen=True)
class ParsedSummary:
    """
    Result of parsing a model output.

    ``frame_indices`` are in narrative order (first occurrence) until the
    summary is canonicalized by :func:`validate_against_timeline`, which sorts
    them. ``token_spans`` hold ``(offset in raw text, index)`` for every token
    found, including duplicates; spans of indices dropped by
    :func:`validate_against_timeline` are removed.
    """
    clean_text: str
    frame_indices: tuple
    token_spans: tuple
    task: TaskKind
    width: int = DEFAULT_WIDTH
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {'task': self.task.value,
                'indices': list(self.frame_indices),
                'text': self.clean_text,
                'spans': [list(s) for s in self.token_spans],
                'diagnostics': dict(self.diagnostics)}

#------------------------------------------------------------------------------
def make_task_instruction(task):
    """
    Return the instruction for `task`, e.g.
    'Please generate a BOTH summarization for this video.'
    """
    return INSTRUCTION_TEMPLATE.format(TaskKind.parse(task).value)

#------------------------------------------------------------------------------
def make_task_prompt(sequence, task):
    """
    Full text prompt: interleaved temporal tokens and visual slots followed by
    the task instruction.
    """
    return interleave_prompt(sequence) + "\n" + make_task_instruction(task)

#------------------------------------------------------------------------------
def _scan(raw, width):
    """
    Find tokens in `raw`, return ``(spans, indices, diagnostics)`` with
    duplicates removed from `indices` (first occurrence kept).
    """
    if not isinstance(raw, str):
        raise ArgumentError("Expected a string, got {0}".format(type(raw).__name__))
    found = find_temporal_tokens(raw, width)
    spans = tuple((offset, idx) for offset, idx, _ in found)
    indices = tuple(dict.fromkeys(idx for _, idx in spans)) # ordered dedupe

    n_like = len(_TOKEN_LIKE.findall(raw))
    diagnostics = {'tokens': len(spans),
                   'duplicates': len(spans) - len(indices),
                   'malformed': max(0, n_like - len(spans))}
    if diagnostics['malformed']:
        logger.warning("Skipped {0} malformed temporal token(s)".format(diagnostics['malformed']))
    if diagnostics['duplicates']:
        logger.debug("Removed {0} duplicate temporal token(s)".format(diagnostics['duplicates']))
    return spans, indices, diagnostics

#------------------------------------------------------------------------------
def strip_tokens(raw, width=DEFAULT_WIDTH):
    """
    Remove all temporal tokens from `raw` and collapse runs of whitespace into
    single blanks. A token glued between two words is replaced by a blank so
    the words stay separated.
    """
    return _WHITESPACE.sub(' ', token_regex(width).sub(' ', raw)).strip()

#------------------------------------------------------------------------------
def parse_v2v(raw, width=DEFAULT_WIDTH):
    """
    Parse a video summary that consists of temporal tokens only.

    Returns
    -------
    ParsedSummary
        with all decoded indices in order of appearance (duplicates removed)
        and empty ``clean_text``

    Raises
    ------
    EmptySummaryError
        when no valid token is found
    """
    spans, indices, diagnostics = _scan(raw, width)
    if not indices:
        raise EmptySummaryError("No temporal token found in video summary {0!r}"
                                .format(raw[:60]), diagnostics)
    return ParsedSummary('', indices, spans, TaskKind.VIDEO, width, diagnostics)

#------------------------------------------------------------------------------
def parse_v2vt(raw, width=DEFAULT_WIDTH):
    """
    Parse a text summary with embedded temporal tokens, e.g.
    ``'[f02] A chef chops onions. [f15] The dish is plated.'``

    The video summary is extracted from the tokens (order of appearance,
    duplicates removed), the text summary is the raw text without tokens.
    A text without tokens is a valid (text only) summary.
    """
    spans, indices, diagnostics = _scan(raw, width)
    return ParsedSummary(strip_tokens(raw, width), indices, spans, TaskKind.BOTH,
                         width, diagnostics)

#------------------------------------------------------------------------------
def parse_summary(raw, task=TaskKind.BOTH, width=DEFAULT_WIDTH):
    """
    Dispatch to :func:`parse_v2v` or :func:`parse_v2vt` depending on `task`.
    """
    task = TaskKind.parse(task)
    if task is TaskKind.VIDEO:
        return parse_v2v(raw, width)
    summary = parse_v2vt(raw, width)
    if task is TaskKind.TEXT:
        if summary.frame_indices:
            logger.warning("Text summary contains {0} temporal token(s), they are ignored"
                           .format(len(summary.token_spans)))
        return replace(summary, frame_indices=(), task=TaskKind.TEXT)
    return summary

#------------------------------------------------------------------------------
def validate_against_timeline(summary, tl_map=None, target_count=None):
    """
    Canonicalize `summary` for metric computation: drop indices outside the
    normalized timeline (they are logged, never clamped) and sort the rest
    ascending. The token spans of dropped indices are removed as well.

    Parameters
    ----------
    summary : ParsedSummary

    tl_map : TimelineMap, optional
        the normalized timeline, alternatively pass `target_count`

    Raises
    ------
    EmptySummaryError
        when the summary references frames but none of them is valid
    """
    if tl_map is not None:
        target_count = tl_map.target_count
    if target_count is None:
        raise ArgumentError("Either tl_map or target_count is required")
    limit = min(target_count, capacity(summary.width))

    kept = sorted(i for i in summary.frame_indices if 0 <= i < limit)
    dropped = [i for i in summary.frame_indices if not 0 <= i < limit]
    if dropped:
        logger.warning("Dropped frame index(es) {0} outside timeline [0, {1})"
                       .format(dropped, limit))
    if summary.frame_indices and not kept:
        diagnostics = dict(summary.diagnostics, dropped=len(dropped))
        raise EmptySummaryError("All frame indices {0} are outside the timeline [0, {1})"
                                .format(list(summary.frame_indices), limit), diagnostics)
    diagnostics = dict(summary.diagnostics)
    if dropped:
        diagnostics['dropped'] = diagnostics.get('dropped', 0) + len(dropped)
    spans = tuple(s for s in summary.token_spans if 0 <= s[1] < limit)
    return replace(summary, frame_indices=tuple(kept), token_spans=spans,
                   diagnostics=diagnostics)

#------------------------------------------------------------------------------
def split_sentences(text):
    """
    Split `text` at terminal punctuation (``.``, ``!``, ``?``) followed by
    whitespace. Empty pieces are dropped.
    """
    return [s.strip() for s in _SENTENCE_END.split(text.strip()) if s.strip()]
