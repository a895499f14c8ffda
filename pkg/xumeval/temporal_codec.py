# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Temporal prompt tokens like ``[f07]``, the mapping between the original frame
timeline of a video and the normalized timeline (100 frames by default) and
the interleaved sequence of temporal tokens and visual slots that is fed to
the language model.

All objects are immutable, all functions are pure.
"""
import re
import bisect
from dataclasses import dataclass
from functools import lru_cache

import logging
logger = logging.getLogger(__name__)

from xumeval.libs.xum_lib import RangeError, TokenParseError, ArgumentError

TOKEN_PREFIX = '[f'
TOKEN_SUFFIX = ']'
DEFAULT_WIDTH = 2
DEFAULT_TARGET = 100
SLOT_PLACEHOLDER = '<image>'

#------------------------------------------------------------------------------
@lru_cache(maxsize=None)
def token_regex(width):
    """
    Return the compiled regex matching temporal tokens with `width` digits.
    The pattern is not anchored to word boundaries, tokens glued to words
    like ``Start[f99]end`` are matched as well.
    """
    if width < 1:
        raise ArgumentError("Token width must be >= 1, got {0}".format(width))
    return re.compile(r'\[f(\d{{{0}}})\]'.format(width))

#------------------------------------------------------------------------------
def capacity(width):
    """ Number of distinct indices representable with `width` digits """
    return 10 ** width

#------------------------------------------------------------------------------
def _as_index(value, what="Frame index"):
    """ `value` as int, RangeError for non-integral values (2.5, '3', True) """
    try:
        ok = not isinstance(value, bool) and int(value) == value
    except (TypeError, ValueError, OverflowError):
        ok = False
    if not ok:
        raise RangeError("{0} must be an integer, got {1!r}".format(what, value))
    return int(value)

#------------------------------------------------------------------------------
def encode_temporal_token(
index, width=DEFAULT_WIDTH):
    """
    Render the frame `index` as temporal token, e.g. ``7 -> '[f07]'``.

    Parameters
    ----------
    index : int
        frame position on the normalized timeline, 0 <= index < 10**width

    width : int
        number of (zero padded) digits

    Returns
    -------
    str
        the token ``'[f' + zero padded index + ']'``

    Raises
    ------
    RangeError
        when `index` cannot be represented with `width` digits
    """
    if width < 1:
        raise ArgumentError("Token width must be >= 1, got {0}".format(width))
    index = _as_index(index)
    if not 0 <= index < capacity(width):
        raise RangeError("Frame index {0} out of range [0, {1}) for width {2}"
                         .format(index, capacity(width), width))
    return "{0}{1:0{2}d}{3}".format(TOKEN_PREFIX, index, width, TOKEN_SUFFIX)

#------------------------------------------------------------------------------
def decode_temporal_token(text, width=DEFAULT_WIDTH):
    """
    Return the frame index of the temporal token `text`, the inverse of
    :func:`encode_temporal_token`.

    Raises
    ------
    TokenParseError
        when `text` is not exactly one token with `width` digits
    """
    m = token_regex(width).fullmatch(text) if isinstance(text, str) else None
    if m is None:
        raise TokenParseError("Malformed temporal token {0!r} (width {1})".format(text, width))
    return int(m.group(1))

#------------------------------------------------------------------------------
def find_temporal_tokens(text, width=DEFAULT_WIDTH):
    """
    Scan `text` for temporal tokens.

    Returns
    -------
    list of tuple
        ``(offset, index, raw)`` per token in order of appearance, `offset`
        is the character offset of the token in `text`.
    """
    return [(m.start(), int(m.group(1)), m.group(0))
            for m in token_regex(width).finditer(text)]

#==============================================================================
@dataclass(frozen=True)
class TimelineMap:
    """
    Map from the normalized timeline (``target_count`` frames) to the frames
    of the source video (``original_count`` frames extracted at ``fps``).

    Normalized frame k corresponds to original frame
    ``floor(k * original_count / target_count)`` (uniform downsampling,
    frame starts). Videos shorter than the target are not upsampled, indices
    repeat instead and ``is_short`` is set.
    """
    original_count: int
    target_count: int = DEFAULT_TARGET
    fps: float = 1.0

    def __post_init__(self):
        if self.original_count < 1 or self.target_count < 1:
            raise ArgumentError("Frame counts must be >= 1, got original = {0}, target = {1}"
                                .format(self.original_count, self.target_count))
        if not self.fps > 0:
            raise ArgumentError("fps must be > 0, got {0}".format(self.fps))

    @property
    def is_short(self):
        """ True when the video has fewer frames than the normalized timeline """
        return self.original_count < self.target_count

    @property
    def is_identity(self):
        return self.original_count == self.target_count

    def __len__(self):
        return self.target_count

    def __call__(self, norm_index):
        """ Original frame index for normalized frame `norm_index` """
        norm_index = _as_index(norm_index, "Normalized index")
        if not 0 <= norm_index < self.target_count:
            raise RangeError("Normalized index {0} out of range [0, {1})"
                             .format(norm_index, self.target_count))
        return (norm_index * self.original_count) // self.target_count

    def indices(self):
        """ List of original frame indices for all normalized frames """
        return [(k * self.original_count) // self.target_count
                for k in range(self.target_count)]

    def to_normalized(self, original_index):
        """
        Largest normalized index k with ``self(k) <= original_index``, i.e. the
        normalized frame whose source interval contains `original_index`.
        """
        original_index = _as_index(original_index, "Original index")
        if not 0 <= original_index < self.original_count:
            raise RangeError("Original index {0} out of range [0, {1})"
                             .format(original_index, self.original_count))
        return bisect.bisect_right(self.indices(), original_index) - 1

#------------------------------------------------------------------------------
def build_timeline_map(original_count, target_count=DEFAULT_TARGET, fps=1.0):
    """
    Construct a :class:`TimelineMap`, e.g. ``build_timeline_map(200)(50) == 100``.

    Raises
    ------
    ArgumentError
        for frame counts < 1 or fps <= 0
    """
    tl_map = TimelineMap(int(original_count), int(target_count), float(fps))
    if tl_map.is_short:
        logger.info("Video with {0} frames is shorter than the normalized timeline ({1} frames)"
                    .format(original_count, target_count))
    return tl_map

#------------------------------------------------------------------------------
def to_original_timestamp(tl_map, norm_index):
    """
    Time in seconds of normalized frame `norm_index` in the source video,
    i.e. ``tl_map(norm_index) / fps``.
    """
    return tl_map(norm_index) / tl_map.fps

#==============================================================================
@dataclass(frozen=True)
class InterleavedSequence:
    """
    Ordered ``(temporal token, visual slot)`` pairs, one per normalized frame.
    The visual slot is the index of the original frame whose visual tokens
    follow the temporal token.
    """
    entries: tuple
    timeline: TimelineMap

    def __len__(self):
        return len(self.entries)

    def tokens(self):
        return [tok for tok, _ in self.entries]

    def slots(self):
        return [slot for _, slot in self.entries]

    def to_dict(self):
        return {'original_count': self.timeline.original_count,
                'target_count': self.timeline.target_count,
                'fps': self.timeline.fps,
                'is_short': self.timeline.is_short,
                'entries': [{'token': tok, 'slot': slot,
                             'time_s': slot / self.timeline.fps}
                            for tok, slot in self.entries]}

#------------------------------------------------------------------------------
def build_interleaved_sequence(tl_map, width=DEFAULT_WIDTH):
    """
    Pair temporal token k with the original frame ``tl_map(k)`` for all
    normalized frames k.

    Raises
    ------
    RangeError
        when the normalized timeline is longer than the token capacity
    """
    if tl_map.target_count > capacity(width):
        raise RangeError("{0} normalized frames cannot be addressed with {1} digit tokens"
                         .format(tl_map.target_count, width))
    entries = tuple((encode_temporal_token(k, width), slot)
                    for k, slot in enumerate(tl_map.indices()))
    return InterleavedSequence(entries, tl_map)

#------------------------------------------------------------------------------
def interleave_prompt(sequence, slot_placeholder=SLOT_PLACEHOLDER):
    """
    Render `sequence` as text prompt ``'[f00]<image>[f01]<image>...'`` where
    each placeholder stands for the visual tokens of one frame.
    """
    return "".join(tok + slot_placeholder for tok in sequence.tokens())
