# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Library with functions for file and text IO: JSON lines, the binary
embedding (XEMB) and similarity matrix (XSIM) formats and atomic writes.

XEMB layout (all little endian)::

    b'XEMB' | version u16 (=1) | count u32 | dim u32 |
    count x dim float32 (row major) |
    [label flag u8 (0/1) | count x (length u16 | utf-8 bytes)]

XSIM layout::

    b'XSIM' | count u32 | count x count float32
"""
import os
import io
import json
import struct
import tempfile

import logging
logger = logging.getLogger(__name__)

import numpy as np

from .xum_lib import FormatError

XEMB_MAGIC = b'XEMB'
XEMB_VERSION = 1
XSIM_MAGIC = b'XSIM'

_XEMB_HEADER = struct.Struct('<4sHII') # magic, version, count, dim
_XSIM_HEADER = struct.Struct('<4sI')   # magic, count
_U16 = struct.Struct('<H')

#------------------------------------------------------------------------------
def write_atomic(path, data, mode='wb'):
    """
    Write `data` (bytes or str, depending on `mode`) to `path` via a temporary
    file in the same directory which then replaces `path`, so a failed write
    never leaves a half-written file behind.
    """
    path = os.fspath(path)
    dir_name = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=dir_name, prefix='.tmp_', suffix='.xum')
    try:
        with os.fdopen(fd, mode, **({} if 'b' in mode else {'encoding': 'utf-8'})) as f:
            f.write(data)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise

#------------------------------------------------------------------------------
def read_jsonl(path):
    """
    Read a JSON lines file and return a list of ``(line_number, obj)`` tuples.
    Empty lines are skipped, line numbers start at 1.

    Raises
    ------
    FormatError
        when a line is not valid UTF-8, not valid JSON or not a JSON object,
        ``offset`` is the line number
    """
    records = []
    with io.open(path, 'rb') as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8').strip()
            except UnicodeDecodeError as e:
                raise FormatError("Invalid UTF-8: {0}".format(e), offset=lineno, path=path)
            if not line:
                continue
            try:
                obj = json.loads(line)
            except ValueError as e:
                raise FormatError("Invalid JSON: {0}".format(e), offset=lineno, path=path)
            if not isinstance(obj, dict):
                raise FormatError("Expected a JSON object", offset=lineno, path=path)
            records.append((lineno, obj))
    logger.debug("Read {0} records from '{1}'".format(len(records), path))
    return records

#------------------------------------------------------------------------------
def read_xemb(path):
    """
    Read an XEMB file.

    Returns
    -------
    data : ndarray
        float64 array with shape (count, dim), not normalized

    labels : list of str or None
        labels when the file contains a label block

    Raises
    ------
    FormatError
        with the byte offset of the problem (bad magic, unknown version,
        truncated payload or label block, trailing bytes)
    """
    with open(path, 'rb') as f:
        buf = f.read()

    if len(buf) < _XEMB_HEADER.size:
        raise FormatError("File too short for XEMB header ({0} bytes)".format(len(buf)),
                          offset=len(buf), path=path)
    magic, version, count, dim = _XEMB_HEADER.unpack_from(buf, 0)
    if magic != XEMB_MAGIC:
        raise FormatError("Bad magic {0!r}, expected {1!r}".format(magic, XEMB_MAGIC),
                          offset=0, path=path)
    if version != XEMB_VERSION:
        raise FormatError("Unsupported XEMB version {0}".format(version),
                          offset=4, path=path)
    if dim < 1:
        raise FormatError("Dimension must be >= 1", offset=10, path=path)

    pos = _XEMB_HEADER.size
    n_bytes = count * dim * 4
    if len(buf) < pos + n_bytes:
        raise FormatError("Truncated payload: expected {0} float32 values, found {1}"
                          .format(count * dim, (len(buf) - pos) // 4),
                          offset=len(buf), path=path)
    data = np.frombuffer(buf, dtype='<f4', count=count * dim, offset=pos)\
        .astype(np.float64).reshape(count, dim)
    pos += n_bytes

    labels = None
    if pos < len(buf): # optional label block
        flag = buf[pos]
        pos += 1
        if flag == 1:
            labels = []
            for _ in range(count):
                if pos + _U16.size > len(buf):
                    raise FormatError("Truncated label block", offset=pos, path=path)
                (length,) = _U16.unpack_from(buf, pos)
                pos += _U16.size
                if pos + length > len(buf):
                    raise FormatError("Truncated label", offset=pos, path=path)
                try:
                    labels.append(buf[pos:pos + length].decode('utf-8'))
                except UnicodeDecodeError as e:
                    raise FormatError("Label is not UTF-8 ({0})".format(e), offset=pos, path=path)
                pos += length
        elif flag != 0:
            raise FormatError("Invalid label flag {0}".format(flag), offset=pos - 1, path=path)
        if pos != len(buf):
            raise FormatError("{0} trailing bytes".format(len(buf) - pos), offset=pos, path=path)

    return data, labels

#------------------------------------------------------------------------------
def write_xemb(path, data, labels=None):
    """
    Write the 2D array `data` (count x dim) and optional `labels` as XEMB file.
    """
    data = np.asarray(data, dtype='<f4')
    if data.ndim != 2:
        raise ValueError("Expected a 2D array, got shape {0}".format(data.shape))
    count, dim = data.shape
    parts = [_XEMB_HEADER.pack(XEMB_MAGIC, XEMB_VERSION, count, dim), data.tobytes(order='C')]
    if labels is not None:
        if len(labels) != count:
            raise ValueError("{0} labels for {1} vectors".format(len(labels), count))
        parts.append(b'\x01')
        for label in labels:
            b = str(label).encode('utf-8')
            parts.append(_U16.pack(len(b)) + b)
    else:
        parts.append(b'\x00')
    write_atomic(path, b''.join(parts))

#------------------------------------------------------------------------------
def read_xsim(path):
    """
    Read an XSIM similarity matrix file and return a float64 array with shape
    (count, count).
    """
    with open(path, 'rb') as f:
        buf = f.read()
    if len(buf) < _XSIM_HEADER.size:
        raise FormatError("File too short for XSIM header", offset=len(buf), path=path)
    magic, count = _XSIM_HEADER.unpack_from(buf, 0)
    if magic != XSIM_MAGIC:
        raise FormatError("Bad magic {0!r}, expected {1!r}".format(magic, XSIM_MAGIC),
                          offset=0, path=path)
    n_bytes = count * count * 4
    pos = _XSIM_HEADER.size
    if len(buf) < pos + n_bytes:
        raise FormatError("Truncated payload: expected {0} float32 values".format(count * count),
                          offset=len(buf), path=path)
    if len(buf) > pos + n_bytes:
        raise FormatError("{0} trailing bytes".format(len(buf) - pos - n_bytes),
                          offset=pos + n_bytes, path=path)
    return np.frombuffer(buf, dtype='<f4', count=count * count, offset=pos)\
        .astype(np.float64).reshape(count, count)

#------------------------------------------------------------------------------
def write_xsim(path, sims):
    """
    Write the square matrix `sims` as XSIM file.
    """
    sims = np.asarray(sims, dtype='<f4')
    if sims.ndim != 2 or sims.shape[0] != sims.shape[1]:
        raise ValueError("Expected a square matrix, got shape {0}".format(sims.shape))
    write_atomic(path, _XSIM_HEADER.pack(XSIM_MAGIC, sims.shape[0]) + sims.tobytes(order='C'))

#------------------------------------------------------------------------------
def dump_json(obj):
    """
    Serialize `obj` deterministically: keys in insertion order, two spaces
    indentation, UTF-8 characters kept, trailing newline.
    """
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"

#------------------------------------------------------------------------------
def resolve_path(path, base_file):
    """
    Return `path` unchanged when it is absolute, otherwise relative to the
    directory of `base_file`.
    """
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(base_file)), path))
