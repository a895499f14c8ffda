# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Library with general functions, exceptions and variables needed by the
xumeval routines
"""

import sys
import math
import struct
import logging
logger = logging.getLogger(__name__)

import numpy as np
from scipy import __version__ as V_SCI

####### VERSIONS and related stuff ############################################
# ================ Required Modules ============================
# ==
# == When one of the following imports fails, terminate the program
V_NP = np.__version__
from nltk import __version__ as V_NLTK
from requests import __version__ as V_REQ

__all__ = ['XumError', 'FormatError', 'LoadError', 'ProviderError',
           'SemanticError', 'RangeError', 'TokenParseError', 'ArgumentError',
           'EmptySummaryError', 'UndefinedScoreError', 'NumericError',
           'DecodedIdError', 'mod_version', 'stable_mean', 'round_floats',
           'harmonic_mean', 'check_finite']

PY32_64 = struct.calcsize("P") * 8 # yields 32 or 64, depending on 32 or 64 bit Python

V_PY = ".".join(map(str, sys.version_info[:3])) + " (" + str(PY32_64) + " Bit)"

MODULES = {'python':   {'V_PY': V_PY},
           'numpy':    {'V_NP': V_NP},
           'scipy':    {'V_SCI': V_SCI},
           'nltk':     {'V_NLTK': V_NLTK},
           'requests': {'V_REQ': V_REQ}
           }

# ================ Optional Modules ============================
try:
    from importlib.metadata import version as _dist_version
    MODULES.update({'pycocoevalcap': {'V_COCO': _dist_version('pycocoevalcap')}})
except Exception:
    MODULES.update({'pycocoevalcap': {'V_COCO': None}})


def mod_version(mod=None):
    """
    Return the version of the module `mod`. If the module is not found, return
    None. When no module is specified, return a string with all modules and
    their versions sorted alphabetically, one per line.
    """
    if mod:
        if mod in MODULES:
            return list(MODULES[mod].values())[0]
        else:
            return None
    else:
        return "\n".join("{0:<14}: {1}".format(k, list(MODULES[k].values())[0])
                         for k in sorted(MODULES))

#==============================================================================
# Exceptions
#==============================================================================
class XumError(Exception):
    """
    Base class of all errors raised by xumeval. ``exit_code`` is the process
    exit code used by the command line interface.
    """
    exit_code = 1


class FormatError(XumError):
    """
    Malformed or truncated input file. ``offset`` is the byte offset (binary
    files) or the 1-based line number (text files) where the problem was found.
    """
    exit_code = 1

    def __init__(self, msg, offset=None, path=None):
        self.offset = offset
        self.path = path
        if offset is not None:
            msg = "{0} (at offset {1})".format(msg, offset)
        if path is not None:
            msg = "{0}: {1}".format(path, msg)
        super(FormatError, self).__init__(msg)


class LoadError(FormatError):
    """
    Manifest validation failed; ``lines`` maps 1-based line numbers to the
    list of problems found in that line.
    """
    def __init__(self, msg, lines=None, path=None):
        self.lines = dict(lines or {})
        details = "".join("\n\tline {0}: {1}".format(l, "; ".join(p))
                          for l, p in sorted(self.lines.items()))
        super(LoadError, self).__init__(msg + details, path=path)


class ProviderError(XumError):
    """
    Remote embedding provider failed. ``attempts`` is the number of requests
    made, ``status`` the last HTTP status (None for network errors) and
    ``retry_after`` the suggested wait time in seconds, when known.
    """
    exit_code = 1

    def __init__(self, msg, attempts=0, status=None, retry_after=None):
        self.attempts = attempts
        self.status = status
        self.retry_after = retry_after
        super(ProviderError, self).__init__(
            "{0} (attempts: {1}, status: {2})".format(msg, attempts, status))


class SemanticError(XumError):
    """ Input is well-formed but cannot be evaluated """
    exit_code = 2


class RangeError(SemanticError, ValueError):
    pass


class TokenParseError(SemanticError, ValueError):
    pass


class ArgumentError(SemanticError, ValueError):
    pass


class NumericError(SemanticError, ValueError):
    pass


class DecodedIdError(SemanticError, IndexError):
    pass


class UndefinedScoreError(SemanticError):
    pass


class EmptySummaryError(SemanticError):
    """
    No usable temporal token was found. ``diagnostics`` holds the parser
    counters (e.g. number of malformed tokens skipped).
    """
    def __init__(self, msg, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super(EmptySummaryError, self).__init__(msg)

#==============================================================================
# Numerical helpers
#==============================================================================
def check_finite(arr, name="input"):
    """
    Return `arr` as a float64 numpy array, raise :class:`NumericError` when it
    contains NaN or Inf values.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError("{0} contains NaN or Inf values.".format(name))
    return arr


def harmonic_mean(p, r):
    """
    Harmonic mean 2pr / (p + r) of precision `p` and recall `r`, defined as 0
    when p + r = 0.
    """
    if p + r <= 0:
        return 0.0
    return 2. * p * r / (p + r)


def stable_mean(values):
    """
    Arithmetic mean of `values` using exactly rounded summation (``math.fsum``),
    the result does not depend on the order of the values. Returns None for an
    empty sequence.
    """
    values = list(values)
    if not values:
        return None
    return math.fsum(values) / len(values)


def round_floats(obj, digits=6):
    """
    Return a copy of the (nested) dict / list `obj` with all floats rounded to
    `digits` decimal places. Keys and non-float items are left untouched.
    """
    if isinstance(obj, float):
        return round(obj, digits) + 0.0 # + 0.0 turns -0.0 into 0.0
    elif isinstance(obj, (np.floating,)):
        return round(float(obj), digits) + 0.0
    elif isinstance(obj, (np.integer,)):
        return int(obj)
    elif isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    else:
        return obj
