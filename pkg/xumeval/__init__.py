# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)
"""
Evaluation toolkit for cross-modal (video / text) summarization with
temporal prompt tokens.
"""
from .version import __version__
