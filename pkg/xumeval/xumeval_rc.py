# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Default parameters for timeline, metrics, filters, the embedding provider
and the evaluation run.

Importing xumeval_rc runs the module once, defining all module variables
which are global (similar to class variables). The entries are updated from
the user configuration file by :mod:`xumeval.libs.conf_reader` and from the
command line by ``xumevalx``.
"""
import logging
logger = logging.getLogger(__name__)

PROVIDER_ENV = 'XUM_EVAL_PROVIDER_URL' #: env. variable for the provider URL

#: all metrics known to ``xumevalx eval``
ALL_METRICS = ('f1', 'spearman', 'kendall', 'fclip', 'cross_fclip',
               'vt_clipscore', 'bleu4', 'rouge_l', 'cider')

#: BLEU smoothing methods, 'none' or a method of nltk's SmoothingFunction
BLEU_SMOOTHING = ('none',) + tuple('method{0}'.format(i) for i in range(8))

#: allowed values of string parameters, (section, key) -> choices
CHOICES = {('Metrics', 'bleu_smoothing'): BLEU_SMOOTHING}

#: expected split sizes of the Instruct-V2Xum corpus
EXPECTED_SPLITS = {'train': 25000, 'val': 1000, 'test': 4000}

params = {'Timeline':
              {'target_frames': 100, # length of normalized timeline
               'token_width': 2,     # digits of temporal tokens, [f00] ... [f99]
               'fps': 1.0            # frame rate of the frame extraction
               },
          'Metrics':
              {'rouge_beta': 1.0,
               'bleu_smoothing': 'none',
               'cider_n': 4,
               'cider_sigma': 6.0,
               'percent': False,
               'float_digits': 6
               },
          'Filter':
              {'threshold': 0.93,
               'min_duration_s': 40.,
               'max_duration_s': 940.
               },
          'Provider':
              {'url': '',
               'endpoint': '/embed',
               'timeout_s': 30.,
               'retries': 3,
               'backoff_s': 0.5,
               'encoder': 'unknown'
               },
          'Eval':
              {'jobs': 1,
               'metrics': ['all']
               }
          }


def metric_config():
    """
    Return the metric configuration as echoed into every report (a copy).
    """
    cfg = dict(params['Metrics'])
    cfg.update({'cider_scale': 10.0, # fixed by the CIDEr-D scorer
                'bleu_n': 4,
                'kendall_variant': 'tau-b',
                'spearman_ties': 'average',
                'clip_clamp': 'max(cos, 0)',
                'tokenizer': 'lowercase, words and punctuation runs',
                'token_width': params['Timeline']['token_width'],
                'target_frames': params['Timeline']['target_frames']})
    return cfg
