# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Command line interface ``xumevalx`` with the subcommands

- ``eval``    evaluate predictions against a manifest
- ``parse``   parse a raw model output
- ``scores``  importance scores from a logit file
- ``filter``  redundancy filter for caption similarities / embeddings
- ``stats``   corpus statistics of a manifest
- ``encode``  interleaved temporal prompt of a video

Exit codes: 0 success, 1 I/O or format error, 2 semantic error.
"""
import sys, os
import argparse

import logging
import logging.config
logger = logging.getLogger(__name__)

import xumeval.libs.xum_dirs as dirs
from xumeval.version import __version__
from xumeval.libs.xum_lib import XumError, ArgumentError, FormatError, round_floats, mod_version
from xumeval.libs.xum_io_lib import dump_json, write_atomic
from xumeval.libs.conf_reader import ConfReader, apply_env
import xumeval.xumeval_rc as rc

#========================= Setup the loggers ==================================
class DynFileHandler(logging.FileHandler):
    """
    subclass FileHandler with a customized handler for dynamic definition of
    the logging filepath and -name
    """
    def __init__(self, *args):
        filename, mode, encoding = args
        if filename == '':
            filename = dirs.LOG_FILE # use name including date
        if not os.path.isabs(filename): # path to logging file given in config_file?
            dirs.LOG_DIR_FILE = os.path.join(dirs.LOG_DIR, filename) # no, use default dir
        else:
            dirs.LOG_DIR_FILE = filename
        logging.FileHandler.__init__(self, dirs.LOG_DIR_FILE, mode, encoding)

# "register" custom class DynFileHandler as an attribute for the logging module
# to use it inside the logging config file and pass file name / path and mode
# as parameters:
logging.DynFileHandler = DynFileHandler

def setup_logging(verbosity=0):
    """
    Create the user config files if needed and configure logging from the
    user logging config file. When this fails, log to the console only.
    The console level is DEBUG for ``verbosity > 0``, ERROR for
    ``verbosity < 0``.
    """
    msgs = dirs.create_conf_files()
    try:
        if not dirs.LOG_DIR:
            raise OSError("no writable log directory")
        logging.config.fileConfig(dirs.USER_LOG_CONF_DIR_FILE,
                                  disable_existing_loggers=False)
    except Exception as e: # fileConfig raises KeyError, OSError, ...
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="[%(levelname)-7s] [%(module)s:%(lineno)d] %(message)s")
        msgs.append("Logging to console only ({0})".format(e))

    xum_logger = logging.getLogger('xumeval')
    handlers = xum_logger.handlers or logging.getLogger().handlers
    if verbosity:
        level = logging.DEBUG if verbosity > 0 else logging.ERROR
        xum_logger.setLevel(min(xum_logger.getEffectiveLevel(), level))
        for h in handlers:
            if not isinstance(h, logging.FileHandler):
                h.setLevel(level)
    for m in msgs:
        logger.info(m)
    logger.debug("Logging to {0}".format(dirs.LOG_DIR_FILE))

#==============================================================================
def _output(args, obj=None, text=None):
    """
    Write `obj` as JSON (or `text`) to ``--out`` or stdout.
    """
    if text is None:
        text = dump_json(round_floats(obj, rc.params['Metrics']['float_digits']))
    if getattr(args, 'out', None):
        write_atomic(args.out, text, mode='w')
        logger.info("Wrote '{0}'".format(args.out))
    else:
        sys.stdout.write(text)

def _read_input(path):
    """
    Text of the file `path` or of stdin (`path` is None or '-').

    Raises
    ------
    FormatError
        for invalid UTF-8, ``offset`` is the line number
    """
    if path in (None, '-'):
        stream = getattr(sys.stdin, 'buffer', None)
        if stream is None: # already decoded (e.g. replaced stdin)
            return sys.stdin.read()
        data = stream.read()
    else:
        with open(path, 'rb') as f:
            data = f.read()
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise FormatError("Invalid UTF-8: {0}".format(e), offset=data.count(b'\n', 0, e.start) + 1,
                          path=path)

#------------------------------------------------------------------------------
def cmd_eval(args):
    """ Evaluate the predictions for all videos of the manifest """
    from xumeval.dataset import load_manifest
    from xumeval.evaluator import Evaluator
    from xumeval.embeddings import EmbeddingProvider

    records = load_manifest(args.manifest, args.target_frames, args.token_width)
    provider_url = rc.params['Provider']['url']
    provider = EmbeddingProvider(provider_url) if provider_url else None
    evaluator = Evaluator(records, metrics=args.metrics, provider=provider,
                          token_width=args.token_width, target_frames=args.target_frames)
    report = evaluator.run(evaluator.load_predictions(args.predictions), jobs=args.jobs)

    table = report.to_table(percent=args.percent)
    if args.out:
        write_atomic(args.out, dump_json(report.to_dict()), mode='w')
        table_file = os.path.splitext(args.out)[0] + '.txt'
        write_atomic(table_file, table, mode='w')
        logger.info("Wrote report '{0}' and table '{1}'".format(args.out, table_file))
    elif args.format == 'table':
        sys.stdout.write(table)
    else:
        sys.stdout.write(dump_json(report.to_dict()))

def cmd_parse(args):
    """ Parse a raw model output from a file or stdin """
    from xumeval.summary_parser import parse_summary, validate_against_timeline

    summary = parse_summary(_read_input(args.input), args.task, args.token_width)
    if args.canonical:
        summary = validate_against_timeline(summary, target_count=args.target_frames)
    _output(args, summary.to_dict())

def cmd_scores(args):
    """ Importance vector from a logit records file """
    from xumeval.importance import load_logit_records, importance_vector

    vocab = None
    if args.vocab_subset:
        try:
            vocab = [int(v) for v in args.vocab_subset.split(',')]
        except ValueError:
            raise ArgumentError("--vocab-subset needs comma separated integers")
    ivec = importance_vector(load_logit_records(args.logits_file), args.target_frames, vocab)
    _output(args, ivec.to_dict())

def cmd_filter(args):
    """ Redundancy filter on a similarity matrix, embeddings or captions """
    from xumeval import embeddings as emb
    from xumeval.dataset import redundancy_filter, caption_similarity_matrix

    if args.sim_file:
        sims, source = emb.load_similarity_file(args.sim_file), args.sim_file
    elif args.embeddings:
        sims = emb.load_embedding_file(args.embeddings)
        source = sims.source
    elif args.token_embeddings:
        sims = caption_similarity_matrix([emb.load_embedding_file(p)
                                          for p in args.token_embeddings])
        source = ",".join(args.token_embeddings)
    else:
        url = rc.params['Provider']['url']
        lines = [l.strip() for l in _read_input(args.captions).splitlines() if l.strip()]
        sims = emb.fetch_remote(url, lines, kind=args.kind)
        source = sims.source
    kept = redundancy_filter(sims, args.threshold)
    _output(args, {'threshold': args.threshold, 'source': str(source), 'kept': kept})

def cmd_stats(args):
    """ Corpus statistics of a manifest """
    from xumeval import dataset as ds

    records = ds.load_manifest(args.manifest, args.target_frames, args.token_width)
    if args.filter_duration:
        records = ds.duration_filter(records)
    result = ds.corpus_stats(records).to_dict()
    result['splits'] = dict(zip(ds.SPLITS, ds.split_counts(records, args.check_splits)))
    result['histograms'] = ds.corpus_histograms(records, args.bins)
    _output(args, result)

def cmd_encode(args):
    """ Interleaved sequence of temporal tokens and frame slots """
    from xumeval.temporal_codec import build_timeline_map, build_interleaved_sequence
    from xumeval.summary_parser import make_task_prompt

    tl_map = build_timeline_map(args.frame_count, args.target_frames, args.fps)
    seq = build_interleaved_sequence(tl_map, args.token_width)
    result = seq.to_dict()
    if args.prompt:
        result['prompt'] = make_task_prompt(seq, args.prompt)
    _output(args, result)

#==============================================================================
def build_parser():
    """ Argument parser with one sub-parser per command """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help="more log output (DEBUG)")
    common.add_argument('-q', '--quiet', action='store_true', help="log errors only")
    common.add_argument('--config', metavar='PATH', help="alternate config file")
    common.add_argument('--out', metavar='PATH', help="output file (default: stdout)")
    common.add_argument('--token-width', type=int, metavar='N',
                        help="digits of temporal tokens (default 2)")
    common.add_argument('--target-frames', type=int, metavar='N',
                        help="length of the normalized timeline (default 100)")
    common.add_argument('--provider-url', metavar='URL',
                        help="embedding service (default ${0})".format(rc.PROVIDER_ENV))

    parser = argparse.ArgumentParser(
        prog='xumevalx', description="Evaluation toolkit for cross-modal video summarization")
    parser.add_argument('--version', action='version',
                        version='%(prog)s {0}'.format(__version__))
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('eval', parents=[common], help=cmd_eval.__doc__)
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--predictions', required=True, metavar='PATH')
    p.add_argument('--metrics', metavar='LIST', help="comma separated metrics or 'all'")
    p.add_argument('--format', choices=('json', 'table'), default='json')
    p.add_argument('--percent', action='store_true', default=None,
                   help="show F1, P, R and CLIP scores in percent (table only)")
    p.add_argument('--jobs', type=int, metavar='N', help="videos evaluated in parallel")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('parse', parents=[common], help=cmd_parse.__doc__)
    p.add_argument('input', nargs='?', default='-', help="file with the raw output, '-' = stdin")
    p.add_argument('--task', default='BOTH', help="VIDEO, TEXT or BOTH")
    p.add_argument('--canonical', action='store_true',
                   help="sort indices and drop those outside the timeline")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser('scores', parents=[common], help=cmd_scores.__doc__)
    p.add_argument('logits_file')
    p.add_argument('--vocab-subset', metavar='IDS',
                   help="comma separated vocabulary ids the softmax is restricted to")
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser('filter', parents=[common], help=cmd_filter.__doc__)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument('--sim-file', metavar='PATH', help="XSIM similarity matrix")
    src.add_argument('--embeddings', metavar='PATH', help="XEMB caption embeddings")
    src.add_argument('--token-embeddings', metavar='PATH', nargs='+',
                     help="one XEMB file of token embeddings per caption, compared by "
                          "greedy matching")
    src.add_argument('--captions', metavar='PATH',
                     help="captions, one per line, embedded by the provider")
    p.add_argument('--threshold', type=float, metavar='X', help="default 0.93")
    p.add_argument('--kind', choices=('text', 'frame'), default='text')
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser('stats', parents=[common], help=cmd_stats.__doc__)
    p.add_argument('--manifest', required=True, metavar='PATH')
    p.add_argument('--check-splits', action='store_true',
                   help="warn when the split proportions deviate from 25000/1000/4000")
    p.add_argument('--filter-duration', action='store_true',
                   help="apply the 40 ... 940 s duration filter first")
    p.add_argument('--bins', type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('encode', parents=[common], help=cmd_encode.__doc__)
    p.add_argument('--frame-count', type=int, required=True, metavar='N')
    p.add_argument('--fps', type=float)
    p.add_argument('--prompt', metavar='TASK', help="also render the prompt for VIDEO, TEXT or BOTH")
    p.set_defaults(func=cmd_encode)
    return parser

#------------------------------------------------------------------------------
def _apply_args(args):
    """
    Merge command line flags into ``rc.params`` (they take precedence over
    config file and environment) and fill in unset flags from ``rc.params``.
    """
    tl = rc.params['Timeline']
    if args.token_width is not None:
        tl['token_width'] = args.token_width
    if args.target_frames is not None:
        tl['target_frames'] = args.target_frames
    args.token_width = tl['token_width']
    args.target_frames = tl['target_frames']
    if args.provider_url:
        rc.params['Provider']['url'] = args.provider_url

    if getattr(args, 'fps', 'n/a') is None:
        args.fps = tl['fps']
    if getattr(args, 'threshold', 'n/a') is None:
        args.threshold = rc.params['Filter']['threshold']
    if getattr(args, 'percent', 'n/a') is None:
        args.percent = rc.params['Metrics']['percent']
    if getattr(args, 'jobs', 'n/a') is None:
        args.jobs = rc.params['Eval']['jobs']
    if getattr(args, 'metrics', 'n/a') is None:
        args.metrics = rc.params['Eval']['metrics']

#------------------------------------------------------------------------------
def main(argv=None):
    """
    entry point for the ``xumevalx`` command, returns the exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging(-1 if args.quiet else args.verbose)
    logger.debug("xumeval %s, module versions:\n%s", __version__, mod_version())

    ConfReader(args.config).parse_conf_file()
    apply_env()
    _apply_args(args)

    try:
        args.func(args)
    except XumError as e:
        logger.error("{0}: {1}".format(type(e).__name__, e))
        return e.exit_code
    except OSError as e:
        logger.error(str(e))
        return 1
    return 0

#------------------------------------------------------------------------------

if __name__ == '__main__':
    sys.exit(main())
