# Command Line Interface
# See scripts/ directory for associated executable(s). All of the interesting
# functionality is implemented in this module to make it easier to test.
import json
import logging
import os
import sys

from docopt import docopt
import pandas
from tqdm import tqdm

import spellbench
from spellbench import inject, metrics
from spellbench.align import EvalTriple
from spellbench.textnorm import NormConfig
from spellbench.utils import (DecodeError, FormatError, SpellbenchException,
                              count_lines, decode, iter_lines, iter_raw_lines,
                              split_line_ending, write_json)


EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

TRIPLE_KEYS = ('original', 'predicted', 'expected')


# These functions lump together library code into monolithic operations for the
# CLI. They also print. To access this functionality programmatically, it is
# better to use the underlying library code.


def _require_files(*paths):
    for path in paths:
        if not os.path.isfile(path):
            raise FileNotFoundError(path)


def parse_jsonl_line(number, text, group_key=None):
    """
    Turn one JSONL line into an EvalTriple, or a LineError describing why it
    could not be.
    """
    if not text.strip():
        return metrics.LineError(number, 'empty line')
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        return metrics.LineError(number, f'invalid JSON: {exc.msg}')
    if not isinstance(record, dict):
        return metrics.LineError(number, 'expected a JSON object')
    missing = [key for key in TRIPLE_KEYS
               if not isinstance(record.get(key), str)]
    if missing:
        return metrics.LineError(
            number, f'missing or non-string keys: {", ".join(missing)}')
    group = record.get(group_key) if group_key else None
    return EvalTriple(record['original'], record['predicted'],
                      record['expected'], line=number,
                      group=None if group is None else str(group))


def read_jsonl_triples(path, group_key=None):
    "Yield an EvalTriple or a LineError for every line of a JSONL file."
    for number, offset, raw in iter_raw_lines(path):
        try:
            text = decode(raw, offset, path)
        except DecodeError as exc:
            yield metrics.LineError(number, str(exc))
            continue
        yield parse_jsonl_line(number, text.rstrip('\r\n'), group_key)


def read_parallel_triples(original_path, predicted_path, expected_path):
    """
    Yield an EvalTriple or a LineError for every line of three parallel
    one-sentence-per-line files.

    Raises
    ------
    FormatError
        If the files have different line counts.
    """
    paths = (original_path, predicted_path, expected_path)
    counts = [count_lines(path) for path in paths]
    if len(set(counts)) != 1:
        listing = ', '.join(f'{p} ({n})' for p, n in zip(paths, counts))
        raise FormatError('parallel files have different line counts: '
                          f'{listing}')
    for lines in zip(*(iter_raw_lines(path) for path in paths)):
        number = lines[0][0]
        try:
            texts = [decode(raw, offset, path).rstrip('\r\n')
                     for (_, offset, raw), path in zip(lines, paths)]
        except DecodeError as exc:
            yield metrics.LineError(number, str(exc))
            continue
        yield EvalTriple(*texts, line=number)


def format_summary(report):
    "Render the headline scores of a MetricReport as a text table."
    rows = {'detection': report.detection, 'correction': report.correction}
    table = pandas.DataFrame.from_dict(rows, orient='index')
    table = table[['precision', 'recall', 'f1', 'f0.5']]
    lines = [table.to_string(float_format='{:.4f}'.format),
             f'sentences: {report.n_sentences}  '
             f'hallucinated words: {report.n_hallucinated}']
    if report.n_skipped:
        lines.append(f'skipped (length mismatch): {report.n_skipped}')
    if report.groups:
        groups = pandas.DataFrame.from_dict(
            {name: {'sentences': group.n_sentences,
                    'detection f1': group.detection['f1'],
                    'correction f0.5': group.correction['f0.5']}
             for name, group in sorted(report.groups.items())},
            orient='index')
        lines.append(groups.to_string(float_format='{:.4f}'.format))
    return '\n'.join(lines)


def run_evaluate(source, *, norm, legacy=None, report_path=None,
                 group_key=None, threads=None, quiet=False):
    """
    Evaluate a triple file (or three parallel files) and print a summary.

    Parameters
    ----------
    source : string or tuple of 3 strings
        a JSONL path, or (original, predicted, expected) paths
    legacy : {None, 'positional', 'skip-mismatched'}
        use an unaligned contrast evaluator instead of the aligned one

    Returns
    -------
    exit_code : int
    """
    if isinstance(source, str):
        _require_files(source)
        if count_lines(source) == 0:
            print('no triples', file=sys.stderr)
            return EXIT_FATAL
        triples = read_jsonl_triples(source, group_key)
    else:
        _require_files(*source)
        if count_lines(source[0]) == 0:
            print('no triples', file=sys.stderr)
            return EXIT_FATAL
        triples = read_parallel_triples(*source)

    triples = tqdm(triples, desc='evaluating', unit=' triples',
                   disable=quiet)
    by_group = group_key is not None
    if legacy:
        report = metrics.legacy_evaluate(triples, norm, mode=legacy,
                                         threads=threads, by_group=by_group)
    else:
        report = metrics.evaluate_corpus(triples, norm, threads=threads,
                                         by_group=by_group)

    if report_path:
        write_json(report.to_dict(), report_path)
    print(format_summary(report))
    if report.errors:
        print(f'{len(report.errors)} malformed lines; see the report for '
              'details', file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def run_estimate(noisy_path, clean_path, out_path, *, norm, quiet=False):
    _require_files(noisy_path, clean_path)
    if count_lines(noisy_path) != count_lines(clean_path):
        raise FormatError('noisy and clean corpora have different numbers '
                          'of sentences')
    pairs = inject.parallel_pairs(
        (text for _, text in iter_lines(noisy_path)),
        (text for _, text in iter_lines(clean_path)))
    pairs = tqdm(pairs, desc='estimating', unit=' sentences', disable=quiet)
    model = inject.estimate_error_model(pairs, norm)
    model.dump(out_path)
    print(pandas.Series(model.proportions).to_string(
        float_format='{:.4f}'.format))
    print(f'pass-through rate: {model.pass_through_default:.4f}')
    return EXIT_OK


def run_inject(input_path, model_path, out_path, *, norm, pass_through=None,
               seed=0, max_edits=1, quiet=False):
    _require_files(input_path, model_path)
    model = inject.ErrorModel.load(model_path)
    if pass_through is None:
        pass_through = model.pass_through_default
    cfg = inject.InjectionConfig(pass_through_rate=pass_through, seed=seed,
                                 max_edits_per_word=max_edits)

    raw_lines = tqdm(iter_raw_lines(input_path), desc='injecting',
                     unit=' sentences', disable=quiet)
    try:
        with open(out_path, 'w', encoding='utf-8', newline='') as f:
            for index, (_, offset, raw) in enumerate(raw_lines):
                body, ending = split_line_ending(
                    decode(raw, offset, input_path))
                f.write(inject.inject_sentence(body, index, model, cfg,
                                               norm) + ending)
    except Exception:
        # no truncated output
        if os.path.exists(out_path):
            os.remove(out_path)
        raise

    percentage = inject.measure_error_percentage(
        (text for _, text in iter_lines(out_path)),
        (text for _, text in iter_lines(input_path)), norm)
    print(f'error percentage: {percentage:.6f}')
    return EXIT_OK


def run_measure(noisy_path, clean_path, *, norm):
    _require_files(noisy_path, clean_path)
    percentage = inject.measure_error_percentage(
        (text for _, text in iter_lines(noisy_path)),
        (text for _, text in iter_lines(clean_path)), norm)
    print(f'error percentage: {percentage:.6f}')
    return EXIT_OK


def _norm_config(arguments):
    return NormConfig(unicode_form=not arguments['--no-nfc'],
                      zwj_policy=arguments['--zwj'],
                      lowercase=arguments['--lowercase'])


def _parse_number(arguments, flag, kind):
    value = arguments[flag]
    if value is None:
        return None
    try:
        return kind(value)
    except ValueError:
        raise FormatError(f'{flag} expects a number, not {value!r}')


def main(argv=None):
    doc = """Command Line Interface to the spellbench Python package

Usage:
spellbench evaluate <triples> [--report <path>] [--legacy | --skip-mismatched]
                    [--group-key <key>] [--threads <n>] [options]
spellbench evaluate --parallel <original> <predicted> <expected>
                    [--report <path>] [--legacy | --skip-mismatched]
                    [--threads <n>] [options]
spellbench estimate <noisy> <clean> --out <path> [options]
spellbench inject <input> --model <model> --out <path>
                  [--pass-through <rate>] [--seed <seed>] [--max-edits <n>]
                  [options]
spellbench measure <noisy> <clean> [options]

Options:
-h --help              Show this screen.
--version              Show version.
--report <path>        Write the metric report as JSON.
--legacy               Compare word positions without alignment.
--skip-mismatched      Compare positions, dropping length-mismatched triples.
--group-key <key>      JSONL field whose value groups triples in the report.
--threads <n>          Worker processes (default: $SPELLBENCH_THREADS or 1).
--out <path>           Output file.
--model <model>        Error model JSON written by `spellbench estimate`.
--pass-through <rate>  Probability a word stays unchanged (default: model's).
--seed <seed>          Random seed. [default: 0]
--max-edits <n>        Most edits applied to one corrupted word. [default: 1]
--zwj <policy>         Zero-width joiner handling: keep, strip or cluster.
                       [default: cluster]
--no-nfc               Do not apply canonical composition.
--lowercase            Lowercase text before comparing.
--quiet                Hide progress bars.
--verbose              Log debugging output.
"""
    arguments = docopt(doc, argv=argv, version=spellbench.__version__)
    logging.basicConfig(
        level=logging.DEBUG if arguments['--verbose'] else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s')
    quiet = arguments['--quiet']

    try:
        norm = _norm_config(arguments)
        if arguments['evaluate']:
            legacy = None
            if arguments['--legacy']:
                legacy = 'positional'
            elif arguments['--skip-mismatched']:
                legacy = 'skip-mismatched'
            if arguments['--parallel']:
                source = (arguments['<original>'], arguments['<predicted>'],
                          arguments['<expected>'])
            else:
                source = arguments['<triples>']
            return run_evaluate(source, norm=norm, legacy=legacy,
                                report_path=arguments['--report'],
                                group_key=arguments['--group-key'],
                                threads=_parse_number(arguments, '--threads',
                                                      int),
                                quiet=quiet)
        elif arguments['estimate']:
            return run_estimate(arguments['<noisy>'], arguments['<clean>'],
                                arguments['--out'], norm=norm, quiet=quiet)
        elif arguments['inject']:
            return run_inject(
                arguments['<input>'], arguments['--model'], arguments['--out'],
                norm=norm,
                pass_through=_parse_number(arguments, '--pass-through', float),
                seed=_parse_number(arguments, '--seed', int),
                max_edits=_parse_number(arguments, '--max-edits', int),
                quiet=quiet)
        elif arguments['measure']:
            return run_measure(arguments['<noisy>'], arguments['<clean>'],
                               norm=norm)
    except FileNotFoundError as exc:
        print(f'No such file: {exc.filename or exc.args[0]}', file=sys.stderr)
        return EXIT_FATAL
    except (SpellbenchException, ValueError) as exc:
        print(f'Error: {exc}', file=sys.stderr)
        return EXIT_FATAL
    return EXIT_OK
