"""
Detection and correction scores for spell correctors.

Each aligned record is classified into detection {TP, FP, FN, TN} and
correction {TP, FP, FN} counts; counts are summed over the whole corpus and
precision, recall, F1 and F0.5 are computed once from the sums.

With o, p, e the original, predicted and expected word of a record:

* a hallucinated record is a detection FP and a correction FP;
* otherwise the word is an error when o != e and flagged when p != o;
  flagged errors are detection TPs, flagged non-errors FPs, unflagged errors
  FNs and the rest TNs; an error with p == e is a correction TP, a flagged
  word with p != e a correction FP, an error with p != e a correction FN.

A missing word compares unequal to any word and equal only to another
missing word.
"""
import concurrent.futures
from collections import namedtuple
from dataclasses import dataclass, field, fields
import functools
import logging

import toolz

from spellbench.align import TripleRecord, triple_align
from spellbench.textnorm import DEFAULT_CONFIG, prepare
from spellbench.utils import ConsistencyError, settings


log = logging.getLogger(__name__)

BATCH_SIZE = 500

LineError = namedtuple('LineError', ('line', 'message'))

# Per-triple outcome produced by the workers.
TripleScore = namedtuple('TripleScore', ('group', 'counts', 'n_hallucinated'))
_SKIPPED = 'skipped'


@dataclass
class CountTable:
    det_tp: int = 0
    det_fp: int = 0
    det_fn: int = 0
    det_tn: int = 0
    cor_tp: int = 0
    cor_fp: int = 0
    cor_fn: int = 0

    def __add__(self, other):
        if not isinstance(other, CountTable):
            return NotImplemented
        return CountTable(**{f.name: getattr(self, f.name) +
                             getattr(other, f.name) for f in fields(self)})

    def __radd__(self, other):
        # lets sum() start from 0
        if other == 0:
            return self
        return self.__add__(other)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data):
        return cls(**{f.name: int(data[f.name]) for f in fields(cls)})


@dataclass
class MetricReport:
    detection: dict
    correction: dict
    counts: CountTable
    n_sentences: int
    n_hallucinated: int
    n_skipped: int = 0
    errors: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)

    def to_dict(self):
        data = {
            'detection': dict(self.detection),
            'correction': dict(self.correction),
            'counts': self.counts.to_dict(),
            'n_sentences': self.n_sentences,
            'n_hallucinated': self.n_hallucinated,
            'n_skipped': self.n_skipped,
            'errors': [{'line': e.line, 'message': e.message}
                       for e in self.errors],
        }
        if self.groups:
            data['groups'] = {name: report.to_dict()
                              for name, report in self.groups.items()}
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            detection=dict(data['detection']),
            correction=dict(data['correction']),
            counts=CountTable.from_dict(data['counts']),
            n_sentences=data['n_sentences'],
            n_hallucinated=data['n_hallucinated'],
            n_skipped=data.get('n_skipped', 0),
            errors=[LineError(e['line'], e['message'])
                    for e in data.get('errors', [])],
            groups={name: cls.from_dict(group)
                    for name, group in data.get('groups', {}).items()})


def f_beta(p, r, beta):
    """
    Weighted harmonic mean of precision and recall.

    Examples
    --------
    >>> round(f_beta(2 / 3, 1, 0.5), 4)
    0.7143
    """
    if beta <= 0:
        raise ValueError(f'beta must be positive, not {beta}')
    b2 = beta * beta
    denominator = b2 * p + r
    if p == 0 and r == 0 or denominator == 0:
        return 0.0
    return (1 + b2) * p * r / denominator


def precision_recall(tp, fp, fn):
    """
    Precision and recall, with a fixed convention for empty denominators.

    A ratio whose denominator is 0 is 1.0 when the other denominator is also
    0 (nothing to find and nothing claimed) and 0.0 otherwise.
    """
    claimed, relevant = tp + fp, tp + fn
    if claimed:
        precision = tp / claimed
    else:
        precision = 1.0 if relevant == 0 else 0.0
    if relevant:
        recall = tp / relevant
    else:
        recall = 1.0 if claimed == 0 else 0.0
    return precision, recall


def _scores(tp, fp, fn):
    precision, recall = precision_recall(tp, fp, fn)
    return {'precision': precision,
            'recall': recall,
            'f1': f_beta(precision, recall, 1.0),
            'f0.5': f_beta(precision, recall, 0.5)}


def report_from_counts(counts, n_sentences=0, n_hallucinated=0, n_skipped=0,
                       errors=None, groups=None):
    "Compute a MetricReport from (possibly merged) corpus counts."
    return MetricReport(
        detection=_scores(counts.det_tp, counts.det_fp, counts.det_fn),
        correction=_scores(counts.cor_tp, counts.cor_fp, counts.cor_fn),
        counts=counts,
        n_sentences=n_sentences,
        n_hallucinated=n_hallucinated,
        n_skipped=n_skipped,
        errors=list(errors or []),
        groups=dict(groups or {}))


def classify(rec):
    """
    Count one aligned record.

    Parameters
    ----------
    rec : TripleRecord

    Returns
    -------
    counts : CountTable

    Raises
    ------
    ConsistencyError
        If the record carries no token at all, or its hallucination flag
        disagrees with the tokens it carries.
    """
    o, p, e = rec.original_token, rec.predicted_token, rec.expected_token
    if o is None and p is None and e is None:
        raise ConsistencyError(f'empty record: {rec!r}')
    if rec.hallucinated != (p is not None and o is None and e is None):
        raise ConsistencyError(f'inconsistent hallucination flag: {rec!r}')

    if rec.hallucinated:
        return CountTable(det_fp=1, cor_fp=1)

    error = o != e
    flagged = p != o
    counts = CountTable()
    if error and flagged:
        counts.det_tp = 1
    elif flagged:
        counts.det_fp = 1
    elif error:
        counts.det_fn = 1
    else:
        counts.det_tn = 1
    if error and p == e:
        counts.cor_tp = 1
    if flagged and p != e:
        counts.cor_fp = 1
    if error and p != e:
        counts.cor_fn = 1
    return counts


def aligned_records(triple, cfg=DEFAULT_CONFIG):
    return triple_align(triple, cfg).records


def positional_records(triple, cfg=DEFAULT_CONFIG):
    """
    Compare the three sentences word by word without aligning them.

    Position i pairs original[i], predicted[i] and expected[i]; the longer
    sentences overhang with missing words on the shorter side. A single
    inserted word therefore shifts every following comparison.
    """
    original = prepare(triple.original, cfg).tokens
    predicted = prepare(triple.predicted, cfg).tokens
    expected = prepare(triple.expected, cfg).tokens

    def at(tokens, i):
        return tokens[i] if i < len(tokens) else None

    records = []
    for i in range(max(len(original), len(predicted), len(expected))):
        o, p, e = at(original, i), at(predicted, i), at(expected, i)
        records.append(TripleRecord(
            expected_token=e, original_token=o, predicted_token=p,
            hallucinated=p is not None and o is None and e is None))
    return records


def length_matched_records(triple, cfg=DEFAULT_CONFIG):
    """
    Positional comparison that drops triples whose predicted sentence has a
    different word count than the expected one. Returns None for those.
    """
    predicted = prepare(triple.predicted, cfg).tokens
    expected = prepare(triple.expected, cfg).tokens
    if len(predicted) != len(expected):
        return None
    return positional_records(triple, cfg)


LEGACY_MODES = {
    'positional': positional_records,
    'skip-mismatched': length_matched_records,
}


def _score_triple(triple, cfg, records_fn):
    if isinstance(triple, LineError):
        return triple
    if not prepare(triple.expected, cfg).tokens:
        return LineError(triple.line, 'empty expected sentence')
    records = records_fn(triple, cfg)
    if records is None:
        return _SKIPPED
    counts = sum((classify(rec) for rec in records), CountTable())
    n_hallucinated = sum(1 for rec in records if rec.hallucinated)
    return TripleScore(triple.group, counts, n_hallucinated)


def _score_batch(batch, cfg, records_fn):
    return [_score_triple(triple, cfg, records_fn) for triple in batch]


def _iter_scores(items, cfg, records_fn, threads):
    batches = toolz.partition_all(BATCH_SIZE, items)
    worker = functools.partial(_score_batch, cfg=cfg, records_fn=records_fn)
    if threads <= 1:
        for batch in batches:
            yield from worker(batch)
        return
    log.debug('scoring with %d worker processes', threads)
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        # Submit a bounded window at a time; map() keeps input order.
        for window in toolz.partition_all(threads * 2, batches):
            for scores in pool.map(worker, window):
                yield from scores


class _Tally:

    def __init__(self):
        self.counts = CountTable()
        self.n_sentences = 0
        self.n_hallucinated = 0

    def add(self, score):
        self.counts = self.counts + score.counts
        self.n_sentences += 1
        self.n_hallucinated += score.n_hallucinated

    def report(self, **kwargs):
        return report_from_counts(self.counts, self.n_sentences,
                                  self.n_hallucinated, **kwargs)


def _evaluate(items, cfg, records_fn, threads, by_group):
    if threads is None:
        threads = settings['threads']
    total = _Tally()
    groups = {}
    errors = []
    n_skipped = 0
    for score in _iter_scores(items, cfg, records_fn, threads):
        if isinstance(score, LineError):
            log.warning('line %s: %s', score.line, score.message)
            errors.append(score)
        elif isinstance(score, TripleScore):
            total.add(score)
            if by_group and score.group is not None:
                groups.setdefault(score.group, _Tally()).add(score)
        else:
            n_skipped += 1
    return total.report(
        n_skipped=n_skipped, errors=errors,
        groups={name: tally.report() for name, tally in groups.items()})


def evaluate_corpus(triples, cfg=DEFAULT_CONFIG, *, threads=None,
                    by_group=False):
    """
    Score a corpus with hallucination-aware three-way alignment.

    Parameters
    ----------
    triples : iterable
        EvalTriple objects; LineError objects may be interleaved to report
        input lines that could not be parsed, and are carried into the report.
    cfg : NormConfig
    threads : int, optional
        Number of worker processes (default: ``settings['threads']``).
    by_group : boolean
        Also report each ``EvalTriple.group`` separately.

    Returns
    -------
    report : MetricReport
        Micro-averaged over every record of every triple.
    """
    return _evaluate(triples, cfg, aligned_records, threads, by_group)


def legacy_evaluate(triples, cfg=DEFAULT_CONFIG, *, mode='positional',
                    threads=None, by_group=False):
    """
    Score a corpus without alignment, as older evaluation scripts do.

    ``mode='positional'`` compares word i with word i and lets insertions
    cascade; ``mode='skip-mismatched'`` silently drops every triple whose
    predicted length differs from the expected length (counted in
    ``n_skipped``). Meant only as a contrast to :func:`evaluate_corpus`.
    """
    try:
        records_fn = LEGACY_MODES[mode]
    except KeyError:
        raise ValueError(f'unknown legacy mode {mode!r}; '
                         f'expected one of {sorted(LEGACY_MODES)}')
    return _evaluate(triples, cfg, records_fn, threads, by_group)

