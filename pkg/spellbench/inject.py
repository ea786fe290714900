"""
Estimate spelling-error distributions from parallel corpora and inject
synthetic errors into clean text.

Error intensity is controlled by the pass-through rate, the probability that a
word is emitted unchanged. A corrupted word receives one edit (by default)
whose type is drawn from the model's proportions over substitution, insertion,
deletion and transposition of grapheme clusters.

Randomness is counter-based: every word gets its own Philox stream keyed by
the seed, with the counter derived from (sentence index, word index). Output
therefore depends only on the seed and the position of each word, never on
processing order.
"""
from dataclasses import dataclass, field
import itertools
import re

import numpy
import toolz

from spellbench.align import (DELETE_A, INSERT_B, MATCH, SUBSTITUTE,
                              grapheme_align, grapheme_distance, word_align)
from spellbench.textnorm import (DEFAULT_CONFIG, grapheme_count, graphemes,
                                 normalize, prepare)
from spellbench.utils import (FormatError, ModelError, NoErrorSignal,
                              read_json, write_json)


ERROR_TYPES = ('substitute', 'insert', 'delete', 'transpose')

# Same notion of whitespace as str.split(), which tokenize() uses.
_WORD_RE = re.compile(r'\S+')


@dataclass
class ErrorModel:
    """
    Proportions of error types plus grapheme statistics for sampling.

    Parameters
    ----------
    proportions : dict
        error type -> share; non-negative and summing to 1
    insert_pool : dict
        grapheme -> count, sampled for insertions (and for substitutions of
        graphemes without a confusion row)
    confusion : dict, optional
        grapheme -> {replacement grapheme -> count}
    pass_through_default : float
        pass-through rate to use when none is given
    """
    proportions: dict
    insert_pool: dict = field(default_factory=dict)
    confusion: dict = None
    pass_through_default: float = 0.9

    def __post_init__(self):
        unknown = set(self.proportions) - set(ERROR_TYPES)
        if unknown:
            raise ModelError(f'unknown error types: {sorted(unknown)}')
        self.proportions = {kind: float(self.proportions.get(kind, 0.0))
                            for kind in ERROR_TYPES}
        self.validate()

    def validate(self):
        "Raise ModelError unless the model can be sampled from."
        unknown = set(self.proportions) - set(ERROR_TYPES)
        if unknown:
            raise ModelError(f'unknown error types: {sorted(unknown)}')
        if any(share < 0 for share in self.proportions.values()):
            raise ModelError('error proportions must be non-negative')
        if abs(sum(self.proportions.values()) - 1) > 1e-9:
            raise ModelError('error proportions must sum to 1, not '
                             f'{sum(self.proportions.values())}')
        if any(count < 0 for count in self.insert_pool.values()):
            raise ModelError('insert_pool counts must be non-negative')
        for grapheme, row in (self.confusion or {}).items():
            if sum(row.values()) <= 0:
                raise ModelError(f'confusion row for {grapheme!r} is empty')
        if not 0 <= self.pass_through_default <= 1:
            raise ModelError('pass_through_default must lie in [0, 1]')

    def weights(self):
        return numpy.array([self.proportions[kind] for kind in ERROR_TYPES])

    def to_dict(self):
        return {'proportions': dict(self.proportions),
                'confusion': self.confusion,
                'insert_pool': dict(self.insert_pool),
                'pass_through_default': self.pass_through_default}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(proportions=data['proportions'],
                       insert_pool=data.get('insert_pool') or {},
                       confusion=data.get('confusion'),
                       pass_through_default=data.get('pass_through_default',
                                                     0.9))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ModelError(f'malformed error model: {exc}') from exc

    def dump(self, path):
        write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))


@dataclass
class InjectionConfig:
    pass_through_rate: float
    seed: int = 0
    max_edits_per_word: int = 1

    def __post_init__(self):
        if not 0 <= self.pass_through_rate <= 1:
            raise ValueError('pass_through_rate must lie in [0, 1], not '
                             f'{self.pass_through_rate}')
        if self.max_edits_per_word < 1:
            raise ValueError('max_edits_per_word must be positive')


def word_rng(seed, sentence_index, word_index):
    "The random stream of one word; a pure function of its arguments."
    counter = numpy.array([0, word_index, sentence_index, 0],
                          dtype=numpy.uint64)
    return numpy.random.Generator(
        numpy.random.Philox(counter=counter, key=seed % 2 ** 64))


def _weighted_choice(counts, rng, exclude=None):
    keys = sorted(k for k, v in counts.items() if v > 0 and k != exclude)
    if not keys:
        return None
    cumulative = numpy.cumsum([counts[k] for k in keys], dtype=float)
    index = numpy.searchsorted(cumulative, rng.random() * cumulative[-1],
                               side='right')
    return keys[min(index, len(keys) - 1)]


def _substitute(clusters, model, rng):
    position = int(rng.integers(len(clusters)))
    original = clusters[position]
    row = (model.confusion or {}).get(original)
    replacement = _weighted_choice(row, rng, exclude=original) if row else None
    if replacement is None:
        # uniform over the pool; only insertion follows its counts
        candidates = sorted(k for k, v in model.insert_pool.items()
                            if v > 0 and k != original)
        if not candidates:
            raise ModelError(f'no substitution candidates for {original!r}')
        replacement = candidates[int(rng.integers(len(candidates)))]
    return clusters[:position] + [replacement] + clusters[position + 1:]


def _apply_edit(clusters, model, rng):
    kind = ERROR_TYPES[rng.choice(len(ERROR_TYPES), p=model.weights())]
    if kind == 'delete' and len(clusters) > 1:
        position = int(rng.integers(len(clusters)))
        return clusters[:position] + clusters[position + 1:]
    if kind == 'insert':
        grapheme = _weighted_choice(model.insert_pool, rng)
        if grapheme is None:
            raise ModelError('insertion sampled but insert_pool is empty')
        position = int(rng.integers(len(clusters) + 1))
        return clusters[:position] + [grapheme] + clusters[position:]
    if kind == 'transpose':
        # Swapping equal neighbours would leave the word unchanged.
        candidates = [i for i in range(len(clusters) - 1)
                      if clusters[i] != clusters[i + 1]]
        if candidates:
            i = candidates[int(rng.integers(len(candidates)))]
            return (clusters[:i] + [clusters[i + 1], clusters[i]] +
                    clusters[i + 2:])
    return _substitute(clusters, model, rng)


def inject_word(word, model, cfg, rng, norm=DEFAULT_CONFIG):
    """
    Corrupt a single word, or return it unchanged with probability
    ``cfg.pass_through_rate``. A corrupted word is never empty.
    """
    if rng.random() < cfg.pass_through_rate:
        return word
    clusters = list(graphemes(normalize(word, norm), norm))
    n_edits = 1
    if cfg.max_edits_per_word > 1:
        n_edits = int(rng.integers(1, cfg.max_edits_per_word + 1))
    for _ in range(n_edits):
        clusters = _apply_edit(clusters, model, rng)
    return ''.join(clusters)


def inject_sentence(sentence, sentence_index, model, cfg,
                    norm=DEFAULT_CONFIG):
    "Corrupt the words of one sentence, keeping its whitespace as is."
    pieces = []
    last = 0
    for word_index, match in enumerate(_WORD_RE.finditer(sentence)):
        rng = word_rng(cfg.seed, sentence_index, word_index)
        pieces.append(sentence[last:match.start()])
        pieces.append(inject_word(match.group(), model, cfg, rng, norm))
        last = match.end()
    pieces.append(sentence[last:])
    return ''.join(pieces)


def inject_errors(clean, model, cfg, norm=DEFAULT_CONFIG):
    """
    Yield a noisy version of every clean sentence.

    Parameters
    ----------
    clean : iterable of strings
    model : ErrorModel
    cfg : InjectionConfig
    norm : NormConfig

    Raises
    ------
    ModelError
        If an insertion is sampled and the model has no insert_pool.

    Examples
    --------
    >>> model = ErrorModel({'delete': 1.0})
    >>> list(inject_errors(['a  b'], model, InjectionConfig(1.0)))
    ['a  b']
    """
    model.validate()
    for index, sentence in enumerate(clean):
        yield inject_sentence(sentence, index, model, cfg, norm)


def parallel_pairs(noisy, clean):
    """
    Zip two sentence streams, failing if one runs out before the other.

    Raises
    ------
    FormatError
        On unequal sentence counts, naming the first unmatched line.
    """
    missing = object()
    for number, (n, c) in enumerate(
            itertools.zip_longest(noisy, clean, fillvalue=missing), start=1):
        if n is missing or c is missing:
            raise FormatError('noisy and clean corpora have different '
                              'numbers of sentences', line=number)
        yield n, c


def _collapse_transpositions(ops, clean, noisy):
    # Yield (kind, op) where adjacent swaps are folded into one 'transpose'.
    # Heuristic: a swap shows up either as two crossed substitutions or as a
    # deletion and an insertion of the same grapheme around one match.
    k = 0
    while k < len(ops):
        op = ops[k]
        following = ops[k + 1] if k + 1 < len(ops) else None
        if (op.kind == SUBSTITUTE and following is not None
                and following.kind == SUBSTITUTE
                and following.a_index == op.a_index + 1
                and following.b_index == op.b_index + 1
                and clean[op.a_index] == noisy[following.b_index]
                and clean[following.a_index] == noisy[op.b_index]):
            yield 'transpose', op
            k += 2
            continue
        if (op.kind in (DELETE_A, INSERT_B) and k + 2 < len(ops)
                and following.kind == MATCH
                and {op.kind, ops[k + 2].kind} == {DELETE_A, INSERT_B}):
            deleted = op if op.kind == DELETE_A else ops[k + 2]
            inserted = op if op.kind == INSERT_B else ops[k + 2]
            if clean[deleted.a_index] == noisy[inserted.b_index]:
                yield 'transpose', op
                k += 3
                continue
        yield op.kind, op
        k += 1


def _word_tally(clean_word, noisy_word, cfg):
    clean = graphemes(clean_word, cfg)
    noisy = graphemes(noisy_word, cfg)
    ops = grapheme_align(clean_word, noisy_word, cfg).ops
    types, confusion, inserted = {}, {}, {}
    for kind, op in _collapse_transpositions(ops, clean, noisy):
        if kind == MATCH:
            continue
        if kind == SUBSTITUTE:
            kind = 'substitute'
            key = (clean[op.a_index], noisy[op.b_index])
            confusion[key] = confusion.get(key, 0) + 1
        elif kind == DELETE_A:
            kind = 'delete'
        elif kind == INSERT_B:
            kind = 'insert'
            inserted[noisy[op.b_index]] = inserted.get(noisy[op.b_index],
                                                       0) + 1
        types[kind] = types.get(kind, 0) + 1
    return types, confusion, inserted


def _pair_tally(noisy_sentence, clean_sentence, cfg):
    noisy = prepare(noisy_sentence, cfg).tokens
    clean = prepare(clean_sentence, cfg).tokens
    tally = {'types': {}, 'confusion': {}, 'inserted': {}, 'clean': {},
             'words': len(clean), 'changed': 0}
    for token in clean:
        for grapheme in graphemes(token, cfg):
            tally['clean'][grapheme] = tally['clean'].get(grapheme, 0) + 1
    parts = []
    for op in word_align(clean, noisy, cfg).ops:
        if op.kind == INSERT_B:
            parts.append(({'insert': 1}, {}, {}))
        elif op.kind == DELETE_A:
            tally['changed'] += 1
            parts.append(({'delete': 1}, {}, {}))
        elif op.kind == SUBSTITUTE:
            tally['changed'] += 1
            parts.append(_word_tally(clean[op.a_index], noisy[op.b_index],
                                     cfg))
    for types, confusion, inserted in parts:
        tally['types'] = toolz.merge_with(sum, tally['types'], types)
        tally['confusion'] = toolz.merge_with(sum, tally['confusion'],
                                              confusion)
        tally['inserted'] = toolz.merge_with(sum, tally['inserted'], inserted)
    return tally


def _merge_tallies(left, right):
    return {'types': toolz.merge_with(sum, left['types'], right['types']),
            'confusion': toolz.merge_with(sum, left['confusion'],
                                          right['confusion']),
            'inserted': toolz.merge_with(sum, left['inserted'],
                                         right['inserted']),
            'clean': toolz.merge_with(sum, left['clean'], right['clean']),
            'words': left['words'] + right['words'],
            'changed': left['changed'] + right['changed']}


def estimate_error_model(pairs, cfg=DEFAULT_CONFIG):
    """
    Estimate an ErrorModel from (noisy, clean) sentence pairs.

    Words are aligned first; within each substituted word pair the grapheme
    alignment is tallied as substitutions, insertions and deletions (relative
    to the clean word), with adjacent swaps counted as one transposition.
    Whole inserted or deleted words count as one insertion or deletion.

    Raises
    ------
    FormatError
        If ``pairs`` is empty or an item is not a pair.
    NoErrorSignal
        If the noisy side never differs from the clean side.
    """
    tally = None
    for number, pair in enumerate(pairs, start=1):
        try:
            noisy_sentence, clean_sentence = pair
        except (TypeError, ValueError):
            raise FormatError('expected a (noisy, clean) pair', line=number)
        current = _pair_tally(noisy_sentence, clean_sentence, cfg)
        tally = current if tally is None else _merge_tallies(tally, current)
    if tally is None:
        raise FormatError('no sentence pairs to estimate from')

    total = sum(tally['types'].values())
    if total == 0:
        raise NoErrorSignal('no error signal in corpus')

    confusion = {}
    for (clean_grapheme, noisy_grapheme), count in tally['confusion'].items():
        confusion.setdefault(clean_grapheme, {})[noisy_grapheme] = count
    pass_through = 1.0
    if tally['words']:
        pass_through = 1 - tally['changed'] / tally['words']
    return ErrorModel(
        proportions={kind: tally['types'].get(kind, 0) / total
                     for kind in ERROR_TYPES},
        insert_pool=dict(tally['inserted'] or tally['clean']),
        confusion=confusion or None,
        pass_through_default=min(max(pass_through, 0.0), 1.0))


def measure_error_percentage(noisy, clean, cfg=DEFAULT_CONFIG):
    """
    Share of clean grapheme clusters that differ in the noisy corpus.

    Words are aligned per sentence; aligned pairs contribute their grapheme
    edit distance and unaligned words their full grapheme length. Whitespace
    is counted on neither side.

    Raises
    ------
    FormatError
        If the corpora have different numbers of sentences.

    Examples
    --------
    >>> measure_error_percentage(['abcd eXgh'], ['abcd efgh'])
    0.125
    """
    distance = total = 0
    for noisy_sentence, clean_sentence in parallel_pairs(noisy, clean):
        n = prepare(noisy_sentence, cfg).tokens
        c = prepare(clean_sentence, cfg).tokens
        total += sum(grapheme_count(token, cfg) for token in c)
        for op in word_align(n, c, cfg).ops:
            if op.kind == SUBSTITUTE:
                distance += grapheme_distance(n[op.a_index], c[op.b_index],
                                              cfg)
            elif op.kind == DELETE_A:
                distance += grapheme_count(n[op.a_index], cfg)
            elif op.kind == INSERT_B:
                distance += grapheme_count(c[op.b_index], cfg)
    if not total:
        return 0.0
    # Extra noisy words can push the raw ratio past 1.
    return min(distance / total, 1.0)


def modified_fraction(noisy, clean, cfg=DEFAULT_CONFIG):
    """
    Fraction of clean words that differ from the word at the same position
    in the noisy corpus. Both sides must have the same word counts, as
    :func:`inject_errors` output does.
    """
    changed = total = 0
    for number, (noisy_sentence, clean_sentence) in enumerate(
            parallel_pairs(noisy, clean), start=1):
        n = prepare(noisy_sentence, cfg).tokens
        c = prepare(clean_sentence, cfg).tokens
        if len(n) != len(c):
            raise FormatError('word counts differ', line=number)
        total += len(c)
        changed += sum(1 for x, y in zip(n, c) if x != y)
    return changed / total if total else 0.0
