"""
Edit-distance alignment of words and graphemes, and the three-way alignment
of (original, predicted, expected) sentences.

Both pairwise aligners share one dynamic program. It fills a suffix table and
then traces forward from the start, so ties are resolved left to right: a
match/substitution is preferred over a deletion from A, which is preferred
over an insertion from B. The same inputs always give the same alignment.

The three-way alignment pivots on the expected (gold) sentence: the original
and the predicted sentences are each aligned to it, and predicted words that
have no gold counterpart are flagged as hallucinated.
"""
from collections import namedtuple
from functools import lru_cache
import math

from spellbench.textnorm import DEFAULT_CONFIG, graphemes, prepare


# Costs within this distance of each other are treated as a tie.
TOLERANCE = 1e-9

MATCH = 'match'
SUBSTITUTE = 'substitute'
INSERT_B = 'insert_b'
DELETE_A = 'delete_a'

AlignOp = namedtuple('AlignOp', ('kind', 'a_index', 'b_index', 'cost'))


class Alignment(namedtuple('Alignment', ('ops', 'total_cost'))):

    def pairs(self):
        "Yield ``(a_index, b_index)`` for every match and substitution."
        for op in self.ops:
            if op.kind in (MATCH, SUBSTITUTE):
                yield op.a_index, op.b_index


EvalTriple = namedtuple('EvalTriple', (
    'original',
    'predicted',
    'expected',
    # Synthesized values
    'line',
    'group',
), defaults=(None, None))

TripleRecord = namedtuple('TripleRecord', (
    'expected_token',
    'original_token',
    'predicted_token',
    'hallucinated',
))

TripleAlignment = namedtuple('TripleAlignment', ('records', 'source'))


def _align(n, m, sub_cost):
    # cost[i][j] is the cheapest alignment of a[i:] with b[j:]
    cost = [[0.0] * (m + 1) for _ in range(n + 1)]
    for j in range(m - 1, -1, -1):
        cost[n][j] = cost[n][j + 1] + 1
    for i in range(n - 1, -1, -1):
        row, below = cost[i], cost[i + 1]
        row[m] = below[m] + 1
        for j in range(m - 1, -1, -1):
            row[j] = min(sub_cost(i, j) + below[j + 1],
                         below[j] + 1,
                         row[j + 1] + 1)

    ops = []
    i = j = 0
    while i < n or j < m:
        here = cost[i][j]
        if i < n and j < m:
            c = sub_cost(i, j)
            if abs(c + cost[i + 1][j + 1] - here) <= TOLERANCE:
                ops.append(AlignOp(MATCH if c == 0 else SUBSTITUTE, i, j, c))
                i += 1
                j += 1
                continue
        if i < n and abs(cost[i + 1][j] + 1 - here) <= TOLERANCE:
            ops.append(AlignOp(DELETE_A, i, None, 1))
            i += 1
            continue
        ops.append(AlignOp(INSERT_B, None, j, 1))
        j += 1
    return Alignment(tuple(ops), math.fsum(op.cost for op in ops))


@lru_cache(maxsize=2 ** 16)
def _distance(x, y):
    # Two-row Levenshtein over grapheme tuples.
    if x == y:
        return 0
    if len(x) < len(y):
        x, y = y, x
    previous = list(range(len(y) + 1))
    for i, gx in enumerate(x, start=1):
        current = [i]
        for j, gy in enumerate(y, start=1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (gx != gy)))
        previous = current
    return previous[-1]


def grapheme_distance(x, y, cfg=DEFAULT_CONFIG):
    "Unit-cost edit distance between two tokens, counted in grapheme clusters."
    return _distance(graphemes(x, cfg), graphemes(y, cfg))


def substitution_cost(x, y, cfg=DEFAULT_CONFIG):
    """
    Cost of pairing token ``x`` with token ``y`` in a word alignment.

    0 for equal tokens, otherwise the grapheme edit distance divided by the
    longer token's grapheme count, which lies in (0, 1]. 1 means the two
    tokens share nothing positionally.
    """
    if x == y:
        return 0.0
    gx, gy = graphemes(x, cfg), graphemes(y, cfg)
    longest = max(len(gx), len(gy))
    if longest == 0:
        return 0.0
    return _distance(gx, gy) / longest


def word_align(a, b, cfg=DEFAULT_CONFIG):
    """
    Minimum-cost monotone alignment of two token sequences.

    Parameters
    ----------
    a, b : sequence of strings
        normalized tokens
    cfg : NormConfig

    Returns
    -------
    alignment : Alignment
        Matches cost 0, substitutions cost :func:`substitution_cost`,
        insertions and deletions cost 1.

    Examples
    --------
    >>> alignment = word_align(['library', 'to', 'study'],
    ...                        ['public', 'library', 'to', 'study'])
    >>> [op.kind for op in alignment.ops]
    ['insert_b', 'match', 'match', 'match']
    """
    a, b = tuple(a), tuple(b)
    if len(a) == len(b):
        # Any non-positional alignment of equal-length sequences needs at
        # least one deletion and one insertion, so it costs >= 2.
        costs = [substitution_cost(x, y, cfg) for x, y in zip(a, b)]
        if math.fsum(costs) <= 2 + TOLERANCE:
            ops = tuple(AlignOp(MATCH if c == 0 else SUBSTITUTE, i, i, c)
                        for i, c in enumerate(costs))
            return Alignment(ops, math.fsum(costs))
    return _align(len(a), len(b),
                  lambda i, j: substitution_cost(a[i], b[j], cfg))


def grapheme_align(x, y, cfg=DEFAULT_CONFIG):
    """
    Unit-cost Levenshtein alignment of two tokens over grapheme clusters.

    Indices in the returned ops refer to grapheme positions.

    Examples
    --------
    >>> grapheme_align('studdy', 'study').total_cost
    1.0
    """
    gx, gy = graphemes(x, cfg), graphemes(y, cfg)
    return _align(len(gx), len(gy),
                  lambda i, j: 0 if gx[i] == gy[j] else 1)


def _project(alignment, n_pivot):
    # For each pivot position, the aligned index on the other side (or None),
    # and for each of the n_pivot + 1 gaps, the unaligned indices inside it.
    paired = [None] * n_pivot
    for a_index, b_index in alignment.pairs():
        paired[b_index] = a_index
    gaps = [[] for _ in range(n_pivot + 1)]
    consumed = 0
    for op in alignment.ops:
        if op.b_index is None:
            gaps[consumed].append(op.a_index)
        else:
            consumed = op.b_index + 1
    return paired, gaps


def _gap_records(original, predicted):
    if not original or not predicted:
        return ([TripleRecord(None, o, None, False) for o in original] +
                [TripleRecord(None, None, p, True) for p in predicted])
    # Pair identical words only; substitution is never cheaper than 2.
    alignment = _align(len(original), len(predicted),
                       lambda i, j: 0 if original[i] == predicted[j] else 3)
    records = []
    for op in alignment.ops:
        if op.kind == MATCH:
            records.append(TripleRecord(None, original[op.a_index],
                                        predicted[op.b_index], False))
        elif op.kind == DELETE_A:
            records.append(TripleRecord(None, original[op.a_index], None,
                                        False))
        else:
            records.append(TripleRecord(None, None, predicted[op.b_index],
                                        True))
    return records


def triple_align(triple, cfg=DEFAULT_CONFIG):
    """
    Align an (original, predicted, expected) triple on the expected sentence.

    Parameters
    ----------
    triple : EvalTriple
        raw sentences; they are normalized and tokenized with ``cfg``
    cfg : NormConfig

    Returns
    -------
    alignment : TripleAlignment
        One record per expected token, carrying its aligned original and
        predicted tokens. Predicted tokens without an expected counterpart
        become hallucinated records; original tokens without one become
        records with only the original token. A leftover original and a
        leftover predicted token in the same gap share a record when they are
        the same word. Records are ordered along all three sentences.
    """
    original = prepare(triple.original, cfg).tokens
    predicted = prepare(triple.predicted, cfg).tokens
    expected = prepare(triple.expected, cfg).tokens

    o_paired, o_gaps = _project(word_align(original, expected, cfg),
                                len(expected))
    p_paired, p_gaps = _project(word_align(predicted, expected, cfg),
                                len(expected))

    records = []
    for k in range(len(expected) + 1):
        records.extend(_gap_records([original[i] for i in o_gaps[k]],
                                    [predicted[i] for i in p_gaps[k]]))
        if k < len(expected):
            records.append(TripleRecord(
                expected_token=expected[k],
                original_token=(None if o_paired[k] is None
                                else original[o_paired[k]]),
                predicted_token=(None if p_paired[k] is None
                                 else predicted[p_paired[k]]),
                hallucinated=False))
    return TripleAlignment(tuple(records), triple)
