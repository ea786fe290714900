"""
Unicode normalization, grapheme segmentation and whitespace tokenization.

Every comparison in this package happens on the units defined here: words are
whitespace-delimited tokens of normalized text, and a "character" is an
extended grapheme cluster, so that a Sinhala or Devanagari consonant with its
vowel sign counts as a single edit unit.
"""
from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache
import unicodedata

import regex

from spellbench.utils import decode


ZWJ = '\u200d'
ZWJ_POLICIES = ('keep', 'strip', 'cluster')

_CLUSTER_RE = regex.compile(r'\X')


@dataclass(frozen=True)
class NormConfig:
    """
    How text is normalized before alignment.

    Parameters
    ----------
    unicode_form : boolean
        Apply canonical composition (NFC). Default: True.
    zwj_policy : string
        'keep' leaves U+200D alone, 'strip' removes every U+200D, 'cluster'
        keeps it and binds it to the following cluster. Default: 'cluster'.
    lowercase : boolean
        Default: False.
    """
    unicode_form: bool = True
    zwj_policy: str = 'cluster'
    lowercase: bool = False

    def __post_init__(self):
        if self.zwj_policy not in ZWJ_POLICIES:
            raise ValueError(f'zwj_policy must be one of {ZWJ_POLICIES}, '
                             f'not {self.zwj_policy!r}')


DEFAULT_CONFIG = NormConfig()


TokenizedSentence = namedtuple('TokenizedSentence', (
    'raw',
    'normalized',
    'tokens',
    'token_graphemes',
))


def normalize(text, cfg=DEFAULT_CONFIG):
    """
    Normalize a sentence according to ``cfg``.

    Idempotent for every configuration. Bytes are decoded as UTF-8 first.

    Raises
    ------
    DecodeError
        If ``text`` is bytes that are not valid UTF-8.

    Examples
    --------
    >>> normalize('x\u200dy', NormConfig(zwj_policy='strip'))
    'xy'
    """
    if isinstance(text, bytes):
        text = decode(text)
    if cfg.zwj_policy == 'strip':
        text = text.replace(ZWJ, '')
    if cfg.lowercase:
        text = text.lower()
    if cfg.unicode_form:
        text = unicodedata.normalize('NFC', text)
    return text


@lru_cache(maxsize=2 ** 16)
def _segment(token, zwj_policy):
    clusters = _CLUSTER_RE.findall(token)
    if zwj_policy != 'cluster':
        return tuple(clusters)
    # A joiner glues its cluster to the next one (virama + ZWJ + consonant).
    merged = []
    for cluster in clusters:
        if merged and merged[-1].endswith(ZWJ):
            merged[-1] += cluster
        else:
            merged.append(cluster)
    return tuple(merged)


def graphemes(token, cfg=DEFAULT_CONFIG):
    """
    Split a normalized token into grapheme clusters.

    The clusters partition the token in order; an empty token gives an empty
    tuple.

    Examples
    --------
    >>> graphemes('studdy')
    ('s', 't', 'u', 'd', 'd', 'y')
    """
    return _segment(token, cfg.zwj_policy)


def grapheme_count(token, cfg=DEFAULT_CONFIG):
    return len(graphemes(token, cfg))


def tokenize(text, cfg=DEFAULT_CONFIG, raw=None):
    """
    Split normalized text on runs of Unicode whitespace.

    Punctuation stays attached to its word.

    Examples
    --------
    >>> tokenize('  a  b ').tokens
    ('a', 'b')
    """
    tokens = tuple(text.split())
    return TokenizedSentence(
        raw=text if raw is None else raw,
        normalized=text,
        tokens=tokens,
        token_graphemes=tuple(graphemes(token, cfg) for token in tokens))


def prepare(raw, cfg=DEFAULT_CONFIG):
    "Normalize and tokenize a raw sentence."
    return tokenize(normalize(raw, cfg), cfg, raw=raw)
