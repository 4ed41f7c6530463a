"""
Synthetic multi-criteria corpora.

Every criterion segments the same raw character streams: runs of letters
alternate with runs of digits. Letter runs are words under the shared
convention; the criteria differ in how they cut the runs.
"""
import logging
import string
from typing import Callable, Dict, List, Sequence, Union

import numpy as np

from corpus.data import CriterionCorpus, TaggedSentence, split_dev

logger = logging.getLogger(__name__)

DIGITS = string.digits


def _runs(text: str) -> List[str]:
    """Maximal runs of digits and of non-digits."""
    runs = []
    for ch in text:
        if runs and (ch in DIGITS) == (runs[-1][-1] in DIGITS):
            runs[-1] += ch
        else:
            runs.append(ch)
    return runs


def _chunks(run: str, width: int) -> List[str]:
    return [run[i:i + width] for i in range(0, len(run), width)]


def joined_digits(text: str) -> List[str]:
    """Every letter run and every digit run is one word."""
    return _runs(text)


def split_digits(text: str) -> List[str]:
    """Letter runs are words; each digit is its own word."""
    words = []
    for run in _runs(text):
        words.extend(list(run) if run[0] in DIGITS else [run])
    return words


def split_letters(text: str) -> List[str]:
    """Digit runs are words; letter runs are cut into two-letter pieces."""
    words = []
    for run in _runs(text):
        words.extend([run] if run[0] in DIGITS else _chunks(run, 2))
    return words


RULES: Dict[str, Callable[[str], List[str]]] = {
    'joined_digits': joined_digits,
    'split_digits': split_digits,
    'split_letters': split_letters,
}

Rule = Union[str, Callable[[str], List[str]]]


def _resolve(rule: Rule):
    if callable(rule):
        return rule.__name__, rule
    try:
        return rule, RULES[rule]
    except KeyError:
        raise ValueError(f'unknown segmentation rule {rule!r}; '
                         f'choose from {sorted(RULES)}') from None


def generate_streams(alphabet_size, count, rng, min_runs=4, max_runs=8,
                     max_letters=5, max_digits=4) -> List[str]:
    """Raw sentences; each holds at least two digit runs."""
    if not 1 <= alphabet_size <= 26:
        raise ValueError('alphabet_size must be between 1 and 26')
    letters = string.ascii_lowercase[:alphabet_size]
    streams = []
    for _ in range(count):
        runs = int(rng.integers(min_runs, max_runs + 1))
        digit_first = bool(rng.integers(2))
        parts = []
        for k in range(runs):
            if (k % 2 == 0) == digit_first:
                size = int(rng.integers(1, max_digits + 1))
                parts.append(''.join(rng.choice(list(DIGITS), size)))
            else:
                size = int(rng.integers(1, max_letters + 1))
                parts.append(''.join(rng.choice(list(letters), size)))
        streams.append(''.join(parts))
    return streams


def generate_synthetic_corpora(alphabet_size, n_sentences,
                               criteria_rules: Sequence[Rule], seed=1,
                               n_test=None, dev_fraction=0.10
                               ) -> List[CriterionCorpus]:
    """One corpus per rule over identical raw streams.

    ``n_sentences`` training sentences (dev carved from them) and ``n_test``
    test sentences, default a fifth of the training size.
    """
    if len(criteria_rules) < 2:
        raise ValueError('need at least two segmentation rules')
    rules = [_resolve(r) for r in criteria_rules]
    n_test = max(1, n_sentences // 5) if n_test is None else n_test
    rng = np.random.default_rng(seed)
    train_streams = generate_streams(alphabet_size, n_sentences, rng)
    test_streams = generate_streams(alphabet_size, n_test, rng)

    corpora = []
    for name, rule in rules:
        train = [TaggedSentence.from_words(rule(s)) for s in train_streams]
        test = [TaggedSentence.from_words(rule(s)) for s in test_streams]
        train, dev = split_dev(train, dev_fraction, seed)
        corpora.append(CriterionCorpus(name, train, dev, test))
    logger.info('generated %d synthetic corpora of %d sentences',
                len(corpora), n_sentences)
    return corpora


def disagreement_rate(first: CriterionCorpus, second: CriterionCorpus,
                      split='train') -> float:
    """Fraction of aligned sentences segmented differently."""
    a, b = first.split(split), second.split(split)
    if not a:
        return 0.0
    return sum(x.spans != y.spans for x, y in zip(a, b)) / len(a)
