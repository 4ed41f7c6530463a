"""
Corpus ingestion, BMES tag codec, vocabulary and embedding files.

Corpus files are UTF-8, one sentence per line, words separated by runs of
any Unicode whitespace (the ideographic space U+3000 included). Embedding
files use the word2vec text format: an optional ``count dim`` header line,
then one token followed by ``dim`` floats per line. Character mapping files
hold one ``from<TAB>to`` pair of single characters per line.
"""
import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from core.exceptions import DataError
from segmenter.crf import B, E, M, S
from segmenter.layers import EmbeddingTable

logger = logging.getLogger(__name__)

PAD = 0
UNK = 1
RESERVED = ('<pad>', '<unk>')
BOUNDARY = '<eos>'

Span = Tuple[int, int]


# BMES codec

def spans_to_bmes(spans: Sequence[Span], n: int) -> List[int]:
    """Tag every character: S for one-character words, else B M* E."""
    _check_partition(spans, n)
    tags = []
    for start, end in spans:
        if end - start == 1:
            tags.append(S)
        else:
            tags.extend([B] + [M] * (end - start - 2) + [E])
    return tags


def bmes_to_spans(tags: Sequence[int]) -> List[Span]:
    """Turn any tag sequence into a partition of its positions.

    A word opens at B, at S or right after a word closed. It closes at E, at
    S, or just before the next B or S. Valid sequences come back exactly as
    ``spans_to_bmes`` produced them.
    """
    spans = []
    start = None
    for i, tag in enumerate(tags):
        if tag in (B, S) and start is not None:
            spans.append((start, i))
            start = None
        if start is None:
            start = i
        if tag in (E, S):
            spans.append((start, i + 1))
            start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


def _check_partition(spans, n):
    cursor = 0
    for start, end in spans:
        if start != cursor or end <= start:
            raise DataError(f'spans {list(spans)} do not partition [0, {n})')
        cursor = end
    if cursor != n:
        raise DataError(f'spans {list(spans)} do not partition [0, {n})')


def spans_from_words(words: Iterable[str]) -> List[Span]:
    spans, cursor = [], 0
    for word in words:
        spans.append((cursor, cursor + len(word)))
        cursor += len(word)
    return spans


@dataclass(frozen=True)
class TaggedSentence:
    """Characters of one sentence with its gold segmentation."""
    chars: Tuple[str, ...]
    spans: Tuple[Span, ...]
    tags: Tuple[int, ...] = field(default=None, compare=False)

    def __post_init__(self):
        tags = tuple(spans_to_bmes(self.spans, len(self.chars)))
        if self.tags is not None and tuple(self.tags) != tags:
            raise DataError('tags disagree with spans')
        object.__setattr__(self, 'tags', tags)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> 'TaggedSentence':
        words = [w for w in words if w]
        chars = tuple(''.join(words))
        return cls(chars, tuple(spans_from_words(words)))

    @property
    def text(self) -> str:
        return ''.join(self.chars)

    @property
    def words(self) -> List[str]:
        return [self.text[s:e] for s, e in self.spans]

    def __len__(self):
        return len(self.chars)


# Corpus files

def _decoded_lines(path, encoding):
    with open(path, 'rb') as handle:
        for number, raw in enumerate(handle, start=1):
            try:
                yield number, raw.decode(encoding)
            except UnicodeDecodeError as exc:
                raise DataError(f'not valid {encoding}: {exc.reason}',
                                line=number) from None


def read_segmented_corpus(path, encoding='utf-8') -> List[TaggedSentence]:
    """One sentence per line; empty lines are skipped."""
    sentences = []
    for _, line in _decoded_lines(path, encoding):
        words = line.split()
        if words:
            sentences.append(TaggedSentence.from_words(words))
    logger.debug('read %d sentences from %s', len(sentences), path)
    return sentences


def write_segmented_corpus(path, sentences: Iterable[TaggedSentence]):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for sentence in sentences:
            handle.write(' '.join(sentence.words) + '\n')


def read_raw_lines(path, encoding='utf-8') -> List[str]:
    """Raw text lines with whitespace removed (empty lines kept)."""
    return [''.join(line.split())
            for _, line in _decoded_lines(path, encoding)]


# Character normalization

def load_char_mapping(path) -> Dict[str, str]:
    mapping = {}
    for number, line in _decoded_lines(path, 'utf-8'):
        line = line.rstrip('\r\n')
        if not line:
            continue
        parts = line.split('\t')
        if len(parts) != 2 or len(parts[0]) != 1 or len(parts[1]) != 1:
            raise DataError(f'expected "from<TAB>to", got {line!r}',
                            line=number)
        mapping[parts[0]] = parts[1]
    return mapping


def normalize_chars(sentence, mapping=None):
    """Replace characters one for one (e.g. traditional to simplified).

    ``mapping`` is a dict or the path of a mapping file. Works on plain
    strings and on TaggedSentence, whose spans are kept.
    """
    if mapping is None:
        return sentence
    if not isinstance(mapping, dict):
        mapping = load_char_mapping(mapping)
    if isinstance(sentence, TaggedSentence):
        chars = tuple(mapping.get(c, c) for c in sentence.chars)
        return TaggedSentence(chars, sentence.spans)
    return ''.join(mapping.get(c, c) for c in sentence)


# Splits and corpora

def split_dev(train: Sequence[TaggedSentence], fraction=0.10, seed=1):
    """Carve ceil(fraction * N) shuffled sentences out of ``train``."""
    if not 0 < fraction < 1:
        raise ValueError(f'dev fraction must be in (0, 1), got {fraction}')
    if not train:
        raise DataError('cannot split an empty training set')
    order = np.random.default_rng(seed).permutation(len(train))
    size = math.ceil(round(fraction * len(train), 9))
    dev_idx = order[:size]
    kept = sorted(set(range(len(train))) - set(dev_idx.tolist()))
    return [train[i] for i in kept], [train[i] for i in dev_idx]


@dataclass
class CriterionCorpus:
    """Train/dev/test splits of one segmentation criterion."""
    name: str
    train: List[TaggedSentence]
    dev: List[TaggedSentence] = field(default_factory=list)
    test: List[TaggedSentence] = field(default_factory=list)
    train_word_set: FrozenSet[str] = None

    def __post_init__(self):
        if not self.train:
            raise DataError(f'corpus {self.name!r} has no training sentences')
        if self.train_word_set is None:
            words = set()
            for sentence in list(self.train) + list(self.dev):
                words.update(sentence.words)
            self.train_word_set = frozenset(words)

    @property
    def size(self) -> int:
        return len(self.train)

    def split(self, name: str) -> List[TaggedSentence]:
        if name not in ('train', 'dev', 'test'):
            raise ValueError(f'unknown split {name!r}')
        return getattr(self, name)

    @classmethod
    def from_files(cls, name, train_path, test_path=None, dev_fraction=0.10,
                   seed=1, mapping=None) -> 'CriterionCorpus':
        train = read_segmented_corpus(train_path)
        test = read_segmented_corpus(test_path) if test_path else []
        if mapping is not None:
            train = [normalize_chars(s, mapping) for s in train]
            test = [normalize_chars(s, mapping) for s in test]
        if not train:
            raise DataError(f'corpus {name!r}: {train_path} is empty')
        train, dev = split_dev(train, dev_fraction, seed)
        logger.info('corpus %s: %d train, %d dev, %d test sentences',
                    name, len(train), len(dev), len(test))
        return cls(name, train, dev, test)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# Vocabulary

def sentence_bigrams(chars: Sequence[str]) -> List[str]:
    """Bigram i is chars[i] + chars[i+1]; the last one uses BOUNDARY."""
    return [chars[i] + (chars[i + 1] if i + 1 < len(chars) else BOUNDARY)
            for i in range(len(chars))]


def _index(counts: Counter, min_freq: int) -> Dict[str, int]:
    kept = sorted((t for t, c in counts.items() if c >= min_freq),
                  key=lambda t: (-counts[t], t))
    return {token: i for i, token in enumerate(kept, start=len(RESERVED))}


class Vocabulary:
    """Character and bigram ids; 0 is padding and 1 the unknown token."""

    def __init__(self, chars: Dict[str, int], bigrams: Dict[str, int],
                 min_freq=1):
        self.chars = dict(chars)
        self.bigrams = dict(bigrams)
        self.min_freq = min_freq

    def __eq__(self, other):
        return (isinstance(other, Vocabulary)
                and self.chars == other.chars
                and self.bigrams == other.bigrams)

    @property
    def char_count(self) -> int:
        return len(self.chars) + len(RESERVED)

    @property
    def bigram_count(self) -> int:
        return len(self.bigrams) + len(RESERVED)

    def char_ids(self, chars: Sequence[str]) -> List[int]:
        return [self.chars.get(c, UNK) for c in chars]

    def bigram_ids(self, chars: Sequence[str]) -> List[int]:
        return [self.bigrams.get(b, UNK) for b in sentence_bigrams(chars)]

    def to_dict(self) -> dict:
        return {'min_freq': self.min_freq, 'chars': self.chars,
                'bigrams': self.bigrams}

    @classmethod
    def from_dict(cls, data: dict) -> 'Vocabulary':
        return cls(data['chars'], data['bigrams'], data.get('min_freq', 1))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True,
                             ensure_ascii=False)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def build_vocab(corpora: Sequence[CriterionCorpus], min_freq=1) -> Vocabulary:
    """Joint vocabulary over the training splits of every corpus."""
    if not corpora:
        raise DataError('no corpora to build a vocabulary from')
    chars, bigrams = Counter(), Counter()
    for corpus in corpora:
        for sentence in corpus.train:
            chars.update(sentence.chars)
            bigrams.update(sentence_bigrams(sentence.chars))
    vocab = Vocabulary(_index(chars, min_freq), _index(bigrams, min_freq),
                       min_freq)
    logger.info('vocabulary: %d chars, %d bigrams (min_freq=%d)',
                vocab.char_count, vocab.bigram_count, min_freq)
    return vocab


# Embedding files

def load_pretrained_embeddings(path, vocab: Vocabulary, embedding_size,
                               rng=None, init_range=0.05):
    """Unigram rows from a word2vec text file, the rest uniform(±init_range).

    The bigram table is always freshly initialized.
    """
    rng = rng if rng is not None else np.random.default_rng()
    table = EmbeddingTable.create(vocab.char_count, vocab.bigram_count,
                                  embedding_size, rng, init_range)
    unigram = table.unigram.values
    found = 0
    for number, line in _decoded_lines(path, 'utf-8'):
        parts = line.split()
        if not parts:
            continue
        if number == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            if int(parts[1]) != embedding_size:
                raise DataError(f'embedding dimension {parts[1]} != '
                                f'{embedding_size}', line=number)
            continue
        if len(parts) != embedding_size + 1:
            raise DataError(f'expected a token and {embedding_size} values, '
                            f'got {len(parts)} fields', line=number)
        try:
            vector = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise DataError('non-numeric embedding value',
                            line=number) from None
        row = vocab.chars.get(parts[0])
        if row is not None:
            unigram[row] = vector
            found += 1
    logger.info('pretrained embeddings: %d of %d characters found',
                found, len(vocab.chars))
    return table


def save_embeddings(path, vocab: Vocabulary, table):
    unigram = table.unigram.values
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(f'{len(vocab.chars)} {unigram.shape[1]}\n')
        for token, row in sorted(vocab.chars.items(), key=lambda kv: kv[1]):
            values = ' '.join(repr(float(v)) for v in unigram[row])
            handle.write(f'{token} {values}\n')
