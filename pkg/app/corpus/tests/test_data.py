"""
Tests for corpus files, the BMES codec, vocabulary and embeddings.
"""
import itertools
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DataError
from corpus.data import (
    PAD,
    UNK,
    CriterionCorpus,
    TaggedSentence,
    Vocabulary,
    bmes_to_spans,
    build_vocab,
    load_char_mapping,
    load_pretrained_embeddings,
    normalize_chars,
    read_raw_lines,
    read_segmented_corpus,
    save_embeddings,
    spans_to_bmes,
    split_dev,
    write_segmented_corpus,
)
from segmenter.crf import B, E, M, S


def corpus_of(name, *lines):
    """Create a corpus whose training split holds the given lines."""
    return CriterionCorpus(name, [TaggedSentence.from_words(line.split())
                                  for line in lines])


class FileTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, content, encoding='utf-8'):
        path = self.dir / name
        path.write_bytes(content.encode(encoding)
                         if isinstance(content, str) else content)
        return path


class CodecTests(SimpleTestCase):
    """Test conversions between spans and BMES tags"""

    def test_spans_to_tags(self):
        """Test the BMES image of simple segmentations"""
        self.assertEqual(spans_to_bmes([(0, 1)], 1), [S])
        self.assertEqual(spans_to_bmes([(0, 3)], 3), [B, M, E])
        self.assertEqual(spans_to_bmes([(0, 2), (2, 3)], 3), [B, E, S])

    def test_spans_must_partition(self):
        """Test gaps and overlaps are rejected"""
        for spans in ([(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 2)]):
            with self.subTest(spans=spans):
                with self.assertRaises(DataError):
                    spans_to_bmes(spans, 3)

    def test_tags_to_spans(self):
        """Test valid sequences decode exactly"""
        self.assertEqual(bmes_to_spans([B, E, S]), [(0, 2), (2, 3)])
        self.assertEqual(bmes_to_spans([S, S]), [(0, 1), (1, 2)])
        self.assertEqual(bmes_to_spans([]), [])

    def test_invalid_sequence_is_repaired(self):
        """Test an ill-formed sequence still yields a partition"""
        self.assertEqual(bmes_to_spans([M, E, B]), [(0, 2), (2, 3)])

    def test_decoding_is_total(self):
        """Test every tag sequence up to length 6 decodes to a partition"""
        for n in range(1, 7):
            for tags in itertools.product(range(4), repeat=n):
                spans = bmes_to_spans(tags)
                self.assertEqual(spans[0][0], 0)
                self.assertEqual(spans[-1][1], n)
                for (_, end), (start, _) in zip(spans, spans[1:]):
                    self.assertEqual(end, start)
                self.assertTrue(all(s < e for s, e in spans))

    def test_valid_sequences_round_trip(self):
        """Test decoding inverts encoding for every segmentation of 5 chars"""
        for cuts in itertools.product([False, True], repeat=4):
            bounds = [0] + [i + 1 for i, cut in enumerate(cuts) if cut] + [5]
            spans = list(zip(bounds, bounds[1:]))
            self.assertEqual(bmes_to_spans(spans_to_bmes(spans, 5)), spans)

    def test_sentence_from_words(self):
        """Test a sentence carries chars, spans and tags"""
        sentence = TaggedSentence.from_words(['AB', 'C'])
        self.assertEqual(sentence.chars, ('A', 'B', 'C'))
        self.assertEqual(sentence.spans, ((0, 2), (2, 3)))
        self.assertEqual(sentence.tags, (B, E, S))
        self.assertEqual(sentence.words, ['AB', 'C'])


class CorpusFileTests(FileTestCase):
    """Test reading and writing corpus files"""

    def test_read_segmented_line(self):
        """Test one line becomes one tagged sentence"""
        path = self.write('c.txt', 'AB C\n')
        sentences = read_segmented_corpus(path)
        self.assertEqual(len(sentences), 1)
        self.assertEqual(sentences[0].spans, ((0, 2), (2, 3)))

    def test_empty_file(self):
        """Test an empty file yields no sentences"""
        self.assertEqual(read_segmented_corpus(self.write('e.txt', '')), [])

    def test_whitespace_runs(self):
        """Test repeated and ideographic spaces split like one space"""
        path = self.write('w.txt', 'AB   C\nAB　C\nAB C\n')
        first, second, third = read_segmented_corpus(path)
        self.assertEqual(first, third)
        self.assertEqual(second, third)

    def test_invalid_utf8_reports_line(self):
        """Test undecodable bytes name the line number"""
        path = self.write('bad.txt', b'AB C\n\xff\xfe\n')
        with self.assertRaises(DataError) as ctx:
            read_segmented_corpus(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_write_then_read(self):
        """Test written corpora parse back identically"""
        sentences = [TaggedSentence.from_words(['中国', '人']),
                     TaggedSentence.from_words(['x'])]
        path = self.dir / 'out.txt'
        write_segmented_corpus(path, sentences)
        self.assertEqual(read_segmented_corpus(path), sentences)

    def test_raw_lines_keep_empty_lines(self):
        """Test raw input drops whitespace but keeps empty lines"""
        path = self.write('raw.txt', 'A B\n\nC\n')
        self.assertEqual(read_raw_lines(path), ['AB', '', 'C'])

    def test_corpus_from_files(self):
        """Test a registered corpus splits off a dev set"""
        train = self.write('t.txt', ''.join(f'A{i} B\n' for i in range(10)))
        test = self.write('s.txt', 'A B\n')
        corpus = CriterionCorpus.from_files('pku', train, test)
        self.assertEqual((len(corpus.train), len(corpus.dev)), (9, 1))
        self.assertEqual(len(corpus.test), 1)
        self.assertIn('B', corpus.train_word_set)


class NormalizationTests(FileTestCase):
    """Test character mapping"""

    def test_no_mapping_is_identity(self):
        """Test normalization without a table changes nothing"""
        self.assertEqual(normalize_chars('AAC'), 'AAC')

    def test_mapping_applies_per_character(self):
        """Test A->B turns AAC into BBC"""
        path = self.write('map.tsv', 'A\tB\n')
        self.assertEqual(normalize_chars('AAC', path), 'BBC')

    def test_mapping_keeps_spans(self):
        """Test normalized sentences keep their segmentation"""
        sentence = TaggedSentence.from_words(['AA', 'C'])
        mapped = normalize_chars(sentence, {'A': 'B'})
        self.assertEqual(mapped.text, 'BBC')
        self.assertEqual(mapped.spans, sentence.spans)
        self.assertEqual(mapped.tags, sentence.tags)

    def test_malformed_mapping_line(self):
        """Test a mapping line without a tab is rejected with its number"""
        path = self.write('map.tsv', 'A\tB\nCD\n')
        with self.assertRaises(DataError) as ctx:
            load_char_mapping(path)
        self.assertEqual(ctx.exception.line, 2)


class SplitTests(SimpleTestCase):
    """Test dev splitting"""

    def setUp(self):
        self.train = [TaggedSentence.from_words([chr(65 + i)])
                      for i in range(10)]

    def test_dev_size(self):
        """Test ten sentences at fraction 0.1 give one dev sentence"""
        train, dev = split_dev(self.train, 0.1, seed=1)
        self.assertEqual((len(train), len(dev)), (9, 1))

    def test_split_is_seeded(self):
        """Test the same seed gives the same split"""
        self.assertEqual(split_dev(self.train, 0.1, seed=4),
                         split_dev(self.train, 0.1, seed=4))

    def test_split_partitions_train(self):
        """Test train and dev are disjoint and cover the input"""
        train, dev = split_dev(self.train, 0.3, seed=2)
        self.assertEqual(sorted(s.text for s in train + dev),
                         sorted(s.text for s in self.train))
        self.assertFalse({s.text for s in train} & {s.text for s in dev})


class VocabularyTests(SimpleTestCase):
    """Test vocabulary building"""

    def test_chars_present(self):
        """Test every training character gets an id above the reserved ones"""
        vocab = build_vocab([corpus_of('a', 'AB C')])
        for ch in 'ABC':
            self.assertGreater(vocab.chars[ch], UNK)
        self.assertEqual(vocab.char_count, 5)

    def test_min_freq_maps_rare_chars_to_unk(self):
        """Test characters below min_freq become UNK"""
        vocab = build_vocab([corpus_of('a', 'AB C')], min_freq=2)
        self.assertEqual(vocab.char_ids('ABC'), [UNK, UNK, UNK])

    def test_unknown_character(self):
        """Test an unseen character maps to UNK"""
        vocab = build_vocab([corpus_of('a', 'AB C')])
        self.assertEqual(vocab.char_ids('Z'), [UNK])
        self.assertNotEqual(UNK, PAD)

    def test_ids_are_stable(self):
        """Test two builds from the same input agree"""
        first = build_vocab([corpus_of('a', 'AB C', 'C A'),
                             corpus_of('b', 'D')])
        second = build_vocab([corpus_of('a', 'AB C', 'C A'),
                              corpus_of('b', 'D')])
        self.assertEqual(first, second)
        self.assertEqual(first.digest(), second.digest())

    def test_frequent_chars_first(self):
        """Test ids follow descending frequency"""
        vocab = build_vocab([corpus_of('a', 'AB C', 'C A', 'C')])
        self.assertEqual(vocab.chars['C'], 2)

    def test_dict_round_trip(self):
        """Test serialized vocabularies rebuild equal"""
        vocab = build_vocab([corpus_of('a', 'AB C')])
        self.assertEqual(Vocabulary.from_dict(vocab.to_dict()), vocab)


class EmbeddingFileTests(FileTestCase):
    """Test word2vec text files"""

    def setUp(self):
        super().setUp()
        self.vocab = build_vocab([corpus_of('a', 'AB C')])
        self.rng = np.random.default_rng(0)

    def test_full_coverage(self):
        """Test every character row comes from the file"""
        path = self.write('e.txt', '3 2\nA 1 2\nB 3 4\nC 5 6\n')
        table = load_pretrained_embeddings(path, self.vocab, 2, self.rng)
        self.assertEqual(table.unigram.values[self.vocab.chars['B']].tolist(),
                         [3.0, 4.0])
        self.assertEqual(table.unigram.shape, (self.vocab.char_count, 2))

    def test_trailing_space_and_tabs(self):
        """Test word2vec trailing spaces and tab separators are accepted"""
        path = self.write('e.txt', '2 2 \nA 0.5 -0.5 \nB\t1\t2\r\n')
        table = load_pretrained_embeddings(path, self.vocab, 2, self.rng)
        rows = table.unigram.values
        self.assertEqual(rows[self.vocab.chars['A']].tolist(), [0.5, -0.5])
        self.assertEqual(rows[self.vocab.chars['B']].tolist(), [1.0, 2.0])

    def test_header_only(self):
        """Test an empty file leaves every row uniformly initialized"""
        path = self.write('e.txt', '0 100\n')
        table = load_pretrained_embeddings(path, self.vocab, 100, self.rng)
        self.assertTrue(np.all(np.abs(table.unigram.values) <= 0.05))

    def test_dimension_mismatch(self):
        """Test a header of another width is rejected"""
        path = self.write('e.txt', '1 3\nA 1 2 3\n')
        with self.assertRaises(DataError):
            load_pretrained_embeddings(path, self.vocab, 2, self.rng)

    def test_malformed_line_reports_number(self):
        """Test a short vector names its line"""
        path = self.write('e.txt', 'A 1 2\nB 3\n')
        with self.assertRaises(DataError) as ctx:
            load_pretrained_embeddings(path, self.vocab, 2, self.rng)
        self.assertEqual(ctx.exception.line, 2)

    def test_save_then_load(self):
        """Test saved embeddings load back exactly"""
        table = load_pretrained_embeddings(
            self.write('e.txt', '0 4\n'), self.vocab, 4, self.rng)
        path = self.dir / 'saved.txt'
        save_embeddings(path, self.vocab, table)
        loaded = load_pretrained_embeddings(path, self.vocab, 4, self.rng)
        for row in self.vocab.chars.values():
            self.assertEqual(loaded.unigram.values[row].tolist(),
                             table.unigram.values[row].tolist())
