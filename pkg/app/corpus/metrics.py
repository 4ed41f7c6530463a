"""
Word-level precision, recall, F-measure and OOV recall.

A predicted word is correct when its (start, end) span matches a gold span
exactly. A gold word is out-of-vocabulary when its surface string is absent
from the training word set of the same criterion.
"""
import csv
from dataclasses import asdict, dataclass
from typing import List, Sequence

from core.exceptions import DataError

SCORE_COLUMNS = ('P', 'R', 'F', 'OOV')


def _ratio(numerator, denominator, empty):
    return numerator / denominator if denominator else empty


@dataclass(frozen=True)
class SegmentationScore:
    precision: float
    recall: float
    f1: float
    oov_recall: float
    gold_words: int
    predicted_words: int
    correct_words: int
    gold_oov: int
    recalled_oov: int

    @classmethod
    def from_counts(cls, gold_words, predicted_words, correct_words,
                    gold_oov=0, recalled_oov=0) -> 'SegmentationScore':
        # zero gold and zero predicted words count as a perfect match
        nothing = gold_words == 0 and predicted_words == 0
        precision = _ratio(correct_words, predicted_words, float(nothing))
        recall = _ratio(correct_words, gold_words, float(nothing))
        total = precision + recall
        f1 = 2 * precision * recall / total if total > 0 else 0.0
        return cls(precision, recall, f1, _ratio(recalled_oov, gold_oov, 0.0),
                   gold_words, predicted_words, correct_words, gold_oov,
                   recalled_oov)

    def as_row(self) -> List[str]:
        return [f'{v:.6f}' for v in (self.precision, self.recall, self.f1,
                                     self.oov_recall)]

    def to_dict(self) -> dict:
        return asdict(self)


def _aligned(gold, pred_spans):
    if len(gold) != len(pred_spans):
        raise DataError(f'{len(gold)} gold sentences but '
                        f'{len(pred_spans)} predictions')
    for i, (sentence, spans) in enumerate(zip(gold, pred_spans)):
        end = spans[-1][1] if spans else 0
        if end != len(sentence):
            raise DataError(f'sentence {i}: prediction covers {end} of '
                            f'{len(sentence)} characters')
    return zip(gold, pred_spans)


def _counts(sentence, spans, train_word_set=None):
    gold = set(sentence.spans)
    predicted = set(map(tuple, spans))
    correct = gold & predicted
    gold_oov = recalled_oov = 0
    if train_word_set is not None:
        text = sentence.text
        for span in sentence.spans:
            if text[span[0]:span[1]] not in train_word_set:
                gold_oov += 1
                recalled_oov += span in correct
    return len(gold), len(predicted), len(correct), gold_oov, recalled_oov


def score(gold, pred_spans, train_word_set=frozenset()) -> SegmentationScore:
    """Corpus-level P/R/F/OOV recall of ``pred_spans`` against ``gold``."""
    totals = [0, 0, 0, 0, 0]
    for sentence, spans in _aligned(gold, pred_spans):
        for k, value in enumerate(_counts(sentence, spans, train_word_set)):
            totals[k] += value
    return SegmentationScore.from_counts(*totals)


def per_sentence_f(gold, pred_spans) -> List[float]:
    return [SegmentationScore.from_counts(*_counts(s, p)[:3]).f1
            for s, p in _aligned(gold, pred_spans)]


def write_score_report(stream, scores: Sequence[SegmentationScore],
                       names: Sequence[str] = None):
    """TSV with columns P, R, F, OOV (and a leading corpus column if named)."""
    writer = csv.writer(stream, delimiter='\t', lineterminator='\n')
    header = list(SCORE_COLUMNS)
    writer.writerow(['corpus'] + header if names else header)
    for i, item in enumerate(scores):
        row = item.as_row()
        writer.writerow([names[i]] + row if names else row)


def write_per_sentence_f(path, values: Sequence[float]):
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, delimiter='\t', lineterminator='\n')
        writer.writerow(['sentence', 'F'])
        for i, value in enumerate(values):
            writer.writerow([i, f'{value:.6f}'])
