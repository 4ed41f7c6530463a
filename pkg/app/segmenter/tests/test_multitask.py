"""
Tests for the shared-private model and its objectives.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from core import tensor as T
from core.gradcheck import check_gradients
from corpus.data import CriterionCorpus, TaggedSentence, build_vocab
from segmenter import multitask
from segmenter.multitask import (
    ArchitectureKind,
    DiscriminatorParams,
    SharedPrivateModel,
)


def sentence(*words):
    return TaggedSentence.from_words(words)


def toy_corpora(names=('a', 'b')):
    return [CriterionCorpus(name, [sentence('AB', 'C'), sentence('C', 'A'),
                                   sentence('BA')])
            for name in names]


def toy_model(arch='model1', names=('a', 'b'), hidden_size=2,
              embedding_size=2, seed=0, init_range=0.5, use_bigram=True):
    corpora = toy_corpora(names)
    return SharedPrivateModel.build(
        arch, list(names), build_vocab(corpora), embedding_size, hidden_size,
        np.random.default_rng(seed), init_range, use_bigram,
        dropout_keep=1.0)


def zeroed(model):
    for tensor in model.named_parameters().values():
        tensor.values[...] = 0.0
    return model


class ArchitectureTests(SimpleTestCase):
    """Test wiring and feature widths"""

    def test_head_widths(self):
        """Test heads read 4*d_h for models I and III, 2*d_h for model II"""
        expected = {'model1': 8, 'model2': 4, 'model3': 8}
        for arch, width in expected.items():
            with self.subTest(arch=arch):
                model = toy_model(arch)
                embedded = model.embed(sentence('AB', 'C'))
                features, shared = multitask.forward_features(
                    model, embedded, 0)
                self.assertEqual(features.shape, (3, width))
                self.assertEqual(shared.shape, (3, 4))
                self.assertEqual(model.head_feature_size, width)

    def test_stacked_private_input(self):
        """Test stacked towers read embeddings and shared states"""
        d_in = 4
        self.assertEqual(toy_model('model1').private[0].input_size, d_in)
        self.assertEqual(toy_model('model2').private[0].input_size, d_in + 4)
        self.assertEqual(toy_model('model3').private[0].input_size, d_in + 4)

    def test_zero_shared_tower(self):
        """Test zero shared parameters give zero shared states"""
        model = toy_model('model2')
        for tensor in model.shared_parameters().values():
            tensor.values[...] = 0.0
        _, shared = multitask.forward_features(
            model, model.embed(sentence('AB')), 1)
        self.assertTrue(np.all(shared.values == 0.0))

    def test_model3_joins_features_of_model2_wiring(self):
        """Test model III features are shared states then model II's"""
        model2 = toy_model('model2')
        model3 = toy_model('model3')
        model3.embedding = model2.embedding
        model3.shared = model2.shared
        model3.private = model2.private
        embedded = model2.embed(sentence('AB', 'C'))
        f2, shared = multitask.forward_features(model2, embedded, 0)
        f3, _ = multitask.forward_features(model3, embedded, 0)
        np.testing.assert_allclose(f3.values,
                                   np.hstack([shared.values, f2.values]))

    def test_model1_shared_half_matches_model3(self):
        """Test model I features start with the shared states of model III"""
        model1 = toy_model('model1')
        model3 = toy_model('model3', seed=1)
        model3.embedding = model1.embedding
        model3.shared = model1.shared
        embedded = model1.embed(sentence('AB', 'C', 'A'))
        for m in (0, 1):
            f1, _ = multitask.forward_features(model1, embedded, m)
            _, shared3 = multitask.forward_features(model3, embedded, m)
            np.testing.assert_array_equal(f1.values[:, :4], shared3.values)

    def test_embedding_shared_by_all_towers(self):
        """Test one embedding table serves every criterion"""
        model = toy_model()
        first = model.embed(sentence('AB'))
        self.assertEqual(first.shape, (2, 4))
        self.assertIn('embedding.unigram', model.shared_parameters())

    def test_without_bigrams(self):
        """Test turning bigrams off halves the input width"""
        model = toy_model(use_bigram=False)
        self.assertEqual(model.embed(sentence('AB')).shape, (2, 2))


class ParameterGroupTests(SimpleTestCase):
    """Test the shared, private and discriminator groups"""

    def test_groups_partition_parameters(self):
        """Test the three groups are disjoint and cover the model"""
        model = toy_model()
        groups = [model.shared_parameters(), model.private_parameters(),
                  model.discriminator_parameters()]
        ids = [id(t) for g in groups for t in g.values()]
        self.assertEqual(len(ids), len(set(ids)))
        self.assertEqual(len(ids), len(model.named_parameters()))

    def test_private_group_of_one_criterion(self):
        """Test a criterion's private group holds its tower and head only"""
        model = toy_model()
        names = set(model.private_parameters('b'))
        self.assertTrue(all('.b.' in name for name in names))
        self.assertEqual(len(names), 7)

    def test_discriminator_shape(self):
        """Test W_d maps 2*d_h pooled states to M scores"""
        model = toy_model(names=('a', 'b', 'c'))
        self.assertEqual(model.discriminator.W_d.shape, (4, 3))

    def test_unknown_criterion(self):
        """Test unknown names list the available criteria"""
        with self.assertRaises(ValueError) as ctx:
            toy_model().criterion_index('msr')
        self.assertIn("'a'", str(ctx.exception))

    def test_duplicate_criteria(self):
        """Test criterion names must be unique"""
        with self.assertRaises(ValueError):
            toy_model(names=('a', 'a'))

    def test_snapshot_restore(self):
        """Test restoring a snapshot undoes changes"""
        model = toy_model()
        before = model.snapshot()
        model.shared.forward.W_g.values += 1.0
        model.restore(before)
        for name, values in model.snapshot().items():
            np.testing.assert_array_equal(values, before[name])

    def test_with_new_criterion(self):
        """Test transfer copies get a new tower, head and zero column"""
        model = toy_model()
        grown = model.with_new_criterion('c', np.random.default_rng(1))
        self.assertEqual(grown.criteria, ['a', 'b', 'c'])
        self.assertEqual(grown.heads[2].feature_size, 8)
        self.assertTrue(np.all(grown.discriminator.W_d.values[:, 2] == 0.0))
        np.testing.assert_array_equal(
            grown.shared.forward.W_g.values, model.shared.forward.W_g.values)
        self.assertIsNot(grown.shared.forward.W_g, model.shared.forward.W_g)
        self.assertEqual(model.M, 2)


class DiscriminatorTests(SimpleTestCase):
    """Test the criterion discriminator"""

    def test_zero_discriminator_is_uniform(self):
        """Test zero weights predict every criterion equally"""
        d = DiscriminatorParams(T.Tensor(np.zeros((4, 5))),
                                T.Tensor(np.zeros(5)))
        p = multitask.discriminator_forward(
            T.Tensor(np.random.default_rng(0).normal(size=(3, 4))), d)
        np.testing.assert_allclose(p.values, 0.2)

    def test_single_position_mean(self):
        """Test one position is pooled to itself"""
        state = np.array([[1.0, -2.0]])
        d = DiscriminatorParams(T.Tensor(np.eye(2)), T.Tensor(np.zeros(2)))
        p = multitask.discriminator_forward(T.Tensor(state), d)
        expected = np.exp(state[0]) / np.exp(state[0]).sum()
        np.testing.assert_allclose(p.values, expected)

    def test_distribution(self):
        """Test outputs sum to one on random inputs"""
        rng = np.random.default_rng(1)
        d = DiscriminatorParams(T.Tensor(rng.normal(size=(4, 3))),
                                T.Tensor(rng.normal(size=3)))
        p = multitask.discriminator_forward(
            T.Tensor(rng.normal(size=(6, 4))), d)
        self.assertAlmostEqual(p.values.sum(), 1.0, delta=1e-12)

    def test_entropy_of_uniform(self):
        """Test a uniform prediction over 8 criteria has entropy ln 8"""
        d = DiscriminatorParams(T.Tensor(np.zeros((2, 8))),
                                T.Tensor(np.zeros(8)))
        h = multitask.entropy(T.Tensor(np.ones((3, 2))), d)
        self.assertAlmostEqual(h.item(), math.log(8), places=6)

    def test_entropy_of_two(self):
        """Test two equal criteria give ln 2"""
        d = DiscriminatorParams(T.Tensor(np.zeros((2, 2))),
                                T.Tensor(np.zeros(2)))
        h = multitask.entropy(T.Tensor(np.ones((1, 2))), d)
        self.assertAlmostEqual(h.item(), 0.693147, places=6)

    def test_permutation_invariance(self):
        """Test reordering positions leaves the prediction unchanged"""
        rng = np.random.default_rng(2)
        d = DiscriminatorParams(T.Tensor(rng.normal(size=(4, 3))),
                                T.Tensor(rng.normal(size=3)))
        states = rng.normal(size=(7, 4))
        p = multitask.discriminator_forward(T.Tensor(states), d)
        for _ in range(5):
            permuted = states[rng.permutation(7)]
            np.testing.assert_allclose(
                multitask.discriminator_forward(T.Tensor(permuted), d).values,
                p.values, atol=1e-12)

    def test_entropy_bounded_by_log_criteria(self):
        """Test H never exceeds ln M"""
        rng = np.random.default_rng(3)
        for criteria in (2, 4, 8):
            for _ in range(50):
                d = DiscriminatorParams(
                    T.Tensor(rng.normal(scale=3.0, size=(4, criteria))),
                    T.Tensor(rng.normal(scale=3.0, size=criteria)))
                states = T.Tensor(rng.normal(size=(5, 4)))
                with self.subTest(criteria=criteria):
                    self.assertLessEqual(multitask.entropy(states, d).item(),
                                         math.log(criteria) + 1e-12)

    def test_entropy_gradient_vanishes_at_uniform(self):
        """Test H is stationary where the prediction is uniform"""
        rng = np.random.default_rng(4)
        d = DiscriminatorParams(T.Tensor(rng.normal(size=(3, 4))),
                                T.Tensor(np.zeros(4)))
        half = rng.normal(size=(2, 3))
        states = T.parameter(np.vstack([half, -half]))
        h = multitask.entropy(states, d)
        self.assertAlmostEqual(h.item(), math.log(4), delta=1e-12)
        T.backward(h)
        self.assertLess(np.linalg.norm(states.grad), 1e-8)

    def test_entropy_of_one_hot(self):
        """Test a certain prediction has zero entropy"""
        d = DiscriminatorParams(T.Tensor(np.zeros((2, 2))),
                                T.Tensor([1000.0, 0.0]))
        h = multitask.entropy(T.Tensor(np.ones((1, 2))), d)
        self.assertAlmostEqual(h.item(), 0.0, places=12)


class ObjectiveTests(SimpleTestCase):
    """Test the training objectives"""

    def test_seg_of_zero_model(self):
        """Test a zero model gives -ln 4 on one character"""
        model = zeroed(toy_model())
        value = multitask.loss_seg(model, [sentence('A')], 0)
        self.assertAlmostEqual(value.item(), -math.log(4))

    def test_seg_is_additive(self):
        """Test a repeated sentence doubles the objective"""
        model = toy_model()
        one = multitask.loss_seg(model, [sentence('AB', 'C')], 0).item()
        two = multitask.loss_seg(model, [sentence('AB', 'C')] * 2, 0).item()
        self.assertAlmostEqual(two, 2 * one, places=12)

    def test_discriminator_objective_of_zero_model(self):
        """Test k sentences under a zero discriminator give k * -ln 4"""
        model = zeroed(toy_model(names=('a', 'b', 'c', 'd')))
        batch = [sentence('AB'), sentence('C'), sentence('B', 'A')]
        value = multitask.loss_adv_discriminator(model, batch, 2)
        self.assertAlmostEqual(value.item(), -3 * math.log(4))

    def test_combined_objective_of_zero_model(self):
        """Test the combined objective composes the trivial cases"""
        model = zeroed(toy_model(names=('a', 'b', 'c', 'd')))
        value = multitask.combined_objective(model, [sentence('A')], 0, 0.05)
        ln4 = math.log(4)
        self.assertAlmostEqual(value.item(), -ln4 - ln4 + 0.05 * ln4)

    def test_combined_without_entropy(self):
        """Test lambda 0 is J_seg plus the discriminator objective"""
        model = toy_model()
        batch = [sentence('AB', 'C'), sentence('BA')]
        combined = multitask.combined_objective(model, batch, 1, 0.0).item()
        expected = (multitask.loss_seg(model, batch, 1).item()
                    + multitask.loss_adv_discriminator(model, batch,
                                                       1).item())
        self.assertAlmostEqual(combined, expected, places=12)

    def test_negative_lambda(self):
        """Test a negative entropy weight is rejected"""
        with self.assertRaises(ValueError):
            multitask.combined_objective(toy_model(), [sentence('A')], 0, -1)

    def test_empty_batch(self):
        """Test objectives need at least one sentence"""
        with self.assertRaises(ValueError):
            multitask.loss_seg(toy_model(), [], 0)

    def test_seg_gradient(self):
        """Test J_seg gradients for every shared and private tensor"""
        for arch in ArchitectureKind:
            model = toy_model(arch.value)
            batch = [sentence('AB', 'C')]
            params = {**model.shared_parameters(),
                      **model.private_parameters(0)}
            self.assertIn('embedding.bigram', params)
            for name, param in params.items():
                with self.subTest(arch=arch.value, param=name):
                    self.assertLess(check_gradients(
                        lambda: multitask.loss_seg(model, batch, 0), [param]),
                        1e-4)

    def test_discriminator_gradient(self):
        """Test the discriminator objective's gradient for W_d"""
        model = toy_model(names=('a', 'b', 'c'))
        batch = [sentence('AB', 'C'), sentence('A')]
        self.assertLess(check_gradients(
            lambda: multitask.loss_adv_discriminator(model, batch, 2),
            [model.discriminator.W_d, model.discriminator.b_d]), 1e-4)

    def test_entropy_gradient(self):
        """Test the entropy objective's gradient for the shared tensors"""
        model = toy_model(names=('a', 'b', 'c'))
        batch = [sentence('AB', 'C'), sentence('BA')]
        for name, param in model.shared_parameters().items():
            with self.subTest(param=name):
                self.assertLess(check_gradients(
                    lambda: multitask.loss_adv_entropy(model, batch, 1),
                    [param]), 1e-4)

    def test_entropy_reaches_shared_only(self):
        """Test the entropy term leaves the discriminator untouched"""
        model = toy_model()
        T.backward(multitask.loss_adv_entropy(model, [sentence('AB')], 0))
        self.assertIsNone(model.discriminator.W_d.grad)
        self.assertIsNotNone(model.shared.forward.W_g.grad)
        self.assertIsNone(model.heads[0].W_s.grad)

    def test_detached_discriminator_objective(self):
        """Test detached shared states keep gradients off the tagger"""
        model = toy_model()
        T.backward(multitask.loss_adv_discriminator(
            model, [sentence('AB')], 0, detach_shared=True))
        self.assertIsNone(model.shared.forward.W_g.grad)
        self.assertIsNotNone(model.discriminator.W_d.grad)

    def test_objective_terms(self):
        """Test non-adversarial terms hold J_seg only"""
        terms = multitask.objective_terms(toy_model(), [sentence('A')], 0,
                                          adversarial=False)
        self.assertEqual(list(terms), ['seg'])


class InferenceTests(SimpleTestCase):
    """Test prediction and segmentation"""

    def test_segment_preserves_text(self):
        """Test the words join back to the input"""
        model = toy_model()
        for text in ('ABCABC', 'A', 'ZZB'):
            self.assertEqual(''.join(multitask.segment(model, text, 'a')),
                             text)

    def test_segment_empty_text(self):
        """Test an empty line gives no words"""
        self.assertEqual(multitask.segment(toy_model(), '', 'a'), [])

    def test_predict_tags(self):
        """Test one tag per character"""
        tags = multitask.predict(toy_model(), sentence('AB', 'C'), 1)
        self.assertEqual(len(tags), 3)

    def test_discriminator_accuracy_range(self):
        """Test accuracy is a fraction"""
        model = toy_model()
        accuracy = multitask.discriminator_accuracy(model, toy_corpora(),
                                                    'train')
        self.assertGreaterEqual(accuracy, 0.0)
        self.assertLessEqual(accuracy, 1.0)
