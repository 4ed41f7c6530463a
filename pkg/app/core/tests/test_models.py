"""
Tests for models.
"""
from datetime import timedelta

from django.test import TestCase
from django.utils import timezone

from core import models


def create_run(**params):
    """Create and return a sample training run."""
    defaults = {
        'output_dir': '/tmp/run',
        'arch': 'model1',
        'adversarial': True,
        'seed': 1,
        'config': {'hidden_size': 100},
        'corpora': {'pku': {'train': 'pku.train.txt'}},
        'code_version': '1.0.0',
        'started_at': timezone.now(),
    }
    defaults.update(params)
    return models.TrainingRun.objects.create(**defaults)


class ModelTests(TestCase):
    """Test models"""

    def test_create_training_run(self):
        """Test creating a training run is successful"""
        run = create_run()
        self.assertEqual(str(run), 'model1+adv seed=1 -> /tmp/run')
        self.assertFalse(run.is_finished)
        self.assertEqual(run.metrics, {})

    def test_finish_training_run(self):
        """Test a run with an end time is finished"""
        run = create_run()
        run.finished_at = timezone.now()
        run.metrics = {'average_test_f': 0.95}
        run.save()
        run.refresh_from_db()
        self.assertTrue(run.is_finished)
        self.assertEqual(run.metrics['average_test_f'], 0.95)

    def test_runs_newest_first(self):
        """Test runs are listed newest first"""
        older = create_run(started_at=timezone.now() - timedelta(hours=1))
        newer = create_run(adversarial=False)
        self.assertEqual(list(models.TrainingRun.objects.all()),
                         [newer, older])
