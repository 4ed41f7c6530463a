"""Database Models"""

from django.db import models


class TrainingRun(models.Model):
    """Manifest of one training run.

    The same content is written to ``manifest.json`` in the run's output
    directory; the row makes runs queryable across output directories.
    """
    output_dir = models.CharField(max_length=1024)
    arch = models.CharField(max_length=16)
    adversarial = models.BooleanField(default=False)
    seed = models.IntegerField()
    config = models.JSONField(default=dict)
    corpora = models.JSONField(default=dict)
    metrics = models.JSONField(default=dict, blank=True)
    code_version = models.CharField(max_length=32)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        mode = '+adv' if self.adversarial else ''
        return f'{self.arch}{mode} seed={self.seed} -> {self.output_dir}'

    @property
    def is_finished(self):
        return self.finished_at is not None
