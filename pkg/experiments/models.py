"""
Experiments App Models
Run ledger for the batch command and per-trial outcomes of genericity runs
"""

from django.db import models
from django.utils import timezone


class ExperimentRun(models.Model):
    """One invocation of ``manage.py robin``."""
    EXPERIMENT_CHOICES = [
        ('validate', 'Validation'),
        ('genericity', 'Genericity'),
        ('surjectivity', 'Surjectivity'),
        ('decay', 'Boundary decay'),
        ('critical', 'Critical points'),
    ]
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('succeeded', 'Succeeded'),
        ('breached', 'Tolerance breached'),
        ('failed', 'Failed'),
    ]

    experiment = models.CharField(max_length=20, choices=EXPERIMENT_CHOICES)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    exit_code = models.PositiveSmallIntegerField(null=True, blank=True)
    seed = models.DecimalField(max_digits=20, decimal_places=0, default=0,
                               help_text='Unsigned 64-bit seed of the counter-based generator')
    nodes = models.PositiveIntegerField(verbose_name='Nodes per loop')
    config_hash = models.CharField(max_length=64, db_index=True)
    config = models.JSONField(default=dict)
    summary = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    message = models.TextField(blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        verbose_name = 'Experiment run'
        verbose_name_plural = 'Experiment runs'

    def __str__(self):
        return f"{self.get_experiment_display()} #{self.pk} ({self.get_status_display()})"

    def finish(self, exit_code, summary=None, message=''):
        if exit_code == 0:
            self.status = 'succeeded'
        elif exit_code == 2:
            self.status = 'breached'
        else:
            self.status = 'failed'
        self.exit_code = exit_code
        self.summary = summary or {}
        self.message = message
        self.finished_at = timezone.now()
        self.save()

    @property
    def duration(self):
        if self.finished_at is None:
            return None
        return self.finished_at - self.started_at


class GenericityTrial(models.Model):
    """One random deformation of a genericity run."""
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='trials')
    index = models.PositiveIntegerField()
    coefficients = models.JSONField(default=list)
    norm = models.FloatField(help_text='Sampled C3 norm of theta')
    critical_count = models.PositiveIntegerField(default=0)
    min_abs_eigenvalue = models.FloatField(null=True, blank=True)
    nondegenerate = models.BooleanField(default=False)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ['run', 'index']
        unique_together = ('run', 'index')
        verbose_name = 'Genericity trial'

    def __str__(self):
        return f"Trial {self.index} of run #{self.run_id}"
