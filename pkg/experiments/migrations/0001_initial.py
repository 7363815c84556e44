# Generated by Django 6.0.2 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('experiment', models.CharField(choices=[('validate', 'Validation'), ('genericity', 'Genericity'), ('surjectivity', 'Surjectivity'), ('decay', 'Boundary decay'), ('critical', 'Critical points')], max_length=20)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('breached', 'Tolerance breached'), ('failed', 'Failed')], default='running', max_length=20)),
                ('exit_code', models.PositiveSmallIntegerField(blank=True, null=True)),
                ('seed', models.DecimalField(decimal_places=0, default=0, help_text='Unsigned 64-bit seed of the counter-based generator', max_digits=20)),
                ('nodes', models.PositiveIntegerField(verbose_name='Nodes per loop')),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('config', models.JSONField(default=dict)),
                ('summary', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('message', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'Experiment run',
                'verbose_name_plural': 'Experiment runs',
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='GenericityTrial',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('index', models.PositiveIntegerField()),
                ('coefficients', models.JSONField(default=list)),
                ('norm', models.FloatField(help_text='Sampled C3 norm of theta')),
                ('critical_count', models.PositiveIntegerField(default=0)),
                ('min_abs_eigenvalue', models.FloatField(blank=True, null=True)),
                ('nondegenerate', models.BooleanField(default=False)),
                ('error', models.TextField(blank=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='trials', to='experiments.experimentrun')),
            ],
            options={
                'verbose_name': 'Genericity trial',
                'ordering': ['run', 'index'],
                'unique_together': {('run', 'index')},
            },
        ),
    ]
