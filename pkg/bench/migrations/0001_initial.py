# Generated by Django 5.2.7 on 2026-10-17 09:12

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
                ('id', models.BigAutoField(primary_key=True, serialize=False)),
                ('command', models.CharField(max_length=32)),
                ('task', models.CharField(max_length=32)),
                ('samplers', models.CharField(default='both', max_length=16)),
                ('alpha', models.FloatField()),
                ('seed', models.CharField(max_length=20)),
                ('config', models.JSONField(default=dict)),
                ('output_dir', models.CharField(blank=True, default='', max_length=512)),
                ('status', models.CharField(choices=[('PENDING', 'Pending'), ('RUNNING', 'Running'), ('DONE', 'Done'), ('INVALID', 'Invalid (degeneracy-dominated)'), ('FAILED', 'Failed')], default='PENDING', max_length=16)),
                ('last_error', models.TextField(blank=True, default='')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
        ),
        migrations.CreateModel(
            name='ReplicationResult',
            fields=[
                ('id', models.BigAutoField(primary_key=True, serialize=False)),
                ('sampler', models.CharField(max_length=16)),
                ('level', models.IntegerField()),
                ('replication', models.IntegerField()),
                ('cost', models.FloatField(blank=True, null=True)),
                ('sq_error', models.FloatField(blank=True, null=True)),
                ('status', models.CharField(choices=[('OK', 'Ok'), ('FAILED', 'Failed')], default='OK', max_length=8)),
                ('last_error', models.TextField(blank=True, default='')),
                ('diagnostics', models.JSONField(default=dict)),
                ('idempotency_key', models.CharField(max_length=128, unique=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='replications', to='bench.experimentrun')),
            ],
            options={
                'indexes': [models.Index(fields=['run', 'sampler', 'level'], name='bench_rep_run_level_idx')],
            },
        ),
        migrations.CreateModel(
            name='ReferenceSolution',
            fields=[
                ('id', models.BigAutoField(primary_key=True, serialize=False)),
                ('task', models.CharField(max_length=32)),
                ('alpha', models.FloatField()),
                ('seed', models.CharField(max_length=20)),
                ('level', models.IntegerField()),
                ('path', models.CharField(max_length=512)),
                ('checksum', models.CharField(max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, to='bench.experimentrun')),
            ],
            options={
                'unique_together': {('task', 'alpha', 'seed', 'level')},
            },
        ),
    ]
