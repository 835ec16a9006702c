"""Ledger of benchmark sweeps.


Tables:
- RunStatus
- ExperimentRun: one sweep (task, alpha, seed, full config echo)
- ReplicationStatus
- ReplicationResult: one (sampler, L, replication) cell; idempotency_key makes resumed sweeps skip finished cells
- ReferenceSolution: ground-truth predictive means on disk, with checksum

CSV/SVG/JSON artifacts are the deliverable; these rows are the audit trail.
"""

from django.db import models


class RunStatus(models.TextChoices):
	PENDING = "PENDING", "Pending"
	RUNNING = "RUNNING", "Running"
	DONE = "DONE", "Done"
	INVALID = "INVALID", "Invalid (degeneracy-dominated)"
	FAILED = "FAILED", "Failed"


class ExperimentRun(models.Model):
	id = models.BigAutoField(primary_key=True)
	command = models.CharField(max_length=32) # 'bench' | 'reference' | 'reference_check' | 'rate_check'
	task = models.CharField(max_length=32)
	samplers = models.CharField(max_length=16, default="both")
	alpha = models.FloatField()
	seed = models.CharField(max_length=20) # u64 in decimal
	config = models.JSONField(default=dict)
	output_dir = models.CharField(max_length=512, blank=True, default="")
	status = models.CharField(max_length=16, choices=RunStatus.choices, default=RunStatus.PENDING)
	last_error = models.TextField(blank=True, default="")
	created_at = models.DateTimeField(auto_now_add=True)
	updated_at = models.DateTimeField(auto_now=True)


class ReplicationStatus(models.TextChoices):
	OK = "OK", "Ok"
	FAILED = "FAILED", "Failed"


class ReplicationResult(models.Model):
	"""
	Outcome of one replication. Uniqueness: idempotency_key = "{run}:{sampler}:{L}:{replication}"
	"""
	id = models.BigAutoField(primary_key=True)
	run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name="replications")
	sampler = models.CharField(max_length=16) # 'smc' | 'mlsmc'
	level = models.IntegerField()
	replication = models.IntegerField()
	cost = models.FloatField(null=True, blank=True)
	sq_error = models.FloatField(null=True, blank=True)
	status = models.CharField(max_length=8, choices=ReplicationStatus.choices, default=ReplicationStatus.OK)
	last_error = models.TextField(blank=True, default="")
	diagnostics = models.JSONField(default=dict)
	idempotency_key = models.CharField(max_length=128, unique=True)
	created_at = models.DateTimeField(auto_now_add=True)

	class Meta:
		indexes = [
			models.Index(fields=["run", "sampler", "level"], name="bench_rep_run_level_idx"),
		]


class ReferenceSolution(models.Model):
	id = models.BigAutoField(primary_key=True)
	run = models.ForeignKey(ExperimentRun, null=True, blank=True, on_delete=models.SET_NULL)
	task = models.CharField(max_length=32)
	alpha = models.FloatField()
	seed = models.CharField(max_length=20) # u64 in decimal
	level = models.IntegerField()
	path = models.CharField(max_length=512)
	checksum = models.CharField(max_length=64) # sha256 hex
	created_at = models.DateTimeField(auto_now_add=True)

	class Meta:
		unique_together = (("task", "alpha", "seed", "level"),)
