"""Read-only endpoints to inspect the benchmark ledger (runs, per-level aggregates, references)."""

from django.db.models import Avg, Count, Q
from django.http import HttpResponseBadRequest, JsonResponse
from django.shortcuts import get_object_or_404

from bench.models import ExperimentRun, ReferenceSolution, ReplicationStatus


def health(request):
	return JsonResponse({"ok": True})


def _run_summary(run: ExperimentRun) -> dict:
	return {
		"id": run.id,
		"command": run.command,
		"task": run.task,
		"samplers": run.samplers,
		"alpha": run.alpha,
		"seed": run.seed,
		"status": run.status,
		"output_dir": run.output_dir,
		"created_at": run.created_at.isoformat(),
		"updated_at": run.updated_at.isoformat(),
	}


def runs(request):
	"""
	GET: Recent runs, newest first; ?command= and ?status= filter
	"""
	if request.method != "GET":
		return HttpResponseBadRequest("GET only")
	qs = ExperimentRun.objects.order_by("-created_at", "-id")
	if request.GET.get("command"):
		qs = qs.filter(command=request.GET["command"])
	if request.GET.get("status"):
		qs = qs.filter(status=request.GET["status"])
	return JsonResponse([_run_summary(r) for r in qs[:50]], safe=False)


def run_detail(request, run_id: int):
	"""
	GET: One run with its config and per-(sampler, L) aggregates over replications
	"""
	if request.method != "GET":
		return HttpResponseBadRequest("GET only")
	run = get_object_or_404(ExperimentRun, pk=run_id)
	ok = Q(status=ReplicationStatus.OK)
	levels = (
		run.replications.values("sampler", "level")
		.annotate(
			replications=Count("id"),
			failures=Count("id", filter=~ok),
			mean_cost=Avg("cost", filter=ok),
			mse=Avg("sq_error", filter=ok),
		)
		.order_by("sampler", "level")
	)
	data = _run_summary(run)
	data["config"] = run.config
	data["last_error"] = run.last_error
	data["levels"] = list(levels)
	return JsonResponse(data)


def references(request):
	"""
	GET: Stored reference solutions with their checksums
	"""
	if request.method != "GET":
		return HttpResponseBadRequest("GET only")
	rows = ReferenceSolution.objects.order_by("task", "alpha", "seed", "level")
	data = [
		{
			"task": r.task,
			"alpha": r.alpha,
			"seed": r.seed,
			"level": r.level,
			"path": r.path,
			"checksum": r.checksum,
			"created_at": r.created_at.isoformat(),
		}
		for r in rows
	]
	return JsonResponse(data, safe=False)
