"""Benchmark orchestration.

This module coordinates: dataset → reference solution → replicated sampler runs → curves → artifacts.
Replications run on a thread pool as pure computations; ledger rows are written from the calling
thread in sorted (sampler, L, replication) order, so artifacts never depend on scheduling.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
from django.db import IntegrityError, transaction

from core.datasets import gen_regression, gen_rl, gen_spiral, regression_inputs, spiral_points
from core.exceptions import ConfigurationError, DegeneracyError
from core.likelihoods import ClassificationModel, LikelihoodModel, RegressionModel, RlModel
from core.mlsmc import MlsmcConfig, allocate_samples, level_costs, ml_estimate, run_mlsmc
from core.nn import Activation
from core.prior import TnnPrior, increment_second_moment
from core.rng import RngStream
from core.smc import ess, run_smc_tempered, weighted_mean

from .adapters.artifact_adapter import ArtifactAdapter
from .adapters.checkpoint_adapter import CheckpointAdapter
from .analysis import MseCurve, build_curve, fit_loglog_slope
from .config import ExperimentConfig
from .models import ExperimentRun, ReferenceSolution, ReplicationResult, ReplicationStatus, RunStatus

logger = logging.getLogger(__name__)

# Dimension of the regression inputs and of the RL state.
REGRESSION_INPUT_DIM = 10
RL_STATE_DIM = 17
SPIRAL_ARM_SCALE = 16.0
SPIRAL_CONCENTRATION = 0.05
# The doubled-budget reference must move the predictive means by less than target MSE / 10.
REFERENCE_CHECK_SCALE = 2.0
REFERENCE_GATE_DIVISOR = 10.0
ALLOCATION_LABEL = "P_l ~ 2^(-l(beta+gamma)/2), floored at min_samples, non-increasing"
PACKAGES = ("numpy", "scipy", "matplotlib", "Django")


def artifact_stem(config: ExperimentConfig, seed: int) -> str:
	return f"{config.task}_alpha{config.alpha:g}_seed{seed}"


def config_digest(config: ExperimentConfig) -> str:
	text = json.dumps(config.to_dict(), sort_keys=True)
	return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def package_versions() -> dict:
	out = {}
	for name in PACKAGES:
		try:
			out[name] = version(name)
		except PackageNotFoundError:
			out[name] = "unknown"
	return out


# --- Task set-up --------------------------------------------------------------

def build_model(config: ExperimentConfig, seed: int) -> LikelihoodModel:
	"""
	Synthetic dataset of the task (teacher network at the reference level) wrapped in its likelihood
	"""
	act = config.act
	if config.task == "regression":
		data = gen_regression(seed, N=config.data_size or 200, n=REGRESSION_INPUT_DIM,
			teacher_level=config.reference_level, alpha=config.alpha, act=act, depth=config.depth)
		return RegressionModel(data, act, config.depth)
	if config.task == "classification":
		data = gen_spiral(seed, N=config.data_size or 500)
		return ClassificationModel(data, act, config.depth)
	if config.task == "rl":
		traj = gen_rl(seed, T=config.data_size or 100, state_dim=RL_STATE_DIM, teacher_level=config.reference_level,
			alpha=config.alpha, act=act, depth=config.depth)
		return RlModel(traj, act, config.depth)
	raise ConfigurationError(f"task {config.task!r} has no likelihood model")


def evaluation_panel(config: ExperimentConfig, seed: int) -> np.ndarray:
	"""
	Fixed inputs at which predictive means are compared, drawn once per task seed
	"""
	gen = RngStream(seed).child("panel", config.task).generator()
	if config.task == "regression":
		return regression_inputs(gen, config.n_test, REGRESSION_INPUT_DIM)
	if config.task == "classification":
		points, _ = spiral_points(gen, math.ceil(config.n_test / 2), SPIRAL_ARM_SCALE, SPIRAL_CONCENTRATION, 0.0)
		return points[:config.n_test]
	if config.task == "rl":
		return gen.standard_normal((config.n_test, RL_STATE_DIM))
	raise ConfigurationError(f"task {config.task!r} has no test panel")


def mlsmc_config(config: ExperimentConfig, model: LikelihoodModel, L: int, budget: float) -> MlsmcConfig:
	costs = level_costs([1] * L, config.n_steps, model.network_shape(1), first_level=1)
	sizes = allocate_samples(budget, config.allocation_beta, config.gamma, L, costs, min_size=config.min_samples)
	return MlsmcConfig(L=L, sample_sizes=sizes, alpha=config.alpha, activation=config.act,
		mutation=config.mutation, resampling=config.resampling, bridge_ess=config.bridge_ess)


def smc_particles(config: ExperimentConfig, model: LikelihoodModel, L: int, budget: float) -> int:
	"""
	Particles whose single tempering stage costs the budget; the realised cost scales with the stage count
	"""
	per_particle = config.n_steps * model.network_shape(L).param_count
	return max(config.min_samples, int(budget // per_particle))


@dataclass(frozen=True)
class ReplicationOutcome:
	cost: float
	prediction: np.ndarray
	diagnostics: dict


def run_replication(sampler: str, config: ExperimentConfig, model: LikelihoodModel, panel: np.ndarray, L: int,
		rng: RngStream) -> ReplicationOutcome:
	"""
	One sampler run at finest level L; pure, safe to call from worker threads
	"""
	budget = config.budget(L)
	if sampler == "smc":
		P = smc_particles(config, model, L, budget)
		prior = TnnPrior(config.alpha, model.network_shape(L), config.act)
		res = run_smc_tempered(model, prior, P, None, config.mutation, rng, scheme=config.resampling)
		pop = res.population
		prediction = weighted_mean(pop, model.predict_batch(pop.shape, pop.particles, panel))
		return ReplicationOutcome(res.cost, prediction, {
			"P": P, "stages": len(res.temperatures) - 1, "resamples": res.resample_count, "ess": ess(pop.log_weights),
			"acceptance": float(np.mean(res.acceptance)), "rho": res.rhos[-1], "log_evidence": res.log_evidence,
		})
	if sampler == "mlsmc":
		cfg = mlsmc_config(config, model, L, budget)
		populations = run_mlsmc(cfg, model, rng, x=panel)
		est = ml_estimate(populations, model, panel)
		return ReplicationOutcome(est.total_cost, est.value, est.diagnostics)
	raise ConfigurationError(f"unknown sampler {sampler!r}")


def squared_error(prediction: np.ndarray, reference: np.ndarray) -> float:
	"""
	Squared error averaged over test inputs and output coordinates
	"""
	return float(np.mean((np.asarray(prediction) - np.asarray(reference)) ** 2))


# --- Reference ------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceResult:
	values: np.ndarray
	path: Path
	checksum: str
	record: ReferenceSolution


def reference_paths(config: ExperimentConfig, seed: int, out_dir) -> tuple[Path, Path]:
	stem = f"reference_{artifact_stem(config, seed)}_L{config.reference_level}"
	out_dir = Path(out_dir)
	return out_dir / f"{stem}.csv", out_dir / f"{stem}.json"


def _reference_estimate(config: ExperimentConfig, seed: int, factor: float, rng: RngStream, on_level=None,
		resume=None):
	model = build_model(config, seed)
	panel = evaluation_panel(config, seed)
	budget = factor * config.budget(config.levels[1])
	cfg = mlsmc_config(config, model, config.reference_level, budget)
	populations = run_mlsmc(cfg, model, rng, on_level=on_level, resume=resume, x=panel)
	return cfg, budget, panel, ml_estimate(populations, model, panel)


def _fail(run: ExperimentRun, error: Exception):
	run.status = RunStatus.FAILED
	run.last_error = str(error)
	run.save(update_fields=["status", "last_error", "updated_at"])


def compute_reference(config: ExperimentConfig, seed: int, out_dir, checkpoints: bool = True) -> ReferenceResult:
	"""
	High-effort MLSMC run at the reference level; its predictive means on the test panel are ground truth.

	The budget is reference_factor times the largest benchmark budget. Populations are checkpointed
	after each level so an interrupted run resumes from the last complete level.
	"""
	L = config.reference_level
	run = ExperimentRun.objects.create(command="reference", task=config.task, samplers="mlsmc", alpha=config.alpha,
		seed=str(seed), config=config.to_dict(), output_dir=str(out_dir), status=RunStatus.RUNNING)
	logger.info("reference run=%s task=%s L=%d factor=%g", run.id, config.task, L, config.reference_factor)

	on_level = resume = None
	if checkpoints:
		ckpt_dir = Path(out_dir) / "checkpoints" / f"{artifact_stem(config, seed)}_{config_digest(config)}"
		resume = CheckpointAdapter.load_all(ckpt_dir)[:L] or None
		if resume:
			logger.info("resuming reference from %d checkpointed populations", len(resume))
		def on_level(index, pop):
			CheckpointAdapter.save(pop, ckpt_dir, index)

	try:
		cfg, budget, panel, est = _reference_estimate(config, seed, config.reference_factor,
			RngStream(seed).child("reference"), on_level=on_level, resume=resume)
	except Exception as e:
		_fail(run, e)
		raise

	csv_path, json_path = reference_paths(config, seed, out_dir)
	ArtifactAdapter.write_array(csv_path, est.value)
	checksum = ArtifactAdapter.checksum(csv_path)
	ArtifactAdapter.write_json(json_path, {
		"config": config.to_dict(),
		"seed": seed,
		"reference_level": L,
		"hidden_width": 2 ** L,
		"sample_sizes": list(cfg.sample_sizes),
		"budget": budget,
		"sampler": "mlsmc",
		"allocation": ALLOCATION_LABEL,
		"total_cost": est.total_cost,
		"checksum": checksum,
		"panel_size": int(panel.shape[0]),
		"diagnostics": est.diagnostics,
		"versions": package_versions(),
	})
	record, _ = ReferenceSolution.objects.update_or_create(
		task=config.task, alpha=config.alpha, seed=str(seed), level=L,
		defaults=dict(run=run, path=str(csv_path), checksum=checksum),
	)
	run.status = RunStatus.DONE
	run.save(update_fields=["status", "updated_at"])
	logger.info("reference written %s sha256=%s", csv_path, checksum)
	return ReferenceResult(est.value, csv_path, checksum, record)


@dataclass(frozen=True)
class ReferenceCheck:
	shift: float
	target_mse: float
	factor: float
	path: Path

	@property
	def tolerance(self) -> float:
		return self.target_mse / REFERENCE_GATE_DIVISOR

	@property
	def passed(self) -> bool:
		return self.shift < self.tolerance


def smallest_target_mse(config: ExperimentConfig, seed: int, out_dir) -> float:
	"""
	Smallest curve MSE of the finished sweep, read from its JSON sidecar
	"""
	path = Path(out_dir) / f"bench_{artifact_stem(config, seed)}.json"
	if not path.exists():
		raise ConfigurationError(f"no bench results at {path}; run bench first or pass a target MSE")
	curves = ArtifactAdapter.read_json(path).get("curves", {})
	values = [p["mse"] for c in curves.values() for p in c.get("points", [])
		if p.get("mse") is not None and math.isfinite(p["mse"]) and p["mse"] > 0]
	if not values:
		raise ConfigurationError(f"{path} has no curve points")
	return float(min(values))


def check_reference(config: ExperimentConfig, seed: int, out_dir, target_mse: float | None = None) -> ReferenceCheck:
	"""
	Rerun the reference at twice its budget; the shift of the predictive means (same squared error as
	the sweep's MSE) must stay below target_mse / 10. target_mse defaults to the sweep's smallest MSE.
	"""
	reference = load_reference(config, seed, out_dir)
	target = smallest_target_mse(config, seed, out_dir) if target_mse is None else float(target_mse)
	if target <= 0:
		raise ConfigurationError("target MSE must be positive")
	factor = REFERENCE_CHECK_SCALE * config.reference_factor
	run = ExperimentRun.objects.create(command="reference_check", task=config.task, samplers="mlsmc",
		alpha=config.alpha, seed=str(seed), config=config.to_dict(), output_dir=str(out_dir), status=RunStatus.RUNNING)
	try:
		_, budget, _, est = _reference_estimate(config, seed, factor, RngStream(seed).child("reference-check"))
	except Exception as e:
		_fail(run, e)
		raise

	_, json_path = reference_paths(config, seed, out_dir)
	path = json_path.with_name(json_path.stem + "_check.json")
	check = ReferenceCheck(squared_error(est.value, reference), target, factor, path)
	ArtifactAdapter.write_json(path, {
		"config": config.to_dict(),
		"seed": seed,
		"reference_factor": factor,
		"budget": budget,
		"shift": check.shift,
		"target_mse": target,
		"tolerance": check.tolerance,
		"passed": check.passed,
		"total_cost": est.total_cost,
	})
	run.status = RunStatus.DONE if check.passed else RunStatus.INVALID
	run.save(update_fields=["status", "updated_at"])
	logger.info("reference check shift=%.3g tolerance=%.3g passed=%s", check.shift, check.tolerance, check.passed)
	return check


def load_reference(config: ExperimentConfig, seed: int, out_dir) -> np.ndarray:
	"""
	Reference values for (task, alpha, seed); the file must match its recorded checksum
	"""
	csv_path, _ = reference_paths(config, seed, out_dir)
	record = ReferenceSolution.objects.filter(task=config.task, alpha=config.alpha, seed=str(seed),
		level=config.reference_level).first()
	path = Path(record.path) if record else csv_path
	if not path.exists():
		raise ConfigurationError(f"no reference at {path}; run the reference command first")
	if record and ArtifactAdapter.checksum(path) != record.checksum:
		raise ConfigurationError(f"reference {path} does not match its recorded checksum")
	return ArtifactAdapter.read_array(path)


# --- Benchmark --------------------------------------------------------------------

@dataclass(frozen=True)
class BenchResult:
	run: ExperimentRun
	curves: dict[str, MseCurve]
	paths: dict[str, Path]

	@property
	def valid(self) -> bool:
		return all(c.valid for c in self.curves.values())


def replication_key(run: ExperimentRun, sampler: str, L: int, replication: int) -> str:
	return f"{run.id}:{sampler}:{L}:{replication}"


def record_replication(run: ExperimentRun, sampler: str, L: int, replication: int, *, cost=None, sq_error=None,
		error: str = "", diagnostics: dict | None = None) -> ReplicationResult:
	"""
	Idempotent on idempotency_key: a cell recorded twice keeps its first row
	"""
	key = replication_key(run, sampler, L, replication)
	try:
		with transaction.atomic():
			return ReplicationResult.objects.create(
				run=run, sampler=sampler, level=L, replication=replication, cost=cost, sq_error=sq_error,
				status=ReplicationStatus.FAILED if error else ReplicationStatus.OK,
				last_error=error, diagnostics=diagnostics or {}, idempotency_key=key,
			)
	except IntegrityError:
		# Already recorded by an earlier (resumed) sweep
		return ReplicationResult.objects.get(idempotency_key=key)


def _cells(config: ExperimentConfig):
	return [(s, L, r) for s in config.sampler_list for L in config.level_range for r in range(config.replications)]


def _run_cell(config, model, panel, reference, seed, cell):
	sampler, L, r = cell
	stream = RngStream(seed).child("bench", sampler, L).seed_block(config.replications)[r]
	try:
		out = run_replication(sampler, config, model, panel, L, stream)
	except DegeneracyError as e:
		return cell, None, None, f"degeneracy at population {e.level}: {e}", {}
	diagnostics = dict(out.diagnostics, estimate=np.asarray(out.prediction).tolist())
	return cell, out.cost, squared_error(out.prediction, reference), "", diagnostics


def run_mse_vs_cost(config: ExperimentConfig, seed: int, out_dir, threads: int = 1,
		run: ExperimentRun | None = None) -> BenchResult:
	"""
	Replicated SMC/MLSMC runs per finest level L, MSE against the reference, curves and artifacts.

	Passing an existing run resumes it: cells already in its ledger are not recomputed.
	"""
	reference = load_reference(config, seed, out_dir)
	model = build_model(config, seed)
	panel = evaluation_panel(config, seed)
	if run is None:
		run = ExperimentRun.objects.create(command="bench", task=config.task, samplers=config.samplers,
			alpha=config.alpha, seed=str(seed), config=config.to_dict(), output_dir=str(out_dir))
	run.status = RunStatus.RUNNING
	run.save(update_fields=["status", "updated_at"])

	done = set(run.replications.values_list("idempotency_key", flat=True))
	todo = [c for c in _cells(config) if replication_key(run, *c) not in done]
	logger.info("bench run=%s task=%s cells=%d (resumed %d) threads=%d", run.id, config.task, len(todo),
		len(done), threads)

	try:
		with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
			results = list(pool.map(lambda c: _run_cell(config, model, panel, reference, seed, c), todo))
	except Exception as e:
		_fail(run, e)
		raise

	for (sampler, L, r), cost, sq, error, diag in sorted(results, key=lambda x: x[0]):
		if error:
			logger.warning("replication %s L=%d r=%d failed: %s", sampler, L, r, error)
			record_replication(run, sampler, L, r, error=error)
		else:
			record_replication(run, sampler, L, r, cost=cost, sq_error=sq, diagnostics=diag)

	curves, paths = emit_bench_outputs(run, config, seed, out_dir)
	run.status = RunStatus.DONE if all(c.valid for c in curves.values()) else RunStatus.INVALID
	run.save(update_fields=["status", "updated_at"])
	logger.info("bench run=%s finished status=%s", run.id, run.status)
	return BenchResult(run, curves, paths)


def bench_records(run: ExperimentRun, config: ExperimentConfig) -> list[ReplicationResult]:
	order = {s: i for i, s in enumerate(config.sampler_list)}
	rows = list(run.replications.all())
	return sorted(rows, key=lambda r: (order.get(r.sampler, len(order)), r.level, r.replication))


def curves_for_run(run: ExperimentRun, config: ExperimentConfig) -> dict[str, MseCurve]:
	rows = bench_records(run, config)
	return {
		s: build_curve(s, [(r.level, r.cost, r.sq_error if r.status == ReplicationStatus.OK else None)
			for r in rows if r.sampler == s])
		for s in config.sampler_list
	}


def replication_record(row: ReplicationResult, config: ExperimentConfig, seed: int) -> dict:
	"""
	JSON-lines record of one replication: config echo, per-level diagnostics, estimate and cost
	"""
	diag = row.diagnostics or {}
	if "sample_sizes" in diag:
		acceptance = [None] + list(diag.get("acceptance", []))
		increments = [{}] + list(diag.get("increments", []))
		levels = [
			{"level": level, "P": P, "ess": e, "acceptance": a, "increment_mean": inc.get("mean"),
				"increment_variance": inc.get("variance")}
			for level, P, e, a, inc in zip(diag["levels"], diag["sample_sizes"], diag["ess"], acceptance, increments)
		]
	elif diag:
		levels = [{"level": row.level, "P": diag.get("P"), "ess": diag.get("ess"), "acceptance": diag.get("acceptance"),
			"increment_mean": None, "increment_variance": None}]
	else:
		levels = []
	return {
		"config": config.to_dict(),
		"seed": seed,
		"sampler": row.sampler,
		"L": row.level,
		"replication": row.replication,
		"status": row.status,
		"levels": levels,
		"estimate": diag.get("estimate"),
		"cost": row.cost,
		"sq_error": row.sq_error,
		"error": row.last_error,
	}


def emit_bench_outputs(run: ExperimentRun, config: ExperimentConfig, seed: int, out_dir):
	"""
	CSV of replications, CSV of curve points, SVG plot, JSON sidecar and a JSON-lines record per
	replication, all derived from the ledger
	"""
	out_dir = Path(out_dir)
	stem = artifact_stem(config, seed)
	rows = bench_records(run, config)
	curves = curves_for_run(run, config)
	ok = [r for r in rows if r.status == ReplicationStatus.OK]
	paths = {
		"bench_csv": ArtifactAdapter.write_bench_csv(out_dir / f"bench_{stem}.csv", (
			{"sampler": r.sampler, "L": r.level, "alpha": config.alpha, "replication": r.replication,
				"cost": r.cost, "sq_error": r.sq_error} for r in ok)),
		"curve_csv": ArtifactAdapter.write_curve_csv(out_dir / f"curve_{stem}.csv", list(curves.values())),
		"svg": ArtifactAdapter.plot_curves(out_dir / f"bench_{stem}.svg", list(curves.values()),
			title=f"{config.task}, alpha={config.alpha:g}"),
		"jsonl": ArtifactAdapter.write_jsonl(out_dir / f"bench_{stem}.jsonl",
			(replication_record(r, config, seed) for r in rows)),
	}
	_, ref_json = reference_paths(config, seed, out_dir)
	paths["json"] = ArtifactAdapter.write_json(out_dir / f"bench_{stem}.json", {
		"config": config.to_dict(),
		"seed": seed,
		"samplers": list(config.sampler_list),
		"allocation": ALLOCATION_LABEL,
		"allocation_beta": config.allocation_beta,
		"gamma": config.gamma,
		"smc_bridging": "likelihood tempering, adaptive (ESS = P/2)",
		"mlsmc_bridging": "tempered G_l below ESS = bridge_ess * P" if config.bridge_ess else "none",
		"pcn_adapt": config.pcn_adapt,
		"mse": f"squared error averaged over a {config.n_test}-input panel and output coordinates",
		"budgets": {str(L): config.budget(L) for L in config.level_range},
		"reference": ArtifactAdapter.read_json(ref_json).get("checksum") if ref_json.exists() else None,
		"failures": {s: sum(1 for r in rows if r.sampler == s and r.status != ReplicationStatus.OK)
			for s in config.sampler_list},
		"curves": {s: c.to_dict() for s, c in curves.items()},
		"versions": package_versions(),
	})
	return curves, paths


def replot(out_dir, config: ExperimentConfig, seed: int) -> Path:
	"""
	Re-render the SVG of a finished sweep from its curve CSV
	"""
	out_dir = Path(out_dir)
	stem = artifact_stem(config, seed)
	rows = ArtifactAdapter.read_csv(out_dir / f"curve_{stem}.csv")
	if not rows:
		raise ConfigurationError(f"no curve points in {out_dir / f'curve_{stem}.csv'}")
	bench_rows = ArtifactAdapter.read_csv(out_dir / f"bench_{stem}.csv")
	curves = []
	for sampler in config.sampler_list:
		records = [(int(r["L"]), float(r["cost"]), float(r["sq_error"])) for r in bench_rows if r["sampler"] == sampler]
		if records:
			curves.append(build_curve(sampler, records))
	return ArtifactAdapter.plot_curves(out_dir / f"bench_{stem}.svg", curves, title=f"{config.task}, alpha={config.alpha:g}")


# --- Rate check -------------------------------------------------------------------

def run_rate_check(config: ExperimentConfig, seed: int, out_dir, threads: int = 1) -> dict:
	"""
	E|f_l - f_{l-1}|^2 under the coupled prior for D in {2, 3}, ReLU and Tanh, and each alpha;
	slopes fitted on log2 second moment against log2 width (= level)
	"""
	alphas = config.rate_alphas or config.alpha_grid
	x = regression_inputs(RngStream(seed).child("rate-input").generator(), 1, REGRESSION_INPUT_DIM)[0]
	run = ExperimentRun.objects.create(command="rate_check", task="rate", samplers="", alpha=alphas[0], seed=str(seed),
		config=config.to_dict(), output_dir=str(out_dir), status=RunStatus.RUNNING)
	try:
		rows, slopes = _rate_tables(config, seed, alphas, x, threads)
		out_dir = Path(out_dir)
		stem = f"rate_seed{seed}"
		paths = {
			"csv": ArtifactAdapter.write_rate_csv(out_dir / f"{stem}.csv", rows),
			"svg": ArtifactAdapter.plot_rates(out_dir / f"{stem}.svg", rows, title="coupled increment second moment"),
			"json": ArtifactAdapter.write_json(out_dir / f"{stem}.json", {
				"config": config.to_dict(), "seed": seed, "alphas": list(alphas), "input": [float(v) for v in x],
				"slopes": slopes, "versions": package_versions(),
			}),
		}
	except Exception as e:
		_fail(run, e)
		raise
	run.status = RunStatus.DONE
	run.save(update_fields=["status", "updated_at"])
	return {"rows": rows, "slopes": slopes, "paths": paths, "run": run}


def _rate_tables(config: ExperimentConfig, seed: int, alphas, x: np.ndarray, threads: int):
	levels = range(config.rate_levels[0], config.rate_levels[1] + 1)
	groups = [(a, d, act) for a in alphas for d in (2, 3) for act in (Activation.RELU, Activation.TANH)]

	def one(group):
		alpha, depth, act = group
		stream = RngStream(seed).child("rate", alpha, depth, act.value)
		return group, increment_second_moment(alpha, depth, act, levels, x, config.rate_samples, stream)

	with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
		results = list(pool.map(one, groups))

	rows, slopes = [], []
	for (alpha, depth, act), table in results:
		rows.extend({"alpha": alpha, "depth": depth, "activation": act.value, "level": r.level,
			"estimate": r.estimate, "std_error": r.std_error} for r in table)
		fit = fit_loglog_slope([(2.0 ** r.level, r.estimate) for r in table])
		slopes.append({"alpha": alpha, "depth": depth, "activation": act.value, "slope": fit.slope,
			"std_error": fit.std_error, "canonical": -(2.0 * alpha - 1.0)})
		logger.info("rate alpha=%g D=%d %s slope=%.3f", alpha, depth, act.value, fit.slope)
	return rows, slopes
