"""Deterministic artifact writers: CSV tables, JSON sidecars, SVG log-log plots, sha256 checksums.

Nothing written here carries a timestamp, so re-emitting the same inputs is byte-identical.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bench.analysis import MseCurve

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["sampler", "L", "alpha", "replication", "cost", "sq_error"]
CURVE_COLUMNS = ["sampler", "L", "mean_cost", "mse", "mse_std_error", "replications", "failures", "p10", "p90"]
RATE_COLUMNS = ["alpha", "depth", "activation", "level", "estimate", "std_error"]

SAMPLER_STYLE = {"smc": ("tab:red", "SMC"), "mlsmc": ("tab:blue", "MLSMC")}

# Fixed salt for the ids matplotlib embeds in SVG output.
_SVG_SALT = "mlbn"


def _fmt(v) -> str:
	return repr(float(v))


class ArtifactAdapter:
	"""
	Writers return the path they wrote; OSErrors are re-raised with the path attached
	"""
	@staticmethod
	def _open(path: Path):
		path = Path(path)
		try:
			path.parent.mkdir(parents=True, exist_ok=True)
			return path.open("w", newline="")
		except OSError as e:
			raise OSError(f"cannot write {path}: {e}") from e

	@staticmethod
	def write_csv(path, header: list[str], rows) -> Path:
		with ArtifactAdapter._open(path) as fh:
			w = csv.writer(fh, lineterminator="\n")
			w.writerow(header)
			w.writerows(rows)
		return Path(path)

	@staticmethod
	def write_bench_csv(path, records) -> Path:
		"""
		records: dicts with the BENCH_COLUMNS keys, already in canonical order
		"""
		rows = ([r["sampler"], str(r["L"]), _fmt(r["alpha"]), str(r["replication"]), _fmt(r["cost"]), _fmt(r["sq_error"])]
			for r in records)
		return ArtifactAdapter.write_csv(path, BENCH_COLUMNS, rows)

	@staticmethod
	def write_curve_csv(path, curves: list[MseCurve]) -> Path:
		rows = ([c.sampler, str(p.L), _fmt(p.mean_cost), _fmt(p.mse), _fmt(p.mse_std_error), str(p.replications),
			str(p.failures), _fmt(p.p10), _fmt(p.p90)] for c in curves for p in c.points)
		return ArtifactAdapter.write_csv(path, CURVE_COLUMNS, rows)

	@staticmethod
	def write_rate_csv(path, rows) -> Path:
		"""
		rows: dicts with the RATE_COLUMNS keys
		"""
		out = ([_fmt(r["alpha"]), str(r["depth"]), r["activation"], str(r["level"]), _fmt(r["estimate"]),
			_fmt(r["std_error"])] for r in rows)
		return ArtifactAdapter.write_csv(path, RATE_COLUMNS, out)

	@staticmethod
	def read_csv(path) -> list[dict]:
		path = Path(path)
		try:
			with path.open(newline="") as fh:
				return list(csv.DictReader(fh))
		except OSError as e:
			raise OSError(f"cannot read {path}: {e}") from e

	@staticmethod
	def write_json(path, payload: dict) -> Path:
		with ArtifactAdapter._open(path) as fh:
			fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
		return Path(path)

	@staticmethod
	def write_jsonl(path, records) -> Path:
		"""
		One compact JSON object per line, keys sorted
		"""
		with ArtifactAdapter._open(path) as fh:
			for record in records:
				fh.write(json.dumps(record, sort_keys=True) + "\n")
		return Path(path)

	@staticmethod
	def read_json(path) -> dict:
		path = Path(path)
		try:
			return json.loads(path.read_text())
		except OSError as e:
			raise OSError(f"cannot read {path}: {e}") from e

	@staticmethod
	def write_array(path, values: np.ndarray) -> Path:
		"""
		Reference predictive means, one row per test input, repr-formatted floats
		"""
		values = np.atleast_2d(values)
		rows = ([_fmt(v) for v in row] for row in values)
		return ArtifactAdapter.write_csv(path, [f"f{k}" for k in range(values.shape[1])], rows)

	@staticmethod
	def read_array(path) -> np.ndarray:
		rows = ArtifactAdapter.read_csv(path)
		return np.array([[float(v) for v in row.values()] for row in rows])

	@staticmethod
	def checksum(path) -> str:
		path = Path(path)
		try:
			return hashlib.sha256(path.read_bytes()).hexdigest()
		except OSError as e:
			raise OSError(f"cannot read {path}: {e}") from e

	@staticmethod
	def _save_svg(fig, path) -> Path:
		path = Path(path)
		try:
			path.parent.mkdir(parents=True, exist_ok=True)
			fig.savefig(path, format="svg", metadata={"Date": None})
		except OSError as e:
			raise OSError(f"cannot write {path}: {e}") from e
		finally:
			plt.close(fig)
		return path

	@staticmethod
	def plot_curves(path, curves: list[MseCurve], title: str = "") -> Path:
		"""
		Cost against MSE on log-log axes, per sampler, with 10th/90th percentile lines and a slope -1 guide
		"""
		with plt.rc_context({"svg.hashsalt": _SVG_SALT, "svg.fonttype": "none"}):
			fig, ax = plt.subplots(figsize=(6, 4.5))
			anchor = None
			for curve in curves:
				if not curve.points:
					continue
				color, label = SAMPLER_STYLE.get(curve.sampler, ("tab:gray", curve.sampler))
				mse = [p.mse for p in curve.points]
				cost = [p.mean_cost for p in curve.points]
				if curve.xi is not None:
					label = f"{label} (xi={curve.xi:.2f})"
				ax.loglog(mse, cost, "o-", color=color, label=label)
				ax.loglog([p.p10 for p in curve.points], cost, "-", color=color, linewidth=0.6)
				ax.loglog([p.p90 for p in curve.points], cost, "-", color=color, linewidth=0.6)
				anchor = anchor or (mse[0], cost[0])
			if anchor is not None:
				xs = np.array([anchor[0], anchor[0] / 2 ** 6])
				ax.loglog(xs, anchor[1] * anchor[0] / xs, "k-", linewidth=1.0, label="cost ~ MSE^-1")
			ax.set_xlabel("MSE")
			ax.set_ylabel("cost")
			if title:
				ax.set_title(title)
			ax.legend()
			return ArtifactAdapter._save_svg(fig, path)

	@staticmethod
	def plot_rates(path, rows, title: str = "") -> Path:
		"""
		log2 increment second moment against level, per (alpha, depth, activation), with its fitted slope
		"""
		groups: dict[tuple, list] = {}
		for r in rows:
			groups.setdefault((float(r["alpha"]), int(r["depth"]), r["activation"]), []).append(r)
		with plt.rc_context({"svg.hashsalt": _SVG_SALT, "svg.fonttype": "none"}):
			fig, ax = plt.subplots(figsize=(6, 4.5))
			for (alpha, depth, act), rs in sorted(groups.items()):
				rs = sorted(rs, key=lambda r: int(r["level"]))
				ax.semilogy([int(r["level"]) for r in rs], [float(r["estimate"]) for r in rs], "o-",
					base=2, label=f"alpha={alpha:g} D={depth} {act}")
			ax.set_xlabel("level l")
			ax.set_ylabel("E|f_l - f_(l-1)|^2")
			if title:
				ax.set_title(title)
			ax.legend(fontsize="small")
			return ArtifactAdapter._save_svg(fig, path)
