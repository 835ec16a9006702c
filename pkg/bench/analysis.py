"""Log-log slope fits and cost-vs-MSE curves."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from core.exceptions import DomainError

# Fraction of failed replications above which a curve is reported invalid.
MAX_FAILURE_FRACTION = 0.2


class SlopeFit(NamedTuple):
	slope: float
	intercept: float
	std_error: float


def fit_loglog_slope(points) -> SlopeFit:
	"""
	Ordinary least squares of log2 y on log2 x
	"""
	pts = np.asarray(points, dtype=np.float64)
	if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
		raise DomainError("need at least 3 (x, y) points")
	if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
		raise DomainError("log-log fit needs finite positive values")
	x, y = np.log2(pts[:, 0]), np.log2(pts[:, 1])
	xc = x - x.mean()
	sxx = float(xc @ xc)
	if sxx == 0.0:
		raise DomainError("x values must not all coincide")
	slope = float(xc @ (y - y.mean())) / sxx
	intercept = float(y.mean() - slope * x.mean())
	resid = y - (intercept + slope * x)
	dof = len(x) - 2
	std_error = float(np.sqrt((resid @ resid) / dof / sxx)) if dof > 0 else 0.0
	return SlopeFit(slope, intercept, std_error)


@dataclass(frozen=True)
class CurvePoint:
	L: int
	mean_cost: float
	mse: float
	mse_std_error: float
	replications: int
	failures: int
	p10: float
	p90: float


@dataclass(frozen=True)
class MseCurve:
	"""
	Points sorted by L; xi is the fitted exponent of cost ~ MSE^-xi (None under 3 points)
	"""
	sampler: str
	points: tuple[CurvePoint, ...]
	xi: float | None
	xi_std_error: float | None
	valid: bool

	def to_dict(self) -> dict:
		return {
			"sampler": self.sampler,
			"xi": self.xi,
			"xi_std_error": self.xi_std_error,
			"valid": self.valid,
			"points": [p.__dict__ for p in self.points],
		}


def curve_point(L: int, costs, sq_errors, failures: int = 0) -> CurvePoint:
	costs = np.asarray(costs, dtype=np.float64)
	sq = np.asarray(sq_errors, dtype=np.float64)
	n = sq.size
	se = float(sq.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
	p10, p90 = np.percentile(sq, [10, 90])
	return CurvePoint(L, float(costs.mean()), float(sq.mean()), se, n, failures, float(p10), float(p90))


def build_curve(sampler: str, records) -> MseCurve:
	"""
	records: iterable of (L, cost, sq_error) with sq_error None for failed replications
	"""
	by_level: dict[int, list] = {}
	for L, cost, sq in records:
		by_level.setdefault(int(L), []).append((cost, sq))

	points = []
	total = failed = 0
	for L in sorted(by_level):
		rows = by_level[L]
		ok = [(c, s) for c, s in rows if s is not None]
		total += len(rows)
		failed += len(rows) - len(ok)
		if ok:
			costs, sq = zip(*ok)
			points.append(curve_point(L, costs, sq, len(rows) - len(ok)))

	xi = xi_se = None
	usable = [(p.mse, p.mean_cost) for p in points if p.mse > 0]
	if len(usable) >= 3:
		fit = fit_loglog_slope(usable)
		xi, xi_se = -fit.slope, fit.std_error
	valid = total > 0 and failed / total <= MAX_FAILURE_FRACTION
	return MseCurve(sampler, tuple(points), xi, xi_se, valid)


def cost_at_mse(curve: MseCurve, mse: float) -> float:
	"""
	Cost interpolated log-linearly along the curve at a target MSE
	"""
	pts = sorted((p.mse, p.mean_cost) for p in curve.points if p.mse > 0)
	if not pts:
		raise DomainError(f"{curve.sampler} curve has no usable points")
	x = np.log2([m for m, _ in pts])
	y = np.log2([c for _, c in pts])
	return float(2.0 ** np.interp(np.log2(mse), x, y))
