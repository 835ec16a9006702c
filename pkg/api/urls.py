"""Read-only API over the benchmark ledger.

- /health: liveness
- /runs, /runs/<id>: experiment runs and their per-level aggregates
- /references: stored reference solutions
"""

from django.urls import path
from .views_read import health, references, run_detail, runs


urlpatterns = [
	path("health", health),
	path("runs", runs),
	path("runs/<int:run_id>", run_detail),
	path("references", references),
]
