"""URL routing: the read-only ledger views live under /api/."""

from django.urls import path, include


urlpatterns = [
	path("api/", include("api.urls")),
]
