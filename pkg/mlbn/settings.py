"""Django settings for the multilevel Bayesian network sampler.


This project runs:
- core: numerical samplers (trace-class priors, tempered SMC, multilevel SMC)
- bench: experiment sweeps driven by management commands, recorded in an ORM ledger
- api: read-only JSON views over the ledger


Numerical defaults are env-driven so benchmark sweeps can be reproduced from the environment alone.
"""

import os
from pathlib import Path


BASE_DIR = Path(__file__).resolve().parent.parent
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "dev-only-insecure-key")
DEBUG = os.getenv("DEBUG", "1") in ("1", "true", "True", "yes")
ALLOWED_HOSTS = os.getenv("ALLOWED_HOSTS", "*").split(",")

def env_bool(name, default=""):
	v = os.getenv(name, default)
	return v.lower() in ("1", "true", "yes", "on")

#######################
# Sampler defaults (recorded in every run's metadata)
MLBN_PCN_RHO = float(os.getenv("MLBN_PCN_RHO", "0.98"))
MLBN_PCN_STEPS = int(os.getenv("MLBN_PCN_STEPS", "5"))
MLBN_MIN_ESS = float(os.getenv("MLBN_MIN_ESS", "5"))
MLBN_MIN_SAMPLES = int(os.getenv("MLBN_MIN_SAMPLES", "50"))
MLBN_REFERENCE_LEVEL = int(os.getenv("MLBN_REFERENCE_LEVEL", "7"))
MLBN_GH_NODES = int(os.getenv("MLBN_GH_NODES", "64"))
# pCN acceptance band for the adaptive kernel; 0 disables adaptation
MLBN_PCN_ADAPT = env_bool("MLBN_PCN_ADAPT", "1")
MLBN_ACCEPT_MIN = float(os.getenv("MLBN_ACCEPT_MIN", "0.2"))
MLBN_ACCEPT_MAX = float(os.getenv("MLBN_ACCEPT_MAX", "0.4"))

# Orchestration
MLBN_THREADS = int(os.getenv("MLBN_THREADS", "0")) or None # None => use --threads
MLBN_OUTPUT_DIR = Path(os.getenv("MLBN_OUTPUT_DIR", str(BASE_DIR / "runs")))
MLBN_FULL_SCALE = env_bool("MLBN_FULL_SCALE")
#######################


INSTALLED_APPS = [
	"django.contrib.contenttypes",
	"django.contrib.auth",
	# local apps
	"core",
	"bench",
	"api",
]


MIDDLEWARE = [
	"django.middleware.security.SecurityMiddleware",
	"django.middleware.common.CommonMiddleware",
]


ROOT_URLCONF = "mlbn.urls"
TEMPLATES = []


WSGI_APPLICATION = "mlbn.wsgi.application"


DB_ENGINE = os.getenv("DB_ENGINE", "sqlite")
if DB_ENGINE == "postgres":
	DATABASES = {
		"default": {
			"ENGINE": "django.db.backends.postgresql",
			"NAME": os.getenv("POSTGRES_DB", "mlbn"),
			"USER": os.getenv("POSTGRES_USER", "mlbn"),
			"PASSWORD": os.getenv("POSTGRES_PASSWORD", "mlbn"),
			"HOST": os.getenv("POSTGRES_HOST", "localhost"),
			"PORT": os.getenv("POSTGRES_PORT", "5432"),
		}
	}
else:
	DATABASES = {
		"default": {
			"ENGINE": "django.db.backends.sqlite3",
			"NAME": BASE_DIR / "db.sqlite3",
		}
	}


MLBN_LOG_LEVEL = os.getenv("MLBN_LOG_LEVEL", "INFO").upper()
LOGGING = {
	"version": 1,
	"disable_existing_loggers": False,
	"formatters": {
		"plain": {"format": "%(asctime)s %(levelname)s %(name)s %(message)s"},
	},
	"handlers": {
		"console": {"class": "logging.StreamHandler", "formatter": "plain"},
	},
	"loggers": {
		"core": {"handlers": ["console"], "level": MLBN_LOG_LEVEL, "propagate": False},
		"bench": {"handlers": ["console"], "level": MLBN_LOG_LEVEL, "propagate": False},
		"api": {"handlers": ["console"], "level": MLBN_LOG_LEVEL, "propagate": False},
	},
}


LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = True
USE_TZ = True


DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
