"""
Settings - HolderTensor.
Tudo configurável via variáveis de ambiente (ou .env) com python-decouple.
"""

from pathlib import Path

import sentry_sdk
from decouple import config
from sentry_sdk.integrations.celery import CeleryIntegration
from sentry_sdk.integrations.redis import RedisIntegration

BASE_DIR = Path(__file__).resolve().parent.parent

# ==============================================================================
# OBSERVABILIDADE
# ==============================================================================
DEBUG = config("DEBUG", default=False, cast=bool)
LOG_LEVEL = config("LOG_LEVEL", default="INFO")

SENTRY_DSN = config("SENTRY_DSN", default=None)

if SENTRY_DSN and not DEBUG:
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[
            CeleryIntegration(),
            RedisIntegration(),
        ],
        traces_sample_rate=0.1,
        send_default_pii=False,
    )

# ==============================================================================
# SAÍDA DOS EXPERIMENTOS
# ==============================================================================
OUTPUT_ROOT = Path(
    config("HOLDERTENSOR_OUTPUT_ROOT", default=str(BASE_DIR / "runs"))
).expanduser()

# ==============================================================================
# SUBPROBLEMA / MÉTODOS
# ==============================================================================
# Maior dimensão em que o solver secular (p=2) materializa a Hessiana
DENSE_LIMIT = config("HOLDERTENSOR_DENSE_LIMIT", default=2000, cast=int)

DEFAULT_THETA = config("HOLDERTENSOR_THETA", default=0.1, cast=float)
MAX_INNER_ITERS = config("HOLDERTENSOR_MAX_INNER_ITERS", default=10000, cast=int)
INNER_GTOL = config("HOLDERTENSOR_INNER_GTOL", default=1e-13, cast=float)

# Teto de duplicações da busca adaptativa (H cresce no máximo 2^60)
MAX_DOUBLINGS = config("HOLDERTENSOR_MAX_DOUBLINGS", default=60, cast=int)

# ==============================================================================
# CELERY
# ==============================================================================
CELERY_BROKER_URL = config("CELERY_BROKER_URL", default="")
CELERY_RESULT_BACKEND = config("CELERY_RESULT_BACKEND", default="")

if CELERY_BROKER_URL:
    from kombu import Exchange, Queue

    CELERY_ENABLE_UTC = True
    CELERY_ACCEPT_CONTENT = ["json"]
    CELERY_TASK_SERIALIZER = "json"
    CELERY_RESULT_SERIALIZER = "json"

    # Ack Late: experimento volta para a fila se o worker cair no meio
    CELERY_TASK_ACKS_LATE = True
    CELERY_WORKER_PREFETCH_MULTIPLIER = 1

    CELERY_TASK_QUEUES = (Queue("experiments", Exchange("experiments"), routing_key="experiments"),)
    CELERY_TASK_ROUTES = {
        "apps.bench.tasks.*": {"queue": "experiments"},
    }

# ==============================================================================
# LOGGING
# ==============================================================================
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "[{levelname}] {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "celery": {
            "handlers": ["console"],
            "level": "INFO",
            "propagate": False,
        },
        "apps": {
            "handlers": ["console"],
            "level": "DEBUG" if DEBUG else LOG_LEVEL,
            "propagate": False,
        },
    },
}
