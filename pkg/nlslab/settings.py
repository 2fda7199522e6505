"""
Django settings for the nlslab project.

nlslab has no web surface: Django provides the settings layer, the app
registry, management commands (the experiment CLI) and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import os

import environ

import sentry_sdk
from sentry_sdk.integrations.django import DjangoIntegration


# Build paths inside the project like this: os.path.join(BASE_DIR, ...)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

env = environ.Env()
env.read_env(os.path.join(BASE_DIR, ".env"))


# Should be one of "dev", "prod", "test"
ENV = env("DJANGO_ENV", default="dev")

# Only used to satisfy Django's startup checks, nothing is signed
SECRET_KEY = env("SECRET_KEY", default="nlslab-local-not-secret")

DEBUG = False if ENV == "prod" else env.bool("DEBUG", default=True)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # local apps
    "apps.base",
    "apps.core_types",
    "apps.functionals",
    "apps.groundstate",
    "apps.scaling_analysis",
    "apps.evolution",
    "apps.experiments",
]

MIDDLEWARE = []

# No models anywhere in the project
DATABASES = {}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging

NLSLAB_LOG_LEVEL = env("NLSLAB_LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s"
        },
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": NLSLAB_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Numerical tolerances

NLSLAB_IDENTITY_TOLERANCE = env.float(
    "NLSLAB_IDENTITY_TOLERANCE", default=1e-6
)
NLSLAB_TAIL_TOLERANCE = env.float("NLSLAB_TAIL_TOLERANCE", default=1e-8)
NLSLAB_MEMBERSHIP_TOLERANCE = env.float(
    "NLSLAB_MEMBERSHIP_TOLERANCE", default=1e-8
)
NLSLAB_SLACK_TOLERANCE = env.float("NLSLAB_SLACK_TOLERANCE", default=1e-8)
NLSLAB_VIRIAL_TOLERANCE = env.float("NLSLAB_VIRIAL_TOLERANCE", default=1e-4)
NLSLAB_RESOLUTION_TOLERANCE = env.float(
    "NLSLAB_RESOLUTION_TOLERANCE", default=1e-2
)

# math.fsum instead of plain dot products in every quadrature
NLSLAB_KAHAN_SUMMATION = env.bool("NLSLAB_KAHAN_SUMMATION", default=False)


# Discretization

# Radial truncation Rmax = NLSLAB_RADIAL_EXTENT / sqrt(omega)
NLSLAB_RADIAL_EXTENT = env.float("NLSLAB_RADIAL_EXTENT", default=30.0)
# Radial sample spacing h = NLSLAB_RADIAL_STEP / sqrt(omega)
NLSLAB_RADIAL_STEP = env.float("NLSLAB_RADIAL_STEP", default=0.005)
# Half-width L of the periodic evolution box [-L, L)
NLSLAB_BOX_HALF_WIDTH = env.float("NLSLAB_BOX_HALF_WIDTH", default=32.0)
NLSLAB_GRID_POINTS = env.int("NLSLAB_GRID_POINTS", default=4096)


# Experiments

NLSLAB_THREADS = env.int("NLSLAB_THREADS", default=1)
NLSLAB_OUTPUT_DIR = env(
    "NLSLAB_OUTPUT_DIR", default=os.path.join(BASE_DIR, "runs")
)
NLSLAB_FORMAT_VERSION = 1


# Sentry

sentry_sdk.init(
    env("SENTRY_DSN", default=None) if DEBUG is False else None,
    integrations=[DjangoIntegration()],
)
