"""
Django settings for robinlab - Robin function and shape-sensitivity toolkit
Numerical apps are plain Python modules; Django supplies config, logging,
the run ledger, the admin and the management command front end.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-change-this-in-production')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.getenv('DEBUG', 'True') == 'True'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']

# =============================================================================
# APPLICATION DEFINITION
# =============================================================================

INSTALLED_APPS = [
    # Django default apps (admin browses the run ledger)
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Local apps
    'geometry.apps.GeometryConfig',
    'harmonic_solver.apps.HarmonicSolverConfig',
    'greens_robin.apps.GreensRobinConfig',
    'critical_points.apps.CriticalPointsConfig',
    'shape_derivative.apps.ShapeDerivativeConfig',
    'experiments.apps.ExperimentsConfig',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'config.wsgi.application'

# =============================================================================
# DATABASE CONFIGURATION
# =============================================================================

# SQLite holds the experiment run ledger only
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# =============================================================================
# INTERNATIONALIZATION & LOCALIZATION
# =============================================================================

LANGUAGE_CODE = 'en'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# =============================================================================
# STATIC FILES (admin only)
# =============================================================================

STATIC_URL = '/static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

# =============================================================================
# DEFAULT PRIMARY KEY FIELD TYPE
# =============================================================================

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# =============================================================================
# LOGGING
# =============================================================================

ROBIN_LOG_LEVEL = os.getenv('ROBIN_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': ROBIN_LOG_LEVEL,
            'propagate': False,
        }
        for app in (
            'geometry',
            'harmonic_solver',
            'greens_robin',
            'critical_points',
            'shape_derivative',
            'experiments',
        )
    },
}

# =============================================================================
# GEOMETRY
# =============================================================================

# Fixed-point inversion of I + theta
ROBIN_FIXED_POINT_MAX_ITER = int(os.getenv('ROBIN_FIXED_POINT_MAX_ITER', '100'))
ROBIN_FIXED_POINT_TOL = float(os.getenv('ROBIN_FIXED_POINT_TOL', '1e-12'))

# Sampled C^3 norm: grid per axis over the bounding box inflated by padding
ROBIN_NORM_GRID = int(os.getenv('ROBIN_NORM_GRID', '64'))
ROBIN_NORM_PADDING = float(os.getenv('ROBIN_NORM_PADDING', '1.0'))

# Polygonal proxy resolution for curve validity checks
ROBIN_CURVE_TEST_SAMPLES = int(os.getenv('ROBIN_CURVE_TEST_SAMPLES', '512'))

# =============================================================================
# HARMONIC SOLVER
# =============================================================================

ROBIN_NODES_PER_LOOP = int(os.getenv('ROBIN_NODES_PER_LOOP', '128'))
ROBIN_MIN_NODES_PER_LOOP = int(os.getenv('ROBIN_MIN_NODES_PER_LOOP', '32'))

# Plain evaluation is rejected closer than this many node spacings to a loop
ROBIN_NEAR_BOUNDARY_FACTOR = float(os.getenv('ROBIN_NEAR_BOUNDARY_FACTOR', '5.0'))

# Volume quadrature for Newton potentials
ROBIN_VOLUME_RADIAL_NODES = int(os.getenv('ROBIN_VOLUME_RADIAL_NODES', '40'))
ROBIN_VOLUME_ANGULAR_FACTOR = int(os.getenv('ROBIN_VOLUME_ANGULAR_FACTOR', '2'))
# Cartesian cells per collar width on blended volume grids
ROBIN_VOLUME_CELLS_PER_COLLAR = int(os.getenv('ROBIN_VOLUME_CELLS_PER_COLLAR', '16'))

# Debug dumps of assembled system matrices
ROBIN_DUMP_MATRICES = os.getenv('ROBIN_DUMP_MATRICES', 'False') == 'True'
ROBIN_DUMP_DIR = Path(os.getenv('ROBIN_DUMP_DIR', str(BASE_DIR / 'dumps')))

# =============================================================================
# CRITICAL POINTS
# =============================================================================

ROBIN_DEGENERACY_TOL = float(os.getenv('ROBIN_DEGENERACY_TOL', '1e-4'))
ROBIN_NEWTON_TOL = float(os.getenv('ROBIN_NEWTON_TOL', '1e-8'))
ROBIN_NEWTON_MAX_ITER = int(os.getenv('ROBIN_NEWTON_MAX_ITER', '40'))
ROBIN_MULTISTART_GRID = int(os.getenv('ROBIN_MULTISTART_GRID', '10'))

# =============================================================================
# SHAPE DERIVATIVE
# =============================================================================

ROBIN_SURJECTIVITY_EXPONENT = int(os.getenv('ROBIN_SURJECTIVITY_EXPONENT', '4'))
ROBIN_CUTOFF = os.getenv('ROBIN_CUTOFF', 'quintic')
ROBIN_STRIP_RADIAL_NODES = int(os.getenv('ROBIN_STRIP_RADIAL_NODES', '16'))

# =============================================================================
# EXPERIMENTS
# =============================================================================

ROBIN_WORKERS = int(os.getenv('ROBIN_WORKERS', '1'))
ROBIN_OUTPUT_DIR = Path(os.getenv('ROBIN_OUTPUT_DIR', str(BASE_DIR / 'runs')))
ROBIN_RECORD_RUNS = os.getenv('ROBIN_RECORD_RUNS', 'True') == 'True'
ROBIN_SUMMARY_SCHEMA = 1
