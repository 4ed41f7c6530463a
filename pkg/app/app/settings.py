"""
Django settings for the segmenter project.

Only the pieces a command-line project needs are configured: installed
apps, the run-record database, logging and the training defaults.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY', 'changeme')

DEBUG = bool(int(os.environ.get('DEBUG', 0)))

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'core',
    'corpus',
    'segmenter',
]

# Database
# Run records only; a local sqlite file is enough.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('CWS_DB_PATH', str(BASE_DIR / 'runs.sqlite3')),
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging

CWS_LOG_LEVEL = os.environ.get('CWS_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'core': {'handlers': ['console'], 'level': CWS_LOG_LEVEL},
        'corpus': {'handlers': ['console'], 'level': CWS_LOG_LEVEL},
        'segmenter': {'handlers': ['console'], 'level': CWS_LOG_LEVEL},
    },
}

# Training defaults (experimental configuration of the adversarial
# multi-criteria segmenter). Run config files override these key by key.

CWS_TRAINING_DEFAULTS = {
    'embedding_size': 100,
    'hidden_size': 100,
    'learning_rate': 0.01,
    'adv_weight': 0.05,
    'dropout_keep': 0.8,
    'init_range': 0.05,
    'default_batch_size': 128,
    'batch_size': {'as': 512, 'msr': 256},
    'adversarial_epochs': 2400,
    'adam_beta1': 0.9,
    'adam_beta2': 0.999,
    'adam_epsilon': 1e-8,
    'early_stop_patience': 10,
    'eval_every': 20,
    'phase2_max_epochs': 2000,
    'seed': 1,
    'min_freq': 1,
    'use_bigram': True,
    'mask_illegal_transitions': False,
}

CWS_CODE_VERSION = '1.0.0'
