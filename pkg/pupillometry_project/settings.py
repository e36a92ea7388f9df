"""
Django settings for pupillometry_project.

The project has no web surface: Django supplies the management-command
framework, settings and logging configuration for the pipeline in the
``emotion`` app.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-pupillometry-batch-only')

DEBUG = os.getenv('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'emotion',
]

# the pipeline defines no models
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Pipeline

# flat ``key = value`` run-config file; --config on the command line wins
EMOTION_CONFIG_FILE = os.getenv('EMOTION_CONFIG', '')

EMOTION_LOG_LEVEL = os.getenv('EMOTION_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'pipeline': {
            'format': '{asctime} {levelname:<7} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'pipeline',
        },
    },
    'loggers': {
        'emotion': {
            'handlers': ['console'],
            'level': EMOTION_LOG_LEVEL,
            'propagate': True,
        },
    },
}
