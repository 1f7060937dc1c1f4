import os
import sys

from utils.functions import get_positivity


def int_env(name, default):
    """A positive integer from the environment; unset, malformed or non-positive values give the default."""
    try:
        value = int(os.environ[name])
    except (KeyError, ValueError):
        return default
    return value if value >= 1 else default


# ==== runtime config constants / env vars ====
TESTING = get_positivity(os.environ.get("TESTING", "no")) or 'pytest' in sys.modules
ENVIRONMENT = os.getenv('ENVIRONMENT', 'production' if not TESTING else 'development')
GIT_COMMIT_SHA = os.getenv('GIT_COMMIT_SHA')
SENTRY_DSN = os.getenv('SENTRY_DSN') or None
LOG_LEVEL = os.getenv('BZSL_LOG_LEVEL', 'INFO')
THREADS = int_env('BZSL_THREADS', os.cpu_count() or 1)
ACCEPTANCE = get_positivity(os.environ.get('BZSL_ACCEPTANCE', 'no'))  # slow desk-scale checks in the test suite
