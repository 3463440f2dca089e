# Configuration constants for the hyperlab toolkit
import os
import logging

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger("hyperlab.config")


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").lower() in ("true", "1", "yes")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning("Ignoring non-numeric %s=%r, using %s", name, raw, default)
        return default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r, using %s", name, raw, default)
        return default


APP_TITLE = "hyperlab"

# Storage / cache
CACHE_DIR = os.getenv("HYPERLAB_CACHE", "")
DB_PATH = os.getenv("HYPERLAB_DB", "hyperlab_runs.db")

# Numerics
Z_MAX = _env_float("HYPERLAB_Z_MAX", 0.95)
MDE_TOL = _env_float("HYPERLAB_MDE_TOL", 1e-12)
MDE_MAX_ITER = _env_int("HYPERLAB_MDE_MAX_ITER", 50)
DERIV_GUARD = 1e-10
FD_STEP = 1e-5

# Execution
DEFAULT_WORKERS = _env_int("HYPERLAB_WORKERS", 1)
LOG_LEVEL = os.getenv("HYPERLAB_LOG_LEVEL", "INFO").upper()

# Feature flags
ENABLE_CACHE = bool(CACHE_DIR)
ENABLE_PDF_REPORT = _env_flag("HYPERLAB_PDF_REPORT")

# Output
CSV_SCHEMA_VERSION = 1


def validate_config():
    """Validate configuration on startup and log warnings."""
    if not 0.0 < Z_MAX < 1.0:
        logger.warning("HYPERLAB_Z_MAX=%s is outside (0, 1); bulk guards will misbehave.", Z_MAX)
    if MDE_TOL > 1e-8:
        logger.warning("HYPERLAB_MDE_TOL=%s is loose; identity checks may fail.", MDE_TOL)

    if ENABLE_CACHE:
        if not os.path.isdir(CACHE_DIR):
            try:
                os.makedirs(CACHE_DIR, exist_ok=True)
            except OSError as e:
                logger.warning("Cannot create cache dir %s: %s. Spectral cache disabled.", CACHE_DIR, e)
                return True
        logger.info("Spectral cache enabled at: %s", CACHE_DIR)
    else:
        logger.info("HYPERLAB_CACHE not set. Spectral cache disabled.")

    if DEFAULT_WORKERS < 1:
        logger.warning("HYPERLAB_WORKERS=%s < 1; falling back to a single worker.", DEFAULT_WORKERS)
    if ENABLE_PDF_REPORT:
        logger.info("PDF run summaries enabled.")

    return True
