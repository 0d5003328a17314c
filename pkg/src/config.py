"""
DynSC - Configuration Management
This module holds every tunable of the dynamic Schur complement toolkit: the walk
truncation constants, sampling multipliers, oracle tolerances, the sparsifier backend
selection, and the Redis settings used for batch runs. Values come from environment
variables (optionally loaded from a .env file by the entry points), then from a
small dotfile for the sparsifier backend, then from defaults. Validation and a
logged summary mirror what operators see at startup.
"""
import os
from dataclasses import dataclass, replace
from typing import Optional, Dict, Any
import logging

logger = logging.getLogger(__name__)


def _read_text_file(path: str) -> Optional[str]:
    """
    Read a text file, expanding user path if needed.

    Args:
        path: File path to read

    Returns:
        File contents as string, or None if file doesn't exist or can't be read
    """
    try:
        expanded_path = os.path.expanduser(path)
        with open(expanded_path, 'r', encoding='utf-8') as f:
            content = f.read().strip()
            if content:
                logger.info(f"Successfully read config from: {expanded_path}")
                return content
            else:
                logger.warning(f"Config file is empty: {expanded_path}")
                return None
    except FileNotFoundError:
        logger.debug(f"Config file not found: {expanded_path}")
        return None
    except PermissionError:
        logger.error(f"Permission denied reading config file: {expanded_path}")
        return None
    except Exception as e:
        logger.error(f"Error reading config file {expanded_path}: {e}")
        return None


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not a number, using default {default}")
        return default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not an integer, using default {default}")
        return default


SPARSIFIER_FILE = "~/.dynsc-sparsifier"
SPARSIFIER_BACKENDS = ("identity", "periodic")

# Walk truncation and sampling constants
C_DIST = _env_float("DYNSC_C_DIST", 2.0)
C_LEN = _env_float("DYNSC_C_LEN", 4.0)
C_BF = _env_float("DYNSC_C_BF", 4.0)
C_RHO = _env_float("DYNSC_C_RHO", 32.0)
# walk copies constant for DynamicER and DynamicSolver
APP_C_RHO = _env_float("DYNSC_APP_C_RHO", 1.0)
C_COVER = _env_float("DYNSC_C_COVER", 8.0)
COVER_DELTA = _env_float("DYNSC_COVER_DELTA", 2.0)
WEIGHT_EXPONENT = _env_float("DYNSC_WEIGHT_EXPONENT", 10.0)

# Oracle and solver
ORACLE_TOL = _env_float("DYNSC_ORACLE_TOL", 1e-8)
PINV_CUTOFF = _env_float("DYNSC_PINV_CUTOFF", 1e-10)
CG_ITER_FACTOR = _env_int("DYNSC_CG_ITER_FACTOR", 20)
ORACLE_MAX_N = _env_int("DYNSC_ORACLE_MAX_N", 2000)

# Second-level sparsifier
SPARSIFIER = (
    os.getenv("DYNSC_SPARSIFIER")
    or _read_text_file(SPARSIFIER_FILE)
    or "identity"
).strip().lower()
REBUILD_EVERY = _env_int("DYNSC_REBUILD_EVERY", 50)
SPARSIFY_EPS = _env_float("DYNSC_SPARSIFY_EPS", 0.5)
SPARSIFY_C = _env_float("DYNSC_SPARSIFY_C", 8.0)

# pmf buckets
PMF_DROP = _env_float("DYNSC_PMF_DROP", 1e-15)

# Projection / solver application
MAX_DEGREE = _env_int("DYNSC_MAX_DEGREE", 6)
PROJ_BUDGET_SCALE = _env_float("DYNSC_PROJ_BUDGET_SCALE", 1.0)

# Batch execution
REDIS_URL = os.getenv("REDIS_URL", "redis://localhost:6379")
QUEUE_NAME = os.getenv("DYNSC_QUEUE_NAME", "dynsc")
CACHE_TTL = _env_int("DYNSC_CACHE_TTL", 86400)


@dataclass(frozen=True)
class WalkConstants:
    """Snapshot of the algorithmic constants handed to the data structures."""
    c_dist: float = C_DIST
    c_len: float = C_LEN
    c_bf: float = C_BF
    c_rho: float = C_RHO
    c_cover: float = C_COVER
    cover_delta: float = COVER_DELTA
    weight_exponent: float = WEIGHT_EXPONENT
    pmf_drop: float = PMF_DROP

    def with_overrides(self, **changes: Any) -> "WalkConstants":
        return replace(self, **changes)


def walk_constants() -> WalkConstants:
    """Current module-level constants as an immutable snapshot."""
    return WalkConstants(
        c_dist=C_DIST, c_len=C_LEN, c_bf=C_BF, c_rho=C_RHO, c_cover=C_COVER,
        cover_delta=COVER_DELTA, weight_exponent=WEIGHT_EXPONENT, pmf_drop=PMF_DROP,
    )


def app_constants() -> WalkConstants:
    """walk_constants() with c_rho taken from DYNSC_APP_C_RHO."""
    return walk_constants().with_overrides(c_rho=APP_C_RHO)


def validate_configuration() -> tuple[bool, list[str]]:
    """
    Validate the current configuration and return any issues found.

    Environment variables are re-read so callers can validate overrides
    without reloading the module.

    Returns:
        Tuple of (is_valid, list_of_issues)
    """
    issues = []

    positives = [
        ("DYNSC_C_DIST", _env_float("DYNSC_C_DIST", C_DIST)),
        ("DYNSC_C_LEN", _env_float("DYNSC_C_LEN", C_LEN)),
        ("DYNSC_C_BF", _env_float("DYNSC_C_BF", C_BF)),
        ("DYNSC_C_RHO", _env_float("DYNSC_C_RHO", C_RHO)),
        ("DYNSC_APP_C_RHO", _env_float("DYNSC_APP_C_RHO", APP_C_RHO)),
        ("DYNSC_C_COVER", _env_float("DYNSC_C_COVER", C_COVER)),
        ("DYNSC_WEIGHT_EXPONENT", _env_float("DYNSC_WEIGHT_EXPONENT", WEIGHT_EXPONENT)),
        ("DYNSC_REBUILD_EVERY", _env_int("DYNSC_REBUILD_EVERY", REBUILD_EVERY)),
        ("DYNSC_SPARSIFY_C", _env_float("DYNSC_SPARSIFY_C", SPARSIFY_C)),
        ("DYNSC_PROJ_BUDGET_SCALE", _env_float("DYNSC_PROJ_BUDGET_SCALE", PROJ_BUDGET_SCALE)),
        ("DYNSC_CG_ITER_FACTOR", _env_int("DYNSC_CG_ITER_FACTOR", CG_ITER_FACTOR)),
        ("DYNSC_ORACLE_MAX_N", _env_int("DYNSC_ORACLE_MAX_N", ORACLE_MAX_N)),
    ]
    for name, value in positives:
        if value <= 0:
            issues.append(f"{name} must be positive, got {value}")

    tol = _env_float("DYNSC_ORACLE_TOL", ORACLE_TOL)
    if not (0 < tol <= 1e-2):
        issues.append(f"DYNSC_ORACLE_TOL ({tol}) must lie in (0, 1e-2]")

    eps_s = _env_float("DYNSC_SPARSIFY_EPS", SPARSIFY_EPS)
    if not (0 < eps_s < 1):
        issues.append(f"DYNSC_SPARSIFY_EPS ({eps_s}) must lie in (0, 1)")

    backend = (os.getenv("DYNSC_SPARSIFIER") or SPARSIFIER).strip().lower()
    if backend not in SPARSIFIER_BACKENDS:
        issues.append(f"DYNSC_SPARSIFIER must be one of {SPARSIFIER_BACKENDS}, got: {backend}")

    if _env_int("DYNSC_MAX_DEGREE", MAX_DEGREE) < 2:
        issues.append("DYNSC_MAX_DEGREE must be at least 2")

    redis_url = os.getenv("REDIS_URL", REDIS_URL)
    if not redis_url or not redis_url.startswith("redis://"):
        issues.append("REDIS_URL must be a valid Redis URL starting with 'redis://'")

    return len(issues) == 0, issues


def get_configuration_summary() -> Dict[str, Any]:
    """
    Get a summary of the current configuration for logging/debugging.

    Returns:
        Dictionary containing configuration summary
    """
    return {
        "environment": get_environment_name(),
        "walks": {
            "c_dist": C_DIST,
            "c_len": C_LEN,
            "c_bf": C_BF,
            "c_rho": C_RHO,
            "app_c_rho": APP_C_RHO,
            "c_cover": C_COVER,
        },
        "oracle": {
            "tolerance": ORACLE_TOL,
            "pinv_cutoff": PINV_CUTOFF,
            "max_n": ORACLE_MAX_N,
        },
        "sparsifier": {
            "backend": SPARSIFIER,
            "rebuild_every": REBUILD_EVERY,
            "eps": SPARSIFY_EPS,
        },
        "solver": {
            "max_degree": MAX_DEGREE,
            "budget_scale": PROJ_BUDGET_SCALE,
        },
        "redis_url": REDIS_URL,
        "queue": QUEUE_NAME,
    }


def log_configuration():
    """Log the current configuration."""
    summary = get_configuration_summary()

    logger.info("=== Configuration Summary ===")
    logger.info(f"Environment: {summary['environment']}")
    logger.info(f"Walk constants: {summary['walks']}")
    logger.info(f"Oracle: {summary['oracle']}")
    logger.info(f"Sparsifier: {summary['sparsifier']}")
    logger.info(f"Solver: {summary['solver']}")
    logger.info(f"Redis URL: {summary['redis_url']} (queue {summary['queue']})")
    logger.info("==============================")


def get_environment_name() -> str:
    """Get the current environment name based on configuration."""
    env = os.getenv("DYNSC_ENV", "production").lower()
    return "production" if env == "production" else "development"


def load_environment_config():
    """Load environment-specific configuration overrides."""
    env = get_environment_name()
    logger.debug(f"Loading configuration for environment: {env}")

    if env == "development":
        # Dense oracles get slow quickly on laptops
        global ORACLE_MAX_N
        ORACLE_MAX_N = min(ORACLE_MAX_N, 500)


load_environment_config()
