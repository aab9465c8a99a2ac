"""Process-wide defaults read from the environment."""
import logging
import os

OUT_DIR = os.getenv("SSC_OUT_DIR", "./out")
THREADS = int(os.getenv("SSC_THREADS", "0"))
LOG_LEVEL = os.getenv("SSC_LOG_LEVEL", "INFO")
SEED = int(os.getenv("SSC_SEED", "0"))
RANK_TOL = float(os.getenv("SSC_RANK_TOL", "1e-10"))
API_KEY = os.getenv("SSC_API_KEY", "")

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"


def setup_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU."""
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return threads or (os.cpu_count() or 1)
