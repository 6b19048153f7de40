from dotenv import load_dotenv

load_dotenv()

import os

APP_VERSION = "0.3.0"

WORKERS        = int(os.getenv("WGM_WORKERS", os.cpu_count() or 1))
OUTPUT_DIR     = os.getenv("WGM_OUTPUT_DIR", "output")
LOG_LEVEL      = os.getenv("WGM_LOG_LEVEL", "INFO").upper()
RUN_ACCEPTANCE = os.getenv("WGM_RUN_ACCEPTANCE", "") not in ("", "0", "false", "False")

# Liouville-space rows (D²) allowed without --allow-large.
MAX_LIOUVILLE_ROWS = int(float(os.getenv("WGM_MAX_LIOUVILLE_ROWS", "250000")))

# Platform values, angular frequencies quoted as (2π)·x kHz.
PLATFORM_KHZ = {
    "g":     120.0,
    "kappa": 15.0,
    "gamma": 7.5,
    "omega": 1.5,
}
