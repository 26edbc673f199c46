# Runtime configuration for riskqae, read from the environment.

import os

# --- Simulation limits ---
MAX_QUBITS = int(os.getenv("RISKQAE_MAX_QUBITS", "24"))
ENUMERATION_LIMIT = int(os.getenv("RISKQAE_ENUMERATION_LIMIT", str(2 ** 26)))
ENUMERATION_CHUNK = 1 << 18

# --- Monte Carlo ---
MC_SHARD_SIZE = int(os.getenv("RISKQAE_MC_SHARD_SIZE", "65536"))
WORKERS = int(os.getenv("RISKQAE_WORKERS", "4"))
DEFAULT_SEED = int(os.getenv("RISKQAE_DEFAULT_SEED", "2024"))

# --- Output files ---
LOCK_ATTEMPTS = int(os.getenv("RISKQAE_LOCK_ATTEMPTS", "5"))
LOCK_RETRY_DELAY = float(os.getenv("RISKQAE_LOCK_RETRY_DELAY", "1.0"))

TOOL_VERSION = "0.3.0"
PRNG_NAME = "numpy.PCG64"
