"""Agent-based simulator of a dealer-intermediated OTC market.

Market makers are the sole trade intermediaries; who can see and trade
with whom is constrained to a random network. Value investors trade
toward static price targets, trend investors learn from price history
with deep Q-learning, and dealers recycle inventory through an
inter-dealer market once a soft position limit is breached.
"""

import os

# Every matrix in the Q-network is tiny; BLAS thread fan-out is pure
# overhead and fights process-level parallelism in sweeps. Only effective
# when numpy has not been imported yet, which is the normal entry path.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from otcsim.config import ConfigError, SimConfig
from otcsim.engine import Simulation

__all__ = ["SimConfig", "ConfigError", "Simulation"]

__version__ = "0.1.0"
