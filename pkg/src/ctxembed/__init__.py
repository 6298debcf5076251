"""Node embeddings as context-graph configurations, with evaluation protocols and oracles."""

import os

# numba otherwise probes an outdated TBB and warns on every parallel kernel
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
