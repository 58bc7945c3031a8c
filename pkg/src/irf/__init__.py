"""Isolation random forests, their directional variant and exact 1D analytics."""

import os

import numba

# Prefer OpenMP for parallel kernels; some TBB builds warn on import.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from irf.dataset import SampleSet, load_csv  # noqa: E402
from irf.errors import ComputeError, DataError, IrfError  # noqa: E402

__version__ = "0.1.0"

__all__ = ["SampleSet", "load_csv", "IrfError", "DataError", "ComputeError", "__version__"]
