import os

# Single-threaded BLAS keeps wall-clock timing comparisons stable and makes
# training trajectories reproducible regardless of the host's core count.
# Must happen before numpy loads its BLAS backend.
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
