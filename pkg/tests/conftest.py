import os

# Pin BLAS to one thread before numpy loads anywhere: keeps gradient
# reductions bit-deterministic and matches the single-core training contract.
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
