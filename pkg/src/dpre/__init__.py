"""Simulation and numerical verification toolkit for directed polymers
in a random environment on Z^d.

Submodules:
    env        disorder laws, cumulants, tilted sampling, lazy fields
    walk       simple random walk paths, heat kernels, overlap counts
    partition  point-to-*, box-restricted and coarse-grained partition sums
    moments    exact second-moment identities, fractional moments
    chaos      polynomial chaos statistics and their moment formulas
    estimator  free-energy bounds, negativity certificates, scaling fits
    cli        command-line front end

Backend selection (compiled kernels vs pure numpy) happens at import time
in dpre.backends; set DPRE_BACKEND=python to force the fallback.
"""

__version__ = "0.1.0"
