"""Dense symmetric eigensolver backends.

Two interchangeable routes solve the standard symmetric problem that the
graph spectrum reduces to:

* ``jacobi`` -- the compiled cyclic-rotation kernel (built from
  ``_jacobi.pyx``).  Fixed sweep order, so results are bit-identical
  across runs, BLAS builds and thread counts.
* ``lapack`` -- ``numpy.linalg.eigh`` (Householder tridiagonalization).
  Faster at large K, reproducible only per BLAS build.

The compiled kernel is preferred when the extension imported (the
reproducibility contract matters more than raw speed at the K this
pipeline runs at); the LAPACK route is the pure fallback.  Set
``CONIC_PURGE_EIGEN_BACKEND=jacobi|lapack`` to override, and see
``benchmarks/bench_eigensolver.py`` for the speed/residual comparison.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _jacobi as _kernel
except ImportError:  # extension not built; pure fallback
    _kernel = None


def _default_backend() -> str:
    choice = os.environ.get("CONIC_PURGE_EIGEN_BACKEND", "").strip().lower()
    if choice in ("jacobi", "lapack"):
        if choice == "jacobi" and _kernel is None:
            raise RuntimeError(
                "CONIC_PURGE_EIGEN_BACKEND=jacobi but the kernel is not built")
        return choice
    return "jacobi" if _kernel is not None else "lapack"


DEFAULT_BACKEND = _default_backend()

_JACOBI_MAX_SWEEPS = 60
_JACOBI_REL_TOL = 1e-13


def jacobi_available() -> bool:
    return _kernel is not None


def eigh_jacobi(sym: np.ndarray, max_sweeps: int = _JACOBI_MAX_SWEEPS,
                rel_tol: float = _JACOBI_REL_TOL):
    """Full eigendecomposition via the compiled cyclic Jacobi kernel.

    Returns (eigenvalues ascending, eigenvectors as columns, sweeps used).
    """
    if _kernel is None:
        raise RuntimeError("compiled jacobi kernel is not available")
    a = np.array(sym, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    u = np.eye(n, dtype=np.float64, order="C")
    sweeps, _off, _target = _kernel.jacobi_cyclic(a, u, max_sweeps, rel_tol)
    w = np.diagonal(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], u[order].T, sweeps


def eigh_lapack(sym: np.ndarray):
    """Full eigendecomposition via LAPACK (ascending eigenvalues)."""
    w, v = np.linalg.eigh(np.asarray(sym, dtype=np.float64))
    return w, v, 0


def solve_symmetric(sym: np.ndarray, backend: str | None = None):
    """Dispatch to the requested backend ("jacobi", "lapack" or None=auto)."""
    choice = backend or DEFAULT_BACKEND
    if choice == "jacobi":
        return eigh_jacobi(sym)
    if choice == "lapack":
        return eigh_lapack(sym)
    raise ValueError(f"unknown eigensolver backend: {choice!r}")
