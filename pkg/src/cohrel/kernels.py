"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; setting ``COHREL_PURE_PYTHON=1``
forces the numpy implementation.  Both backends share signatures and agree to
floating-point rounding.
"""
from __future__ import annotations

import contextlib
import os

import numpy as np

from cohrel import _pykernels

try:
    from cohrel import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["BACKEND", "available_backends", "use_backend", "interval_loglik", "branch_likelihoods",
           "latent_draw", "reliability_matrix"]

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_impl = _pykernels if (_ckernels is None or os.environ.get("COHREL_PURE_PYTHON") == "1") else _ckernels
BACKEND = "cython" if _impl is _ckernels else "python"


def available_backends() -> list:
    return list(_BACKENDS)


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily route kernel calls to ``name`` ("python" or "cython")."""
    global _impl, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    saved = _impl, BACKEND
    _impl, BACKEND = _BACKENDS[name], name
    try:
        yield
    finally:
        _impl, BACKEND = saved


def interval_loglik(beta, eta, mu, l, u, code) -> float:
    return _impl.interval_loglik(float(beta), float(eta), float(mu), np.ascontiguousarray(l, dtype=float),
                                 np.ascontiguousarray(u, dtype=float), np.ascontiguousarray(code, dtype=np.int8))


def branch_likelihoods(beta, eta, mu, t) -> np.ndarray:
    return _impl.branch_likelihoods(float(beta), float(eta), float(mu), np.ascontiguousarray(t, dtype=float))


def latent_draw(beta, eta, mu, t, lam1, lam2, lam3, uniforms):
    return _impl.latent_draw(float(beta), float(eta), float(mu), np.ascontiguousarray(t, dtype=float),
                             float(lam1), float(lam2), float(lam3), np.ascontiguousarray(uniforms, dtype=float))


def reliability_matrix(beta, eta, mu, t) -> np.ndarray:
    # numpy's vectorized exp/pow outruns the compiled scalar loop here (see benchmarks/)
    return _pykernels.reliability_matrix(np.atleast_1d(beta), np.atleast_1d(eta), np.atleast_1d(mu), np.atleast_1d(t))
