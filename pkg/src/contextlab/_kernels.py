"""Float screening kernels for basis-pattern vertex candidates.

For each basis b and each 0/1 assignment x of the non-basic coordinates the
basic coordinates are ``w = c[b] - M[b] @ x``.  A candidate survives when
every basic coordinate lies in [-eps, 1 + eps].  Survivors are re-checked in
exact arithmetic by the caller, so this layer only has to avoid false
negatives.

Two interchangeable backends exist.  The numba kernel walks the patterns in
Gray-code order (one column update per step).  The numpy kernel evaluates
all patterns of a chunk of bases in one broadcast.  Set
``CONTEXTLAB_NO_NUMBA=1`` to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


def _env_disabled() -> bool:
    return os.environ.get("CONTEXTLAB_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


def default_backend() -> str:
    """'numba' unless disabled by environment or unavailable."""
    return "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"


# Gray-code updates accumulate rounding; refresh from scratch this often.
_REFRESH = 256


@njit(cache=True)
def _screen_numba(c, M, eps, out):
    nb, r = c.shape
    k = M.shape[2]
    n_pat = 1 << k
    w = np.empty(r)
    for b in range(nb):
        for i in range(r):
            w[i] = c[b, i]
        x = 0
        for step in range(n_pat):
            if step > 0:
                j = 0
                while ((step >> j) & 1) == 0:
                    j += 1
                bit = 1 << j
                if x & bit:
                    x ^= bit
                    for i in range(r):
                        w[i] += M[b, i, j]
                else:
                    x |= bit
                    for i in range(r):
                        w[i] -= M[b, i, j]
                if step % _REFRESH == 0:
                    for i in range(r):
                        acc = c[b, i]
                        for jj in range(k):
                            if (x >> jj) & 1:
                                acc -= M[b, i, jj]
                        w[i] = acc
            ok = 1
            for i in range(r):
                if w[i] < -eps or w[i] > 1.0 + eps:
                    ok = 0
                    break
            out[b, x] = ok


def _screen_numpy(c, M, eps, out):
    nb, r = c.shape
    k = M.shape[2]
    n_pat = 1 << k
    pats = ((np.arange(n_pat)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)
    chunk = max(1, int(4_000_000 // max(1, n_pat * r)))
    for s in range(0, nb, chunk):
        w = c[s : s + chunk, None, :] - np.einsum("brk,pk->bpr", M[s : s + chunk], pats)
        out[s : s + chunk] = np.all((w >= -eps) & (w <= 1.0 + eps), axis=2)


def screen(c: np.ndarray, M: np.ndarray, eps: float = 1e-9, backend: str | None = None) -> np.ndarray:
    """Boolean mask of shape (n_bases, 2**k) marking in-box candidates.

    Bit j of the pattern index is the value of the j-th non-basic coordinate.
    """
    backend = backend or default_backend()
    c = np.ascontiguousarray(c, dtype=np.float64)
    M = np.ascontiguousarray(M, dtype=np.float64)
    if c.ndim != 2 or M.ndim != 3 or M.shape[:2] != c.shape:
        raise ValueError("c must be (nb, r) and M must be (nb, r, k)")
    out = np.zeros((c.shape[0], 1 << M.shape[2]), dtype=np.uint8)
    if backend == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not installed")
        _screen_numba(c, M, float(eps), out)
    elif backend == "numpy":
        _screen_numpy(c, M, float(eps), out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out.astype(bool)
