"""Hot numeric kernels: masked-biased softmax and dense block materialization.

Two interchangeable paths ship for every kernel:

* a pure-numpy single-threaded path - the reference used for golden files
  and bit-exact comparisons;
* a numba ``@njit(parallel=True)`` path that parallelizes over visual rows.

Selection is per-call via ``CASTMASK_KERNEL``: ``auto`` (default; numba when
importable), ``numpy``, or ``numba``.  The paths agree within 1e-6 (the only
difference is libm vs vectorized exp rounding); materialized blocks contain
no transcendentals and agree bit-for-bit.  ``benchmarks/bench_kernels.py``
compares the two.

Kernel inputs encode a recipe compactly: ``token_slot[l]`` is the event slot
owning text token l (-1 = background, always visible), ``token_dir[l]`` marks
directional tokens, and ``slot_rows[slot, v]`` marks visual rows inside the
slot's region.  A (v, l) pair is *allowed* iff the token is background or v
is in the token's region; directional tokens add ``bias`` where allowed.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "CASTMASK_KERNEL"

try:
    import numba
    from numba import njit, prange

    # Prefer OpenMP: the bundled TBB is too old on some images and warns.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    NUMBA_AVAILABLE = False


def kernel_mode() -> str:
    mode = os.environ.get(ENV_FLAG, "auto").strip().lower() or "auto"
    if mode not in ("auto", "numpy", "numba"):
        raise ValueError(f"{ENV_FLAG} must be auto|numpy|numba, got {mode!r}")
    return mode


def use_numba() -> bool:
    mode = kernel_mode()
    if mode == "numpy":
        return False
    if mode == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError(f"{ENV_FLAG}=numba but numba is not importable")
    return NUMBA_AVAILABLE


def _allowed_matrix(token_slot, slot_rows, n_v):
    allowed = np.ones((n_v, token_slot.shape[0]), dtype=np.bool_)
    ev = token_slot >= 0
    if ev.any():
        allowed[:, ev] = slot_rows[token_slot[ev]].T
    return allowed


def _softmax_numpy(scores, token_slot, token_dir, slot_rows, bias):
    n_v, n_l = scores.shape
    allowed = _allowed_matrix(token_slot, slot_rows, n_v)
    z = np.where(allowed, scores, -np.inf)
    if bias != 0.0 and token_dir.any():
        cols = np.where(token_dir)[0]
        z[:, cols] = np.where(allowed[:, cols], z[:, cols] + bias, -np.inf)
    m = z.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("visual row with no unmasked text column")
    e = np.exp(z - m)
    e[~allowed] = 0.0
    return e / e.sum(axis=1, keepdims=True)


def _block_numpy(token_slot, token_dir, slot_rows, bias32, v_start, v_stop, l_start, l_stop):
    n_v = v_stop - v_start
    n_l = l_stop - l_start
    block = np.zeros((n_v, n_l), dtype=np.float32)
    for j, l in enumerate(range(l_start, l_stop)):
        slot = token_slot[l]
        if slot < 0:
            continue
        inside = slot_rows[slot, v_start:v_stop]
        block[~inside, j] = -np.inf
        if token_dir[l]:
            block[inside, j] = bias32
    return block


if NUMBA_AVAILABLE:

    @njit(parallel=True, cache=True)
    def _softmax_numba(scores, token_slot, token_dir, slot_rows, bias):  # pragma: no cover
        n_v, n_l = scores.shape
        out = np.empty((n_v, n_l), dtype=np.float64)
        for v in prange(n_v):
            mx = -np.inf
            for l in range(n_l):
                slot = token_slot[l]
                if slot < 0 or slot_rows[slot, v]:
                    z = scores[v, l]
                    if token_dir[l]:
                        z += bias
                    if z > mx:
                        mx = z
            total = 0.0
            for l in range(n_l):
                slot = token_slot[l]
                if slot < 0 or slot_rows[slot, v]:
                    z = scores[v, l]
                    if token_dir[l]:
                        z += bias
                    e = np.exp(z - mx)
                    out[v, l] = e
                    total += e
                else:
                    out[v, l] = 0.0
            for l in range(n_l):
                out[v, l] /= total
        return out

    @njit(parallel=True, cache=True)
    def _block_numba(token_slot, token_dir, slot_rows, bias32, v_start, v_stop, l_start, l_stop):  # pragma: no cover
        n_v = v_stop - v_start
        n_l = l_stop - l_start
        block = np.zeros((n_v, n_l), dtype=np.float32)
        for i in prange(n_v):
            v = v_start + i
            for j in range(n_l):
                slot = token_slot[l_start + j]
                if slot < 0:
                    continue
                if not slot_rows[slot, v]:
                    block[i, j] = -np.inf
                elif token_dir[l_start + j]:
                    block[i, j] = bias32
        return block


def masked_biased_softmax(scores, token_slot, token_dir, slot_rows, bias: float):
    """Row softmax of scores + bias over allowed entries; exact zeros elsewhere.

    Rows with no allowed column raise (the background-nonempty invariant makes
    that unreachable from a validated recipe).
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    if use_numba():
        out = _softmax_numba(scores, token_slot, token_dir, slot_rows, float(bias))
        if not np.all(np.isfinite(out)):
            raise ValueError("visual row with no unmasked text column")
        return out
    return _softmax_numpy(scores, token_slot, token_dir, slot_rows, float(bias))


def materialize(token_slot, token_dir, slot_rows, bias: float, v_range, l_range):
    """Dense float32 additive-logit block for [v_range) x [l_range).

    Entries are exactly 0.0, -inf (masked), or float32(bias); both kernel
    paths produce bit-identical bytes.
    """
    v_start, v_stop = v_range
    l_start, l_stop = l_range
    bias32 = np.float32(bias)
    if use_numba():
        return _block_numba(token_slot, token_dir, slot_rows, bias32, v_start, v_stop, l_start, l_stop)
    return _block_numpy(token_slot, token_dir, slot_rows, bias32, v_start, v_stop, l_start, l_stop)
