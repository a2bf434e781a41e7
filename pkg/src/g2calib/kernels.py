"""Batch form evaluation, dispatching to the compiled core when it is built.

Set ``G2CALIB_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.eval_form_on_frames

if os.environ.get("G2CALIB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        _impl = _compiled.eval_form_on_frames
        BACKEND = "cython"


def eval_form_batch(form, frames: np.ndarray) -> np.ndarray:
    """Evaluate a constant form on a batch of frames.

    ``frames`` has shape (..., k, 7); the result has shape (...).
    """
    frames = np.asarray(frames, dtype=float)
    k = form.degree
    if frames.shape[-2:] != (k, 7):
        raise ValueError(f"frames of shape {frames.shape} do not fit a {k}-form")
    lead = frames.shape[:-2]
    flat = np.ascontiguousarray(frames.reshape(-1, k, 7))
    if len(form) == 0:
        return np.zeros(lead)
    idx, coef = form.term_arrays()
    if k > 4:
        # rare path: direct determinants, identical for both backends
        acc = np.zeros(flat.shape[0])
        for t in range(idx.shape[0]):
            acc = acc + coef[t] * np.linalg.det(flat[:, :, idx[t]])
        return acc.reshape(lead)
    return _impl(idx, coef, flat).reshape(lead)
