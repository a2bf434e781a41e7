"""Pure numpy fallback for the compiled kernels, same arithmetic order."""

from __future__ import annotations

import numpy as np


def _det3(m):
    return (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))


def _det4(m):
    out = 0.0
    for c in range(4):
        cols = [j for j in range(4) if j != c]
        minor = _det3(m[..., 1:, :][..., cols])
        term = m[..., 0, c] * minor
        out = out + term if c % 2 == 0 else out - term
    return out


def eval_form_on_frames(idx, coef, frames):
    idx = np.asarray(idx)
    frames = np.asarray(frames, dtype=float)
    k = frames.shape[1]
    if idx.shape[1] != k:
        raise ValueError("index table and frames disagree on degree")
    if not 1 <= k <= 4:
        raise ValueError("kernel supports degrees 1..4")
    acc = np.zeros(frames.shape[0])
    for t in range(idx.shape[0]):
        m = frames[:, :, idx[t]]
        if k == 1:
            d = m[:, 0, 0]
        elif k == 2:
            d = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        elif k == 3:
            d = _det3(m)
        else:
            d = _det4(m)
        acc = acc + coef[t] * d
    return acc
