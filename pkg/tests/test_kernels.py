import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2calib import _kernels_py, kernels
from g2calib.exterior import FULL, KForm, eval_on_vectors
from g2calib.g2 import PHI0, STAR_PHI0

compiled = pytest.importorskip("g2calib._kernels", reason="compiled core not built")


@st.composite
def form_and_frames(draw):
    k = draw(st.integers(1, 4))
    keys = draw(st.lists(st.sampled_from(list(itertools.combinations(FULL, k))), min_size=1, max_size=8, unique=True))
    form = KForm(k, {key: float(draw(st.integers(-3, 3)) or 1) for key in keys})
    seed = draw(st.integers(0, 2**32 - 1))
    frames = np.random.default_rng(seed).standard_normal((draw(st.integers(1, 40)), k, 7))
    return form, frames


@given(form_and_frames())
@settings(max_examples=80, deadline=None)
def test_compiled_core_matches_fallback(data):
    form, frames = data
    idx, coef = form.term_arrays()
    a = np.asarray(compiled.eval_form_on_frames(idx, coef, np.ascontiguousarray(frames)))
    b = _kernels_py.eval_form_on_frames(idx, coef, frames)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_batch_matches_exact_evaluation(rng):
    frames = rng.integers(-3, 4, size=(25, 4, 7)).astype(float)
    got = kernels.eval_form_batch(STAR_PHI0, frames)
    want = [eval_on_vectors(STAR_PHI0, [f.astype(int).astype(object) for f in fr]) for fr in frames]
    assert np.array_equal(got, np.array(want, dtype=float))


def test_batch_shapes_and_errors(rng):
    frames = rng.standard_normal((2, 3, 3, 7))
    assert kernels.eval_form_batch(PHI0, frames).shape == (2, 3)
    with pytest.raises(ValueError):
        kernels.eval_form_batch(PHI0, rng.standard_normal((5, 4, 7)))
    assert np.array_equal(kernels.eval_form_batch(KForm(3), frames), np.zeros((2, 3)))


def test_high_degree_forms_use_general_determinant(rng):
    form = KForm.basis((1, 2, 3, 4, 5))
    frames = rng.standard_normal((6, 5, 7))
    assert np.allclose(kernels.eval_form_batch(form, frames), np.linalg.det(frames[:, :, :5]))


def test_backend_selection_respects_environment():
    code = "import g2calib.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, G2CALIB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    forced = os.environ.get("G2CALIB_PURE_PYTHON", "") in ("1", "true", "yes")
    assert kernels.BACKEND == ("python" if forced else "cython")
