"""Compiled core against the numpy fallback for batch form evaluation.

    python benchmarks/bench_kernels.py [--batch N] [--repeat R]

Both backends evaluate phi0 on 3-frames and *phi0 on 4-frames; the script
checks that they agree before timing them.
"""

import argparse
import timeit

import numpy as np

from g2calib import _kernels_py
from g2calib.g2 import PHI0, STAR_PHI0

try:
    from g2calib import _kernels
except ImportError:
    _kernels = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = {"numpy": _kernels_py.eval_form_on_frames}
    if _kernels is None:
        print("compiled core not built; timing the fallback only")
    else:
        impls["cython"] = _kernels.eval_form_on_frames

    print(f"{'form':>8} {'backend':>8} {'best ms':>10} {'Mframes/s':>10}")
    for label, form in (("phi", PHI0), ("*phi", STAR_PHI0)):
        idx, coef = form.term_arrays()
        frames = np.ascontiguousarray(rng.standard_normal((args.batch, form.degree, 7)))
        ref = None
        for name, fn in impls.items():
            out = np.asarray(fn(idx, coef, frames))
            if ref is None:
                ref = out
            elif not np.allclose(out, ref, rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name} disagrees with numpy on {label}")
            best = min(timeit.repeat(lambda: fn(idx, coef, frames), number=1, repeat=args.repeat))
            print(f"{label:>8} {name:>8} {best * 1e3:10.2f} {args.batch / best / 1e6:10.2f}")


if __name__ == "__main__":
    main()
