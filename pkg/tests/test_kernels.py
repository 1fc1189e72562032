import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from swfopt import alloc, kernels
from swfopt.swf import Family

needs_compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS,
                                    reason="compiled extension not built")

PARAMS = {
    Family.ALPHA: {"alpha": 0.5},
    Family.THRESHOLD: {"delta": 0.7},
}


# families whose scores are computed identically in both backends
EXACT = {Family.UTILITARIAN, Family.MAXIMIN, Family.ALPHA, Family.PROPORTIONAL,
         Family.LEXIMAX, Family.THRESHOLD, Family.RELATIVE_RANGE}


@needs_compiled
@pytest.mark.parametrize("family", list(Family))
def test_backends_agree(family):
    rng = np.random.default_rng(list(Family).index(family))
    for _ in range(15):
        n = int(rng.integers(1, 5))
        p = rng.uniform(0.05, 1.0, n)
        kmax = rng.integers(0, 9, n).astype(np.int64)
        budget = int(rng.integers(0, kmax.sum() + 2))
        kw = dict(PARAMS.get(family, {}))
        if family is Family.KALAI_SMORODINSKY:
            kw["umax"] = p * np.minimum(kmax, budget) * 0.5 + 0.1
        code = kernels.FAMILY_CODES[family]
        a = kernels.grid_argmax(p, kmax, budget, 0.5, code, backend="compiled", **kw)
        b = kernels.grid_argmax(p, kmax, budget, 0.5, code, backend="python", **kw)
        assert a[2] == b[2]
        if a[0] is None:
            assert b[0] is None
            continue
        if family in EXACT:
            assert np.array_equal(a[0], b[0]) and a[1] == b[1]
        else:
            # summation order differs, so exact ties may break differently
            assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kmax,budget", [((3, 4, 2), 5), ((0, 6), 3), ((5,), 9), ((2, 2, 2, 2), 0)])
def test_count_grid_points(kmax, budget):
    brute = sum(1 for k in itertools.product(*[range(m + 1) for m in kmax]) if sum(k) <= budget)
    assert alloc.count_grid_points(kmax, budget) == brute
    _, _, seen = kernels.grid_argmax(np.ones(len(kmax)), np.array(kmax), budget, 1.0,
                                     kernels.FAMILY_CODES[Family.UTILITARIAN], backend="python")
    assert seen == brute


def test_first_best_tie_rule():
    # every split of 2 units between equal players scores the same; the
    # lexicographically first point visited is (0, 2)
    k, val, _ = kernels.grid_argmax([1.0, 1.0], np.array([2, 2]), 2, 1.0,
                                    kernels.FAMILY_CODES[Family.UTILITARIAN])
    assert k.tolist() == [0, 2] and val == 2.0


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.grid_argmax([1.0], np.array([1]), 1, 1.0, 0, backend="fortran")


def test_env_var_selects_fallback():
    env = dict(os.environ, SWFOPT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from swfopt import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
def test_compiled_is_default():
    env = {k: v for k, v in os.environ.items() if k != "SWFOPT_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", "from swfopt import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"
