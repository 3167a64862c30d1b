"""Cross-checks between the numba kernels and the pure-numpy fallbacks: both
paths must produce bit-identical results."""

import os
import subprocess
import sys

import numpy as np
import pytest

from actiseq import kernels
from actiseq.gp_core import HUGE, generate_tree

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")


def random_program(rng, n_features=3):
    tree = generate_tree(int(rng.integers(1, 6)), "grow", rng, n_features)
    return tree.program()


@needs_numba
class TestPathAgreement:
    def test_eval_program(self):
        rng = np.random.default_rng(90)
        for _ in range(300):
            ops, args, vals, need = random_program(rng)
            x = rng.normal(0, 10 ** rng.integers(0, 6), (int(rng.integers(1, 40)), 3))
            a = kernels.eval_program_numpy(ops, args, vals, need, x, HUGE)
            b = kernels.eval_program_numba(ops, args, vals, need, x, HUGE)
            np.testing.assert_array_equal(a, b)

    def test_eval_program_overflow_inputs(self):
        rng = np.random.default_rng(91)
        x = np.full((8, 3), 1e300)
        for _ in range(100):
            ops, args, vals, need = random_program(rng)
            a = kernels.eval_program_numpy(ops, args, vals, need, x, HUGE)
            b = kernels.eval_program_numba(ops, args, vals, need, x, HUGE)
            np.testing.assert_array_equal(a, b)
            assert np.isfinite(a).all()

    def test_fit_threshold(self):
        rng = np.random.default_rng(92)
        for _ in range(500):
            n = int(rng.integers(1, 200))
            y = np.round(rng.normal(size=n), rng.integers(0, 3))
            labels = rng.integers(0, 2, n)
            assert kernels.fit_threshold_numpy(y, labels) == tuple(
                kernels.fit_threshold_numba(y, labels)
            )

    def test_pareto_ranks(self):
        rng = np.random.default_rng(93)
        for _ in range(300):
            n = int(rng.integers(1, 120))
            err = rng.integers(0, 10, n).astype(float)
            size = rng.integers(1, 12, n)
            np.testing.assert_array_equal(
                kernels.pareto_ranks_numpy(err, size),
                kernels.pareto_ranks_numba(err, size),
            )

    def test_viterbi(self):
        rng = np.random.default_rng(94)
        for _ in range(200):
            k = int(rng.integers(1, 6))
            m = int(rng.integers(1, 6))
            n = int(rng.integers(1, 50))
            with np.errstate(divide="ignore"):
                lp = np.log(rng.dirichlet(np.ones(k)))
                la = np.log(rng.dirichlet(np.ones(k), size=k))
                lb = np.log(rng.dirichlet(np.ones(m), size=k))
            obs = rng.integers(0, m, n)
            path_a, delta_a, back_a = kernels.viterbi_numpy(lp, la, lb, obs)
            path_b, delta_b, back_b = kernels.viterbi_numba(lp, la, lb, obs)
            np.testing.assert_array_equal(path_a, path_b)
            np.testing.assert_array_equal(delta_a, delta_b)
            np.testing.assert_array_equal(back_a, back_b)


class TestBackendSelection:
    def test_backend_reported(self):
        assert kernels.BACKEND in ("numba", "numpy")

    def test_env_flag_forces_numpy(self):
        code = (
            "from actiseq import kernels; "
            "assert kernels.BACKEND == 'numpy', kernels.BACKEND; "
            "assert kernels.eval_program is kernels.eval_program_numpy"
        )
        env = dict(os.environ, ACTISEQ_NO_NUMBA="1")
        subprocess.run([sys.executable, "-c", code], check=True, env=env)
