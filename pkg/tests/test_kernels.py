"""Backend equivalence: the numba kernels and the vectorized numpy
fallback must produce the same trajectories, samples, and statuses."""

import numpy as np
import pytest

from ptpflow.dynamics import DissipativeTorsionParams, dissipative_torsion_field
from ptpflow.kernels import BACKEND, backend_module

nb = pytest.importorskip("ptpflow._kernels_numba") if BACKEND == "numpy" else backend_module("numba")
np_impl = backend_module("numpy")


@pytest.fixture(scope="module")
def field():
    return dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))


@pytest.fixture(scope="module")
def starts():
    rng = np.random.default_rng(5150)
    pts = rng.uniform(-0.6, 0.6, (24, 3))
    # include an out-of-ball start, an exact fixed point, and a grazer
    pts[0] = [1.2, 0.0, 0.0]
    pts[1] = [0.0, 0.0, 0.0]
    pts[2] = [0.7065, 0.0, 0.7065]
    return pts


def run_rk4(impl, field, starts, **kw):
    args = dict(
        t0=0.0,
        dt=1e-3,
        n_max=20000,
        stride=500,
        conv_tol=1e-10,
        conv_window=10,
        ball_tol=1e-9,
        env_rate=0.1,
        track_env=True,
    )
    args.update(kw)
    return impl.field_paths_rk4(field.linear, field.quad, field.const, starts, **args)


class TestRk4Equivalence:
    def test_statuses_and_samples(self, field, starts):
        sa = run_rk4(nb, field, starts)
        sb = run_rk4(np_impl, field, starts)
        status_a, steps_a, counts_a, times_a, states_a, env_a = sa
        status_b, steps_b, counts_b, times_b, states_b, env_b = sb
        np.testing.assert_array_equal(status_a, status_b)
        np.testing.assert_array_equal(steps_a, steps_b)
        np.testing.assert_array_equal(counts_a, counts_b)
        for i in range(starts.shape[0]):
            c = counts_a[i]
            np.testing.assert_allclose(times_a[i, :c], times_b[i, :c], atol=1e-12)
            np.testing.assert_allclose(states_a[i, :c], states_b[i, :c], atol=5e-13)
        np.testing.assert_allclose(env_a, env_b, atol=5e-13)

    def test_sampling_layout(self, field, starts):
        status, steps, counts, times, states, _ = run_rk4(nb, field, starts[3:8])
        for i in range(5):
            c = counts[i]
            assert times[i, 0] == 0.0
            # intermediate samples sit on stride boundaries
            mid = times[i, 1 : c - 1]
            np.testing.assert_allclose((mid / 1e-3) % 500, 0, atol=1e-9)
            assert times[i, c - 1] == pytest.approx(steps[i] * 1e-3)

    def test_immediate_unphysical(self, field, starts):
        status, steps, counts, _, _, _ = run_rk4(nb, field, starts[:1])
        assert status[0] == 2 and steps[0] == 0 and counts[0] == 1

    def test_fixed_point_converges_fast(self, field, starts):
        status, steps, _, _, _, _ = run_rk4(nb, field, starts[1:2])
        assert status[0] == 1
        assert steps[0] == 9  # window of 10 checks starting at step 0


class TestFirstEntryEquivalence:
    def test_labels_and_steps(self, field, starts):
        targets = np.array(
            [[0.41659779, 0.19090909, 0.45825757], [-0.41659779, 0.19090909, -0.45825757]]
        )
        a = nb.field_first_entry(
            field.linear, field.quad, field.const, starts, 1e-3, 100000, 1e-9, targets, 0.1
        )
        b = np_impl.field_first_entry(
            field.linear, field.quad, field.const, starts, 1e-3, 100000, 1e-9, targets, 0.1
        )
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


class TestNinoEquivalence:
    def test_paths(self):
        rng = np.random.default_rng(77)
        zw = np.array([1.0])
        ls = (rng.standard_normal((1, 2, 2)) + 1j * rng.standard_normal((1, 2, 2))) * 0.5
        jw = np.array([1.0, -1.0])
        bs = (rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))) * 0.4
        df0 = np.einsum("a,aij->ij", zw, ls + np.conj(ls.transpose(0, 2, 1))) + np.einsum(
            "b,bji,bjk->ik", jw, np.conj(bs), bs
        )
        x0s = np.stack(
            [
                np.eye(2, dtype=np.complex128) / 2,
                np.array([[0.8, 0.1 + 0.05j], [0.1 - 0.05j, 0.2]], dtype=np.complex128),
            ]
        )
        args = (0.0, 1e-3, 4000, 400, 1e-12, 10, 1e-9, False)
        a = nb.nino_paths_rk4(x0s, zw, ls, jw, bs, df0, *args)
        b = np_impl.nino_paths_rk4(x0s, zw, ls, jw, bs, df0, *args)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_array_equal(a[2], b[2])
        for i in range(2):
            c = a[2][i]
            np.testing.assert_allclose(a[4][i, :c], b[4][i, :c], atol=1e-12)
        np.testing.assert_allclose(a[5], b[5], atol=1e-12)


class TestRk45Equivalence:
    def test_endpoints(self, field):
        # Step-size control amplifies last-ulp differences between the
        # backends' pow implementations, so the accepted-step grids drift
        # apart; endpoints at the common final time still agree.
        starts = np.array([[0.3, 0.2, 0.1], [0.1, 0.0, 0.1]])
        args = (0.0, 20.0, 1e-3, 1e-9, 1e-12, 100000, 1e-10, 10, 1e-9)
        a = nb.field_paths_rk45(field.linear, field.quad, field.const, starts, *args)
        b = np_impl.field_paths_rk45(field.linear, field.quad, field.const, starts, *args)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)
        for i in range(2):
            end_a = a[4][i, a[2][i] - 1]
            end_b = b[4][i, b[2][i] - 1]
            np.testing.assert_allclose(end_a, end_b, atol=1e-6)
