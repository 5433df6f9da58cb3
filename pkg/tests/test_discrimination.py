import numpy as np
import pytest

from ptpflow.discrimination import (
    XI_PLUS_AXIS,
    DiscriminationTask,
    discriminate,
    prepare_pair,
    prepare_pair_bloch,
    run_task,
    sweep_k,
)
from ptpflow.dynamics import BLOCH_MIRROR, DissipativeTorsionParams
from ptpflow.linalg import from_bloch, schatten_norm, to_bloch

BISTABLE = DissipativeTorsionParams(1.1, 1.0, 1.0)


def task(**kw):
    base = dict(k=10, params=BISTABLE, trials=8, seed=3)
    base.update(kw)
    return DiscriminationTask(**base)


class TestPreparePair:
    def test_trace_distance_is_epsilon(self):
        for k in (1, 10, 30, 45):
            x_a, x_b = prepare_pair(task(k=k))
            assert schatten_norm(x_a - x_b, 1) == pytest.approx(2.0**-k, abs=1e-12)

    def test_default_direction_splits_separatrix(self):
        r_a, r_b = prepare_pair_bloch(task(k=10))
        assert (r_a[0] + r_a[2]) / 2 > 0 > (r_b[0] + r_b[2]) / 2

    def test_near_surface_midpoint_rejected(self):
        # (eps/2)|direction| past a midpoint at 0.9 leaves the ball for k=1
        with pytest.raises(ValueError, match="out-of-ball"):
            prepare_pair_bloch(task(k=1, midpoint=np.array([0.9, 0.0, 0.0])))

    def test_near_surface_midpoint_small_eps_ok(self):
        r_a, r_b = prepare_pair_bloch(task(k=12, midpoint=np.array([0.9, 0.0, 0.0])))
        assert r_a @ r_a <= 1.0 and r_b @ r_b <= 1.0

    def test_contracting_direction_fails_by_construction(self):
        # a xi_minus displacement does not split basins: both members land
        # on the midpoint's side of the separatrix (an origin midpoint is
        # the one exception, being exactly mirror-symmetric)
        for mid in ([0.1, 0.0, 0.1], [-0.05, 0.1, -0.08]):
            t = task(k=6, midpoint=np.array(mid), direction=np.array([-1.0, 0.0, 1.0]))
            r_a, r_b = prepare_pair_bloch(t)
            lab_a, _ = discriminate(r_a, BISTABLE)
            lab_b, _ = discriminate(r_b, BISTABLE)
            assert lab_a == lab_b

    def test_bad_k(self):
        with pytest.raises(ValueError):
            task(k=0)


class TestDiscriminate:
    def test_reference_states(self):
        lab, t = discriminate(np.array([0.1, 0.0, 0.1]), BISTABLE)
        assert lab == "Plus" and 0 < t < 100
        lab2, t2 = discriminate(BLOCH_MIRROR @ np.array([0.1, 0.0, 0.1]), BISTABLE)
        assert lab2 == "Minus"
        assert t2 == pytest.approx(t, abs=1e-12)

    def test_accepts_density_matrix(self):
        lab, _ = discriminate(from_bloch([0.1, 0.0, 0.1]), BISTABLE)
        assert lab == "Plus"

    def test_origin_undecided(self):
        lab, t = discriminate(np.zeros(3), BISTABLE, t_max=50.0)
        assert lab == "Undecided"
        assert t == pytest.approx(50.0)

    def test_outside_bistable_phase_rejected(self):
        with pytest.raises(ValueError, match="no discriminating phase"):
            discriminate(np.array([0.1, 0.0, 0.1]), DissipativeTorsionParams(0.9, 1.0, 1.0))

    def test_fixed_points_outside_ball_rejected(self):
        with pytest.raises(ValueError, match="no discriminating phase"):
            discriminate(np.array([0.1, 0.0, 0.1]), DissipativeTorsionParams(1.1, 1.0, 0.3))

    def test_mirror_antisymmetry_of_pairs(self):
        # origin-centered pairs along the default axis have y = 0, where
        # full negation coincides with the exact mirror symmetry
        r_a, r_b = prepare_pair_bloch(task(k=8))
        np.testing.assert_allclose(r_b, -r_a)
        np.testing.assert_allclose(BLOCH_MIRROR @ r_a, r_b)
        lab_a, t_a = discriminate(r_a, BISTABLE)
        lab_b, t_b = discriminate(r_b, BISTABLE)
        assert (lab_a, lab_b) == ("Plus", "Minus")
        assert t_a == pytest.approx(t_b, abs=1e-12)


class TestRunTask:
    def test_zero_noise_always_succeeds(self):
        report = run_task(task(k=12, trials=6))
        assert report.success_rate == 1.0
        assert report.undecided == 0
        assert report.mean_resolve_time > 0
        labels = {t.true_label for t in report.per_trial}
        assert labels <= {"Plus", "Minus"}

    def test_determinism_and_threads(self):
        a = run_task(task(trials=16, noise_sigma=2.0**-9, seed=9))
        b = run_task(task(trials=16, noise_sigma=2.0**-9, seed=9))
        c = run_task(task(trials=16, noise_sigma=2.0**-9, seed=9), threads=4)
        assert a == b == c
        d = run_task(task(trials=16, noise_sigma=2.0**-9, seed=10))
        assert d != a

    def test_true_labels_before_noise(self):
        report = run_task(task(k=10, trials=32, noise_sigma=2.0**-8, seed=4))
        assert {t.true_label for t in report.per_trial} == {"Plus", "Minus"}

    def test_zero_trials(self):
        report = run_task(task(trials=0))
        assert report.success_rate == 0.0
        assert report.mean_resolve_time is None
        assert report.per_trial == ()

    def test_report_round_trip(self):
        report = run_task(task(trials=4))
        d = report.to_dict()
        assert d["trials"] == 4
        assert len(d["per_trial"]) == 4


class TestSweep:
    def test_resolve_time_affine_in_k(self):
        ks = [6, 10, 14, 18]
        reports = sweep_k(ks, BISTABLE, trials=2, seed=0)
        times = [r.mean_resolve_time for r in reports]
        slope = np.polyfit(ks, times, 1)[0]
        assert slope == pytest.approx(np.log(2) / 0.1, rel=0.05)
        assert all(r.success_rate == 1.0 for r in reports)

    def test_epsilon_monotone_resolve_time(self):
        reports = sweep_k([5, 10, 15], BISTABLE, trials=2, seed=0)
        times = [r.mean_resolve_time for r in reports]
        assert times[0] < times[1] < times[2]

    def test_noise_ordering(self):
        k = 10
        low = sweep_k([k], BISTABLE, trials=200, noise_sigma=2.0 ** (-k - 3), seed=6)[0]
        high = sweep_k([k], BISTABLE, trials=200, noise_sigma=2.0 ** (-k + 1), seed=6)[0]
        assert low.success_rate >= 0.95
        assert low.success_rate > high.success_rate
        assert high.success_rate < 0.8
