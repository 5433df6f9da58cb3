import numpy as np
import pytest

from ptpflow.analysis import (
    analytic_fixed_points,
    basin_classify,
    basin_classify_many,
    divergence,
    g_min,
    jacobian_stability,
    midpoint_k_matrix,
    newton_refine,
    pair_separation_rate,
    phase_scan,
    vorticity,
    xi_inverse,
    xi_transform,
)
from ptpflow.dynamics import (
    BLOCH_MIRROR,
    CallableField,
    DissipativeTorsionParams,
    VectorField,
    dissipative_torsion_field,
    integrate,
    torsion_field,
)
from ptpflow.linalg import from_bloch, schatten_norm


def params_grid():
    """(m, gamma, g) grid in the bistable phase with in-ball fixed points."""
    out = []
    for m in np.linspace(0.6, 2.0, 10):
        for frac in np.linspace(0.05, 0.95, 10):
            gamma = m * frac
            base = g_min(m, gamma)
            for scale in np.linspace(1.05, 3.0, 10):
                out.append(DissipativeTorsionParams(m, gamma, base * scale))
    return out


class TestDivergence:
    def test_torsion_incompressible(self, rng):
        f = torsion_field(1.7)
        for _ in range(100):
            assert divergence(f, rng.uniform(-1, 1, 3)) == pytest.approx(0.0, abs=1e-12)

    def test_dissipative_is_minus_3gamma(self, rng):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 0.8, 1.3))
        for _ in range(20):
            assert divergence(f, rng.uniform(-1, 1, 3)) == pytest.approx(-2.4, abs=1e-12)

    def test_constant_symmetric_generator(self, rng):
        g = rng.standard_normal((3, 3))
        g = (g + g.T) / 2
        f = VectorField(g, np.zeros((3, 3, 3)), np.zeros(3))
        assert divergence(f, rng.uniform(-1, 1, 3)) == pytest.approx(np.trace(g))

    def test_matches_jacobian_trace(self, rng):
        fields = [
            torsion_field(0.9),
            dissipative_torsion_field(DissipativeTorsionParams(1.2, 0.7, 1.1)),
        ]
        for f in fields:
            for _ in range(100):
                r = rng.uniform(-0.9, 0.9, 3)
                h = 1e-6
                tr = 0.0
                for b in range(3):
                    dr = np.zeros(3)
                    dr[b] = h
                    tr += (f.rhs(r + dr)[b] - f.rhs(r - dr)[b]) / (2 * h)
                assert divergence(f, r) == pytest.approx(tr, abs=1e-6)


class TestVorticity:
    def test_torsion_closed_form(self, rng):
        g = 1.3
        f = torsion_field(g)
        for _ in range(100):
            r = rng.uniform(-1, 1, 3)
            expected = g * np.array([-r[0], -r[1], 2 * r[2]])
            np.testing.assert_allclose(vorticity(f, r), expected, atol=1e-8)

    def test_constant_symmetric_is_curl_free(self, rng):
        g = rng.standard_normal((3, 3))
        g = (g + g.T) / 2
        f = VectorField(g, np.zeros((3, 3, 3)), np.zeros(3))
        np.testing.assert_allclose(vorticity(f, rng.uniform(-1, 1, 3)), np.zeros(3), atol=1e-12)

    def test_dissipative_against_finite_differences(self, rng):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))
        fd = CallableField(generator_fn=f.generator)
        for _ in range(50):
            r = rng.uniform(-0.9, 0.9, 3)
            np.testing.assert_allclose(vorticity(f, r), vorticity(fd, r), atol=1e-7)


class TestSeparationRate:
    def test_torsion_pair_rate(self):
        eta = 1e-3
        f = torsion_field(1.0)
        r_a = np.array([0.5, eta / 2, eta / 2])
        r_b = np.array([0.5, -eta / 2, -eta / 2])
        expected = 0.5 * eta * eta / (eta * np.sqrt(2.0))
        assert pair_separation_rate(r_a, r_b, f, p=1) == pytest.approx(expected, rel=1e-9)

    def test_rigid_rotation_is_isometric(self, rng):
        omega = rng.standard_normal(3)
        g = np.array(
            [
                [0.0, -omega[2], omega[1]],
                [omega[2], 0.0, -omega[0]],
                [-omega[1], omega[0], 0.0],
            ]
        )
        f = VectorField(g, np.zeros((3, 3, 3)), np.zeros(3))
        for _ in range(20):
            r_a, r_b = rng.uniform(-0.5, 0.5, (2, 3))
            assert pair_separation_rate(r_a, r_b, f, p=1) == pytest.approx(0.0, abs=1e-12)

    def test_linearized_growth_along_xi_plus(self):
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        f = dissipative_torsion_field(p)
        d = 1e-4
        axis = np.array([1.0, 0.0, 1.0]) / np.sqrt(2)
        rate = pair_separation_rate(0.5 * d * axis, -0.5 * d * axis, f, p=1)
        assert rate == pytest.approx((p.m - p.gamma) * d, rel=1e-9)

    def test_symmetric_in_pair(self, rng):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))
        r_a, r_b = rng.uniform(-0.5, 0.5, (2, 3))
        assert pair_separation_rate(r_a, r_b, f) == pytest.approx(
            pair_separation_rate(r_b, r_a, f), abs=1e-15
        )

    def test_coincident_rejected(self):
        with pytest.raises(ValueError, match="coincident"):
            pair_separation_rate([0.1, 0, 0], [0.1, 0, 0], torsion_field(1.0))

    def test_matches_integrated_trace_distance(self):
        # central finite difference of the trace distance along the flow
        eta = 1e-3
        f = torsion_field(1.0)
        r_a = np.array([0.5, eta / 2, eta / 2])
        r_b = np.array([0.5, -eta / 2, -eta / 2])
        h = 1e-6
        dist = {}
        for sign in (+1.0, -1.0):
            fs = VectorField(sign * f.linear, sign * f.quad, sign * f.const)
            ta = integrate(fs, r_a, h, dt=h)
            tb = integrate(fs, r_b, h, dt=h)
            dist[sign] = schatten_norm(
                from_bloch(ta.final_bloch()) - from_bloch(tb.final_bloch()), 1
            )
        fd_rate = (dist[1.0] - dist[-1.0]) / (2 * h)
        assert pair_separation_rate(r_a, r_b, f, p=1) == pytest.approx(fd_rate, rel=1e-6)


class TestMidpointK:
    def test_torsion_midpoint(self):
        f = torsion_field(1.0)
        k = midpoint_k_matrix(f, [0.5, 0.0, 0.0])
        expected = np.zeros((3, 3))
        expected[1, 2] = 0.5
        np.testing.assert_allclose(k, expected, atol=1e-12)
        ksym = (k + k.T) / 2
        np.testing.assert_allclose(
            np.sort(np.linalg.eigvalsh(ksym)), [-0.25, 0.0, 0.25], atol=1e-12
        )

    def test_constant_generator_vanishes(self, rng):
        g = rng.standard_normal((3, 3))
        f = VectorField(g, np.zeros((3, 3, 3)), np.zeros(3))
        np.testing.assert_allclose(
            midpoint_k_matrix(f, rng.uniform(-1, 1, 3)), np.zeros((3, 3)), atol=1e-12
        )

    def test_dissipative_origin_vanishes(self):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))
        np.testing.assert_allclose(midpoint_k_matrix(f, np.zeros(3)), np.zeros((3, 3)))


class TestFixedPoints:
    def test_reference_values(self):
        recs = analytic_fixed_points(DissipativeTorsionParams(1.1, 1.0, 1.0))
        kinds = {r.kind: r for r in recs}
        assert set(kinds) == {"Origin", "Plus", "Minus"}
        d = 0.21 / 1.21
        np.testing.assert_allclose(
            kinds["Plus"].location,
            [np.sqrt(d), 1.1 * d, 1.1 * np.sqrt(d)],
            atol=1e-12,
        )
        np.testing.assert_allclose(kinds["Plus"].location, [0.416597, 0.190909, 0.458257], atol=1e-6)
        assert kinds["Plus"].residual <= 1e-12
        assert kinds["Plus"].stable and kinds["Minus"].stable
        assert not kinds["Origin"].stable

    def test_subcritical_origin_only(self):
        recs = analytic_fixed_points(DissipativeTorsionParams(0.9, 1.0, 1.0))
        assert [r.kind for r in recs] == ["Origin"]
        assert recs[0].stable

    def test_line_continuum(self):
        recs = analytic_fixed_points(DissipativeTorsionParams(1.0, 1.0, 0.0))
        assert [r.kind for r in recs] == ["Origin", "LineContinuum"]
        f = dissipative_torsion_field(DissipativeTorsionParams(1.0, 1.0, 0.0))
        loc = recs[1].location
        for s in (-0.9, -0.2, 0.5, 0.8):
            np.testing.assert_allclose(f.rhs(s * loc), np.zeros(3), atol=1e-12)

    def test_gamma_zero_unanalyzed(self):
        recs = analytic_fixed_points(DissipativeTorsionParams(1.0, 0.0, 1.0))
        assert [r.kind for r in recs] == ["Origin"]

    def test_closed_form_residuals_on_grid(self):
        worst = 0.0
        for p in params_grid():
            f = dissipative_torsion_field(p)
            for rec in analytic_fixed_points(p):
                if rec.kind in ("Plus", "Minus"):
                    worst = max(worst, np.linalg.norm(f.rhs(rec.location)))
                    assert rec.in_ball
        assert worst <= 1e-12

    def test_norm_identity_on_grid(self):
        for p in params_grid()[::7]:
            expected = g_min(p.m, p.gamma) / abs(p.g)
            for rec in analytic_fixed_points(p):
                if rec.kind == "Plus":
                    assert np.linalg.norm(rec.location) == pytest.approx(expected, abs=1e-10)

    def test_negative_g_and_gamma(self):
        for p in (
            DissipativeTorsionParams(1.1, 1.0, -1.0),
            DissipativeTorsionParams(1.1, -1.0, 1.0),
            DissipativeTorsionParams(-1.1, 1.0, 1.0),
        ):
            f = dissipative_torsion_field(p)
            recs = analytic_fixed_points(p)
            pts = [r for r in recs if r.kind in ("Plus", "Minus")]
            assert len(pts) == 2
            for rec in pts:
                assert np.linalg.norm(f.rhs(rec.location)) <= 1e-12

    def test_newton_refine_barely_moves(self):
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        f = dissipative_torsion_field(p)
        for rec in analytic_fixed_points(p):
            if rec.kind in ("Plus", "Minus"):
                _, moved = newton_refine(f, rec.location)
                assert moved <= 1e-10


class TestGMin:
    def test_reference_value(self):
        assert g_min(1.1, 1.0) == pytest.approx(np.sqrt(0.42), abs=1e-12)
        assert g_min(1.1, 1.0) == pytest.approx(0.648074, abs=5e-7)

    def test_vanishes_at_bifurcation(self):
        assert g_min(1.0 + 1e-9, 1.0) < 1e-4

    def test_no_pair_below_threshold(self):
        with pytest.raises(ValueError, match="no finite pair"):
            g_min(0.9, 1.0)

    def test_bisection_oracle(self):
        # |r_fp(g)| = 1 exactly at g = g_min
        m, gamma = 1.1, 1.0
        def fp_norm(g):
            recs = analytic_fixed_points(DissipativeTorsionParams(m, gamma, g))
            return np.linalg.norm([r for r in recs if r.kind == "Plus"][0].location)
        lo, hi = 1e-3, 5.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if fp_norm(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(g_min(m, gamma), abs=1e-10)


class TestJacobianStability:
    def test_origin_eigenvalues_subcritical(self):
        f = dissipative_torsion_field(DissipativeTorsionParams(0.9, 1.0, 1.0))
        rec = jacobian_stability(f, np.zeros(3))
        np.testing.assert_allclose(
            np.sort(rec.eigenvalues.real), [-1.9, -1.0, -0.1], atol=1e-10
        )
        assert rec.stable

    def test_origin_unstable_supercritical(self):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))
        rec = jacobian_stability(f, np.zeros(3))
        assert rec.eigenvalues.real.max() == pytest.approx(0.1, abs=1e-10)
        assert not rec.stable

    def test_pair_is_stable(self):
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        f = dissipative_torsion_field(p)
        for rec in analytic_fixed_points(p):
            if rec.kind in ("Plus", "Minus"):
                out = jacobian_stability(f, rec.location)
                assert out.stable

    def test_rejects_non_fixed_point(self):
        f = dissipative_torsion_field(DissipativeTorsionParams(1.1, 1.0, 1.0))
        with pytest.raises(ValueError, match="not a fixed point"):
            jacobian_stability(f, np.array([0.5, 0.5, 0.5]))


class TestXi:
    def test_along_xi_plus(self):
        np.testing.assert_allclose(xi_transform([0.3, 0.0, 0.3]), [0.3, 0.0, 0.0])

    def test_along_xi_minus(self):
        np.testing.assert_allclose(xi_transform([0.3, 0.0, -0.3]), [0.0, -0.3, 0.0])

    def test_inverse(self, rng):
        for _ in range(20):
            r = rng.uniform(-1, 1, 3)
            np.testing.assert_allclose(xi_inverse(xi_transform(r)), r, atol=1e-15)

    def test_decoupled_rates_from_flow(self):
        # with g = 0 the xi_plus coordinate grows at exactly m - gamma
        p = DissipativeTorsionParams(1.1, 1.0, 0.0)
        f = dissipative_torsion_field(p)
        h = 1e-6
        r0 = np.array([0.1, 0.05, 0.1])
        plus = integrate(f, r0, h, dt=h).final_bloch()
        minus = integrate(
            VectorField(-f.linear, -f.quad, -f.const), r0, h, dt=h
        ).final_bloch()
        dxi = (xi_transform(plus) - xi_transform(minus)) / (2 * h)
        xi0 = xi_transform(r0)
        assert dxi[0] == pytest.approx((p.m - p.gamma) * xi0[0], rel=1e-6)
        assert dxi[1] == pytest.approx(-(p.m + p.gamma) * xi0[1], rel=1e-6)
        assert dxi[2] == pytest.approx(-p.gamma * xi0[2], rel=1e-6)


class TestBasins:
    def test_reference_points(self):
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        assert basin_classify(np.array([0.1, 0.0, 0.1]), p) == "Plus"
        assert basin_classify(np.array([-0.1, 0.0, -0.1]), p) == "Minus"
        assert basin_classify(np.zeros(3), p) == "Origin"

    def test_subcritical_goes_to_origin(self):
        p = DissipativeTorsionParams(0.9, 1.0, 1.0)
        assert basin_classify(np.array([0.4, 0.2, -0.3]), p) == "Origin"

    def test_mirror_symmetry(self, rng):
        # the flow is exactly equivariant under (x, y, z) -> (-x, y, -z)
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        flip = {"Plus": "Minus", "Minus": "Plus", "Origin": "Origin",
                "Unphysical": "Unphysical", "Undecided": "Undecided"}
        r0s = rng.uniform(-0.55, 0.55, (10, 3))
        labels = basin_classify_many(r0s, p)
        mirrored = basin_classify_many(r0s @ BLOCH_MIRROR.T, p)
        for a, b in zip(labels, mirrored):
            assert b == flip[a]

    def test_unphysical_label(self):
        p = DissipativeTorsionParams(1.1, 1.0, 1.0)
        assert basin_classify(np.array([0.7065, 0.0, 0.7065]), p) == "Unphysical"


class TestPhaseScan:
    def test_transition_at_m_equals_gamma(self):
        # bistability appears exactly above m = 1; far above, g_min grows
        # past g = 1 and the pair leaves the ball again
        diagram = phase_scan(("m", np.linspace(0.5, 1.5, 21)), ("gamma", [1.0]), {"g": 1.0})
        labels = {round(m, 3): diagram.cells[i, 0] for i, m in enumerate(diagram.axis1)}
        assert all(labels[round(m, 3)] == "SingleStableOrigin" for m in np.arange(0.5, 1.01, 0.05))
        assert labels[1.05] == "Bistable"
        assert labels[1.2] == "Bistable"
        assert labels[1.45] == "NoFiniteAttractorInBall"
        assert labels[1.5] == "NoFiniteAttractorInBall"

    def test_small_g_no_attractor(self):
        diagram = phase_scan(("m", [1.1]), ("g", [0.1]), {"gamma": 1.0})
        assert diagram.cells[0, 0] == "NoFiniteAttractorInBall"

    def test_line_degenerate(self):
        diagram = phase_scan(("m", [1.0]), ("g", [0.0]), {"gamma": 1.0})
        assert diagram.cells[0, 0] == "LineDegenerate"

    def test_bad_axes(self):
        with pytest.raises(ValueError):
            phase_scan(("m", [1.0]), ("m", [2.0]), {"g": 1.0})
