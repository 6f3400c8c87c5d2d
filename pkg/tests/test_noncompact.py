import math

import numpy as np
import pytest
from scipy.integrate import quad

from harmap import ConfigError, DerivativeVanishes, MonotonicityLost, ValidationError
from harmap.metricconfig import (
    load_metric_config,
    load_tabulated_csv,
    metric_to_config,
    parse_metric_config,
)
from harmap.noncompact import (
    Component,
    Cone,
    CoshCollar,
    RProfile,
    SIGN_PAPER_LITERAL,
    SmoothedCone,
    SplitPolicy,
    Tabulated,
    WarpedMetric,
    builtin_metric,
    check_profile_consistency,
    compute_deformation,
    deform_pipeline,
    deformation_integrand,
    extend_monotone,
    ivp_solve,
    launch_coefficient,
    verify_harmonicity,
)

from oracles import rk4_fixed


def sinh_profile(t_max=3.0, n=3001):
    ts = np.linspace(0.0, t_max, n)
    return Tabulated(ts, np.sinh(ts), np.cosh(ts), np.sinh(ts))


def collar_metric():
    return WarpedMetric(k0=2, components=(Component(3, 2.0, CoshCollar(2.0)),))


class TestProfiles:
    @pytest.mark.parametrize(
        "profile,lo",
        [(Cone(), 0.1), (SmoothedCone(1.3), 0.0), (CoshCollar(0.7), 0.0),
         (sinh_profile(), 0.05)],
    )
    def test_derivative_consistency(self, profile, lo):
        check_profile_consistency(profile, lo, 2.5)

    def test_fddot_consistency(self, rng):
        for prof in (SmoothedCone(0.9), CoshCollar(1.4)):
            for t in rng.uniform(0.0, 3.0, size=12):
                h = 1e-5
                fd = (prof.fdot(t + h) - prof.fdot(t - h)) / (2 * h)
                assert fd == pytest.approx(prof.fddot(t), abs=1e-6)

    def test_tabulated_needs_increasing_abscissae(self):
        with pytest.raises(ValidationError):
            Tabulated([0, 1, 1, 2], [0, 1, 1, 2], [1, 1, 1, 1], [0, 0, 0, 0])

    def test_positive_scale_required(self):
        with pytest.raises(ValidationError):
            SmoothedCone(0.0)
        with pytest.raises(ValidationError):
            CoshCollar(-1.0)


class TestWarpedMetric:
    def test_k0_lower_bound(self):
        with pytest.raises(ValidationError):
            WarpedMetric(k0=1, components=())

    def test_initial_values_enforced(self):
        # a factor profile must satisfy f(0) = a
        with pytest.raises(ValidationError):
            WarpedMetric(k0=2, components=(Component(2, 2.0, SmoothedCone(1.0)),))
        # the sphere profile must satisfy f(0) = 0, f'(0) = 1
        with pytest.raises(ValidationError):
            WarpedMetric(k0=2, components=(), f0=SmoothedCone(1.0))

    def test_dims_and_total(self):
        m = builtin_metric("two_factor")
        assert m.dims() == (3, 3, 2)
        assert m.k_total == 8

    def test_f0_cubic_jet(self):
        assert builtin_metric("flat_cone").f0_cubic_jet() == pytest.approx(0.0, abs=1e-12)
        m = WarpedMetric(k0=2, components=(), f0=sinh_profile())
        assert m.f0_cubic_jet() == pytest.approx(1.0 / 6.0, abs=1e-7)


class TestIvp:
    def test_flat_cone_is_exactly_linear(self):
        m = builtin_metric("flat_cone")
        traj = ivp_solve(m, 0.7, 2.0, tol=1e-12)
        assert np.max(np.abs(traj.rs - 0.7 * traj.ts)) < 1e-10

    def test_identity_map_on_any_metric(self):
        for name in ("smoothed_factor", "two_factor"):
            traj = ivp_solve(builtin_metric(name), 1.0, 2.0, tol=1e-12)
            assert np.max(np.abs(traj.rs - traj.ts)) < 1e-9

    def test_rk4_oracle_smoothed_factor(self):
        m = builtin_metric("smoothed_factor")
        v, delta = 0.5, 1e-4
        traj = ivp_solve(m, v, 1.0, tol=1e-12, delta=delta)
        r_o, _ = rk4_fixed(m.rhs, delta, v * delta, v, 1.0, 100_000)
        assert abs(traj.eval(1.0)[0] - r_o) < 1e-7

    def test_rk4_oracle_collar(self):
        # genuinely non-linear profile dynamics (f fdot != identity)
        m = collar_metric()
        v, delta = 0.5, 1e-4
        r3 = launch_coefficient(m, v)
        traj = ivp_solve(m, v, 1.5, tol=1e-12, delta=delta)
        r_o, _ = rk4_fixed(
            m.rhs, delta, v * delta + r3 * delta**3, v + 3 * r3 * delta**2, 1.5, 100_000
        )
        assert abs(traj.eval(1.5)[0] - r_o) < 1e-7
        assert abs(traj.eval(1.5)[0] - 0.5 * 1.5) > 1e-4  # not the linear map

    def test_delta_halving_stability(self):
        for name, v in (("smoothed_factor", 0.5), ("two_factor", 2.0)):
            m = builtin_metric(name)
            tol = 1e-11
            r1 = ivp_solve(m, v, 1.0, tol=tol, delta=1e-4).eval(1.0)[0]
            r2 = ivp_solve(m, v, 1.0, tol=tol, delta=5e-5).eval(1.0)[0]
            assert abs(r1 - r2) < 10.0 * tol

    def test_sinh_sphere_profile_launch(self):
        # curved sphere factor: the cubic launch coefficient is exercised
        m = WarpedMetric(k0=2, components=(), f0=sinh_profile())
        v = 0.5
        r3 = launch_coefficient(m, v)
        assert r3 == pytest.approx(2 * 2 * (1 / 6) * v * (v * v - 1) / 5.0, abs=1e-7)
        delta = 1e-4
        traj = ivp_solve(m, v, 1.0, tol=1e-12, delta=delta)
        r_o, _ = rk4_fixed(
            m.rhs, delta, v * delta + r3 * delta**3, v + 3 * r3 * delta**2, 1.0, 50_000
        )
        assert abs(traj.eval(1.0)[0] - r_o) < 1e-6

    def test_validation(self):
        m = builtin_metric("flat_cone")
        with pytest.raises(ValidationError):
            ivp_solve(m, 0.5, -1.0)
        with pytest.raises(ValidationError):
            ivp_solve(m, 0.5, 1.0, tol=1.0)
        with pytest.raises(ValidationError):
            ivp_solve(m, 0.5, 1.0, delta=2.0)


class TestExtendMonotone:
    def test_continue_ode_carries_solution(self):
        m = builtin_metric("smoothed_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "continue_ode", 8.0)
        # the extension keeps solving the equation: residual stays ~0
        for t in np.linspace(0.6, 8.0, 50):
            res = prof.rddot(t) + m.drift(t) * prof.rdot(t) - m.force(t, prof.r(t))
            assert abs(res) < 1e-9

    @pytest.mark.parametrize("scheme", ["cubic_blend", "linear", "ode_deviate"])
    def test_join_is_c2_and_monotone(self, scheme):
        m = builtin_metric("two_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, scheme, 6.0)
        eps = prof.eps
        r_b, rp_b = base.eval(eps)
        assert prof.r(eps) == pytest.approx(r_b, abs=1e-10)
        assert prof.rdot(eps) == pytest.approx(rp_b, abs=1e-10)
        h = 1e-6
        assert prof.rdot(eps + h) == pytest.approx(
            rp_b + h * m.rhs(eps, r_b, rp_b), abs=1e-8
        )
        assert prof.mu > 0
        ts = np.linspace(eps, 6.0, 400)
        slopes = prof.rdot(ts)
        assert np.min(np.abs(slopes)) >= 0.9 * prof.mu

    def test_cubic_blend_reaches_target_slope(self):
        m = builtin_metric("flat_cone")
        base = ivp_solve(m, 1.0, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "cubic_blend", 5.0)
        assert prof.rdot(4.0) == pytest.approx(2.0, abs=1e-9)  # 2 rdot(eps)

    def test_profile_derivative_consistency(self):
        m = builtin_metric("smoothed_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "cubic_blend", 6.0)
        for t in np.linspace(0.05, 5.9, 37):
            h = 1e-5
            fd = (prof.r(t + h) - prof.r(t - h)) / (2 * h)
            assert fd == pytest.approx(prof.rdot(t), abs=1e-6)

    def test_eps_shrinks_when_derivative_vanishes_at_cut(self):
        from harmap.integrate import StepStats
        from harmap.noncompact import TimeTrajectory

        # synthetic base with r'(eps) = 0 but r' != 0 earlier
        ts = np.linspace(0.0, 1.0, 201)
        rs = np.sin(0.5 * math.pi * ts)
        rps = 0.5 * math.pi * np.cos(0.5 * math.pi * ts)
        rpps = -0.25 * math.pi**2 * np.sin(0.5 * math.pi * ts)
        base = TimeTrajectory(ts, rs, rps, rpps, np.zeros_like(ts), 1e-11,
                              StepStats(200, 0, 0.005, 0.005))
        m = builtin_metric("flat_cone")
        prof = extend_monotone(m, base, "cubic_blend", 3.0, rp_floor=1e-3)
        assert prof.eps < 1.0
        assert abs(base.eval(prof.eps)[1]) >= 1e-3

    def test_monotonicity_lost_raises(self):
        m = builtin_metric("flat_cone")
        base = ivp_solve(m, 1.0, 0.5, tol=1e-11)

        def slope(t):
            return 1.0 - (t - 0.5)

        def slope_d(t):
            return -1.0

        with pytest.raises(MonotonicityLost):
            RProfile(m, base, 0.5, 3.0, "synthetic", slope, slope_d, base.eval(0.5)[0])


class TestDeformation:
    def test_continue_ode_gives_zero_deformation(self):
        m = builtin_metric("smoothed_factor")
        res = deform_pipeline(m, 0.5, scheme="continue_ode")
        assert np.max(np.abs(res.A_grid)) < 1e-10
        assert res.residual_max < 1e-8

    def test_vanishes_on_initial_segment(self):
        m = builtin_metric("two_factor")
        res = deform_pipeline(m, 0.5, scheme="cubic_blend")
        assert np.all(res.A_grid[res.t_grid <= res.epsilon] == 0.0)

    def test_smooth_join_integrand_vanishes_at_cut(self):
        m = builtin_metric("two_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "cubic_blend", 6.0)
        assert abs(deformation_integrand(m, prof, prof.eps + 1e-12)) < 1e-9

    def test_flat_cone_cubic_example_dual_route(self):
        # spec'd closed-form extension r = t + (t - eps)^3 on the flat cone,
        # cross-checked against an independent quadrature of the integrand
        m = builtin_metric("flat_cone")
        eps, T, v = 0.5, 4.0, 1.0
        base = ivp_solve(m, v, eps, tol=1e-12)

        class CubicProfile:
            def __init__(self):
                self.eps, self.T, self.base = eps, T, base
                self.scheme, self.mu = "cubic-closed-form", 1.0

            def r(self, t):
                t = np.asarray(t, dtype=float) if not np.isscalar(t) else t
                return np.where(t <= eps, t, t + (t - eps) ** 3) if not np.isscalar(t) else (
                    t if t <= eps else t + (t - eps) ** 3
                )

            def rdot(self, t):
                t = np.asarray(t, dtype=float) if not np.isscalar(t) else t
                inner = 1.0
                outer = 1.0 + 3.0 * (t - eps) ** 2
                return np.where(t <= eps, inner, outer) if not np.isscalar(t) else (
                    inner if t <= eps else outer
                )

            def rddot(self, t):
                t = np.asarray(t, dtype=float) if not np.isscalar(t) else t
                outer = 6.0 * (t - eps)
                return np.where(t <= eps, 0.0, outer) if not np.isscalar(t) else (
                    0.0 if t <= eps else outer
                )

        prof = CubicProfile()
        res = compute_deformation(m, prof)
        assert res.residual_max < 1e-8
        # independent oracle: adaptive quadrature of the same integrand
        for t_probe in (1.0, 2.5, 4.0):
            ref, _ = quad(lambda s: deformation_integrand(m, prof, s), eps, t_probe,
                          epsabs=1e-12, epsrel=1e-12)
            i = np.argmin(np.abs(res.t_grid - t_probe))
            assert res.A_grid[i] == pytest.approx(ref, abs=1e-9)

    def test_split_policies_share_residual_and_sum(self):
        m = builtin_metric("two_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "cubic_blend", 6.0)
        dims = np.array(m.dims(), dtype=float)
        results = [
            compute_deformation(m, prof, split_policy=sp)
            for sp in (SplitPolicy.uniform(), SplitPolicy.single(1),
                       SplitPolicy.from_weights((0.2, 0.5, 0.3)))
        ]
        res0 = results[0]
        for res in results:
            assert np.max(np.abs(dims @ res.alpha_i_grids - res.A_grid)) < 1e-12
            assert res.residual_max == pytest.approx(res0.residual_max, abs=1e-12)

    def test_invalid_weights(self):
        from harmap import SplitWeightsInvalid

        m = builtin_metric("two_factor")
        base = ivp_solve(m, 0.5, 0.5, tol=1e-11)
        prof = extend_monotone(m, base, "cubic_blend", 6.0)
        with pytest.raises(SplitWeightsInvalid):
            compute_deformation(m, prof, split_policy=SplitPolicy.from_weights((0.5, 0.2)))
        with pytest.raises(SplitWeightsInvalid):
            compute_deformation(
                m, prof, split_policy=SplitPolicy.from_weights((0.5, 0.2, 0.2))
            )

    def test_wrong_sign_fails_loudly_on_curved_metric(self):
        m = builtin_metric("smoothed_factor")
        res = deform_pipeline(m, 0.5, scheme="cubic_blend", sign_variant=SIGN_PAPER_LITERAL)
        assert res.residual_max > 1e-3

    def test_nontriviality_of_generic_extensions(self):
        # a blended extension is neither constant nor the identity
        m = builtin_metric("two_factor")
        res = deform_pipeline(m, 1.0, scheme="cubic_blend")
        dev = np.max(np.abs(res.r_grid - res.t_grid))
        assert dev > 1e-2
        assert res.profile.mu > 0  # strictly monotone, hence onto its range

    def test_derivative_vanishes_guard(self):
        m = builtin_metric("flat_cone")

        class StationaryProfile:
            eps, T = 0.5, 2.0

            def r(self, t):
                return 1.0

            def rdot(self, t):
                return 0.0

            def rddot(self, t):
                return 0.0

        with pytest.raises(DerivativeVanishes):
            deformation_integrand(m, StationaryProfile(), 1.0)

    def test_csv_export_schema(self, tmp_path):
        m = builtin_metric("smoothed_factor")
        res = deform_pipeline(m, 0.5, scheme="cubic_blend", T=4.0)
        path = tmp_path / "deform.csv"
        res.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,r,rdot,A,alpha_0,alpha_1,residual"
        assert len(lines) == len(res.t_grid) + 1
        res.to_csv(tmp_path / "again.csv")
        assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


class TestConfig:
    def test_builtin_round_trip(self, tmp_path):
        m = builtin_metric("two_factor")
        text = metric_to_config(m)
        m2 = parse_metric_config(text)
        assert m2.k0 == m.k0 and m2.dims() == m.dims()
        assert isinstance(m2.components[1].profile, CoshCollar)

    def test_example_configs_load(self):
        for name in ("flat_cone", "smoothed_factor", "two_factor"):
            m = load_metric_config(f"configs/{name}.cfg")
            ref = builtin_metric(name)
            assert m.dims() == ref.dims()

    def test_tabulated_component(self, tmp_path):
        ts = np.linspace(0.0, 3.0, 301)
        f = np.sqrt(1.0 + ts * ts)
        csv = tmp_path / "factor.csv"
        rows = ["t,f,fdot,fddot"]
        for i in range(len(ts)):
            rows.append(
                f"{float(ts[i])!r},{float(f[i])!r},"
                f"{float(ts[i] / f[i])!r},{float(1.0 / f[i] ** 3)!r}"
            )
        csv.write_text("\n".join(rows) + "\n")
        cfg = tmp_path / "metric.cfg"
        cfg.write_text(
            "k0 = 2\n[component]\nk = 3\na = 1.0\nprofile = tabulated\ntab_path = factor.csv\n"
        )
        m = load_metric_config(str(cfg))
        assert isinstance(m.components[0].profile, Tabulated)
        assert m.components[0].profile.f(1.0) == pytest.approx(math.sqrt(2.0), abs=1e-8)

    @pytest.mark.parametrize(
        "text",
        [
            "",                                            # missing k0
            "k0 = nope\n",                                 # bad int
            "k0 = 2\nwhat = 3\n",                          # unknown key
            "k0 = 2\n[factor]\n",                          # unknown section
            "k0 = 2\n[component]\nk = 1\na = 1.0\nprofile = cone\n",   # cone factor
            "k0 = 2\n[component]\nk = 1\na = 1.0\nprofile = spline\n",  # unknown profile
            "k0 = 2\n[component]\nk = 1\nprofile = smoothed_cone\n",   # missing a
            "k0 = 2\nk0 = 3\n",                            # duplicate
            "k0 = 1\n",                                    # invalid metric
        ],
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_metric_config(text)

    def test_tab_header_enforced(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c,d\n0,0,1,0\n")
        with pytest.raises(ConfigError):
            load_tabulated_csv(str(bad))
