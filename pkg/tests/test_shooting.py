import math
import warnings

import numpy as np
import pytest

from harmap import ActionParams, NoSignChange, NotASolution, SeedNotNegative
from harmap import ode
from harmap.errors import AsymmetricDomain
from harmap.integrate import DIVERGENT as R_DIVERGENT
from harmap.params import y_center
from harmap.shooting import (
    BOUNDED_OSCILLATORY,
    BVP_SOLUTION,
    DIVERGENT,
    certify_critical_velocity,
    classify,
    find_critical_velocities,
    lyapunov_limit,
    reflect,
    shoot,
    so_group_relabel,
    solve_symmetric_bvp,
    to_k_solution,
    verify_point_symmetry,
)

from oracles import anti_linear_solution, linear_solution

PI = math.pi
ALL_G = (2, 3, 4, 6)


class TestShoot:
    @pytest.mark.parametrize("g", ALL_G)
    def test_linear_velocity_classifies_as_solution(self, g):
        p = ActionParams(g, 1)
        o = shoot(p, 0, 1.0 / g)
        assert o.behavior.kind == BVP_SOLUTION
        assert abs(o.L_minus.value) <= o.L_minus.tail_bound
        # trajectory is the identity profile
        xs = np.linspace(-5.0, 5.0, 101)
        r, _ = o.traj.eval(xs)
        exact = np.array([linear_solution(g, x)[0] for x in xs])
        assert np.max(np.abs(r - exact)) < 1e-9

    def test_anti_linear_velocity(self):
        # shooting from y_{-1} with the anti-linear velocity reproduces
        # r = -(g-1) a(x); the pi-shifted representative belongs to j = +1
        g = 3
        p = ActionParams(g, 1)
        o = shoot(p, -1, -(g - 1.0) / g)
        assert o.behavior.kind == BVP_SOLUTION
        xs = np.linspace(-4.0, 4.0, 81)
        r, _ = o.traj.eval(xs)
        exact = np.array([anti_linear_solution(g, x)[0] for x in xs])
        assert np.max(np.abs(r - exact)) < 1e-9

    def test_oscillatory_at_zero_velocity(self):
        p = ActionParams(4, 1)
        o = shoot(p, 1, 0.0)
        assert o.behavior.kind == BOUNDED_OSCILLATORY
        assert o.L_minus.value < -o.L_minus.tail_bound
        band_hi = (4 + 1) * PI / 4
        assert o.traj.rs.min() >= -1e-6 and o.traj.rs.max() <= band_hi + 1e-6

    def test_divergent_at_large_velocity(self):
        o = shoot(ActionParams(2, 1), 1, 5.0)
        assert o.behavior.kind == DIVERGENT

    def test_initial_sample_exact(self):
        p = ActionParams(3, 1)
        v = 0.1234
        o = shoot(p, 1, v)
        i = np.searchsorted(o.traj.xs, 0.0)
        assert o.traj.xs[i] == 0.0
        assert o.traj.rs[i] == y_center(3, 1)
        assert o.traj.rps[i] == v

    def test_classify_rederives_behavior(self):
        for args in ((ActionParams(4, 1), 1, 0.0), (ActionParams(2, 1), 0, 0.5)):
            o = shoot(*args)
            assert classify(o) == o.behavior

    def test_unexplored_j_warns(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            shoot(ActionParams(2, 1), 3, 0.3)
        assert any("outside the range explored" in str(x.message) for x in w)


class TestCriticalVelocities:
    def test_g2_j1_matches_reference(self):
        p = ActionParams(2, 1)
        cv = find_critical_velocities(p, 1, tol=1e-10)
        assert abs(cv.u - 0.881) < 5e-3
        assert abs(cv.l + 0.5) < 1e-6  # exact -(g-1)/g
        assert cv.bracket_width <= 1e-10
        assert cv.L_at_midpoint < 0

    def test_g3_j0_upper_root_is_one_third(self):
        p = ActionParams(3, 1)
        cv = find_critical_velocities(p, 0, tol=1e-9)
        assert abs(cv.u - 1.0 / 3.0) < 1e-6
        assert abs(cv.l + 0.750) < 5e-3

    def test_no_sign_change(self):
        p = ActionParams(2, 1)
        with pytest.raises(NoSignChange):
            find_critical_velocities(p, 1, search=(-0.3, 0.3, 0.0))

    def test_seed_not_negative(self):
        p = ActionParams(2, 1)
        with pytest.raises(SeedNotNegative):
            find_critical_velocities(p, 1, search=(-2.5, 2.5, 2.0))

    def test_certification_inequality(self):
        p = ActionParams(2, 1)
        cv = find_critical_velocities(p, 1, tol=1e-9)
        ok_u, absL, bound = certify_critical_velocity(p, 1, cv.u, 1e-9)
        assert ok_u and absL <= bound

    def test_sign_structure_sampled(self, rng):
        # L < 0 strictly inside (l, u); L > 0 safely outside
        for g in (2, 4):
            p = ActionParams(g, 1)
            for j in (0, 1):
                cv = find_critical_velocities(p, j, tol=1e-8)
                inner = rng.uniform(cv.l + 0.05, cv.u - 0.05, size=5)
                for v in inner:
                    assert lyapunov_limit(p, j, float(v), precision=1e-8).value < 0
                outer = [cv.l - 0.21, cv.l - 0.6, cv.u + 0.21, cv.u + 0.6, cv.u + 1.0]
                for v in outer:
                    assert lyapunov_limit(p, j, float(v), precision=1e-8).value > 0


class TestSolveSymmetricBvp:
    def test_linear_solution_record(self):
        p = ActionParams(2, 1)
        sol = solve_symmetric_bvp(p, 0, 0.5)
        assert sol.k == 1
        assert sol.j_pp == 0
        assert sol.c_minus == pytest.approx(0.0, abs=1e-4)
        assert sol.c_plus == pytest.approx(PI / 2, abs=1e-4)
        assert sol.defect < 1e-8

    def test_g4_upper_branch_gives_k_five(self):
        p = ActionParams(4, 1)
        cv = find_critical_velocities(p, 1, tol=1e-13)
        sol = solve_symmetric_bvp(p, 1, cv.u)
        assert sol.k == 1 + 4
        assert sol.lattice_distance_minus < 1e-4
        assert sol.lattice_distance_plus < 1e-4
        assert abs(sol.jump - sol.jump_reference) < 1e-4

    def test_j_minus_two_gives_k_one_minus_two_g(self):
        g = 2
        p = ActionParams(g, 1)
        cv = find_critical_velocities(p, -2, tol=1e-13)
        sol = solve_symmetric_bvp(p, -2, cv.l)
        assert sol.k == 1 - 2 * g
        # the j = -2 band is the pi-shift of the j = 0 band
        cv0 = find_critical_velocities(p, 0, tol=1e-13)
        assert cv.l == pytest.approx(cv0.l, abs=1e-9)
        assert cv.u == pytest.approx(cv0.u, abs=1e-9)

    def test_rejects_non_critical_velocity(self):
        p = ActionParams(2, 1)
        with pytest.raises(NotASolution):
            solve_symmetric_bvp(p, 1, 0.3)


class TestReflect:
    def _solution_traj(self, g=2, j=0, v=0.5):
        return shoot(ActionParams(g, 1), j, v).traj

    def test_involution(self):
        traj = self._solution_traj()
        back = reflect(reflect(traj, 0), 0)
        assert np.max(np.abs(back.xs - traj.xs)) < 1e-12
        assert np.max(np.abs(back.rs - traj.rs)) < 1e-12
        assert np.max(np.abs(back.rps - traj.rps)) < 1e-12

    def test_reflected_trajectory_satisfies_equation(self):
        traj = self._solution_traj(g=3, j=1, v=0.2)
        ref = reflect(traj, 1)
        res = np.array([
            ref.rpps[i] - ode.rhs_x_raw(3, 1, ref.xs[i], ref.rs[i], ref.rps[i])
            for i in range(len(ref))
        ])
        assert np.max(np.abs(res)) < 1e-9

    def test_linear_solution_is_fixed_point(self):
        traj = self._solution_traj(g=2, j=0, v=0.5)
        ref = reflect(traj, 0)
        xs = np.linspace(-5.0, 5.0, 101)
        r1, _ = traj.eval(xs)
        r2, _ = ref.eval(xs)
        assert np.max(np.abs(r1 - r2)) < 1e-8

    def test_asymmetric_domain_rejected(self):
        from harmap.integrate import integrate
        from harmap import State

        one_sided = integrate(ActionParams(2, 1), State(0.0, PI / 4, 0.5), 5.0)
        with pytest.raises(AsymmetricDomain):
            reflect(one_sided, 0)

    def test_point_symmetry_defect_small_for_any_centered_shot(self):
        # Lemma-sym check: any shot from (0, y_j, v) is point symmetric
        o = shoot(ActionParams(3, 1), 1, 0.37)
        defect = verify_point_symmetry(o.traj, 1, window=12.0)
        assert defect < 1e-8


class TestToKSolution:
    def test_zero_shift_for_linear(self):
        p = ActionParams(2, 1)
        sol = solve_symmetric_bvp(p, 0, 0.5)
        shifted = to_k_solution(sol)
        assert shifted.k == sol.k == 1
        assert np.array_equal(shifted.traj.rs, sol.traj.rs)

    def test_shift_rule_matches_lattice(self):
        g = 2
        p = ActionParams(g, 1)
        cv = find_critical_velocities(p, 1, tol=1e-13)
        sol = solve_symmetric_bvp(p, 1, cv.u)
        shifted = to_k_solution(sol)
        # the normalised record starts at 0 and climbs to k pi / g
        assert shifted.c_minus == pytest.approx(0.0, abs=1e-4)
        assert shifted.c_plus == pytest.approx(sol.k * PI / g, abs=2e-4)
        # pi-shifts leave the equation invariant: stored curvatures still match
        res = np.array([
            shifted.traj.rpps[i]
            - ode.rhs_x_raw(g, 1, shifted.traj.xs[i], shifted.traj.rs[i], shifted.traj.rps[i])
            for i in range(len(shifted.traj))
        ])
        assert np.max(np.abs(res)) < 1e-9

    def test_mismatched_j_pp_rejected(self):
        p = ActionParams(2, 1)
        sol = solve_symmetric_bvp(p, 0, 0.5)
        from harmap import ValidationError

        with pytest.raises(ValidationError):
            to_k_solution(sol, j_pp=sol.j_pp + 1)


class TestSoRelabel:
    def test_doubling(self):
        assert so_group_relabel(ActionParams(2, 1)).g == 4
        assert so_group_relabel(ActionParams(3, 1)).g == 6

    def test_admissible_double_is_not_formal(self):
        q = so_group_relabel(ActionParams(2, 2))
        assert q.g == 4 and not q.formal

    def test_inadmissible_double_is_formal_but_usable(self):
        q = so_group_relabel(ActionParams(4, 1))
        assert q.g == 8 and q.formal
        est = lyapunov_limit(q, 1, 0.0, precision=1e-8)
        assert est.value < 0  # the machinery runs on the relabeled action

    def test_relabeled_g2_reproduces_g4_table_entry(self):
        q = so_group_relabel(ActionParams(2, 1))
        cv = find_critical_velocities(q, 1, tol=1e-9)
        assert abs(cv.u - 0.975) < 5e-3


class TestBandProperties:
    def test_bounded_band_under_negative_L(self, rng):
        # certified L < 0 trajectories stay inside the stated bands
        for g in (2, 3):
            p = ActionParams(g, 1)
            cv = find_critical_velocities(p, 1, tol=1e-8)
            for v in rng.uniform(cv.l + 0.05, cv.u - 0.05, size=3):
                o = shoot(p, 1, float(v))
                assert o.behavior.kind == BOUNDED_OSCILLATORY
                assert o.traj.rs.min() >= -1e-6
                assert o.traj.rs.max() <= (g + 1) * PI / g + 1e-6
        # j = -2 band: (1-2g) pi / g <= r <= 0
        g = 2
        p = ActionParams(g, 1)
        o = shoot(p, -2, -0.1)
        assert o.behavior.kind == BOUNDED_OSCILLATORY
        assert o.traj.rs.max() <= 1e-6
        assert o.traj.rs.min() >= (1 - 2 * g) * PI / g - 1e-6

    def test_pi_band_confinement_in_tail(self):
        # with L < 0 the tail of r settles inside an open pi-band
        g = 3
        p = ActionParams(g, 1)
        o = shoot(p, 1, 0.0, x_extra=20.0)
        tail = o.traj.restrict(o.traj.x_min, o.traj.x_min + 0.25 * (o.traj.x_max - o.traj.x_min))
        k = math.floor(tail.rs[0] / PI) + 1
        assert np.all(tail.rs > (k - 1) * PI + 1e-3)
        assert np.all(tail.rs < k * PI - 1e-3)

    def test_derivative_bounded_away_from_zero_when_divergent(self):
        # under L > 0 the tail derivative never vanishes
        g = 2
        p = ActionParams(g, 1)
        o = shoot(p, 1, 1.4)
        assert o.behavior.kind == DIVERGENT
        est = o.L_minus
        tail = o.traj.restrict(o.traj.x_min, o.traj.x_min + 0.25 * (o.traj.x_max - o.traj.x_min))
        floor = math.sqrt(2.0 * (est.value - est.tail_bound)) * 0.9
        assert np.min(np.abs(tail.rps)) > floor > 0
