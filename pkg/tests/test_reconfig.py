"""Centralized reconfiguration: program assembly against an independent
convex solver, topology extraction, lambda sweeps and out-of-sample checks."""

import numpy as np
import pytest

from gridreconfig import reconfig, scenarios as sc, solver

from conftest import cvx_solve, random_feeder, sampled_bounds


@pytest.fixture(scope="module")
def small_prob(small6, small_bounds):
    return reconfig.assemble(small6, small_bounds, reconfig.CostSpec(), 20.0)


@pytest.fixture(scope="module")
def small_sol(small_prob):
    return reconfig.solve_centralized(small_prob)


class TestCostSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="unknown cost kind"):
            reconfig.CostSpec(kind="fuel").validate()
        with pytest.raises(ValueError, match="nonnegative"):
            reconfig.CostSpec(loss_weight=-1.0).validate()
        with pytest.raises(ValueError, match="at least one nonzero term"):
            reconfig.CostSpec(kind="loss", loss_weight=0.0).validate()
        reconfig.CostSpec(kind="operation").validate()


class TestAssemble:
    def test_rejects_negative_lambda(self, small6, small_bounds):
        with pytest.raises(ValueError, match="nonnegative"):
            reconfig.assemble(small6, small_bounds, reconfig.CostSpec(), -1.0)

    def test_rejects_mismatched_bounds(self, small6, small_bounds):
        bad = sc.NetInjectionBounds(
            small_bounds.slots[:-1], small_bounds.p_bound[:-1], small_bounds.q_bound[:-1]
        )
        with pytest.raises(ValueError, match="node, phase"):
            reconfig.assemble(small6, bad, reconfig.CostSpec(), 1.0)

    def test_group_weights_combine_lambda_and_line_terms(self, small6, small_bounds):
        cost = reconfig.CostSpec(line_terms={(2, 3): 0.7})
        prob = reconfig.assemble(small6, small_bounds, cost, 10.0)
        weights = {
            small6.lines[li].key: g.weight
            for g, li in zip(prob.program.groups, prob.group_lines)
        }
        assert weights[(2, 3)] == pytest.approx(10.0 * 1.0 + 0.7)
        assert weights[(4, 5)] == pytest.approx(10.0 * 1.2)
        assert weights[(3, 6)] == pytest.approx(10.0 * 1.5)
        # non-switchable lines get no group unless they carry a line term
        assert (1, 2) not in weights

    def test_line_term_alone_creates_group(self, small6, small_bounds):
        cost = reconfig.CostSpec(line_terms={(1, 2): 0.5})
        prob = reconfig.assemble(small6, small_bounds, cost, 0.0)
        keys = [small6.lines[li].key for li in prob.group_lines]
        assert keys == [(1, 2)]

    def test_power_columns_rescaled_by_nominal_voltage(self, small_prob):
        ncur = small_prob.indexing.dim
        assert np.all(small_prob.var_scale[:ncur] == 1.0)
        assert np.all(small_prob.var_scale[ncur:] == small_prob.model.nominal_voltage)

    def test_one_ball_per_line_phase(self, small6, small_prob):
        assert len(small_prob.program.balls) == small6.line_phase_count()
        radii = [b.radius for b in small_prob.program.balls]
        assert radii == [ln.i_max for ln in small6.lines for _ in ln.phases]


class TestAgainstReference:
    def test_objective_matches_reference(self, small_prob, small_sol):
        _, ref = cvx_solve(small_prob.program)
        assert small_sol.status == "optimal"
        assert small_sol.objective == pytest.approx(ref, rel=1e-6)

    def test_solution_currents_match_reference(self, small_prob, small_sol):
        x_ref, _ = cvx_solve(small_prob.program)
        xi_ref = small_prob.physical(x_ref)[: small_prob.indexing.dim]
        assert np.allclose(small_sol.xi, xi_ref, atol=2e-3 * (1 + np.abs(xi_ref).max()))

    def test_reported_quantities_are_physical(self, small_prob, small_sol):
        # DG setpoint respects its box in watts and the balance margins are
        # nonnegative at the optimum
        s = small_sol.dg_setpoints[(3, "a")]
        assert -1e-3 <= s.real <= 30e3 + 1e-3
        for p_m, q_m in small_sol.lol_margin.values():
            assert p_m >= -1e-3 and q_m >= -1e-3


class TestFixedTopology:
    def test_forces_open_lines_to_zero(self, small6, small_bounds):
        sol = reconfig.solve_fixed_topology(
            small6, small_bounds, reconfig.CostSpec(), [(4, 5), (3, 6)]
        )
        assert sol.status == "optimal"
        assert sol.per_line_current_mag[(4, 5)] == pytest.approx(0.0, abs=1e-8)
        assert sol.per_line_current_mag[(3, 6)] == pytest.approx(0.0, abs=1e-8)
        assert sol.per_line_current_mag[(1, 2)] > 1.0

    def test_no_open_lines_equals_lambda_zero(self, small6, small_bounds):
        a = reconfig.solve_fixed_topology(small6, small_bounds, reconfig.CostSpec(), [])
        prob = reconfig.assemble(small6, small_bounds, reconfig.CostSpec(), 0.0)
        b = reconfig.solve_centralized(prob)
        assert a.objective == pytest.approx(b.objective, rel=1e-7)


class TestSweep:
    def test_requires_ascending_ladder(self, small6, small_bounds):
        with pytest.raises(ValueError, match="ascending"):
            reconfig.sweep_lambda(small6, small_bounds, reconfig.CostSpec(), [5.0, 1.0])

    def test_matrix_and_csv(self, small6, small_bounds, tmp_path):
        sw = reconfig.sweep_lambda(small6, small_bounds, reconfig.CostSpec(), [0.0, 2000.0])
        assert sw.statuses == ["optimal", "optimal"]
        assert sw.open_count(0) == 0
        assert sw.open_count(1) > 0
        # open lines show as exact zeros in the current matrix
        zero_rows = np.nonzero(sw.matrix[:, 1] == 0.0)[0]
        open_keys = {sw.switchable_keys[i] for i in zero_rows}
        assert open_keys == set(sw.solutions[1].open_lines)
        path = tmp_path / "sweep.csv"
        sw.export_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "line,0.0,2000.0"
        assert len(rows) == 1 + len(sw.switchable_keys)
        first = rows[1].split(",")
        assert float(first[1]) == sw.matrix[0, 0]

    def test_infeasible_points_marked(self, small6, small_bounds, tmp_path):
        # impossibly tight bounds make every point infeasible
        bad = sc.NetInjectionBounds(
            small_bounds.slots,
            small_bounds.p_bound - 1e9,
            small_bounds.q_bound - 1e9,
        )
        settings = reconfig.default_settings(max_iters=40_000)
        sw = reconfig.sweep_lambda(small6, bad, reconfig.CostSpec(), [1.0], settings)
        assert sw.solutions == [None]
        assert sw.statuses[0] != "optimal"
        assert np.all(np.isnan(sw.matrix))
        path = tmp_path / "inf.csv"
        sw.export_csv(path)
        assert "INF" in path.read_text()


class TestAudit:
    def test_flags_tampered_solution(self, small_prob, small_sol):
        x = small_sol.solver_result.x.copy()
        x[0] += 1e4  # blow through the first line's ampacity
        assert reconfig._audit(small_prob, small_prob.physical(x)) > 1e-3
        assert reconfig._audit(small_prob, small_prob.physical(small_sol.solver_result.x)) <= 1e-5


class TestValidateLol:
    def test_rates_and_errors(self, small6, small_spec, small_sol):
        spec, corr = small_spec
        v = reconfig.validate_lol(small_sol, small6, spec, corr, 2000, seed=99)
        assert 0.0 <= v.joint_rate <= 1.0
        assert v.rate == v.joint_rate
        assert v.k_out == 2000
        assert set(v.marginal_rates) == set(small_sol.problem.slots)
        assert all(v.joint_rate <= r for r in v.marginal_rates.values())
        with pytest.raises(ValueError, match="at least one"):
            reconfig.validate_lol(small_sol, small6, spec, corr, 0, seed=1)


class TestRandomFeeders:
    def test_assembly_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(20)
        for _ in range(3):
            m = random_feeder(rng)
            bounds = sampled_bounds(m, k=150, seed=int(rng.integers(1e6)))
            prob = reconfig.assemble(m, bounds, reconfig.CostSpec(), 3.0)
            sol = reconfig.solve_centralized(prob)
            assert sol.status == "optimal"
            _, ref = cvx_solve(prob.program)
            assert sol.objective == pytest.approx(ref, rel=1e-5, abs=1e-5)
