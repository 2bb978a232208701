"""Multi-area consensus solver: partitioning, the three update steps, dual
algebra, scheduling independence, equivalence with the un-eliminated form of
the scheme, and convergence to the centralized optimum."""

import numpy as np
import pytest

from gridreconfig import distributed as dist
from gridreconfig import reconfig, solver

from conftest import DATA, cvx_solve

COST = reconfig.CostSpec()
LAM = 20.0

TIGHT_INNER = solver.SolverSettings(
    kappa=50.0, max_iters=100_000, tol_primal=1e-11, tol_dual=1e-11, check_every=10
)


@pytest.fixture(scope="module")
def part_small(small6):
    return dist.partition(small6, {"a1": [3, 5]})


@pytest.fixture(scope="module")
def central_small(small6, small_bounds):
    prob = reconfig.assemble(small6, small_bounds, COST, LAM)
    return reconfig.solve_centralized(prob)


@pytest.fixture(scope="module")
def admm_small(small6, small_bounds, part_small, central_small):
    settings = dist.AdmmSettings(kappa=2.0, max_iters=600, tol_gap=1e-5)
    return dist.run(
        small6, small_bounds, COST, LAM, part_small, settings, central=central_small
    )


class TestPartition:
    def test_three_area_fixture(self, feeder37_areas):
        part = dist.load_partition(DATA / "areas37.json", feeder37_areas)
        assert part.names[-1] == dist.MANAGER
        assert set(part.names[:-1]) == {"area1", "area2", "area3"}
        tie_keys = {t.key for t in part.ties}
        assert tie_keys == {
            (3, 4),
            (8, 11),
            (15, 16),
            (17, 18),
            (8, 14),
            (6, 20),
            (20, 26),
        }
        a1 = {part.ties[ti].key for ti in part.area_ties["area1"]}
        assert a1 == {(8, 11), (8, 14), (15, 16)}
        assert part.neighbors("area1") == {dist.MANAGER}
        assert 1 in part.nodes[dist.MANAGER]
        assert part.area_of_node[12] == "area1"

    def test_nonswitchable_tie_rejected(self, feeder37):
        # the base fixture's (8, 11) line carries no switch
        with pytest.raises(dist.PartitionError, match="no switch"):
            dist.load_partition(DATA / "areas37.json", feeder37)

    def test_overlap_rejected(self, small6):
        with pytest.raises(dist.PartitionError, match="overlap"):
            dist.partition(small6, {"a": [3, 5], "b": [5, 6]})

    def test_unknown_node_rejected(self, small6):
        with pytest.raises(dist.PartitionError, match="unknown nodes"):
            dist.partition(small6, {"a": [3, 42]})

    def test_pcc_must_stay_with_manager(self, small6):
        with pytest.raises(dist.PartitionError, match="PCC"):
            dist.partition(small6, {"a": [1, 2]})

    def test_reserved_name(self, small6):
        with pytest.raises(dist.PartitionError, match="reserved"):
            dist.partition(small6, {dist.MANAGER: [3]})

    def test_list_form_gets_generated_names(self, small6):
        part = dist.partition(small6, [[3, 5]])
        assert part.names == ("area1", dist.MANAGER)

    def test_small_fixture_ties(self, part_small):
        assert {t.key for t in part_small.ties} == {(2, 3), (4, 5), (3, 6)}
        for t in part_small.ties:
            assert set(t.areas) == {"a1", dist.MANAGER}
            assert t.dim == 2
            assert t.radii == (80.0,)


class TestUpdateSteps:
    def make_state(self, small6, small_bounds, part_small, kappa=1.5):
        prob = reconfig.assemble(small6, small_bounds, COST, LAM)
        settings = dist.AdmmSettings(kappa=kappa, max_iters=50, tol_gap=1e-6)
        settings.inner = TIGHT_INNER
        return dist.init_state(prob, part_small, settings)

    def run_iteration(self, st):
        snap = dist._snapshot(st)
        for name in st.part.names:
            xl = dist.local_update(name, st, snap)
            st.x_local[name] = xl
            for ti, pos in st.areas[name].tie_pos.items():
                st.xi[(ti, name)] = xl[pos].copy()
        for ti in range(len(st.part.ties)):
            st.chi[ti] = dist.line_update(ti, st, snap)
        dist.dual_update(st)

    def test_dual_update_algebra(self, small6, small_bounds, part_small):
        st = self.make_state(small6, small_bounds, part_small, kappa=3.0)
        rng = np.random.default_rng(0)
        for ti, t in enumerate(st.part.ties):
            st.chi[ti] = rng.normal(size=t.dim)
            st.mu[ti] = rng.normal(size=t.dim)
            for name in t.areas:
                st.xi[(ti, name)] = rng.normal(size=t.dim)
                st.gamma[(ti, name)] = rng.normal(size=t.dim)
        before = {k: v.copy() for k, v in st.gamma.items()}
        mu_before = {k: v.copy() for k, v in st.mu.items()}
        dist.dual_update(st)
        for ti, t in enumerate(st.part.ties):
            a, b = t.areas
            xa, xb, ch = st.xi[(ti, a)], st.xi[(ti, b)], st.chi[ti]
            assert np.allclose(st.gamma[(ti, a)], before[(ti, a)] + (2 * xa - xb - ch))
            assert np.allclose(st.gamma[(ti, b)], before[(ti, b)] + (2 * xb - xa - ch))
            assert np.allclose(st.mu[ti], mu_before[ti] + (xa + xb - 2 * ch))

    def test_dual_sum_identity_preserved(self, small6, small_bounds, part_small):
        st = self.make_state(small6, small_bounds, part_small)
        for _ in range(4):
            self.run_iteration(st)
            assert st.dual_sum_error() <= 1e-12

    def test_line_update_zero_fixed_point_at_origin(self, small6, small_bounds, part_small):
        # all copies and duals at zero: the shrinkage keeps the line open
        st = self.make_state(small6, small_bounds, part_small)
        for ti in range(len(st.part.ties)):
            assert np.all(dist.line_update(ti, st) == 0.0)

    def test_line_update_reduces_to_shrinkage_without_line_cost(self, part_small):
        t = part_small.ties[0]
        td = dist._TieData(
            q=np.zeros((2, 2)), c=np.zeros(2), lam=3.0, lip=0.0
        )
        big = dist.TieLine(t.index, t.key, t.areas, t.coords, (1e9,))
        v = np.array([5.0, -2.0])
        got = dist._tie_argmin(td, big, v, 2.0, np.zeros(2))
        want = solver.block_soft_threshold(v, 3.0) / 2.0
        assert np.allclose(got, want, atol=1e-12)
        # degenerate: neither curvature nor ridge
        with pytest.raises(ValueError, match="degenerate"):
            dist._tie_argmin(td, big, v, 0.0, np.zeros(2))

    def test_line_update_respects_tiny_ampacity(self, part_small):
        t = part_small.ties[0]
        td = dist._TieData(q=np.eye(2) * 0.3, c=np.zeros(2), lam=0.0, lip=0.3)
        tiny = dist.TieLine(t.index, t.key, t.areas, t.coords, (0.01,))
        got = dist._tie_argmin(td, tiny, np.array([50.0, 0.0]), 1.0, np.zeros(2))
        assert np.linalg.norm(got) <= 0.01 * (1 + 1e-9)
        assert got[0] == pytest.approx(0.01, rel=1e-6)

    def test_local_update_matches_reference(self, small6, small_bounds, part_small):
        st = self.make_state(small6, small_bounds, part_small)
        for _ in range(2):
            self.run_iteration(st)
        snap = dist._snapshot(st)
        x = dist.local_update("a1", st, snap)
        ad = st.areas["a1"]
        x_ref, obj_ref = cvx_solve(ad.program)
        assert ad.program.objective(x) <= obj_ref + 1e-6 * (1 + abs(obj_ref))
        assert np.allclose(x, x_ref, atol=1e-4 * (1 + np.abs(x_ref).max()))

    def test_area_slices_cover_all_columns_once(self, small6, small_bounds, part_small):
        st = self.make_state(small6, small_bounds, part_small)
        n = st.prob.program.n
        tie_cols = set()
        for t in part_small.ties:
            tie_cols.update(t.coords)
        owned = []
        for ad in st.areas.values():
            owned.extend(c for c in ad.cols if c not in tie_cols)
        assert sorted(owned + sorted(tie_cols)) == list(range(n))
        assert len(owned) == len(set(owned))

    def test_scheduling_independence(self, small6, small_bounds, part_small):
        st1 = self.make_state(small6, small_bounds, part_small)
        st2 = self.make_state(small6, small_bounds, part_small)
        for _ in range(3):
            self.run_iteration(st1)
            # same iteration with area and line updates in reverse order
            snap = dist._snapshot(st2)
            results = {}
            for name in reversed(st2.part.names):
                results[name] = dist.local_update(name, st2, snap)
            for name, xl in results.items():
                st2.x_local[name] = xl
                for ti, pos in st2.areas[name].tie_pos.items():
                    st2.xi[(ti, name)] = xl[pos].copy()
            for ti in reversed(range(len(st2.part.ties))):
                st2.chi[ti] = dist.line_update(ti, st2, snap)
            dist.dual_update(st2)
        for k in st1.xi:
            assert np.array_equal(st1.xi[k], st2.xi[k])
        for ti in st1.chi:
            assert np.array_equal(st1.chi[ti], st2.chi[ti])
        for k in st1.gamma:
            assert np.array_equal(st1.gamma[k], st2.gamma[k])

    def test_matches_form_with_explicit_auxiliary_copies(
        self, small6, small_bounds, part_small
    ):
        """The implemented scheme eliminates the per-tie auxiliary vector z
        (it equals the mean of the three copies when the duals sum to zero);
        iterating the original form with z kept explicit must match."""
        kap = 1.5
        st1 = self.make_state(small6, small_bounds, part_small, kappa=kap)
        st2 = self.make_state(small6, small_bounds, part_small, kappa=kap)
        z = {ti: np.zeros(t.dim) for ti, t in enumerate(part_small.ties)}

        def solve_area(st, name, c):
            ad = st.areas[name]
            ad.program.c = c
            if ad.workspace is None:
                ad.workspace = solver.make_workspace(ad.program, TIGHT_INNER)
            res = solver.solve(ad.program, TIGHT_INNER, warm=ad.warm, workspace=ad.workspace)
            ad.warm = res.warm
            return res.x

        for _ in range(6):
            self.run_iteration(st1)

            # explicit form: areas and the line manager both see z from the
            # end of the previous iteration
            for name in st2.part.names:
                ad = st2.areas[name]
                c = ad.base_c.copy()
                for ti, pos in ad.tie_pos.items():
                    c[pos] += st2.gamma[(ti, name)] - kap * z[ti]
                xl = solve_area(st2, name, c)
                st2.x_local[name] = xl
                for ti, pos in ad.tie_pos.items():
                    st2.xi[(ti, name)] = xl[pos].copy()
            for ti, t in enumerate(st2.part.ties):
                v = st2.mu[ti] + kap * z[ti]
                st2.chi[ti] = dist._tie_argmin(
                    st2.tie_data[ti], t, v, kap, st2.chi[ti]
                )
            for ti, t in enumerate(st2.part.ties):
                a, b = t.areas
                z[ti] = (
                    st2.gamma[(ti, a)]
                    + st2.gamma[(ti, b)]
                    - st2.mu[ti]
                    + kap * (st2.xi[(ti, a)] + st2.xi[(ti, b)] + st2.chi[ti])
                ) / (3.0 * kap)
            for ti, t in enumerate(st2.part.ties):
                a, b = t.areas
                st2.gamma[(ti, a)] = st2.gamma[(ti, a)] + kap * (st2.xi[(ti, a)] - z[ti])
                st2.gamma[(ti, b)] = st2.gamma[(ti, b)] + kap * (st2.xi[(ti, b)] - z[ti])
                st2.mu[ti] = st2.mu[ti] + kap * (z[ti] - st2.chi[ti])

            for k in st1.xi:
                assert np.allclose(st1.xi[k], st2.xi[k], atol=1e-7)
            for ti in st1.chi:
                assert np.allclose(st1.chi[ti], st2.chi[ti], atol=1e-7)
            for k in st1.gamma:
                assert np.allclose(st1.gamma[k], st2.gamma[k], atol=1e-7)
            for ti in st1.mu:
                assert np.allclose(st1.mu[ti], st2.mu[ti], atol=1e-7)


class TestRun:
    def test_converges_to_centralized(self, admm_small, central_small):
        sol, trace, _ = admm_small
        assert trace.status == "converged"
        xd = sol.solver_result.x
        xc = central_small.solver_result.x
        rel = np.linalg.norm(xd - xc) / np.linalg.norm(xc)
        assert rel <= 1e-4
        assert sol.objective == pytest.approx(central_small.objective, rel=1e-5)
        assert sol.open_lines == central_small.open_lines

    def test_dual_identity_holds_every_iteration(self, admm_small):
        _, trace, _ = admm_small
        assert max(trace.dual_errors) <= 1e-10

    def test_distance_column_decreases(self, admm_small):
        _, trace, _ = admm_small
        assert trace.dist_to_central[-1] < trace.dist_to_central[0]
        assert trace.dist_to_central[-1] <= 1e-4

    def test_message_accounting(self, admm_small, part_small):
        _, trace, messages = admm_small
        iters = trace.iterations[-1]
        per_iter = [m for m in messages if m.iteration == 1]
        # each tie: one upload from its area, one two-field reply
        assert len(per_iter) == 2 * len(part_small.ties)
        ups = [m for m in per_iter if m.receiver == dist.MANAGER]
        downs = [m for m in per_iter if m.sender == dist.MANAGER]
        assert all(m.bytes == 2 * dist.FLOAT_BYTES for m in ups)
        assert all(m.bytes == 4 * dist.FLOAT_BYTES for m in downs)
        assert len(messages) == iters * 2 * len(part_small.ties)

    def test_trace_csv_format(self, admm_small, tmp_path):
        _, trace, _ = admm_small
        path = tmp_path / "trace.csv"
        trace.export_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "iter,tie_id,gap,objective,dist_to_central"
        assert len(rows) == 1 + len(trace.iterations) * len(trace.tie_labels)
        it, tie, gap, obj, d = rows[1].split(",")
        assert it == "1" and tie in trace.tie_labels
        assert float(gap) == trace.gaps[0][trace.tie_labels.index(tie)]

    def test_message_csv(self, admm_small, tmp_path):
        _, _, messages = admm_small
        path = tmp_path / "messages.csv"
        dist.export_messages(messages, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "iter,sender,receiver,bytes"
        assert len(rows) == 1 + len(messages)

    def test_iterations_to(self, admm_small):
        _, trace, _ = admm_small
        it = trace.iterations_to(1e-3)
        assert it is not None
        assert trace.iterations_to(1e-30) is None
        assert it <= trace.iterations[-1]

    def test_empty_partition_is_centralized(self, small6, small_bounds, central_small):
        part = dist.partition(small6, {})
        settings = dist.AdmmSettings(kappa=1.0, max_iters=5, tol_gap=1e-6)
        sol, trace, messages = dist.run(small6, small_bounds, COST, LAM, part, settings)
        assert trace.status == "converged"
        assert trace.iterations == [1]
        assert messages == []
        assert sol.objective == pytest.approx(central_small.objective, rel=1e-6)

    def test_max_iters_status(self, small6, small_bounds, part_small):
        settings = dist.AdmmSettings(kappa=2.0, max_iters=3, tol_gap=1e-12)
        sol, trace, _ = dist.run(small6, small_bounds, COST, LAM, part_small, settings)
        assert trace.status == "max-iters"
        assert sol.status == "max-iters"

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            dist.AdmmSettings(kappa=0.0).validate()
        with pytest.raises(ValueError):
            dist.AdmmSettings(tol_gap=0.0).validate()
        with pytest.raises(ValueError):
            dist.AdmmSettings(step=-1.0).validate()


class TestSubgradientBaseline:
    def test_zero_step_makes_no_progress(self, small6, small_bounds, part_small):
        settings = dist.AdmmSettings(kappa=1.0, max_iters=5, tol_gap=1e-9, step=0.0)
        trace = dist.subgradient_baseline(
            small6, small_bounds, COST, LAM, part_small, settings
        )
        first, last = trace.gaps[0].max(), trace.gaps[-1].max()
        # the duals are frozen; the averaged gap only drifts by the inner
        # solves refining themselves across warm starts
        assert last == pytest.approx(first, rel=0.02)
        assert first > 1e-3  # the duals are stuck away from the optimum

    def test_positive_step_reduces_gap(self, small6, small_bounds, part_small):
        settings = dist.AdmmSettings(kappa=1.0, max_iters=12, tol_gap=1e-9, step=0.1)
        trace = dist.subgradient_baseline(
            small6, small_bounds, COST, LAM, part_small, settings
        )
        assert trace.status == "max-iters"
        assert len(trace.iterations) == 12
        assert trace.gaps[-1].max() < trace.gaps[0].max()
