"""Shared test fixtures: packaged example data, random small feeders, and a
cvxpy-based reference solver for the group-sparse quadratic program."""

from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

import gridreconfig
from gridreconfig import feeder as fd
from gridreconfig import scenarios as sc

DATA = Path(gridreconfig.__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def small6():
    return fd.parse_feeder(DATA / "small6.json")


@pytest.fixture(scope="session")
def feeder37():
    return fd.parse_feeder(DATA / "feeder37.json")


@pytest.fixture(scope="session")
def feeder37_areas():
    return fd.parse_feeder(DATA / "feeder37_areas.json")


@pytest.fixture(scope="session")
def small_spec(small6):
    return sc.load_scenario_spec(DATA / "scenario_small.json", small6)


@pytest.fixture(scope="session")
def small_bounds(small6, small_spec):
    spec, corr = small_spec
    scen = sc.sample_scenarios(small6, spec, corr, 500, seed=3)
    return sc.reduce_scenarios(scen)


def random_feeder(rng, max_extra=4):
    """A random single-phase feeder: a non-switchable spanning tree plus a
    few switchable mesh edges, so every switch subset keeps connectivity."""
    n = int(rng.integers(5, 9))
    dg_node = int(rng.integers(2, n + 1))
    pv_node = int(rng.integers(2, n + 1))
    nodes = []
    for i in range(1, n + 1):
        load = {}
        dg = None
        res = ()
        if i > 1:
            p = float(rng.uniform(10e3, 40e3))
            load = {"a": complex(p, 0.35 * p)}
        if i == dg_node:
            dg = fd.DgSpec(0.0, 30e3, 0.0, 0.0, 0.4)
        if i == pv_node:
            res = (fd.ResUnit("a", 20e3, "pv", 15e3),)
        nodes.append(fd.NodeSpec(i, ("a",), load, dg, res, None))

    def z():
        return np.array([[complex(rng.uniform(0.2, 0.5), rng.uniform(0.4, 0.8))]])

    lines = []
    edges = set()
    for i in range(2, n + 1):
        parent = int(rng.integers(1, i))
        lines.append(fd.LineSpec(parent, i, ("a",), z(), 150.0, False, 1.0, None))
        edges.add(frozenset((parent, i)))
    want = int(rng.integers(1, max_extra + 1))
    for _ in range(60):
        if want == 0:
            break
        a, b = (int(v) for v in rng.choice(np.arange(1, n + 1), size=2, replace=False))
        if frozenset((a, b)) in edges:
            continue
        lines.append(
            fd.LineSpec(a, b, ("a",), z(), 80.0, True, float(rng.uniform(1.0, 1.5)), None)
        )
        edges.add(frozenset((a, b)))
        want -= 1
    return fd.validate_feeder(
        fd.FeederModel(tuple(nodes), tuple(lines), 2400.0, 1, 0.001)
    )


def sampled_bounds(model, k=200, seed=0):
    spec = sc.spec_from_fractions(
        model, res_sigma_frac={"pv": 0.05, "wind": 0.2}, load_sigma_frac={"default": 0.05}
    )
    corr = sc.CorrelationModel("independent")
    return sc.reduce_scenarios(sc.sample_scenarios(model, spec, corr, k, seed))


def cvx_solve(p, solver="CLARABEL"):
    """Independent reference solution of a GroupSparseProgram."""
    import cvxpy as cp

    x = cp.Variable(p.n)
    obj = 0
    if p.q is not None:
        qd = p.q.toarray() if sp.issparse(p.q) else np.asarray(p.q)
        obj = obj + 0.5 * cp.quad_form(x, cp.psd_wrap(0.5 * (qd + qd.T)))
    if p.c is not None:
        obj = obj + np.asarray(p.c) @ x
    for g in p.groups:
        obj = obj + g.weight * cp.norm(x[list(g.indices)], 2)
    cons = []
    if p.a_eq is not None and p.a_eq.shape[0]:
        cons.append(p.a_eq @ x == np.asarray(p.b_eq))
    if p.a_in is not None and p.a_in.shape[0]:
        cons.append(p.a_in @ x <= np.asarray(p.b_in))
    for b in p.balls:
        cons.append(cp.norm(cp.hstack([x[b.re_index], x[b.im_index]])) <= b.radius)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference solver status {prob.status}")
    return np.asarray(x.value), float(prob.value)
