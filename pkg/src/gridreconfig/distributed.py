"""Multi-area consensus solver for the reconfiguration program.

The feeder is split into local control areas plus a manager that owns the
remaining nodes and every boundary (tie) line.  Each boundary line's phase
currents exist in three copies: one per adjacent area and one held by the
manager.  The copies are driven to consensus by an ADMM scheme whose area
step is a quadratic program solved with :mod:`gridreconfig.solver`, whose
line step is a small shrinkage problem under ampacity disks, and whose dual
step keeps the two area multipliers and the manager multiplier summing to
zero.  A dual-subgradient baseline on the same decomposition is included
for comparison.

All exchanges happen on a simulated in-process channel with per-message
byte accounting; iterations are synchronous, so sequential and concurrent
scheduling of the area solves give identical traces.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import reconfig, solver

MANAGER = "mgm"

FLOAT_BYTES = 8


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class TieLine:
    """A line whose endpoints live in different areas."""

    index: int  # position in model.lines
    key: tuple  # (from, to) node ids
    areas: tuple  # names of the two adjacent areas
    coords: tuple  # global current columns, (re, im) per phase
    radii: tuple  # ampacity per phase

    @property
    def dim(self):
        return len(self.coords)

    @property
    def label(self):
        return f"{self.key[0]}-{self.key[1]}"


@dataclass(frozen=True)
class AreaPartition:
    """Disjoint node areas plus the manager-owned remainder and tie lines."""

    model: object
    names: tuple  # area names in deterministic order, manager last
    nodes: dict  # name -> frozenset of node ids
    area_of_node: dict  # node id -> name
    internal_lines: dict  # name -> tuple of line indices fully inside
    ties: tuple  # TieLine records, in model line order
    area_ties: dict  # name -> tuple of indices into ties

    def neighbors(self, name):
        out = set()
        for ti in self.area_ties[name]:
            a, b = self.ties[ti].areas
            out.add(b if a == name else a)
        return out


def partition(model, areas):
    """Split the model into named areas; unclaimed nodes go to the manager.

    `areas` maps area names to node-id lists (or is a plain list of node
    sets, which get generated names).  Every tie line must carry a switch.
    """
    if not isinstance(areas, dict):
        areas = {f"area{i + 1}": list(a) for i, a in enumerate(areas)}
    if MANAGER in areas:
        raise PartitionError(f"area name {MANAGER!r} is reserved for the manager")
    known = set(model.node_ids)
    claimed = {}
    nodes = {}
    for name, ids in areas.items():
        ids = frozenset(int(i) for i in ids)
        bad = ids - known
        if bad:
            raise PartitionError(f"area {name!r} references unknown nodes {sorted(bad)}")
        if model.pcc_node in ids:
            raise PartitionError(f"area {name!r} must not contain the PCC node")
        overlap = ids & set(claimed)
        if overlap:
            raise PartitionError(f"areas overlap on nodes {sorted(overlap)}")
        for i in ids:
            claimed[i] = name
        nodes[name] = ids
    names = tuple(list(areas) + [MANAGER])
    nodes[MANAGER] = frozenset(known - set(claimed))
    area_of = dict(claimed)
    for i in nodes[MANAGER]:
        area_of[i] = MANAGER

    from .feeder import build_indexing

    idx = build_indexing(model)
    internal = {name: [] for name in names}
    ties = []
    for li, ln in enumerate(model.lines):
        a, b = area_of[ln.from_node], area_of[ln.to_node]
        if a == b:
            internal[a].append(li)
            continue
        if not ln.switchable:
            raise PartitionError(
                f"tie line {ln.key} between areas {a!r} and {b!r} has no switch"
            )
        ties.append(
            TieLine(
                li,
                ln.key,
                (a, b),
                tuple(idx.line_coords(li)),
                tuple(ln.i_max for _ in ln.phases),
            )
        )
    area_ties = {
        name: tuple(ti for ti, t in enumerate(ties) if name in t.areas) for name in names
    }
    return AreaPartition(
        model,
        names,
        nodes,
        area_of,
        {k: tuple(v) for k, v in internal.items()},
        tuple(ties),
        area_ties,
    )


def load_partition(path, model):
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise PartitionError("partition file must map area names to node lists")
    return partition(model, doc)


# ---------------------------------------------------------------------------
# per-area and per-tie subproblem slices of the assembled program


def _ineq_row_nodes(prob):
    nodes = []
    for nid, _ph in prob.slots:
        nodes += [nid, nid]
    for n in prob.model.nodes:
        if n.dg is None:
            continue
        for ph in n.phases:
            nodes += [n.id, n.id]
            if (n.id, ph) in prob.dg_q_col:
                nodes += [n.id, n.id]
    if len(nodes) != prob.program.a_in.shape[0]:
        raise AssertionError("inequality row bookkeeping out of sync with assemble()")
    return nodes


def _eq_row_nodes(prob):
    in_d = set(prob.slots)
    nodes = []
    for n in prob.model.nodes:
        if n.id == prob.model.pcc_node:
            continue
        for ph in n.phases:
            if (n.id, ph) not in in_d:
                nodes += [n.id, n.id]
    neq = 0 if prob.program.a_eq is None else prob.program.a_eq.shape[0]
    if len(nodes) != neq:
        raise AssertionError("equality row bookkeeping out of sync with assemble()")
    return nodes


@dataclass
class _AreaData:
    name: str
    cols: np.ndarray  # global columns owned or copied by this area
    tie_pos: dict  # tie index -> local coordinate positions (np.ndarray)
    program: solver.GroupSparseProgram
    base_c: np.ndarray  # linear term without the consensus contribution
    group_map: list  # local group position -> full-program group index
    workspace: object = None
    warm: tuple = None


@dataclass
class _TieData:
    q: np.ndarray  # quadratic block of the line cost (dense, small)
    c: np.ndarray
    lam: float  # group weight on the manager copy
    lip: float  # largest eigenvalue of q


def _build_area(prob, part, name, ridge):
    """Slice the centralized program down to one area, with `ridge` added on
    the diagonal of the tie-copy coordinates (the consensus penalty)."""
    p = prob.program
    model = prob.model
    cols = []
    tie_pos = {}
    for li in part.internal_lines[name]:
        cols.extend(prob.indexing.line_coords(li))
    for ti in part.area_ties[name]:
        t = part.ties[ti]
        tie_pos[ti] = np.arange(len(cols), len(cols) + t.dim)
        cols.extend(t.coords)
    area_nodes = part.nodes[name]
    for key, col in list(prob.dg_p_col.items()) + list(prob.dg_q_col.items()):
        if key[0] in area_nodes:
            cols.append(col)
    cols = np.array(cols, dtype=int)
    local_of = {g: i for i, g in enumerate(cols)}
    m = len(cols)

    qd = np.zeros((m, m))
    if p.q is not None:
        qd = p.q[cols][:, cols].toarray()
    base_c = (np.zeros(p.n) if p.c is None else p.c)[cols].astype(float).copy()
    for ti, pos in tie_pos.items():
        # the tie line's own cost belongs to the manager's line subproblem
        removed = np.abs(qd[pos, :]).sum() + np.abs(qd[:, pos]).sum()
        kept = 2 * np.abs(qd[np.ix_(pos, pos)]).sum()
        if not math.isclose(removed, kept, rel_tol=1e-9, abs_tol=1e-12):
            raise AssertionError("line cost couples distinct lines; cannot split")
        qd[pos, :] = 0.0
        qd[:, pos] = 0.0
        qd[pos, pos] += ridge
        base_c[pos] = 0.0

    ineq_nodes = _ineq_row_nodes(prob)
    rows = [r for r, nid in enumerate(ineq_nodes) if part.area_of_node[nid] == name]
    a_in = p.a_in[rows][:, cols].tocsr()
    if a_in.nnz != p.a_in[rows].nnz:
        raise PartitionError(
            f"area {name!r} has a balance row reaching outside its lines"
        )
    b_in = np.asarray(p.b_in)[rows]

    a_eq = b_eq = None
    if p.a_eq is not None and p.a_eq.shape[0]:
        eq_nodes = _eq_row_nodes(prob)
        erows = [r for r, nid in enumerate(eq_nodes) if part.area_of_node[nid] == name]
        if erows:
            a_eq = p.a_eq[erows][:, cols].tocsr()
            if a_eq.nnz != p.a_eq[erows].nnz:
                raise PartitionError(
                    f"area {name!r} has a junction row reaching outside its lines"
                )
            b_eq = np.zeros(len(erows))

    balls = []
    for li in part.internal_lines[name]:
        ln = model.lines[li]
        for ph in ln.phases:
            cre, cim = prob.indexing.coords(li, ph)
            balls.append(solver.Ball(local_of[cre], local_of[cim], ln.i_max))
    for ti in tie_pos:
        t = part.ties[ti]
        for k, r in enumerate(t.radii):
            balls.append(
                solver.Ball(int(tie_pos[ti][2 * k]), int(tie_pos[ti][2 * k + 1]), r)
            )

    internal = set(part.internal_lines[name])
    groups, group_map = [], []
    for gi, li in enumerate(prob.group_lines):
        if li in internal:
            g = p.groups[gi]
            groups.append(solver.Group(tuple(local_of[i] for i in g.indices), g.weight))
            group_map.append(gi)

    prog = solver.GroupSparseProgram(
        n=m,
        q=sp.csr_matrix(qd),
        c=base_c.copy(),
        groups=groups,
        a_eq=a_eq,
        b_eq=b_eq,
        a_in=a_in,
        b_in=b_in,
        balls=balls,
    )
    return _AreaData(name, cols, tie_pos, prog, base_c, group_map)


def _build_tie(prob, part, ti):
    p = prob.program
    t = part.ties[ti]
    coords = np.array(t.coords, dtype=int)
    q = p.q[coords][:, coords].toarray() if p.q is not None else np.zeros((t.dim, t.dim))
    c = (np.zeros(p.n) if p.c is None else p.c)[coords].astype(float).copy()
    lam = 0.0
    for gi, li in enumerate(prob.group_lines):
        if li == t.index:
            lam = p.groups[gi].weight
    lip = float(np.linalg.eigvalsh(0.5 * (q + q.T)).max()) if q.any() else 0.0
    return _TieData(0.5 * (q + q.T), c, lam, lip)


def _tie_argmin(td, tie, v, ridge, start):
    """Minimize 0.5 x'Qx + (ridge/2)||x||^2 + c'x + lam||x|| - v'x under the
    per-phase ampacity disks (proximal gradient; exact shrinkage prox)."""
    v_eff = v - td.c
    if td.lip == 0.0:
        if ridge <= 0:
            raise ValueError("degenerate line subproblem: no quadratic term")
        return solver.msto_subproblem(ridge, v_eff, td.lam, tie.radii)
    step = 1.0 / (td.lip + ridge)
    x = np.asarray(start, dtype=float).copy()
    for _ in range(50_000):
        grad = td.q @ x + ridge * x - v_eff
        z = x - step * grad
        x_new = solver.msto_subproblem(1.0 / step, z / step, td.lam, tie.radii)
        if np.linalg.norm(x_new - x) <= 1e-13 * (1.0 + np.linalg.norm(x_new)):
            return x_new
        x = x_new
    return x


# ---------------------------------------------------------------------------
# state, messages, trace


@dataclass
class Message:
    iteration: int
    sender: str
    receiver: str
    n_floats: int

    @property
    def bytes(self):
        return FLOAT_BYTES * self.n_floats


def export_messages(messages, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "sender", "receiver", "bytes"])
        for m in messages:
            w.writerow([m.iteration, m.sender, m.receiver, m.bytes])


@dataclass
class ConvergenceTrace:
    tie_labels: list
    iterations: list = field(default_factory=list)
    gaps: list = field(default_factory=list)  # per iteration: array over ties
    objective: list = field(default_factory=list)
    dist_to_central: list = field(default_factory=list)
    dual_errors: list = field(default_factory=list)  # worst |gamma_l+gamma_j-mu|
    status: str = "running"

    def record(self, it, gaps, obj, dist, dual_err=0.0):
        self.iterations.append(it)
        self.gaps.append(np.asarray(gaps, dtype=float))
        self.objective.append(float(obj))
        self.dist_to_central.append(float(dist))
        self.dual_errors.append(float(dual_err))

    def max_gap(self, i=-1):
        g = self.gaps[i]
        return float(g.max()) if g.size else 0.0

    def iterations_to(self, tol):
        """First iteration whose worst tie gap is at or below tol (None if
        never reached)."""
        for it, g in zip(self.iterations, self.gaps):
            if (g.max() if g.size else 0.0) <= tol:
                return it
        return None

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "tie_id", "gap", "objective", "dist_to_central"])
            for k, it in enumerate(self.iterations):
                obj = repr(self.objective[k])
                dist = repr(self.dist_to_central[k])
                if not self.tie_labels:
                    w.writerow([it, "", "0.0", obj, dist])
                    continue
                for j, lab in enumerate(self.tie_labels):
                    w.writerow([it, lab, repr(float(self.gaps[k][j])), obj, dist])


@dataclass
class AdmmSettings:
    kappa: float = 1.0
    max_iters: int = 3000
    tol_gap: float = 1e-6  # amps, on tie-current consensus
    step: float = 0.1  # subgradient baseline only
    inner: solver.SolverSettings = None

    def resolved_inner(self, gap=None):
        """Inner solver settings; when the current consensus gap is known the
        area solves are done inexactly, three orders tighter than the gap."""
        if self.inner is not None:
            return self.inner
        tol = 1e-10
        if gap is not None:
            tol = min(1e-5, max(1e-3 * gap, 1e-3 * self.tol_gap, 1e-11))
        return solver.SolverSettings(
            kappa=50.0, max_iters=100_000, tol_primal=tol, tol_dual=tol, check_every=10
        )

    def validate(self):
        if self.kappa <= 0:
            raise ValueError("consensus kappa must be positive")
        if self.max_iters < 1 or self.tol_gap <= 0:
            raise ValueError("max_iters and tol_gap must be positive")
        if self.step < 0:
            raise ValueError("baseline stepsize must be nonnegative")
        return self


@dataclass
class AdmmState:
    prob: object  # centralized ReconfigProblem (the reference assembly)
    part: AreaPartition
    settings: AdmmSettings
    areas: dict  # name -> _AreaData
    tie_data: dict  # tie index -> _TieData
    iteration: int = 0
    xi: dict = field(default_factory=dict)  # (tie index, area) -> copy
    chi: dict = field(default_factory=dict)  # tie index -> manager copy
    gamma: dict = field(default_factory=dict)  # (tie index, area) -> dual
    mu: dict = field(default_factory=dict)  # tie index -> manager dual
    x_local: dict = field(default_factory=dict)  # area -> local solution

    def dual_sum_error(self):
        worst = 0.0
        for ti, t in enumerate(self.part.ties):
            a, b = t.areas
            res = self.gamma[(ti, a)] + self.gamma[(ti, b)] - self.mu[ti]
            worst = max(worst, float(np.abs(res).max()))
        return worst


def init_state(prob, part, settings, penalty=True):
    settings = settings.validate()
    ridge = settings.kappa if penalty else 0.0
    areas = {name: _build_area(prob, part, name, ridge) for name in part.names}
    tie_data = {ti: _build_tie(prob, part, ti) for ti in range(len(part.ties))}
    st = AdmmState(prob, part, settings, areas, tie_data)
    for ti, t in enumerate(part.ties):
        z = np.zeros(t.dim)
        st.chi[ti] = z.copy()
        st.mu[ti] = z.copy()
        for name in t.areas:
            st.xi[(ti, name)] = z.copy()
            st.gamma[(ti, name)] = z.copy()
    for name, ad in areas.items():
        st.x_local[name] = np.zeros(ad.program.n)
    return st


def _area_linear(st, name, snapshot):
    """Consensus-adjusted linear term for one area, from an iteration-start
    snapshot of all copies (so area solves can run in any order)."""
    ad = st.areas[name]
    kap = st.settings.kappa
    c = ad.base_c.copy()
    for ti, pos in ad.tie_pos.items():
        t = st.part.ties[ti]
        other = t.areas[1] if t.areas[0] == name else t.areas[0]
        drive = snapshot[(ti, name)] + snapshot[(ti, other)] + snapshot[ti]
        c[pos] += st.gamma[(ti, name)] - (kap / 3.0) * drive
    return c


def local_update(name, st, snapshot=None, gap=None):
    """Solve one area subproblem at the current duals; returns the local
    solution vector (aligned with the area's column list)."""
    if snapshot is None:
        snapshot = _snapshot(st)
    ad = st.areas[name]
    inner = st.settings.resolved_inner(gap)
    ad.program.c = _area_linear(st, name, snapshot)
    if ad.workspace is None:
        ad.workspace = solver.make_workspace(ad.program, inner)
    res = solver.solve(ad.program, inner, warm=ad.warm, workspace=ad.workspace)
    if res.status == "infeasible-certificate":
        raise RuntimeError(f"area {name!r} subproblem is infeasible")
    ad.warm = res.warm
    return res.x


def line_update(ti, st, snapshot=None):
    """Manager's update of one tie-line copy from the iteration-start
    snapshot (the manager and the areas compute in parallel, so this step
    sees the same previous iterates the area solves do)."""
    if snapshot is None:
        snapshot = _snapshot(st)
    t = st.part.ties[ti]
    kap = st.settings.kappa
    a, b = t.areas
    chi_old = snapshot[ti]
    v = st.mu[ti] + (kap / 3.0) * (snapshot[(ti, a)] + snapshot[(ti, b)] + chi_old)
    return _tie_argmin(st.tie_data[ti], t, v, kap, chi_old)


def dual_update(st):
    """Ascent step on all multipliers at the current copies."""
    kap = st.settings.kappa
    for ti, t in enumerate(st.part.ties):
        a, b = t.areas
        xa, xb, ch = st.xi[(ti, a)], st.xi[(ti, b)], st.chi[ti]
        st.gamma[(ti, a)] = st.gamma[(ti, a)] + (kap / 3.0) * (2.0 * xa - xb - ch)
        st.gamma[(ti, b)] = st.gamma[(ti, b)] + (kap / 3.0) * (2.0 * xb - xa - ch)
        st.mu[ti] = st.mu[ti] + (kap / 3.0) * (xa + xb - 2.0 * ch)
    return st


def _snapshot(st):
    snap = {}
    for ti, t in enumerate(st.part.ties):
        snap[ti] = st.chi[ti].copy()
        for name in t.areas:
            snap[(ti, name)] = st.xi[(ti, name)].copy()
    return snap


def _merged_x(st, use_chi=True):
    """Assemble a full-length solver-scale vector from the area solutions,
    with tie currents taken from the manager copy (or averaged area copies)."""
    x = np.zeros(st.prob.program.n)
    tie_cols = set()
    for t in st.part.ties:
        tie_cols.update(t.coords)
    for name, ad in st.areas.items():
        xl = st.x_local[name]
        for j, col in enumerate(ad.cols):
            if col not in tie_cols:
                x[col] = xl[j]
    for ti, t in enumerate(st.part.ties):
        if use_chi:
            val = st.chi[ti]
        else:
            a, b = t.areas
            val = 0.5 * (st.xi[(ti, a)] + st.xi[(ti, b)])
        x[list(t.coords)] = val
    return x


def _log_exchange(messages, st, it):
    """Algorithm-faithful message pattern: each non-manager area uploads its
    tie-current copies; the manager replies with its copy plus the neighbor's."""
    for name in st.part.names:
        if name == MANAGER:
            continue
        for ti in st.part.area_ties[name]:
            t = st.part.ties[ti]
            messages.append(Message(it, name, MANAGER, t.dim))
    for name in st.part.names:
        if name == MANAGER:
            continue
        for ti in st.part.area_ties[name]:
            t = st.part.ties[ti]
            messages.append(Message(it, MANAGER, name, 2 * t.dim))


def _to_solution(st, status, iterations):
    prob = st.prob
    x = _merged_x(st)
    zero = []
    tie_by_line = {t.index: ti for ti, t in enumerate(st.part.ties)}
    for gi, li in enumerate(prob.group_lines):
        if li in tie_by_line:
            if not np.any(st.chi[tie_by_line[li]]):
                zero.append(gi)
            continue
        owner = next(
            name for name in st.part.names if li in set(st.part.internal_lines[name])
        )
        ad = st.areas[owner]
        pos = [gj for gj, gfull in enumerate(ad.group_map) if gfull == gi]
        if pos:
            g = ad.program.groups[pos[0]]
            if np.linalg.norm(st.x_local[owner][list(g.indices)]) <= 1e-9 * (
                1.0 + np.linalg.norm(x)
            ):
                zero.append(gi)
    res = solver.SolverResult(
        x=x,
        status="optimal" if status == "converged" else status,
        objective=prob.program.objective(x),
        iterations=iterations,
        residuals=np.empty((0, 4)),
        zero_groups=zero,
        warm=None,
    )
    sol = reconfig._to_solution(prob, res, audit_tol=1e-4)
    sol.status = status if status != "converged" else sol.status
    return sol


def _central_reference(central):
    if central is None:
        return None, 0.0
    xc = central.solver_result.x
    return xc, float(np.linalg.norm(xc))


def run(model, bounds, cost, lam, part, settings=None, seed=0, central=None):
    """Iterate area, line and dual updates until every tie line's copies
    agree within tol_gap; returns the merged solution, the per-tie trace
    and the message log.

    `central` (a centralized ReconfigSolution on the same inputs) enables
    the distance column of the trace.  `seed` is accepted for interface
    parity with the sampling pipeline; the iteration itself is
    deterministic.
    """
    del seed
    settings = (settings or AdmmSettings()).validate()
    prob = reconfig.assemble(model, bounds, cost, lam)
    st = init_state(prob, part, settings)
    trace = ConvergenceTrace([t.label for t in part.ties])
    messages = []
    xc, xc_norm = _central_reference(central)

    status = "max-iters"
    last_gap = None
    for it in range(1, settings.max_iters + 1):
        st.iteration = it
        snap = _snapshot(st)
        for name in part.names:
            xl = local_update(name, st, snap, gap=last_gap)
            st.x_local[name] = xl
            for ti, pos in st.areas[name].tie_pos.items():
                st.xi[(ti, name)] = xl[pos].copy()
        for ti in range(len(part.ties)):
            st.chi[ti] = line_update(ti, st, snap)
        _log_exchange(messages, st, it)
        dual_update(st)

        gaps = np.array(
            [
                np.linalg.norm(st.xi[(ti, t.areas[0])] - st.xi[(ti, t.areas[1])])
                for ti, t in enumerate(part.ties)
            ]
        )
        worst = 0.0
        for ti, t in enumerate(part.ties):
            for name in t.areas:
                worst = max(worst, float(np.linalg.norm(st.xi[(ti, name)] - st.chi[ti])))
        x = _merged_x(st)
        dist = 0.0
        if xc is not None:
            dist = float(np.linalg.norm(x - xc)) / max(xc_norm, 1e-30)
        trace.record(it, gaps, prob.program.objective(x), dist, st.dual_sum_error())
        last_gap = worst
        if worst <= settings.tol_gap:
            status = "converged"
            break
    trace.status = status
    return _to_solution(st, status, st.iteration), trace, messages


def subgradient_baseline(
    model, bounds, cost, lam, part, settings=None, seed=0, central=None
):
    """Constant-step dual ascent on the same decomposition, with primal
    averaging; returns its ConvergenceTrace for side-by-side comparison."""
    del seed
    settings = (settings or AdmmSettings()).validate()
    prob = reconfig.assemble(model, bounds, cost, lam)
    st = init_state(prob, part, settings, penalty=False)
    trace = ConvergenceTrace([t.label for t in part.ties])
    xc, xc_norm = _central_reference(central)
    avg = {k: v.copy() for k, v in st.xi.items()}
    avg_chi = {ti: v.copy() for ti, v in st.chi.items()}

    last_gap = None
    for it in range(1, settings.max_iters + 1):
        st.iteration = it
        inner = settings.resolved_inner(last_gap)
        if settings.inner is None:
            # the constant-step dual method converges slowly and tolerates
            # inexact subgradients; deep inner accuracy is wasted on it
            inner.tol_primal = max(inner.tol_primal, 1e-6)
            inner.tol_dual = max(inner.tol_dual, 1e-6)
            inner.max_iters = min(inner.max_iters, 1000)
        for name in part.names:
            ad = st.areas[name]
            c = ad.base_c.copy()
            for ti, pos in ad.tie_pos.items():
                c[pos] += st.gamma[(ti, name)]
            ad.program.c = c
            if ad.workspace is None:
                ad.workspace = solver.make_workspace(ad.program, inner)
            res = solver.solve(ad.program, inner, warm=ad.warm, workspace=ad.workspace)
            ad.warm = res.warm
            st.x_local[name] = res.x
            for ti, pos in ad.tie_pos.items():
                st.xi[(ti, name)] = res.x[pos].copy()
        for ti, t in enumerate(part.ties):
            a, b = t.areas
            v = st.gamma[(ti, a)] + st.gamma[(ti, b)]
            st.chi[ti] = _tie_argmin(st.tie_data[ti], t, v, 0.0, st.chi[ti])
        for ti, t in enumerate(part.ties):
            for name in t.areas:
                st.gamma[(ti, name)] = st.gamma[(ti, name)] + settings.step * (
                    st.xi[(ti, name)] - st.chi[ti]
                )
        w = 1.0 / it
        for k in avg:
            avg[k] = (1.0 - w) * avg[k] + w * st.xi[k]
        for ti in avg_chi:
            avg_chi[ti] = (1.0 - w) * avg_chi[ti] + w * st.chi[ti]

        gaps = np.array(
            [
                max(
                    np.linalg.norm(avg[(ti, t.areas[0])] - avg_chi[ti]),
                    np.linalg.norm(avg[(ti, t.areas[1])] - avg_chi[ti]),
                )
                for ti, t in enumerate(part.ties)
            ]
        )
        x = _merged_x(st, use_chi=False)
        dist = 0.0
        if xc is not None:
            dist = float(np.linalg.norm(x - xc)) / max(xc_norm, 1e-30)
        trace.record(it, gaps, prob.program.objective(x), dist)
        last_gap = float(gaps.max()) if gaps.size else 0.0
        if gaps.size and gaps.max() <= settings.tol_gap:
            trace.status = "converged"
            return trace
        if not gaps.size:
            trace.status = "converged"
            return trace
    trace.status = "max-iters"
    return trace
