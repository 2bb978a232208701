"""Assemble the group-sparse reconfiguration program from a feeder model and
net-injection bounds, solve it centrally, extract the switch topology, and
audit the load-satisfaction guarantee out of sample."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import solver
from .feeder import build_incidence, nominal_injection_map
from .scenarios import injection_slots, sample_scenarios


@dataclass(frozen=True)
class CostSpec:
    """Objective recipe: ohmic loss, operation cost (PCC draw + DG), or a
    weighted combination; optional per-line magnitude terms."""

    kind: str = "weighted"  # loss | operation | weighted
    loss_weight: float = 1.0
    op_weight: float = 1.0
    pcc_coeff: float | None = None  # currency/W; defaults to model.price_pcc
    dg_coeffs: dict = field(default_factory=dict)  # node id -> currency/W override
    line_terms: dict = field(default_factory=dict)  # line key -> alpha on ||xi_mn||

    def validate(self):
        if self.kind not in ("loss", "operation", "weighted"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.loss_weight < 0 or self.op_weight < 0:
            raise ValueError("cost weights must be nonnegative")
        use_loss = self.kind in ("loss", "weighted") and self.loss_weight > 0
        use_op = self.kind in ("operation", "weighted") and self.op_weight > 0
        if not use_loss and not use_op:
            raise ValueError("cost must include at least one nonzero term")
        return self


@dataclass
class ReconfigProblem:
    """Solver-facing program plus bookkeeping back to the feeder."""

    program: solver.GroupSparseProgram
    model: object
    indexing: object
    incidence: object
    slots: tuple  # (node, phase) order of the inequality rows
    dg_p_col: dict  # (node, phase) -> column in x
    dg_q_col: dict
    group_lines: list  # line index per group, aligned with program.groups
    lam: float
    bounds: object
    cost: CostSpec
    var_scale: np.ndarray = None  # physical x = var_scale * solver x

    def physical(self, x):
        return x * self.var_scale if self.var_scale is not None else x


@dataclass
class ReconfigSolution:
    xi: np.ndarray
    dg_setpoints: dict  # (node, phase) -> complex W/var
    topology: list  # line keys in use
    open_lines: list  # switchable line keys with zero current group
    objective: float
    per_line_current_mag: dict  # line key -> sum over phases of |I|
    lol_margin: dict  # (node, phase) -> (p slack, q slack)
    status: str
    solver_result: solver.SolverResult | None = None
    problem: ReconfigProblem | None = None


def _dg_columns(model, ncur):
    p_col, q_col = {}, {}
    col = ncur
    for n in model.nodes:
        if n.dg is None:
            continue
        for ph in n.phases:
            p_col[(n.id, ph)] = col
            col += 1
    for n in model.nodes:
        if n.dg is None or n.dg.unity_pf:
            continue
        for ph in n.phases:
            q_col[(n.id, ph)] = col
            col += 1
    return p_col, q_col, col


def assemble(model, bounds, cost, lam):
    """Build the convex program: balance inequalities on D, zero-injection
    equalities on the complement, ampacity disks, DG boxes, group-lasso
    regularizer with weight lam * line weight per switchable line."""
    cost.validate()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    slots = injection_slots(model)
    if not slots:
        raise ValueError("set D is empty: no loads, RES or DG in the model")
    if tuple(bounds.slots) != slots:
        raise ValueError("bounds do not cover exactly the model's (node, phase) set D")

    idx, inc = build_incidence(model)
    imap = nominal_injection_map(model)
    ncur = idx.dim
    p_col, q_col, n = _dg_columns(model, ncur)

    a_in_rows, b_in = [], []

    def add_row(cols, vals, rhs):
        # unit-norm row scaling keeps the splitting solver on one scale
        nrm = math.sqrt(sum(v * v for v in vals))
        a_in_rows.append((cols, [v / nrm for v in vals], len(b_in)))
        b_in.append(rhs / nrm)

    slot_row_p, slot_row_q = {}, {}
    for j, (nid, ph) in enumerate(slots):
        blk = inc.block(nid, ph).toarray()
        row_p = imap[ph].phi @ blk
        row_q = imap[ph].phibar @ blk
        nz = np.nonzero(row_p)[0]
        cols, vals = list(nz), list(row_p[nz])
        if (nid, ph) in p_col:
            cols.append(p_col[(nid, ph)])
            vals.append(-1.0)
        slot_row_p[(nid, ph)] = len(b_in)
        add_row(cols, vals, bounds.p_bound[j])
        nz = np.nonzero(row_q)[0]
        cols, vals = list(nz), list(row_q[nz])
        if (nid, ph) in q_col:
            cols.append(q_col[(nid, ph)])
            vals.append(-1.0)
        slot_row_q[(nid, ph)] = len(b_in)
        add_row(cols, vals, bounds.q_bound[j])

    for node in model.nodes:
        if node.dg is None:
            continue
        for ph in node.phases:
            c = p_col[(node.id, ph)]
            add_row([c], [1.0], node.dg.p_max)
            add_row([c], [-1.0], -node.dg.p_min)
            if (node.id, ph) in q_col:
                c = q_col[(node.id, ph)]
                add_row([c], [1.0], node.dg.q_max)
                add_row([c], [-1.0], -node.dg.q_min)

    rows, cols_, vals_ = [], [], []
    for cols, vals, r in a_in_rows:
        rows += [r] * len(cols)
        cols_ += cols
        vals_ += vals
    a_in = sp.csr_matrix((vals_, (rows, cols_)), shape=(len(b_in), n))

    in_d = set(slots)
    eq_rows, eq_cols, eq_vals = [], [], []
    r = 0
    for node in model.nodes:
        if node.id == model.pcc_node:
            continue  # the PCC exchanges power with the main grid freely
        for ph in node.phases:
            if (node.id, ph) in in_d:
                continue
            blk = sp.coo_matrix(inc.block(node.id, ph))
            eq_rows += list(blk.row + r)
            eq_cols += list(blk.col)
            eq_vals += list(blk.data)
            r += 2
    a_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(r, n)) if r else None
    b_eq = np.zeros(r) if r else None

    balls = []
    for li, ln in enumerate(model.lines):
        for ph in ln.phases:
            cre, cim = idx.coords(li, ph)
            balls.append(solver.Ball(cre, cim, ln.i_max))

    groups, group_lines = [], []
    for li, ln in enumerate(model.lines):
        w = 0.0
        if ln.switchable and lam > 0:
            w += lam * ln.weight
        w += cost.line_terms.get(ln.key, 0.0)
        if w > 0:
            groups.append(solver.Group(tuple(idx.line_coords(li)), w))
            group_lines.append(li)

    q = None
    c = np.zeros(n)
    use_loss = cost.kind in ("loss", "weighted")
    use_op = cost.kind in ("operation", "weighted")
    if use_loss and cost.loss_weight > 0:
        from .feeder import loss_matrix

        # program objective carries 0.5 x'Qx; the loss form itself is xi'L xi
        q = 2.0 * cost.loss_weight * loss_matrix(model, idx)
        q = sp.block_diag([q, sp.csr_matrix((n - ncur, n - ncur))], format="csr")
    if use_op and cost.op_weight > 0:
        c1 = cost.pcc_coeff if cost.pcc_coeff is not None else model.price_pcc
        pcc = model.node(model.pcc_node)
        for ph in pcc.phases:
            blk = inc.block(model.pcc_node, ph).toarray()
            c[:ncur] += cost.op_weight * c1 * (imap[ph].phi @ blk)
        for node in model.nodes:
            if node.dg is None:
                continue
            coeff = cost.dg_coeffs.get(node.id, node.dg.cost_coeff)
            for ph in node.phases:
                c[p_col[(node.id, ph)]] += cost.op_weight * coeff

    # put DG powers on the same numeric scale as currents (amps): the solver
    # works on x_tilde with x = S x_tilde, S = M_N on power columns
    var_scale = np.ones(n)
    var_scale[ncur:] = model.nominal_voltage
    S = sp.diags(var_scale)
    if q is not None:
        q = S @ q @ S
    c = var_scale * c
    a_in = (a_in @ S).tocsr()
    if a_eq is not None:
        a_eq = (a_eq @ S).tocsr()
    # re-normalize inequality rows after column scaling
    row_norms = np.sqrt(np.asarray(a_in.multiply(a_in).sum(axis=1)).ravel())
    inv = sp.diags(1.0 / row_norms)
    a_in = (inv @ a_in).tocsr()
    b_in = np.array(b_in) / row_norms

    prog = solver.GroupSparseProgram(
        n=n,
        q=q,
        c=c,
        groups=groups,
        a_eq=a_eq,
        b_eq=b_eq,
        a_in=a_in,
        b_in=b_in,
        balls=balls,
    )
    return ReconfigProblem(
        prog, model, idx, inc, slots, p_col, q_col, group_lines, lam, bounds, cost, var_scale
    )


def _audit(prob, x, tol=1e-5):
    """Re-check every constraint from the raw model data, independent of the
    solver's internal scaling; returns the worst violation."""
    model, idx, inc = prob.model, prob.indexing, prob.incidence
    imap = nominal_injection_map(model)
    worst = 0.0
    xi = x[: idx.dim]
    for j, (nid, ph) in enumerate(prob.slots):
        blk = inc.block(nid, ph).toarray()
        pg = x[prob.dg_p_col[(nid, ph)]] if (nid, ph) in prob.dg_p_col else 0.0
        qg = x[prob.dg_q_col[(nid, ph)]] if (nid, ph) in prob.dg_q_col else 0.0
        scale = 1.0 + abs(prob.bounds.p_bound[j]) + model.nominal_voltage * np.abs(xi).max()
        worst = max(worst, (imap[ph].phi @ blk @ xi - pg - prob.bounds.p_bound[j]) / scale)
        worst = max(worst, (imap[ph].phibar @ blk @ xi - qg - prob.bounds.q_bound[j]) / scale)
    in_d = set(prob.slots)
    for node in model.nodes:
        if node.id == model.pcc_node:
            continue
        for ph in node.phases:
            if (node.id, ph) in in_d:
                continue
            inj = inc.block(node.id, ph) @ xi
            worst = max(
                worst, np.abs(inj).max() / (1.0 + np.abs(xi).max())
            )
        if node.dg is not None:
            for ph in node.phases:
                pg = x[prob.dg_p_col[(node.id, ph)]]
                s = 1.0 + abs(node.dg.p_max)
                worst = max(worst, (pg - node.dg.p_max) / s, (node.dg.p_min - pg) / s)
    for li, ln in enumerate(model.lines):
        for ph in ln.phases:
            cre, cim = idx.coords(li, ph)
            mag = math.hypot(xi[cre], xi[cim])
            worst = max(worst, (mag - ln.i_max) / ln.i_max)
    return worst


def _to_solution(prob, res, audit_tol=1e-5):
    model, idx = prob.model, prob.indexing
    x = prob.physical(res.x)
    xi = x[: idx.dim]
    zero_line_idx = {prob.group_lines[g] for g in res.zero_groups}
    open_lines, topology = [], []
    for li, ln in enumerate(model.lines):
        if ln.switchable and li in zero_line_idx:
            open_lines.append(ln.key)
        else:
            topology.append(ln.key)
    currents = idx.complex_currents(xi)
    per_line = {}
    for li, ln in enumerate(model.lines):
        per_line[ln.key] = sum(abs(currents[(li, ph)]) for ph in ln.phases)
    dg = {}
    for key, col in prob.dg_p_col.items():
        dg[key] = complex(x[col], x[prob.dg_q_col[key]] if key in prob.dg_q_col else 0.0)
    imap = nominal_injection_map(model)
    margins = {}
    for j, (nid, ph) in enumerate(prob.slots):
        blk = prob.incidence.block(nid, ph).toarray()
        pg = dg.get((nid, ph), 0j)
        margins[(nid, ph)] = (
            prob.bounds.p_bound[j] - (imap[ph].phi @ blk @ xi - pg.real),
            prob.bounds.q_bound[j] - (imap[ph].phibar @ blk @ xi - pg.imag),
        )
    status = res.status
    if status == "optimal" and _audit(prob, x, audit_tol) > audit_tol:
        status = "audit-failed"
    return ReconfigSolution(
        xi=xi,
        dg_setpoints=dg,
        topology=topology,
        open_lines=open_lines,
        objective=res.objective,
        per_line_current_mag=per_line,
        lol_margin=margins,
        status=status,
        solver_result=res,
        problem=prob,
    )


def default_settings(prob=None, **overrides):
    """Solver settings tuned for assembled reconfiguration programs."""
    base = dict(kappa=50.0, max_iters=200_000, tol_primal=2e-9, tol_dual=2e-9)
    base.update(overrides)
    return solver.SolverSettings(**base)


def solve_centralized(prob, settings=None, warm=None):
    settings = settings or default_settings(prob)
    res = solver.solve(prob.program, settings, warm=warm)
    return _to_solution(prob, res)


def solve_fixed_topology(model, bounds, cost, open_lines, settings=None):
    """Re-solve without the regularizer, forcing the given switchable lines'
    currents to zero; used for topology enumeration and local checks."""
    prob = assemble(model, bounds, cost, 0.0)
    open_set = set(open_lines)
    extra = []
    for li, ln in enumerate(model.lines):
        if ln.key in open_set:
            extra.extend(prob.indexing.line_coords(li))
    if extra:
        p = prob.program
        rows = sp.csr_matrix(
            (np.ones(len(extra)), (range(len(extra)), extra)), shape=(len(extra), p.n)
        )
        if p.a_eq is not None:
            p.a_eq = sp.vstack([p.a_eq, rows], format="csr")
            p.b_eq = np.concatenate([p.b_eq, np.zeros(len(extra))])
        else:
            p.a_eq = rows
            p.b_eq = np.zeros(len(extra))
    return solve_centralized(prob, settings)


@dataclass
class SweepResult:
    lambdas: list
    solutions: list  # ReconfigSolution or None where infeasible
    statuses: list
    switchable_keys: list
    matrix: np.ndarray  # rows: switchable lines, cols: lambdas, sum |I| (nan = infeasible)

    def open_count(self, j):
        sol = self.solutions[j]
        return None if sol is None else len(sol.open_lines)

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["line"] + [repr(l) for l in self.lambdas])
            for i, key in enumerate(self.switchable_keys):
                row = [
                    "INF" if math.isnan(v) else repr(float(v)) for v in self.matrix[i]
                ]
                w.writerow([f"{key[0]}-{key[1]}"] + row)


def sweep_lambda(model, bounds, cost, lambdas, settings=None):
    """Solve over an ascending lambda ladder, warm-starting each point from
    the previous one; infeasible points are recorded and skipped."""
    if list(lambdas) != sorted(lambdas):
        raise ValueError("lambda list must be ascending")
    keys = [ln.key for ln in model.switchable_lines()]
    mat = np.full((len(keys), len(lambdas)), np.nan)
    sols, statuses = [], []
    warm = None
    for j, lam in enumerate(lambdas):
        prob = assemble(model, bounds, cost, lam)
        res = solver.solve(prob.program, settings or default_settings(prob), warm=warm)
        sol = _to_solution(prob, res)
        if sol.status == "optimal":
            warm = res.warm
            for i, key in enumerate(keys):
                mag = sol.per_line_current_mag[key]
                mat[i, j] = 0.0 if key in sol.open_lines else mag
            sols.append(sol)
        else:
            sols.append(None)
        statuses.append(sol.status)
    return SweepResult(list(lambdas), sols, statuses, keys, mat)


@dataclass
class LolValidation:
    joint_rate: float
    marginal_rates: dict  # (node, phase) -> rate
    k_out: int
    violated_slots: list

    @property
    def rate(self):
        return self.joint_rate


def validate_lol(solution, model, spec, corr, k_out, seed):
    """Empirical joint satisfaction rate of the per-sample balance
    constraints at the fixed solution, over k_out fresh scenarios."""
    if k_out < 1:
        raise ValueError("need at least one validation scenario")
    prob = solution.problem
    scen = sample_scenarios(model, spec, corr, k_out, seed)
    if scen.slots != prob.slots:
        raise ValueError("scenario slots do not match the solution's model")
    imap = nominal_injection_map(model)
    lhs_p = np.empty(len(prob.slots))
    lhs_q = np.empty(len(prob.slots))
    for j, (nid, ph) in enumerate(prob.slots):
        blk = prob.incidence.block(nid, ph).toarray()
        pg = solution.dg_setpoints.get((nid, ph), 0j)
        lhs_p[j] = imap[ph].phi @ blk @ solution.xi - pg.real
        lhs_q[j] = imap[ph].phibar @ blk @ solution.xi - pg.imag
    tol = 1e-7 * (1.0 + np.abs(scen.p).max())
    ok_p = lhs_p[None, :] <= scen.p + tol
    ok_q = lhs_q[None, :] <= scen.q + tol
    ok = ok_p & ok_q
    joint = float(np.all(ok, axis=1).mean())
    marg = {slot: float(ok[:, j].mean()) for j, slot in enumerate(prob.slots)}
    violated = [slot for slot, r in marg.items() if r < 1.0]
    return LolValidation(joint, marg, k_out, violated)
