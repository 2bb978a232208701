"""Operator-splitting solver for quadratic programs with weighted group norms,
linear equalities/inequalities and per-slot disk constraints.

The solver runs consensus-form ADMM: the smooth quadratic plus the equality
rows live in the x-update (one pre-factorized KKT solve per iteration), while
group norms, disks and inequality rows each own a copy of their slice of x
with a closed-form proximal step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def block_soft_threshold(v, tau):
    """Shrink v toward zero by tau in Euclidean norm: v * max(0, 1 - tau/||v||)."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= tau:
        return np.zeros_like(v)
    return v * (1.0 - tau / nrm)


def project_disk(v, r):
    """Project a 2-vector onto the disk of radius r."""
    if r <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= r:
        return v.copy()
    return v * (r / nrm)


def msto_subproblem(a, v, lambda_g, balls):
    """Minimize (a/2)||x||^2 - v.x + lambda_g||x|| under per-phase disk caps.

    `balls` is a sequence of radii, one per consecutive 2-coordinate phase
    block of v (None or inf meaning uncapped).  The unconstrained minimizer
    is block_soft_threshold(v, lambda_g)/a; when some disk is active the
    solution is recovered by bisection on t = ||x||.
    """
    if a <= 0:
        raise ValueError("quadratic coefficient must be positive")
    v = np.asarray(v, dtype=float)
    radii = [np.inf if r is None else float(r) for r in balls]
    if 2 * len(radii) != v.size:
        raise ValueError("need one radius per 2-coordinate phase block")
    free = block_soft_threshold(v, lambda_g) / a
    if all(np.linalg.norm(free[2 * i : 2 * i + 2]) <= r * (1 + 1e-12) for i, r in enumerate(radii)):
        out = free
        for i, r in enumerate(radii):
            if np.isfinite(r):
                out[2 * i : 2 * i + 2] = project_disk(out[2 * i : 2 * i + 2], r)
        return out
    vn = np.array([np.linalg.norm(v[2 * i : 2 * i + 2]) for i in range(len(radii))])

    def norms(t):
        # per-phase norm of the stationary point at group norm t
        return np.minimum(vn / (a + lambda_g / t), radii)

    # h(t) = ||x(t)|| - t is decreasing in -t and ||x(t)|| is nondecreasing:
    # unique root on (0, hi]
    hi = np.linalg.norm(np.minimum(vn / a, radii)) + 1e-12
    if np.linalg.norm(v) <= lambda_g:
        return np.zeros_like(v)
    lo = 0.0
    for _ in range(200):
        t = 0.5 * (lo + hi)
        if np.linalg.norm(norms(t)) > t:
            lo = t
        else:
            hi = t
    t = 0.5 * (lo + hi)
    scale = np.where(vn > 0, norms(t) / np.maximum(vn, 1e-300), 0.0)
    out = np.empty_like(v)
    for i in range(len(radii)):
        out[2 * i : 2 * i + 2] = scale[i] * v[2 * i : 2 * i + 2]
    return out


@dataclass(frozen=True)
class Group:
    indices: tuple
    weight: float


@dataclass(frozen=True)
class Ball:
    re_index: int
    im_index: int
    radius: float


@dataclass
class GroupSparseProgram:
    """min 0.5 x'Qx + c'x + sum_g w_g ||x_g||  s.t.  A_eq x = b_eq,
    A_in x <= b_in, ||(x_re, x_im)|| <= r per ball."""

    n: int
    q: sp.spmatrix | None = None
    c: np.ndarray | None = None
    groups: list = field(default_factory=list)
    a_eq: sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    a_in: sp.spmatrix | None = None
    b_in: np.ndarray | None = None
    balls: list = field(default_factory=list)

    def validate(self):
        seen = set()
        for g in self.groups:
            if g.weight < 0:
                raise ValueError("group weight must be nonnegative")
            s = set(g.indices)
            if s & seen:
                raise ValueError("groups must be disjoint")
            seen |= s
        for b in self.balls:
            if b.radius <= 0:
                raise ValueError("ball radius must be positive")
            if b.im_index != b.re_index + 1:
                raise ValueError("ball must cover a consecutive (re, im) pair")
        if self.q is not None:
            qd = np.asarray(self.q.todense()) if sp.issparse(self.q) else np.asarray(self.q)
            w = np.linalg.eigvalsh(0.5 * (qd + qd.T))
            if w.min() < -1e-8 * max(1.0, abs(w).max()):
                raise ValueError("quadratic form is not positive semidefinite")
        return self

    def objective(self, x):
        val = 0.0
        if self.q is not None:
            val += 0.5 * float(x @ (self.q @ x))
        if self.c is not None:
            val += float(self.c @ x)
        for g in self.groups:
            val += g.weight * np.linalg.norm(x[list(g.indices)])
        return val


@dataclass
class SolverSettings:
    kappa: float = 1.0
    max_iters: int = 50_000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    check_every: int = 25

    def validate(self):
        if min(self.kappa, self.max_iters, self.tol_primal, self.tol_dual) <= 0:
            raise ValueError("solver settings must be positive")
        return self


@dataclass
class SolverResult:
    x: np.ndarray
    status: str  # optimal | max-iters | infeasible-certificate
    objective: float
    iterations: int
    residuals: np.ndarray  # rows (iter, r_primal, r_dual, objective)
    zero_groups: list
    warm: tuple | None = None  # (y, u) copies for warm starting


class _Splitting:
    """Workspace for one program: copy operator E, prox table, KKT factor."""

    def __init__(self, p, s):
        self.p = p
        self.s = s
        n = p.n
        blocks = []  # (kind, payload, rows slice start)
        e_rows, e_cols, e_vals = [], [], []
        r = 0
        for gi, g in enumerate(p.groups):
            idx = list(g.indices)
            e_rows += list(range(r, r + len(idx)))
            e_cols += idx
            e_vals += [1.0] * len(idx)
            blocks.append(("group", gi, slice(r, r + len(idx))))
            r += len(idx)
        if p.balls:
            start = r
            for b in p.balls:
                e_rows += [r, r + 1]
                e_cols += [b.re_index, b.im_index]
                e_vals += [1.0, 1.0]
                r += 2
            # all disks are projected in one vectorized block
            blocks.append(("balls", np.array([b.radius for b in p.balls]), slice(start, r)))
        if p.a_in is not None and p.a_in.shape[0]:
            m = p.a_in.shape[0]
            a = sp.coo_matrix(p.a_in)
            e_rows += list(a.row + r)
            e_cols += list(a.col)
            e_vals += list(a.data)
            blocks.append(("ineq", None, slice(r, r + m)))
            r += m
        if r == 0:
            # degenerate: plain equality-constrained QP; add a vacuous copy of x
            e_rows = list(range(n))
            e_cols = list(range(n))
            e_vals = [1.0] * n
            blocks.append(("free", None, slice(0, n)))
            r = n
        self.E = sp.csr_matrix((e_vals, (e_rows, e_cols)), shape=(r, n))
        self.blocks = blocks
        self.m_copies = r

        kappa = s.kappa
        q = p.q if p.q is not None else sp.csr_matrix((n, n))
        h = (q + q.T) * 0.5 + kappa * (self.E.T @ self.E)
        if p.a_eq is not None and p.a_eq.shape[0]:
            a_eq = sp.csr_matrix(p.a_eq)
            meq = a_eq.shape[0]
            kkt = sp.bmat([[h, a_eq.T], [a_eq, None]], format="csc")
            self.meq = meq
            self.b_eq = np.asarray(p.b_eq, dtype=float)
        else:
            kkt = sp.csc_matrix(h)
            self.meq = 0
            self.b_eq = None
        try:
            self.lu = spla.splu(kkt)
        except RuntimeError as exc:
            raise ValueError(f"singular KKT system (ill-posed program): {exc}") from None
        self.c = np.zeros(n) if p.c is None else np.asarray(p.c, dtype=float)

    def x_step(self, y, u):
        rhs = self.s.kappa * (self.E.T @ (y - u)) - self.c
        if self.meq:
            rhs = np.concatenate([rhs, self.b_eq])
        sol = self.lu.solve(rhs)
        return sol[: self.p.n] if self.meq else sol

    def prox(self, w):
        p, kappa = self.p, self.s.kappa
        y = np.empty_like(w)
        for kind, payload, sl in self.blocks:
            v = w[sl]
            if kind == "group":
                y[sl] = block_soft_threshold(v, p.groups[payload].weight / kappa)
            elif kind == "balls":
                pairs = v.reshape(-1, 2)
                nrm = np.hypot(pairs[:, 0], pairs[:, 1])
                scale = np.where(nrm > payload, payload / np.maximum(nrm, 1e-300), 1.0)
                y[sl] = (pairs * scale[:, None]).ravel()
            elif kind == "ineq":
                y[sl] = np.minimum(v, p.b_in)
            else:
                y[sl] = v
        return y


def make_workspace(p, s):
    """Pre-validate and factorize a program for repeated solves that differ
    only in the linear term c (pass the result as `workspace` to solve)."""
    s = (s or SolverSettings()).validate()
    p.validate()
    return _Splitting(p, s)


def solve(p, s=None, warm=None, workspace=None):
    """Run the splitting iteration on a validated program.

    `warm` may carry the (y, u) pair of a previous SolverResult on the same
    program shape; iterations remain deterministic for identical inputs.
    `workspace` (from make_workspace) reuses the KKT factorization across
    solves whose quadratic and constraints are unchanged; only p.c is re-read.
    """
    s = (s or SolverSettings()).validate()
    if workspace is None:
        p.validate()
        ws = _Splitting(p, s)
    else:
        ws = workspace
        if ws.s.kappa != s.kappa:
            raise ValueError("workspace was factorized with a different kappa")
        ws.p = p
        ws.s = s
        ws.c = np.zeros(p.n) if p.c is None else np.asarray(p.c, dtype=float)
    m = ws.m_copies
    if warm is not None and warm[0].shape == (m,):
        y, u = warm[0].copy(), warm[1].copy()
    else:
        y, u = np.zeros(m), np.zeros(m)

    scale = 1.0 + np.linalg.norm(ws.c)
    status = "max-iters"
    it = 0
    rp = rd = np.inf
    trace = []
    stall = 0
    best_rp = np.inf
    u_mark = None
    x = np.zeros(p.n)
    for it in range(1, s.max_iters + 1):
        x = ws.x_step(y, u)
        ex = ws.E @ x
        y_old = y
        y = ws.prox(ex + u)
        u = u + ex - y
        if it % s.check_every == 0 or it == s.max_iters:
            rp = np.linalg.norm(ex - y)
            rd = s.kappa * np.linalg.norm(ws.E.T @ (y - y_old))
            obj = p.objective(x)
            trace.append((it, rp, rd, obj))
            ref = 1.0 + max(np.linalg.norm(ex), np.linalg.norm(y))
            ok_p = rp <= s.tol_primal * np.sqrt(m) + s.tol_primal * ref
            ok_d = rd <= s.tol_dual * np.sqrt(p.n) + s.tol_dual * s.kappa * (1.0 + np.linalg.norm(ws.E.T @ u))
            if ok_p and ok_d:
                status = "optimal"
                break
            # divergence heuristic: an infeasible program plateaus at a
            # positive primal residual while the dual copies grow without
            # bound; a feasible one keeps them bounded
            if rp < best_rp * 0.999:
                best_rp = rp
                stall = 0
                u_mark = None
            else:
                stall += 1
                if stall == 200:
                    u_mark = np.linalg.norm(u)
            if (
                stall > 400
                and u_mark is not None
                and np.linalg.norm(u) > max(2.0 * u_mark, 10.0 * scale)
            ):
                status = "infeasible-certificate"
                break

    zero_groups = []
    xn = np.linalg.norm(x)
    for gi, g in enumerate(p.groups):
        idx = list(g.indices)
        copy_sl = next(sl for kind, payload, sl in ws.blocks if kind == "group" and payload == gi)
        prox_zero = not np.any(y[copy_sl])
        subgrad_ok = s.kappa * np.linalg.norm(u[copy_sl]) <= g.weight * (1.0 + 1e-6) + 1e-12
        if status == "optimal" and prox_zero and subgrad_ok and np.linalg.norm(x[idx]) <= 1e-6 * (1.0 + xn):
            x = x.copy()
            x[idx] = 0.0
            zero_groups.append(gi)
    return SolverResult(
        x=x,
        status=status,
        objective=p.objective(x),
        iterations=it,
        residuals=np.array(trace).reshape(-1, 4),
        zero_groups=zero_groups,
        warm=(y, u),
    )
