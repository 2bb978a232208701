"""Correlated forecast-error sampling, sample-size bounds, and reduction of
sampled load-balance constraints to per-(node, phase) minima."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .feeder import node_distance_matrix


def min_sample_size(rho, beta, m):
    """Scenario count guaranteeing feasibility of the chance constraint with
    probability >= 1 - beta: ceil(2/rho ln(1/beta) + 2m + 2m/rho ln(2/rho))."""
    if not (0.0 < rho < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("rho and beta must lie in (0, 1)")
    if m < 1:
        raise ValueError("decision dimension must be at least 1")
    val = 2.0 / rho * math.log(1.0 / beta) + 2.0 * m + 2.0 * m / rho * math.log(2.0 / rho)
    return int(math.ceil(val))


def min_sample_size_mr3(rho, beta, n_dg, line_phase_count):
    """Sample-size bound for the reconfiguration program; the decision vector
    has real dimension 2*(n_dg + line_phase_count)."""
    if n_dg < 0 or line_phase_count < 0 or n_dg + line_phase_count == 0:
        raise ValueError("need at least one DG unit or line phase")
    return min_sample_size(rho, beta, 2 * (n_dg + line_phase_count))


@dataclass(frozen=True)
class ForecastErrorSpec:
    """Absolute standard deviations per (node, phase), in watts / vars."""

    res_sigma: dict = field(default_factory=dict)  # (node, phase) -> W
    load_sigma_p: dict = field(default_factory=dict)
    load_sigma_q: dict = field(default_factory=dict)
    lower_pct: float = 0.13
    upper_pct: float = 99.87
    epsilon_samples: np.ndarray | None = None  # optional, (K_eps, 2*|D|) W/var

    def validate(self):
        for d in (self.res_sigma, self.load_sigma_p, self.load_sigma_q):
            if any(v < 0 for v in d.values()):
                raise ValueError("sigmas must be nonnegative")
        if not 0.0 < self.lower_pct < self.upper_pct < 100.0:
            raise ValueError("truncation percentiles must satisfy 0 < lo < hi < 100")
        return self


@dataclass(frozen=True)
class CorrelationModel:
    kind: str = "independent"  # or "exponential-distance"
    decay_length: float = 1.0

    def matrix(self, distance):
        if self.kind == "independent":
            return np.eye(distance.shape[0])
        if self.kind == "exponential-distance":
            if self.decay_length <= 0:
                raise ValueError("decay length must be positive")
            return np.exp(-np.asarray(distance) / self.decay_length)
        raise ValueError(f"unknown correlation kind {self.kind!r}")


@dataclass(frozen=True)
class ScenarioSet:
    """K sampled net injections per (node, phase) in D.

    slots fixes the (node, phase) order; p and q are (K, |D|) arrays in
    watts / vars.
    """

    slots: tuple
    p: np.ndarray
    q: np.ndarray
    seed: int

    @property
    def k(self):
        return self.p.shape[0]


@dataclass(frozen=True)
class NetInjectionBounds:
    slots: tuple
    p_bound: np.ndarray
    q_bound: np.ndarray

    def as_dict(self):
        return {
            slot: (self.p_bound[i], self.q_bound[i]) for i, slot in enumerate(self.slots)
        }


def injection_slots(model):
    """Ordered (node_id, phase) pairs of the set D: load, RES or DG present."""
    slots = []
    for n in model.nodes:
        if n.id == model.pcc_node:
            continue
        for ph in n.phases:
            if n.has_injection(ph):
                slots.append((n.id, ph))
    return tuple(slots)


def spec_from_fractions(
    model,
    res_sigma_frac=None,
    load_sigma_frac=None,
    lower_pct=0.13,
    upper_pct=99.87,
):
    """Build absolute sigmas from per-kind RES fractions and per-node load
    fractions of the forecast magnitudes."""
    res_sigma_frac = res_sigma_frac or {}
    load_sigma_frac = load_sigma_frac or {}
    res_sigma, sig_p, sig_q = {}, {}, {}
    for n in model.nodes:
        lf = load_sigma_frac.get(str(n.id), load_sigma_frac.get("default", 0.0))
        for ph in n.phases:
            sig = 0.0
            for u in n.res:
                if u.phase == ph:
                    frac = res_sigma_frac.get(str(n.id), res_sigma_frac.get(u.kind, 0.0))
                    sig += frac * abs(u.forecast_w)
            if sig:
                res_sigma[(n.id, ph)] = sig
            s = n.load.get(ph, 0j)
            if s.real:
                sig_p[(n.id, ph)] = lf * abs(s.real)
            if s.imag:
                sig_q[(n.id, ph)] = lf * abs(s.imag)
    return ForecastErrorSpec(res_sigma, sig_p, sig_q, lower_pct, upper_pct).validate()


def load_scenario_spec(path, model):
    """Read the scenario spec document and resolve it against a model."""
    with open(path) as fh:
        doc = json.load(fh)
    allowed = {"res_sigma_frac", "load_sigma_frac", "truncation_pct", "correlation", "epsilon_csv"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown scenario spec keys: {sorted(unknown)}")
    lo, hi = doc.get("truncation_pct", [0.13, 99.87])
    spec = spec_from_fractions(
        model,
        doc.get("res_sigma_frac"),
        doc.get("load_sigma_frac"),
        lower_pct=lo,
        upper_pct=hi,
    )
    if "epsilon_csv" in doc:
        eps = np.loadtxt(doc["epsilon_csv"], delimiter=",", skiprows=1, ndmin=2)
        spec = ForecastErrorSpec(
            spec.res_sigma, spec.load_sigma_p, spec.load_sigma_q, spec.lower_pct, spec.upper_pct, eps
        )
    corr_doc = doc.get("correlation", {})
    corr = CorrelationModel(
        corr_doc.get("kind", "independent"), corr_doc.get("decay_length", 1.0)
    )
    return spec, corr


def _truncated_standard(rng, chol, size, z_lo, z_hi):
    """Draw `size` correlated standard-normal vectors, redrawing any vector
    with a component outside [z_lo, z_hi] (whole-vector rejection)."""
    dim = chol.shape[0]
    out = np.empty((size, dim))
    need = np.arange(size)
    while need.size:
        draw = rng.standard_normal((need.size, dim)) @ chol.T
        ok = np.all((draw >= z_lo) & (draw <= z_hi), axis=1)
        out[need[ok]] = draw[ok]
        need = need[~ok]
    return out


def sample_scenarios(model, spec, corr, k, seed):
    """Generate k net-injection samples over the slots of D.

    RES errors share one correlated standard-normal draw per RES-hosting
    node (scaled per phase); load errors are independent.  Truncation is
    applied after correlation by whole-vector rejection.
    """
    if k < 1:
        raise ValueError("need at least one sample")
    spec.validate()
    slots = injection_slots(model)
    rng = np.random.default_rng(seed)
    z_lo = norm.ppf(spec.lower_pct / 100.0)
    z_hi = norm.ppf(spec.upper_pct / 100.0)

    res_nodes = sorted(
        {n for (n, _ph) in spec.res_sigma}, key=lambda v: model.node_ids.index(v)
    )
    if res_nodes:
        dist = node_distance_matrix(model, res_nodes)
        cmat = corr.matrix(dist)
        if not np.allclose(cmat, cmat.T) or np.any(np.diag(cmat) != 1.0):
            raise ValueError("correlation matrix must be symmetric with unit diagonal")
        try:
            chol = np.linalg.cholesky(cmat + 1e-12 * np.eye(len(res_nodes)))
        except np.linalg.LinAlgError:
            raise ValueError("correlation matrix is not positive semidefinite") from None
        res_draw = _truncated_standard(rng, chol, k, z_lo, z_hi)
        res_col = {nid: i for i, nid in enumerate(res_nodes)}
    else:
        res_draw, res_col = None, {}

    p = np.empty((k, len(slots)))
    q = np.empty((k, len(slots)))
    ident = np.array([[1.0]])
    for j, (nid, ph) in enumerate(slots):
        node = model.node(nid)
        s_load = node.load.get(ph, 0j)
        p_base = node.res_forecast(ph) - s_load.real
        q_base = -s_load.imag
        d_res = 0.0
        sig = spec.res_sigma.get((nid, ph), 0.0)
        if sig:
            d_res = sig * res_draw[:, res_col[nid]]
        d_lp = 0.0
        sig = spec.load_sigma_p.get((nid, ph), 0.0)
        if sig:
            d_lp = sig * _truncated_standard(rng, ident, k, z_lo, z_hi)[:, 0]
        d_lq = 0.0
        sig = spec.load_sigma_q.get((nid, ph), 0.0)
        if sig:
            d_lq = sig * _truncated_standard(rng, ident, k, z_lo, z_hi)[:, 0]
        p[:, j] = p_base + d_res - d_lp
        q[:, j] = q_base - d_lq
    if spec.epsilon_samples is not None:
        eps = spec.epsilon_samples
        if eps.shape[1] != 2 * len(slots):
            raise ValueError("epsilon sample width must be 2 * |D|")
        rows = rng.integers(0, eps.shape[0], size=k)
        p += eps[rows, : len(slots)]
        q += eps[rows, len(slots) :]
    return ScenarioSet(slots, p, q, seed)


def reduce_scenarios(s):
    """Componentwise minimum over samples; satisfying these 2|D| bounds
    implies satisfying every per-sample constraint."""
    if s.k < 1:
        raise ValueError("empty scenario set")
    return NetInjectionBounds(s.slots, s.p.min(axis=0), s.q.min(axis=0))


def export_scenarios(s, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "node", "phase", "p_w", "q_var"])
        for k in range(s.k):
            for j, (nid, ph) in enumerate(s.slots):
                w.writerow([k + 1, nid, ph, repr(float(s.p[k, j])), repr(float(s.q[k, j]))])
