"""Multi-phase feeder data model, stacked current coordinates and Kirchhoff operators.

The stacked current vector has one (real, imaginary) coordinate pair per
(line, phase) slot.  Slot order is deterministic: lines in input order,
phases in the order a < b < c.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

PHASES = ("a", "b", "c")
DEFAULT_ANGLES = {"a": 0.0, "b": -2.0 * math.pi / 3.0, "c": 2.0 * math.pi / 3.0}
FT_PER_MILE = 5280.0


class FeederFormatError(ValueError):
    """Schema violation in a feeder document; carries the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class FeederModelError(ValueError):
    """Invariant violation in an otherwise well-formed feeder model."""


def _sorted_phases(phases):
    return tuple(sorted(set(phases), key=PHASES.index))


@dataclass(frozen=True)
class DgSpec:
    """Box limits and marginal cost of a conventional DG unit (per phase, SI)."""

    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_coeff: float

    @property
    def unity_pf(self):
        return self.q_min == 0.0 and self.q_max == 0.0


@dataclass(frozen=True)
class ResUnit:
    phase: str
    capacity_w: float
    kind: str  # "pv" or "wind"
    forecast_w: float


@dataclass(frozen=True, eq=False)
class NodeSpec:
    id: object
    phases: tuple
    load: dict = field(default_factory=dict)  # phase -> complex VA forecast
    dg: DgSpec | None = None
    res: tuple = ()
    xy: tuple | None = None

    def __eq__(self, other):
        if not isinstance(other, NodeSpec):
            return NotImplemented
        return (
            self.id == other.id
            and self.phases == other.phases
            and self.load == other.load
            and self.dg == other.dg
            and self.res == other.res
            and self.xy == other.xy
        )

    def res_forecast(self, phase):
        return sum(u.forecast_w for u in self.res if u.phase == phase)

    def has_injection(self, phase):
        """True if (phase, node) hosts a load, RES or DG unit (membership in D)."""
        s = self.load.get(phase, 0j)
        return s != 0 or any(u.phase == phase for u in self.res) or self.dg is not None


@dataclass(frozen=True, eq=False)
class LineSpec:
    from_node: object
    to_node: object
    phases: tuple
    z: np.ndarray  # |phases| x |phases| complex ohms
    i_max: float
    switchable: bool = False
    weight: float = 1.0
    y_shunt: np.ndarray | None = None  # diagonal entries, siemens

    def __eq__(self, other):
        if not isinstance(other, LineSpec):
            return NotImplemented
        ys_eq = (
            self.y_shunt is None
            and other.y_shunt is None
            or (
                self.y_shunt is not None
                and other.y_shunt is not None
                and np.array_equal(self.y_shunt, other.y_shunt)
            )
        )
        return (
            self.key == other.key
            and self.phases == other.phases
            and np.array_equal(self.z, other.z)
            and self.i_max == other.i_max
            and self.switchable == other.switchable
            and self.weight == other.weight
            and ys_eq
        )

    @property
    def key(self):
        return (self.from_node, self.to_node)


@dataclass(frozen=True, eq=False)
class FeederModel:
    nodes: tuple
    lines: tuple
    nominal_voltage: float  # line-to-ground magnitude, volts
    pcc_node: object
    price_pcc: float
    angles: dict = field(default_factory=lambda: dict(DEFAULT_ANGLES))

    def __eq__(self, other):
        if not isinstance(other, FeederModel):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.lines == other.lines
            and self.nominal_voltage == other.nominal_voltage
            and self.pcc_node == other.pcc_node
            and self.price_pcc == other.price_pcc
            and self.angles == other.angles
        )

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    def switchable_lines(self):
        return [ln for ln in self.lines if ln.switchable]

    def dg_nodes(self):
        return [n for n in self.nodes if n.dg is not None]

    def line_phase_count(self):
        """Total number of (line, phase) slots, i.e. sum of |P_mn| over all lines."""
        return sum(len(ln.phases) for ln in self.lines)


def validate_feeder(model):
    """Check all feeder invariants; raise FeederModelError on the first violation."""
    ids = model.node_ids
    if len(set(ids)) != len(ids):
        raise FeederModelError("duplicate node ids")
    if model.pcc_node not in ids:
        raise FeederModelError(f"PCC node {model.pcc_node!r} not present")
    if model.nominal_voltage <= 0:
        raise FeederModelError("nominal voltage must be positive")
    if set(model.angles) != set(PHASES):
        raise FeederModelError("nominal angles must cover phases a, b, c")

    by_id = {n.id: n for n in model.nodes}
    for n in model.nodes:
        if not n.phases or set(n.phases) - set(PHASES):
            raise FeederModelError(f"node {n.id}: invalid phase set {n.phases}")
        for ph in n.load:
            if ph not in n.phases:
                raise FeederModelError(f"node {n.id}: load on undeclared phase {ph}")
        for u in n.res:
            if u.phase not in n.phases:
                raise FeederModelError(f"node {n.id}: RES on undeclared phase {u.phase}")
            if u.kind not in ("pv", "wind"):
                raise FeederModelError(f"node {n.id}: unknown RES kind {u.kind!r}")
        if n.dg is not None:
            if n.dg.p_min > n.dg.p_max or n.dg.q_min > n.dg.q_max:
                raise FeederModelError(f"node {n.id}: DG box limits inverted")

    seen_edges = set()
    for ln in model.lines:
        tag = f"line ({ln.from_node},{ln.to_node})"
        if ln.key in seen_edges:
            raise FeederModelError(f"{tag}: duplicate directed edge")
        seen_edges.add(ln.key)
        for end in ln.key:
            if end not in by_id:
                raise FeederModelError(f"{tag}: dangling node id {end!r}")
        if set(ln.phases) - set(by_id[ln.from_node].phases) or set(ln.phases) - set(
            by_id[ln.to_node].phases
        ):
            raise FeederModelError(f"{tag}: line phases not declared at both endpoints")
        k = len(ln.phases)
        if ln.z.shape != (k, k):
            raise FeederModelError(f"{tag}: impedance matrix shape {ln.z.shape} != ({k},{k})")
        if not np.allclose(ln.z, ln.z.T):
            raise FeederModelError(f"{tag}: impedance matrix not symmetric")
        if abs(np.linalg.det(ln.z)) < 1e-12:
            raise FeederModelError(f"{tag}: singular impedance")
        if ln.i_max <= 0:
            raise FeederModelError(f"{tag}: i_max must be positive")
        if ln.switchable and ln.weight <= 0:
            raise FeederModelError(f"{tag}: switchable line needs positive weight")
        if ln.y_shunt is not None and ln.y_shunt.shape != (k,):
            raise FeederModelError(f"{tag}: y_shunt must have one entry per phase")

    # connectivity with every switchable line closed
    adj = {i: set() for i in ids}
    for ln in model.lines:
        adj[ln.from_node].add(ln.to_node)
        adj[ln.to_node].add(ln.from_node)
    stack, seen = [model.pcc_node], {model.pcc_node}
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if seen != set(ids):
        raise FeederModelError(f"graph not connected: unreachable nodes {sorted(set(ids) - seen, key=str)}")
    return model


# ---------------------------------------------------------------------------
# stacked current coordinates and Kirchhoff incidence

@dataclass(frozen=True)
class CurrentIndexing:
    """Slot table for the stacked current vector.

    slots[i] = (line_index, phase); slot i owns coordinates (2i, 2i+1)
    holding the real and imaginary part of that line-phase current.
    """

    slots: tuple
    _offset: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self):
        return 2 * len(self.slots)

    def coords(self, line_index, phase):
        i = self._offset[(line_index, phase)]
        return 2 * i, 2 * i + 1

    def line_coords(self, line_index):
        """All coordinates owned by one line, in slot order."""
        out = []
        for i, (li, _) in enumerate(self.slots):
            if li == line_index:
                out.extend((2 * i, 2 * i + 1))
        return out

    def complex_currents(self, xi):
        """Map a stacked vector to {(line_index, phase): complex amperes}."""
        out = {}
        for i, (li, ph) in enumerate(self.slots):
            out[(li, ph)] = complex(xi[2 * i], xi[2 * i + 1])
        return out


@dataclass(frozen=True)
class IncidenceOperator:
    """Sparse per-(node, phase) row pairs mapping xi to injected current.

    Sign convention: +1 on outgoing line coordinates, -1 on incoming, so
    the row pair applied to xi equals the injection implied by Kirchhoff's
    current law.
    """

    matrix: sp.csr_matrix
    row_index: dict  # (node_id, phase) -> first of two consecutive rows

    def block(self, node_id, phase):
        r = self.row_index[(node_id, phase)]
        return self.matrix[r : r + 2]

    def injection(self, node_id, phase, xi):
        return self.block(node_id, phase) @ xi


def build_indexing(model):
    slots = []
    for li, ln in enumerate(model.lines):
        for ph in ln.phases:
            slots.append((li, ph))
    offset = {slot: i for i, slot in enumerate(slots)}
    return CurrentIndexing(tuple(slots), offset)


def build_incidence(model):
    """Return (CurrentIndexing, IncidenceOperator) for a validated model."""
    idx = build_indexing(model)
    rows, cols, vals = [], [], []
    row_index = {}
    r = 0
    for n in model.nodes:
        for ph in n.phases:
            row_index[(n.id, ph)] = r
            r += 2
    for li, ln in enumerate(model.lines):
        for ph in ln.phases:
            cre, cim = idx.coords(li, ph)
            ro = row_index[(ln.from_node, ph)]
            rows += [ro, ro + 1]
            cols += [cre, cim]
            vals += [1.0, 1.0]
            ri = row_index[(ln.to_node, ph)]
            rows += [ri, ri + 1]
            cols += [cre, cim]
            vals += [-1.0, -1.0]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(r, idx.dim))
    return idx, IncidenceOperator(mat, row_index)


def loss_matrix(model, idx):
    """PSD quadratic form giving total ohmic loss a^T R a + b^T R b per line."""
    rows, cols, vals = [], [], []
    for li, ln in enumerate(model.lines):
        R = np.real(ln.z)
        phases = ln.phases
        for i, pi in enumerate(phases):
            ci = idx.coords(li, pi)
            for j, pj in enumerate(phases):
                cj = idx.coords(li, pj)
                if R[i, j] != 0.0:
                    rows += [ci[0], ci[1]]
                    cols += [cj[0], cj[1]]
                    vals += [R[i, j], R[i, j]]
    return sp.csr_matrix((vals, (rows, cols)), shape=(idx.dim, idx.dim))


@dataclass(frozen=True)
class InjectionMap:
    """Per-phase linearization around the nominal voltage.

    Phi maps (P, Q) to the approximate injected current 2-vector; phi and
    phibar recover P and Q from an injected-current 2-vector exactly:
    phi @ Phi @ [P, Q] == P and phibar @ Phi @ [P, Q] == Q.
    """

    Phi: np.ndarray
    phi: np.ndarray
    phibar: np.ndarray


def nominal_injection_map(model):
    """Return {phase: InjectionMap} built from the model's nominal angles."""
    out = {}
    m = model.nominal_voltage
    for ph in PHASES:
        a = model.angles[ph]
        c, s = math.cos(a), math.sin(a)
        Phi = np.array([[c / m, s / m], [s / m, -c / m]]).T
        phi = np.array([m * c, m * s])
        phibar = np.array([m * s, -m * c])
        out[ph] = InjectionMap(Phi, phi, phibar)
    return out


def shunt_to_loads(model):
    """Fold line shunt admittances into constant endpoint loads.

    Each half-shunt (1/2) y at a line end absorbs approximately
    S = |M_N|^2 * conj(y/2) at nominal voltage; the returned model carries
    that extra load and no shunt terms.  Models without shunts are
    returned unchanged.
    """
    if all(ln.y_shunt is None for ln in model.lines):
        return model
    extra = {}  # (node, phase) -> complex VA
    m2 = model.nominal_voltage**2
    new_lines = []
    for ln in model.lines:
        if ln.y_shunt is None:
            new_lines.append(ln)
            continue
        for k, ph in enumerate(ln.phases):
            s = m2 * np.conj(ln.y_shunt[k] / 2.0)
            for end in (ln.from_node, ln.to_node):
                extra[(end, ph)] = extra.get((end, ph), 0j) + s
        new_lines.append(
            LineSpec(ln.from_node, ln.to_node, ln.phases, ln.z, ln.i_max, ln.switchable, ln.weight, None)
        )
    new_nodes = []
    for n in model.nodes:
        load = dict(n.load)
        touched = False
        for ph in n.phases:
            if (n.id, ph) in extra:
                load[ph] = load.get(ph, 0j) + extra[(n.id, ph)]
                touched = True
        new_nodes.append(
            NodeSpec(n.id, n.phases, load, n.dg, n.res, n.xy) if touched else n
        )
    return FeederModel(
        tuple(new_nodes), tuple(new_lines), model.nominal_voltage, model.pcc_node, model.price_pcc, dict(model.angles)
    )


# ---------------------------------------------------------------------------
# document parsing / serialization

_TOP_KEYS = {
    "nominal_voltage_v",
    "pcc_node",
    "price_pcc",
    "impedance_configs",
    "nodes",
    "lines",
    "nominal_angles_deg",
}
_NODE_KEYS = {"id", "phases", "load_kw", "load_kvar", "dg", "res", "xy"}
_DG_KEYS = {"p_min_kw", "p_max_kw", "q_min_kvar", "q_max_kvar", "cost_per_kw"}
_RES_KEYS = {"phase", "capacity_kw", "kind", "forecast_kw"}
_LINE_KEYS = {
    "from",
    "to",
    "phases",
    "config",
    "length_ft",
    "r_ohm",
    "x_ohm",
    "i_max_a",
    "switchable",
    "weight",
    "y_shunt_us",
}
_CONFIG_KEYS = {"phases", "r_per_mile", "x_per_mile"}


def _reject_unknown(obj, allowed, path):
    for k in obj:
        if k not in allowed:
            raise FeederFormatError(f"{path}.{k}", "unknown key")


def _need(obj, key, path, types=None):
    if key not in obj:
        raise FeederFormatError(f"{path}.{key}", "missing required key")
    v = obj[key]
    if types is not None and not isinstance(v, types):
        raise FeederFormatError(f"{path}.{key}", f"expected {types}, got {type(v).__name__}")
    return v


def _parse_phases(raw, path):
    if isinstance(raw, str):
        raw = list(raw)
    if not isinstance(raw, list) or not raw or set(raw) - set(PHASES):
        raise FeederFormatError(path, f"invalid phase set {raw!r}")
    return _sorted_phases(raw)


def _phase_map(raw, phases, path):
    if not isinstance(raw, dict):
        raise FeederFormatError(path, "expected per-phase mapping")
    out = {}
    for ph, v in raw.items():
        if ph not in phases:
            raise FeederFormatError(f"{path}.{ph}", "value on undeclared phase")
        if not isinstance(v, (int, float)):
            raise FeederFormatError(f"{path}.{ph}", "expected number")
        out[ph] = float(v)
    return out


def _matrix(raw, k, path):
    try:
        m = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise FeederFormatError(path, "expected numeric matrix") from None
    if m.shape != (k, k):
        raise FeederFormatError(path, f"expected {k}x{k} matrix, got shape {m.shape}")
    return m


def parse_feeder(source):
    """Parse and validate a feeder document (JSON text, path or file object)."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, os.PathLike) or (
        isinstance(source, str) and not source.lstrip().startswith("{") and os.path.exists(source)
    ):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FeederFormatError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FeederFormatError("$", "top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, "$")

    m_n = float(_need(doc, "nominal_voltage_v", "$", (int, float)))
    pcc = _need(doc, "pcc_node", "$")
    price = float(_need(doc, "price_pcc", "$", (int, float)))
    angles = dict(DEFAULT_ANGLES)
    if "nominal_angles_deg" in doc:
        raw = doc["nominal_angles_deg"]
        if not isinstance(raw, dict) or set(raw) != set(PHASES):
            raise FeederFormatError("$.nominal_angles_deg", "expected angles for a, b, c")
        angles = {ph: math.radians(float(raw[ph])) for ph in PHASES}

    configs = {}
    for cid, cfg in doc.get("impedance_configs", {}).items():
        p = f"$.impedance_configs.{cid}"
        if not isinstance(cfg, dict):
            raise FeederFormatError(p, "expected object")
        _reject_unknown(cfg, _CONFIG_KEYS, p)
        phases = _parse_phases(_need(cfg, "phases", p), f"{p}.phases")
        k = len(phases)
        r = _matrix(_need(cfg, "r_per_mile", p), k, f"{p}.r_per_mile")
        x = _matrix(_need(cfg, "x_per_mile", p), k, f"{p}.x_per_mile")
        configs[cid] = (phases, r + 1j * x)

    nodes = []
    for i, raw in enumerate(_need(doc, "nodes", "$", list)):
        p = f"$.nodes[{i}]"
        if not isinstance(raw, dict):
            raise FeederFormatError(p, "expected object")
        _reject_unknown(raw, _NODE_KEYS, p)
        nid = _need(raw, "id", p)
        phases = _parse_phases(_need(raw, "phases", p), f"{p}.phases")
        kw = _phase_map(raw.get("load_kw", {}), phases, f"{p}.load_kw")
        kvar = _phase_map(raw.get("load_kvar", {}), phases, f"{p}.load_kvar")
        load = {}
        for ph in phases:
            s = 1e3 * complex(kw.get(ph, 0.0), kvar.get(ph, 0.0))
            if s != 0:
                load[ph] = s
        dg = None
        if "dg" in raw:
            d = raw["dg"]
            if not isinstance(d, dict):
                raise FeederFormatError(f"{p}.dg", "expected object")
            _reject_unknown(d, _DG_KEYS, f"{p}.dg")
            dg = DgSpec(
                1e3 * float(d.get("p_min_kw", 0.0)),
                1e3 * float(_need(d, "p_max_kw", f"{p}.dg", (int, float))),
                1e3 * float(d.get("q_min_kvar", 0.0)),
                1e3 * float(d.get("q_max_kvar", 0.0)),
                1e-3 * float(d.get("cost_per_kw", 0.0)),
            )
        res = []
        for j, u in enumerate(raw.get("res", [])):
            pu = f"{p}.res[{j}]"
            if not isinstance(u, dict):
                raise FeederFormatError(pu, "expected object")
            _reject_unknown(u, _RES_KEYS, pu)
            ph = _need(u, "phase", pu, str)
            if ph not in phases:
                raise FeederFormatError(f"{pu}.phase", "RES on undeclared phase")
            res.append(
                ResUnit(
                    ph,
                    1e3 * float(_need(u, "capacity_kw", pu, (int, float))),
                    _need(u, "kind", pu, str),
                    1e3 * float(_need(u, "forecast_kw", pu, (int, float))),
                )
            )
        xy = tuple(raw["xy"]) if "xy" in raw else None
        nodes.append(NodeSpec(nid, phases, load, dg, tuple(res), xy))

    lines = []
    for i, raw in enumerate(_need(doc, "lines", "$", list)):
        p = f"$.lines[{i}]"
        if not isinstance(raw, dict):
            raise FeederFormatError(p, "expected object")
        _reject_unknown(raw, _LINE_KEYS, p)
        frm = _need(raw, "from", p)
        to = _need(raw, "to", p)
        phases = _parse_phases(_need(raw, "phases", p), f"{p}.phases")
        k = len(phases)
        if "config" in raw:
            cid = raw["config"]
            if cid not in configs:
                raise FeederFormatError(f"{p}.config", f"unknown impedance config {cid!r}")
            cfg_phases, z_mile = configs[cid]
            if phases != cfg_phases:
                raise FeederFormatError(f"{p}.phases", f"phase set differs from config {cid!r}")
            length = float(_need(raw, "length_ft", p, (int, float)))
            z = (length / FT_PER_MILE) * z_mile
        else:
            r = _matrix(_need(raw, "r_ohm", p), k, f"{p}.r_ohm")
            x = _matrix(_need(raw, "x_ohm", p), k, f"{p}.x_ohm")
            z = r + 1j * x
        y_shunt = None
        if "y_shunt_us" in raw:
            ys = np.array(raw["y_shunt_us"], dtype=float)
            if ys.shape != (k,):
                raise FeederFormatError(f"{p}.y_shunt_us", "expected one entry per phase")
            y_shunt = 1e-6j * ys
        lines.append(
            LineSpec(
                frm,
                to,
                phases,
                z,
                float(_need(raw, "i_max_a", p, (int, float))),
                bool(raw.get("switchable", False)),
                float(raw.get("weight", 1.0)),
                y_shunt,
            )
        )

    model = FeederModel(tuple(nodes), tuple(lines), m_n, pcc, price, angles)
    return validate_feeder(model)


def serialize_feeder(model):
    """Render a model back to the document format; inverse of parse_feeder."""
    doc = {
        "nominal_voltage_v": model.nominal_voltage,
        "pcc_node": model.pcc_node,
        "price_pcc": model.price_pcc,
        "nominal_angles_deg": {ph: math.degrees(model.angles[ph]) for ph in PHASES},
        "nodes": [],
        "lines": [],
    }
    for n in model.nodes:
        raw = {"id": n.id, "phases": "".join(n.phases)}
        kw = {ph: s.real / 1e3 for ph, s in n.load.items() if s.real != 0}
        kvar = {ph: s.imag / 1e3 for ph, s in n.load.items() if s.imag != 0}
        if kw:
            raw["load_kw"] = kw
        if kvar:
            raw["load_kvar"] = kvar
        if n.dg is not None:
            raw["dg"] = {
                "p_min_kw": n.dg.p_min / 1e3,
                "p_max_kw": n.dg.p_max / 1e3,
                "q_min_kvar": n.dg.q_min / 1e3,
                "q_max_kvar": n.dg.q_max / 1e3,
                "cost_per_kw": n.dg.cost_coeff * 1e3,
            }
        if n.res:
            raw["res"] = [
                {
                    "phase": u.phase,
                    "capacity_kw": u.capacity_w / 1e3,
                    "kind": u.kind,
                    "forecast_kw": u.forecast_w / 1e3,
                }
                for u in n.res
            ]
        if n.xy is not None:
            raw["xy"] = list(n.xy)
        doc["nodes"].append(raw)
    for ln in model.lines:
        raw = {
            "from": ln.from_node,
            "to": ln.to_node,
            "phases": "".join(ln.phases),
            "r_ohm": np.real(ln.z).tolist(),
            "x_ohm": np.imag(ln.z).tolist(),
            "i_max_a": ln.i_max,
            "switchable": ln.switchable,
            "weight": ln.weight,
        }
        if ln.y_shunt is not None:
            raw["y_shunt_us"] = (np.imag(ln.y_shunt) * 1e6).tolist()
        doc["lines"].append(raw)
    return json.dumps(doc, indent=2, sort_keys=True)


def node_distance_matrix(model, res_nodes):
    """Pairwise distance between RES-hosting nodes: geometric if coordinates
    are present on all of them, otherwise hop distance on the full graph."""
    if all(model.node(n).xy is not None for n in res_nodes):
        pts = np.array([model.node(n).xy for n in res_nodes], dtype=float)
        diff = pts[:, None, :] - pts[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))
    ids = model.node_ids
    pos = {v: i for i, v in enumerate(ids)}
    rows, cols = [], []
    for ln in model.lines:
        rows.append(pos[ln.from_node])
        cols.append(pos[ln.to_node])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
    from scipy.sparse.csgraph import shortest_path

    hops = shortest_path(adj, directed=False, unweighted=True)
    sel = [pos[n] for n in res_nodes]
    return hops[np.ix_(sel, sel)]
