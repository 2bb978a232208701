#!/usr/bin/env python3
"""Generate the feeder fixtures shipped under src/gridreconfig/data/.

The 37-node feeder mirrors the layout of the modified IEEE 37-node study:
a radial backbone plus eight added three-phase lines (configs 723/724),
17 switchable branches, DG at seven nodes, and PV/wind units spread over
the network.  Loads and RES sizes are chosen so that the network is
feasible under setup-1 forecast-error statistics with margin on the
300/150/100 A ampacity caps.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "src", "gridreconfig", "data")

CONFIGS = {
    "721": {
        "phases": "abc",
        "r_per_mile": [
            [0.2926, 0.0673, 0.0337],
            [0.0673, 0.2646, 0.0673],
            [0.0337, 0.0673, 0.2926],
        ],
        "x_per_mile": [
            [0.1973, -0.0368, -0.0417],
            [-0.0368, 0.1900, -0.0368],
            [-0.0417, -0.0368, 0.1973],
        ],
    },
    "722": {
        "phases": "abc",
        "r_per_mile": [
            [0.4751, 0.1629, 0.1234],
            [0.1629, 0.4488, 0.1629],
            [0.1234, 0.1629, 0.4751],
        ],
        "x_per_mile": [
            [0.2973, -0.0326, -0.0607],
            [-0.0326, 0.2678, -0.0326],
            [-0.0607, -0.0326, 0.2973],
        ],
    },
    "723": {
        "phases": "abc",
        "r_per_mile": [
            [1.2936, 0.4871, 0.4585],
            [0.4871, 1.3022, 0.4871],
            [0.4585, 0.4871, 1.2936],
        ],
        "x_per_mile": [
            [0.6713, 0.2111, 0.1521],
            [0.2111, 0.6326, 0.2111],
            [0.1521, 0.2111, 0.6713],
        ],
    },
    "724": {
        "phases": "abc",
        "r_per_mile": [
            [2.0952, 0.5204, 0.4926],
            [0.5204, 2.1068, 0.5204],
            [0.4926, 0.5204, 2.0952],
        ],
        "x_per_mile": [
            [0.7758, 0.2738, 0.2123],
            [0.2738, 0.7398, 0.2738],
            [0.2123, 0.2738, 0.7758],
        ],
    },
}

# radial backbone: (from, to, config, length_ft)
TREE = [
    (1, 2, "721", 1850),
    (2, 3, "721", 960),
    (3, 4, "722", 1320),
    (4, 5, "723", 600),
    (5, 6, "724", 820),
    (2, 7, "721", 960),
    (7, 8, "722", 1320),
    (8, 9, "723", 520),
    (9, 10, "724", 800),
    (8, 11, "723", 1280),
    (11, 12, "723", 400),
    (12, 13, "724", 360),
    (13, 14, "724", 1320),
    (14, 15, "724", 520),
    (15, 16, "723", 640),
    (3, 17, "721", 1100),
    (17, 18, "723", 600),
    (18, 19, "723", 1000),
    (19, 20, "723", 560),
    (20, 21, "724", 400),
    (17, 22, "722", 1320),
    (22, 23, "722", 600),
    (23, 24, "723", 760),
    (23, 25, "722", 920),
    (25, 26, "722", 1280),
    (26, 27, "723", 320),
    (27, 28, "724", 560),
    (28, 29, "724", 640),
    (29, 30, "723", 400),
    (30, 31, "724", 400),
    (26, 32, "722", 800),
    (32, 33, "723", 560),
    (33, 34, "724", 280),
    (34, 35, "724", 680),
    (35, 36, "724", 920),
    (36, 37, "724", 560),
]

# eight added lines: (from, to, config, length_ft)
ADDED = [
    (8, 14, "723", 1144),
    (6, 20, "724", 1320),
    (10, 16, "724", 847),
    (20, 26, "724", 815),
    (16, 24, "724", 1580),
    (10, 17, "724", 1137),
    (24, 33, "724", 1315),
    (26, 35, "724", 377),
]

SWITCHABLE = {
    (1, 2),
    (3, 4),
    (6, 20),
    (7, 8),
    (8, 9),
    (8, 14),
    (15, 16),
    (16, 24),
    (10, 16),
    (10, 17),
    (17, 18),
    (20, 26),
    (23, 24),
    (23, 25),
    (24, 33),
    (29, 30),
    (26, 35),
}
ADDED_KEYS = {(f, t) for (f, t, _c, _l) in ADDED}

# per-node per-phase active load in kW; reactive = 0.45 * active
LOADS_KW = {
    2: {"a": 30, "b": 30, "c": 30},
    4: {"a": 20, "b": 24, "c": 20},
    5: {"b": 25, "c": 20},
    6: {"a": 28, "c": 22},
    7: {"a": 24, "b": 20, "c": 24},
    9: {"a": 20, "b": 26},
    10: {"a": 24, "b": 24, "c": 28},
    11: {"b": 22, "c": 18},
    12: {"a": 26, "c": 20},
    13: {"a": 18, "b": 22, "c": 18},
    14: {"a": 22, "b": 18},
    15: {"b": 20, "c": 24},
    16: {"a": 28, "b": 24, "c": 24},
    18: {"a": 20, "c": 24},
    19: {"a": 24, "b": 28, "c": 22},
    20: {"a": 26, "b": 22, "c": 26},
    21: {"b": 18, "c": 20},
    22: {"a": 22, "b": 18},
    24: {"a": 30, "b": 26, "c": 28},
    25: {"a": 22, "c": 22},
    27: {"a": 18, "b": 20},
    28: {"a": 24, "b": 24, "c": 26},
    29: {"b": 18, "c": 16},
    30: {"a": 20, "b": 22, "c": 20},
    31: {"a": 16, "c": 18},
    32: {"a": 26, "b": 24, "c": 24},
    33: {"a": 18, "b": 16},
    34: {"b": 18, "c": 18},
    35: {"a": 20, "c": 18},
    36: {"a": 16, "b": 18, "c": 16},
    37: {"a": 14, "b": 14},
}

DG_NODES = [10, 12, 16, 19, 24, 28, 32]

# RES units: node -> list of (phase, kind, capacity_kw)
RES = {
    5: [("a", "pv", 24), ("b", "pv", 24), ("c", "pv", 24)],
    9: [("a", "wind", 40), ("b", "wind", 40), ("c", "wind", 40)],
    13: [("a", "pv", 20), ("b", "pv", 20), ("c", "pv", 20)],
    21: [("b", "pv", 18), ("c", "pv", 18)],
    25: [("a", "pv", 22), ("c", "pv", 22)],
    28: [("a", "wind", 30), ("b", "wind", 30), ("c", "wind", 30)],
    30: [("a", "pv", 16), ("b", "pv", 16)],
    34: [("b", "pv", 20), ("c", "pv", 20)],
    36: [("a", "wind", 24), ("c", "wind", 24)],
}
PV_FORECAST_FRAC = 0.90
WIND_FORECAST_FRAC = 0.70

# rough planar layout, feet (for the distance-based RES correlation)
XY = {
    1: (0, 0), 2: (0, -1850), 3: (900, -2700), 4: (2100, -2500), 5: (2650, -2250),
    6: (3400, -2050), 7: (-900, -2600), 8: (-2100, -3200), 9: (-2500, -2700),
    10: (-3200, -2400), 11: (-2600, -4300), 12: (-2300, -4600), 13: (-2600, -4900),
    14: (-1500, -4400), 15: (-1100, -4700), 16: (-600, -5100), 17: (1800, -3400),
    18: (2400, -3300), 19: (3300, -3000), 20: (3800, -2700), 21: (4200, -2700),
    22: (1700, -4700), 23: (1600, -5300), 24: (900, -5500), 25: (2400, -5800),
    26: (3500, -6300), 27: (3400, -6600), 28: (3200, -7100), 29: (3400, -7700),
    30: (3000, -7900), 31: (3000, -8300), 32: (4300, -6400), 33: (4700, -6700),
    34: (4900, -6900), 35: (5400, -7200), 36: (6200, -7400), 37: (6700, -7600),
}


def line_doc(frm, to, cfg, length):
    key = (frm, to)
    if key == (1, 2):
        i_max = 300.0
    elif key in ((2, 3), (3, 17)):
        i_max = 150.0
    else:
        i_max = 100.0
    doc = {
        "from": frm,
        "to": to,
        "phases": "abc",
        "config": cfg,
        "length_ft": length,
        "i_max_a": i_max,
    }
    if key in SWITCHABLE:
        doc["switchable"] = True
        doc["weight"] = 1.5 if key in ADDED_KEYS else 1.0
    return doc


def feeder37(extra_switchable=()):
    nodes = []
    for nid in range(1, 38):
        nd = {"id": nid, "phases": "abc", "xy": list(XY[nid])}
        if nid in LOADS_KW:
            kw = LOADS_KW[nid]
            nd["load_kw"] = {ph: float(v) for ph, v in kw.items()}
            nd["load_kvar"] = {ph: round(0.45 * v, 3) for ph, v in kw.items()}
        if nid in DG_NODES:
            nd["dg"] = {"p_min_kw": 0.0, "p_max_kw": 50.0, "cost_per_kw": 500.0}
        if nid in RES:
            frac = {"pv": PV_FORECAST_FRAC, "wind": WIND_FORECAST_FRAC}
            nd["res"] = [
                {
                    "phase": ph,
                    "capacity_kw": float(cap),
                    "kind": kind,
                    "forecast_kw": round(frac[kind] * cap, 3),
                }
                for ph, kind, cap in RES[nid]
            ]
        nodes.append(nd)
    lines = [line_doc(*spec) for spec in TREE + ADDED]
    for ln in lines:
        if (ln["from"], ln["to"]) in set(extra_switchable):
            ln["switchable"] = True
            ln.setdefault("weight", 1.0)
    return {
        "nominal_voltage_v": 2771.3,
        "pcc_node": 1,
        "price_pcc": 0.001,  # currency per W -> 1.0 per kW
        "impedance_configs": CONFIGS,
        "nodes": nodes,
        "lines": lines,
    }


def small6():
    """Six nodes, single phase, five switchable lines: quick-turnaround fixture."""
    nodes = [
        {"id": 1, "phases": "a"},
        {"id": 2, "phases": "a", "load_kw": {"a": 40.0}, "load_kvar": {"a": 14.0}},
        {"id": 3, "phases": "a", "load_kw": {"a": 35.0}, "load_kvar": {"a": 12.0},
         "dg": {"p_min_kw": 0.0, "p_max_kw": 30.0, "cost_per_kw": 500.0}},
        {"id": 4, "phases": "a", "load_kw": {"a": 30.0}, "load_kvar": {"a": 10.0}},
        {"id": 5, "phases": "a", "load_kw": {"a": 25.0}, "load_kvar": {"a": 9.0},
         "res": [{"phase": "a", "capacity_kw": 20.0, "kind": "pv", "forecast_kw": 18.0}]},
        {"id": 6, "phases": "a", "load_kw": {"a": 20.0}, "load_kvar": {"a": 7.0}},
    ]
    z = lambda r, x: {"r_ohm": [[r]], "x_ohm": [[x]]}
    lines = [
        {"from": 1, "to": 2, "phases": "a", "i_max_a": 150.0, **z(0.25, 0.5)},
        {"from": 2, "to": 3, "phases": "a", "i_max_a": 80.0, "switchable": True, **z(0.4, 0.7)},
        {"from": 2, "to": 4, "phases": "a", "i_max_a": 80.0, "switchable": True, **z(0.5, 0.8)},
        {"from": 3, "to": 5, "phases": "a", "i_max_a": 80.0, "switchable": True, **z(0.45, 0.75)},
        {"from": 4, "to": 5, "phases": "a", "i_max_a": 80.0, "switchable": True, "weight": 1.2, **z(0.5, 0.85)},
        {"from": 4, "to": 6, "phases": "a", "i_max_a": 80.0, **z(0.35, 0.6)},
        {"from": 3, "to": 6, "phases": "a", "i_max_a": 80.0, "switchable": True, "weight": 1.5, **z(0.55, 0.9)},
    ]
    return {
        "nominal_voltage_v": 2400.0,
        "pcc_node": 1,
        "price_pcc": 0.001,
        "nodes": nodes,
        "lines": lines,
    }


def main():
    os.makedirs(DATA, exist_ok=True)
    out = {
        "feeder37.json": feeder37(),
        # variant for multi-area runs: the (8,11) boundary line also carries
        # a sectionalizing switch, as assumed by the distributed scheme
        "feeder37_areas.json": feeder37(extra_switchable=[(8, 11)]),
        "small6.json": small6(),
        "scenario_setup1.json": {
            "res_sigma_frac": {"pv": 0.05, "wind": 0.20},
            "load_sigma_frac": {"default": 0.05, "2": 0.04, "16": 0.06, "24": 0.06, "30": 0.04},
            "truncation_pct": [0.13, 99.87],
            "correlation": {"kind": "exponential-distance", "decay_length": 2000.0},
        },
        "scenario_setup2.json": {
            "res_sigma_frac": {"pv": 0.0005, "wind": 0.002},
            "load_sigma_frac": {"default": 0.0045},
            "truncation_pct": [0.13, 99.87],
            "correlation": {"kind": "exponential-distance", "decay_length": 2000.0},
        },
        "scenario_small.json": {
            "res_sigma_frac": {"pv": 0.05, "wind": 0.20},
            "load_sigma_frac": {"default": 0.05},
            "truncation_pct": [0.13, 99.87],
            "correlation": {"kind": "independent", "decay_length": 1.0},
        },
        "areas37.json": {
            "area1": [11, 12, 13, 14, 15],
            "area2": [18, 19, 20, 21],
            "area3": [4, 5, 6],
        },
        "areas_small.json": {"a1": [3, 5]},
        "run_small.json": {
            "feeder": "small6.json",
            "scenario_spec": "scenario_small.json",
            "lambda": 50.0,
            "rho": 0.1,
            "beta": 0.1,
            "samples": 500,
            "seed": 3,
        },
        "run37.json": {
            "feeder": "feeder37.json",
            "scenario_spec": "scenario_setup1.json",
            "lambda_list": [0.0, 10.0, 20.0, 35.0, 50.0, 75.0, 200.0, 1000.0],
            "rho": 0.01,
            "beta": 0.05,
            "samples": 3000,
            "seed": 7,
        },
        "run37_dist.json": {
            "feeder": "feeder37_areas.json",
            "scenario_spec": "scenario_setup1.json",
            "partition": "areas37.json",
            "lambda": 50.0,
            "kappa": 2.0,
            "admm": {"max_iters": 2000, "tol_gap": 1e-05},
            "rho": 0.01,
            "beta": 0.05,
            "samples": 3000,
            "seed": 7,
        },
    }
    for name, doc in out.items():
        path = os.path.join(DATA, name)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
