"""Regularization sweep on the 37-node fixture: as the group penalty grows,
switchable-line current groups collapse to zero one after another and the
operating topology moves from fully meshed toward radial.

Run with:  python3 demos/04_lambda_sweep_37node.py   (about half a minute)
"""

from pathlib import Path

import gridreconfig
from gridreconfig import feeder as fd, reconfig, scenarios as sc

DATA = Path(gridreconfig.__file__).parent / "data"


def main():
    model = fd.parse_feeder(DATA / "feeder37.json")
    spec, corr = sc.load_scenario_spec(DATA / "scenario_setup1.json", model)
    bounds = sc.reduce_scenarios(sc.sample_scenarios(model, spec, corr, 3000, seed=7))
    ladder = [0.0, 10.0, 20.0, 35.0, 50.0, 75.0, 200.0, 1000.0]

    sweep = reconfig.sweep_lambda(model, bounds, reconfig.CostSpec(), ladder)

    header = "line      " + "".join(f"{lam:>9g}" for lam in ladder)
    print("sum of per-phase |I| (A) per switchable line and lambda; 0 = open\n")
    print(header)
    for i, key in enumerate(sweep.switchable_keys):
        row = "".join(f"{v:9.1f}" for v in sweep.matrix[i])
        print(f"{str(key):<10}{row}")
    print("\nopen-switch count per lambda:")
    counts = [sweep.open_count(j) for j in range(len(ladder))]
    for lam, c in zip(ladder, counts):
        print(f"  lambda {lam:>6g}: {c} open")


if __name__ == "__main__":
    main()
