"""Forecast-error scenarios: sample-size bounds, correlated truncated
sampling, and reduction of the sampled balance constraints to one bound per
(node, phase).

Run with:  python3 demos/02_scenario_sampling.py
"""

from pathlib import Path

import numpy as np

import gridreconfig
from gridreconfig import feeder as fd, scenarios as sc

DATA = Path(gridreconfig.__file__).parent / "data"


def main():
    model = fd.parse_feeder(DATA / "small6.json")
    spec, corr = sc.load_scenario_spec(DATA / "scenario_small.json", model)

    # how many samples buy a (rho, beta) guarantee on the chance constraint
    n_dg = sum(len(n.phases) for n in model.dg_nodes())
    for rho, beta in ((0.01, 0.05), (0.1, 0.1)):
        k = sc.min_sample_size_mr3(rho, beta, n_dg, model.line_phase_count())
        print(f"rho={rho}, beta={beta}: need K = {k} samples")

    scen = sc.sample_scenarios(model, spec, corr, k=2000, seed=1)
    print(f"\nsampled {scen.k} net-injection scenarios over slots {scen.slots}")
    print("per-slot active-power statistics (kW):")
    for j, slot in enumerate(scen.slots):
        col = scen.p[:, j] / 1e3
        print(
            f"  {slot}: mean {col.mean():8.2f}, std {col.std():6.2f}, "
            f"min {col.min():8.2f}"
        )

    bounds = sc.reduce_scenarios(scen)
    print("\nreduced bounds (componentwise minima, kW / kvar):")
    for slot, (p, q) in bounds.as_dict().items():
        print(f"  {slot}: p >= {p / 1e3:8.2f}, q >= {q / 1e3:8.2f}")

    # satisfying the reduced bounds is equivalent to satisfying every sample
    lhs_p = bounds.p_bound - 1.0
    ok_all = np.all(lhs_p[None, :] <= scen.p)
    print(f"\na point inside the bounds satisfies all {scen.k} samples: {ok_all}")


if __name__ == "__main__":
    main()
