"""Multi-area consensus solve of the 37-node fixture: three local areas plus
a manager drive the tie-line current copies to agreement, reproducing the
centralized optimum while only exchanging per-tie current vectors.

Run with:  python3 demos/05_distributed_consensus.py   (about a minute)
"""

from pathlib import Path

import numpy as np

import gridreconfig
from gridreconfig import distributed as dist
from gridreconfig import feeder as fd, reconfig, scenarios as sc

DATA = Path(gridreconfig.__file__).parent / "data"


def main():
    model = fd.parse_feeder(DATA / "feeder37_areas.json")
    spec, corr = sc.load_scenario_spec(DATA / "scenario_setup1.json", model)
    bounds = sc.reduce_scenarios(sc.sample_scenarios(model, spec, corr, 500, seed=7))
    cost = reconfig.CostSpec()
    lam = 20.0

    part = dist.load_partition(DATA / "areas37.json", model)
    print(f"areas: {part.names}")
    print(f"tie lines: {[t.key for t in part.ties]}\n")

    central = reconfig.solve_centralized(reconfig.assemble(model, bounds, cost, lam))
    print(f"centralized objective: {central.objective:.2f}, open: {central.open_lines}\n")

    for kappa in (0.5, 1.0, 2.0):
        settings = dist.AdmmSettings(kappa=kappa, max_iters=2000, tol_gap=1e-4)
        sol, trace, messages = dist.run(
            model, bounds, cost, lam, part, settings, central=central
        )
        xc = central.solver_result.x
        rel = np.linalg.norm(sol.solver_result.x - xc) / np.linalg.norm(xc)
        traffic = sum(m.bytes for m in messages) / 1e3
        print(
            f"kappa={kappa:>3}: {trace.status} after {trace.iterations[-1]} iterations, "
            f"relative distance to centralized {rel:.1e}, "
            f"{traffic:.1f} kB exchanged"
        )

    # the constant-step dual-ascent baseline on the same decomposition is
    # far slower to close the consensus gap
    settings = dist.AdmmSettings(kappa=1.0, max_iters=60, tol_gap=1e-4, step=0.1)
    base = dist.subgradient_baseline(model, bounds, cost, lam, part, settings)
    print(
        f"\nsubgradient baseline after {len(base.iterations)} iterations: "
        f"worst tie gap {base.max_gap():.2f} A (consensus scheme closes the "
        f"gap to 1e-4 A in the runs above)"
    )


if __name__ == "__main__":
    main()
