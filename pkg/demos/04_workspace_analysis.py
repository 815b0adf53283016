"""Workspace polygons: failure degradation and the decay-bound expansion.

Sweeps are slow at full angular resolution; this demo uses 24 rays, which is
plenty to see the shapes. Expect a few minutes of runtime.
"""

import numpy as np

from isotruss import analysis
from isotruss.scenario import load_scenario

from pathlib import Path

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

N_RAYS = 24


def main():
    scn = load_scenario(SCENARIOS / "workspace.json")
    topo, x0 = scn.build()
    home = x0[4:6]
    spec = scn.control_spec(home)

    print(f"single-failure degradation study at {N_RAYS} rays...")
    rep = analysis.workspace_degradation(topo, x0, spec, n_rays=N_RAYS, r_max=2.0)
    print(f"nominal area {rep.nominal.area:.2f} m^2")
    for r, ret in sorted(rep.retention.items()):
        print(f"  roller {r} failed: retention {100 * ret:.0f}%")

    print("\ngreedy failure order (most tolerable first)...")
    greedy = analysis.greedy_failure_order(topo, x0, spec, n_rays=N_RAYS, r_max=2.0)
    print("order:", greedy.order)
    print("cumulative areas:", [round(a, 2) for a in greedy.areas])

    print("\ndecay-bound versus hard-cutoff sweep (this is the slow one)...")
    cmp_scn = load_scenario(SCENARIOS / "dtcbf_compare.json")
    cmp_spec = cmp_scn.control_spec(home)
    cmp_rep = analysis.dtcbf_workspace_comparison(topo, x0, cmp_spec, n_rays=N_RAYS)
    print(f"hard cutoff {cmp_rep.hard.area:.2f} m^2, decay bound "
          f"{cmp_rep.dtcbf.area:.2f} m^2, ratio {cmp_rep.ratio:.2f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        def close(angles, radii):
            a = np.append(angles, angles[0])
            r = np.append(radii, radii[0])
            return home[0] + r * np.cos(a), home[1] + r * np.sin(a)

        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 5))
        ax1.plot(*close(rep.nominal.angles, rep.nominal.radii), "k-", lw=2,
                 label="all rollers")
        for r, poly in sorted(rep.per_failure.items()):
            ax1.plot(*close(poly.angles, poly.radii), alpha=0.7,
                     label=f"roller {r} failed")
        ax1.plot(*home, "r*", ms=12)
        ax1.set_aspect("equal")
        ax1.legend(fontsize=7)
        ax1.set_title("single-failure workspace degradation")

        ax2.plot(*close(cmp_rep.hard.angles, cmp_rep.hard.radii), "r-", lw=2,
                 label=f"hard cutoff ({cmp_rep.hard.area:.1f} m$^2$)")
        ax2.plot(*close(cmp_rep.dtcbf.angles, cmp_rep.dtcbf.radii), "c-", lw=2,
                 label=f"decay bound ({cmp_rep.dtcbf.area:.1f} m$^2$)")
        ax2.plot(*home, "r*", ms=12)
        ax2.set_aspect("equal")
        ax2.legend(fontsize=8)
        ax2.set_title("rigidity handling and reachable area")
        fig.savefig("demo_04_workspace.png", dpi=120, bbox_inches="tight")
        print("wrote demo_04_workspace.png")
    except Exception as exc:
        print(f"(figure skipped: {exc})")


if __name__ == "__main__":
    main()
