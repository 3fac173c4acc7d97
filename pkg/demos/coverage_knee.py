"""Coverage between two gantries against mounting height for several thresholds."""
from jcscoop import presets
from jcscoop.cli import recommend
from jcscoop.coop import DeploymentPlan, coverage_sweep

heights = [float(h) for h in range(1, 11)]
gammas = [0.80, 0.85, 0.90, 0.95]
res = coverage_sweep(presets.radio(), heights, gammas, presets.blockers(),
                     presets.sensing_field(), presets.comm_field(), n_points=100, workers=4)

print(f"{'h':>4}" + "".join(f"{g:>7.2f}" for g in gammas) + f"{'spacing':>9}")
for h in heights:
    row = [r for r in res if r.h == h]
    print(f"{h:4.0f}" + "".join(f"{r.coverage:7.2f}" for r in row) + f"{row[0].spacing:9.1f}")

plan = DeploymentPlan()
rec = recommend(res, 0.80, plan.height_bounds, plan.spacing_bounds)
print(f"recommended: h={rec['h']:g} m, spacing {rec['spacing']:.0f} m")
