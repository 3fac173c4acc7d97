"""Monte-Carlo success fractions next to the analytic curves at one height."""
from jcscoop import presets
from jcscoop.comm import pr_succ_c
from jcscoop.mc import TrialConfig, binomial_ci, estimate_success
from jcscoop.sensing import pr_succ_s

radio, blockers = presets.radio(), presets.blockers()
sf, cf = presets.sensing_field(), presets.comm_field()
h, distances = 6.0, [10.0, 30.0, 50.0, 80.0, 120.0]
trial = TrialConfig(n_trials=5000, root_seed=1)

for kind, fn, field in (("detect", pr_succ_s, sf), ("comm", pr_succ_c, cf)):
    curve = estimate_success(trial, kind, radio, distances, h, blockers, sf, cf)
    print(kind)
    for pt in curve.points:
        lo, hi = binomial_ci(pt)
        an = fn(radio, pt.d, h, blockers, field)
        print(f"  d={pt.d:6.1f}  mc {pt.p_hat:.3f} [{lo:.3f}, {hi:.3f}]  analytic {an:.3f}")
