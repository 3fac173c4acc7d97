"""Detection, communication and cooperative success against mounting height."""
import numpy as np

from jcscoop import presets
from jcscoop.comm import comm_range_expectation, pr_succ_c
from jcscoop.coop import pr_coop
from jcscoop.sensing import detection_range, pr_succ_s

radio, blockers = presets.radio(), presets.blockers()
sf, cf = presets.sensing_field(), presets.comm_field()

print(f"{'h':>4} {'det range':>10} {'comm range':>11} {'Ps(50)':>8} {'Pc(50)':>8} {'Pcoop(50)':>10}")
for h in np.arange(1.0, 10.5, 1.0):
    r_s = detection_range(radio, h, blockers, sf)
    r_c, _ = comm_range_expectation(radio, h, blockers, cf, tol=1e-2)
    ps = pr_succ_s(radio, 50.0, h, blockers, sf)
    pc = pr_succ_c(radio, 50.0, h, blockers, cf)
    pco = pr_coop(radio, 50.0, 50.0, h, blockers, sf, cf)
    print(f"{h:4.0f} {r_s:10.1f} {r_c:11.1f} {ps:8.3f} {pc:8.3f} {pco:10.3f}")
