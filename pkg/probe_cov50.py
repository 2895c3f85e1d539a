import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, bootstrap_ci, estimate_moments,
    moments_from_state, qops, synthesize_shots, target_state,
)
from slowlight.tomography import resample_moments

t_start = time.time()
ideal = target_state("cluster4_2d").photon_density()
full = apply_channels(ideal, ChannelStack(), fed_back_photons=(1,), cz_gates=1)
f_true = qops.fidelity(full.matrix, ideal.matrix)
base = estimate_moments(*synthesize_shots(full, n_noise=0.2, count=1_000_000, seed=11))
truth = moments_from_state(full, count=32_000_000_000, variance_source=base)

hits, widths = 0, []
for k in range(50):
    tab = resample_moments(truth, seed=k)
    rep = bootstrap_ci(tab, ideal, resamples=1000, seed=k)
    cov = rep["low"] <= f_true <= rep["high"]
    hits += cov
    widths.append(rep["width"])
    mark = "" if cov else "  <-- miss"
    print(f"rep {k:2d}: [{rep['low']:.6f},{rep['high']:.6f}] est {rep['estimate']:.6f}{mark}", flush=True)
total = time.time() - t_start
print(f"\nF_true {f_true:.6f}")
print(f"coverage {hits}/50, width max {max(widths):.5f} mean {np.mean(widths):.5f}, total {total/60:.1f} min")
