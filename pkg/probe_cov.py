import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, bootstrap_ci, estimate_moments, mle_state,
    qops, synthesize_shots, target_state,
)

ideal = target_state("cluster4_2d").photon_density()
ideal_rho = ideal.matrix
full = apply_channels(ideal, ChannelStack(), fed_back_photons=(1,), cz_gates=1)
f_true = qops.fidelity(full.matrix, ideal_rho)

for nu, shots, reps, resamples in [(0.2, 1_000_000, 12, 1000), (0.5, 1_000_000, 12, 1000)]:
    hits, widths, t0 = 0, [], time.time()
    for seed in range(100, 100 + reps):
        b, d = synthesize_shots(full, n_noise=nu, count=shots, seed=seed)
        tab = estimate_moments(b, d)
        rep = bootstrap_ci(tab, ideal_rho, resamples=resamples, seed=seed)
        cov = rep["low"] <= f_true <= rep["high"]
        hits += cov
        widths.append(rep["width"])
        if not cov:
            print(f"  miss seed {seed}: [{rep['low']:.5f},{rep['high']:.5f}] est {rep['estimate']:.5f} true {f_true:.5f}")
    dt = time.time() - t0
    print(f"nu={nu} shots={shots}: coverage {hits}/{reps} width mean {np.mean(widths):.5f} "
          f"max {np.max(widths):.5f} [{dt:.0f}s total, {dt/reps:.1f}s/rep]")
