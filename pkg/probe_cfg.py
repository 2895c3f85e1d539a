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
print(f"stack state: F_true {f_true:.6f}")

for nu, shots in [(0.5, 1_000_000), (0.2, 1_000_000), (0.2, 2_000_000)]:
    biases = []
    t0 = time.time()
    for seed in (11, 12, 13):
        b, d = synthesize_shots(full, n_noise=nu, count=shots, seed=seed)
        tab = estimate_moments(b, d)
        f_est = qops.fidelity(mle_state(tab)[0].matrix, ideal_rho)
        biases.append(f_est - f_true)
    rep = bootstrap_ci(tab, ideal_rho, resamples=300, seed=0)
    t1 = time.time()
    print(f"nu={nu} shots={shots}: bias {np.mean(biases):+.5f} (spread {np.ptp(biases):.5f}) "
          f"width {rep['width']:.5f} covers {rep['low'] <= f_true <= rep['high']} [{t1-t0:.0f}s]")
