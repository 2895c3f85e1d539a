import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, bootstrap_ci, estimate_moments, mle_state,
    qops, synthesize_shots, target_state,
)

ideal = target_state("cluster4_2d")
ideal_rho = ideal.photon_density().matrix
stack = ChannelStack()
noisy = apply_channels(ideal.photon_density(), stack, fed_back_photons=(1,), cz_gates=1)
f_true = qops.fidelity(noisy.matrix, ideal_rho)
print("F_true", f_true)

t0 = time.time()
batch, dark = synthesize_shots(noisy, n_noise=3.5, count=1_000_000, seed=11)
t1 = time.time()
table = estimate_moments(batch, dark)
t2 = time.time()
rho_est, info = mle_state(table)
t3 = time.time()
f_est = qops.fidelity(rho_est.matrix, ideal_rho)
print(f"synthesis {t1-t0:.1f}s moments {t2-t1:.1f}s mle {t3-t2:.1f}s iters {info['iterations']}")
print(f"F_est {f_est:.5f} |diff| {abs(f_est - f_true):.5f}")

t0 = time.time()
report = bootstrap_ci(table, ideal_rho, resamples=100, seed=0)
t1 = time.time()
print(f"bootstrap 100 resamples: {t1-t0:.1f}s width {report['width']:.5f} "
      f"[{report['low']:.4f}, {report['high']:.4f}] est {report['estimate']:.4f}")
print("covers:", report["low"] <= f_true <= report["high"])
