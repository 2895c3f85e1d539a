import time
import numpy as np
from slowlight import (
    PrepModel, chi_from_unitary, cptp_residual, depolarized_chi,
    gauge_fix_local_z, ideal_cz_chi, mle_process, process_fidelity,
    simulate_process_measurements,
)

cz = ideal_cz_chi()

# 1. ideal data, ideal preps
means, variances = simulate_process_measurements(cz)
t0 = time.time()
chi_hat, info = mle_process(means, variances)
t1 = time.time()
print(f"ideal: F {process_fidelity(chi_hat, cz):.8f} iters {info['iterations']} "
      f"time {t1-t0:.1f}s cptp {info['cptp_residual']:.2e} mineig {info['min_eigenvalue']:.2e}")

# 2. SPAM-corrupted data from a slightly depolarized gate
true_model = PrepModel(loss=0.13, thermal_pop=0.01, readout_fidelity=0.976)
chi_true = depolarized_chi(cz, 0.03)
print("target ceiling F(chi_true, cz):", process_fidelity(chi_true, cz))
means, variances = simulate_process_measurements(chi_true, true_model)
t0 = time.time()
chi_corr, info_c = mle_process(means, variances, model=true_model)
t1 = time.time()
f_corr = process_fidelity(chi_corr, cz)
print(f"corrected: F {f_corr:.6f} iters {info_c['iterations']} time {t1-t0:.1f}s "
      f"cptp {info_c['cptp_residual']:.2e}")
chi_unc, info_u = mle_process(means, variances, model=None)
f_unc = process_fidelity(chi_unc, cz)
print(f"uncorrected: F {f_unc:.6f} iters {info_u['iterations']} gap {f_corr - f_unc:.4f}")
print("recovery F(chi_corr, chi_true):", process_fidelity(chi_corr, chi_true))

