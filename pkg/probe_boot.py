import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, bootstrap_ci, estimate_moments, mle_state,
    qops, synthesize_shots, target_state,
)
from slowlight.tomography import _StateProblem, _solve_state_batch

ideal = target_state("cluster4_2d")
ideal_rho = ideal.photon_density().matrix
stack = ChannelStack()
noisy = apply_channels(ideal.photon_density(), stack, fed_back_photons=(1,), cz_gates=1)
f_true = qops.fidelity(noisy.matrix, ideal_rho)
print("F_true", f_true, "| min eig of noisy:", np.linalg.eigvalsh(noisy.matrix).min())

batch, dark = synthesize_shots(noisy, n_noise=3.5, count=1_000_000, seed=11)
table = estimate_moments(batch, dark)

# batch-vs-scalar agreement at the strict tolerance
prob = _StateProblem(table)
base, info = prob.solve()
rng = np.random.Generator(np.random.Philox(key=[0, 1]))
targets = np.tile(prob.targets, (4, 1))
targets += 0.001 * (rng.standard_normal(targets.shape) + 1j * rng.standard_normal(targets.shape))
mats, its = _solve_state_batch(prob, targets, base.matrix.reshape(-1), stop_tol=1e-10)
worst = 0.0
for r in range(4):
    rho_s, _ = prob.solve(targets=targets[r], x0=base)
    worst = max(worst, np.abs(mats[r] - rho_s.matrix).max())
print("batch vs scalar max |diff|:", worst, "its", its)

# relaxed tolerance shift
mats2, its2 = _solve_state_batch(prob, targets, base.matrix.reshape(-1),
                                 stop_tol=1e-6 * info["objective"])
fshift = max(abs(qops.fidelity(mats[r], ideal_rho) - qops.fidelity(mats2[r], ideal_rho)) for r in range(4))
print("relaxed-tol fidelity shift:", fshift, "its", its2)

t0 = time.time()
report = bootstrap_ci(table, ideal_rho, resamples=1000, seed=0)
t1 = time.time()
print(f"bootstrap 1000: {t1-t0:.1f}s width {report['width']:.5f} "
      f"[{report['low']:.4f}, {report['high']:.4f}] est {report['estimate']:.4f} covers {report['low'] <= f_true <= report['high']}")
