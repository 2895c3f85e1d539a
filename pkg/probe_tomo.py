import time
import numpy as np
from slowlight import (
    DensityMatrix, qops, moments_from_state, mle_state, moment_objective,
    target_state, apply_channels, ChannelStack,
)
from slowlight.protocol import PureState

# 1. exact |1> round trip
one = PureState.from_photonic(np.array([0.0, 1.0], dtype=complex))
rho1, info1 = mle_state(moments_from_state(one))
err1 = np.abs(rho1.matrix - np.array([[0, 0], [0, 1.0]])).max()
print("single photon: err", err1, "iters", info1["iterations"], "kkt", info1["kkt_residual"])

# 2. random 4-photon state (Ginibre)
rng = np.random.Generator(np.random.Philox(key=[5, 0]))
g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
rho_rand = g @ g.conj().T
rho_rand /= np.trace(rho_rand).real
t0 = time.time()
tab = moments_from_state(rho_rand)
fit, info = mle_state(tab)
t1 = time.time()
F = qops.fidelity(fit.matrix, rho_rand)
print(f"random 4-photon: F {F:.8f} iters {info['iterations']} time {t1-t0:.2f}s obj {info['objective']:.3e}")
tr = info["objective_trace"]
print("  monotone:", bool(np.all(np.diff(tr) <= 1e-12)), "trace len", len(tr))
print("  self-consistency:", info["objective"] <= moment_objective(tab, rho_rand) + 1e-9)
ev = np.linalg.eigvalsh(fit.matrix)
print("  min eig", ev.min(), "trace err", abs(np.trace(fit.matrix) - 1))

# 3. ideal cluster exact moments
ideal = target_state("cluster4_2d")
fitc, infoc = mle_state(moments_from_state(ideal))
print("cluster exact: F", qops.fidelity(fitc.matrix, ideal.photon_density().matrix), "iters", infoc["iterations"])

# 4. noisy cluster (channel stack only, deterministic)
stack = ChannelStack()
noisy = apply_channels(ideal.photon_density(), stack, fed_back_photons=(1,), cz_gates=1)
F_true = qops.fidelity(noisy.matrix, ideal.photon_density().matrix)
fitn, infon = mle_state(moments_from_state(noisy))
print(f"noisy cluster exact moments: F_fit_vs_noisy {qops.fidelity(fitn.matrix, noisy.matrix):.8f} F_true {F_true:.6f} iters {infon['iterations']}")

# 5. graceful degradation
prev = 2.0
ok = True
for p in [0.0, 0.1, 0.2, 0.4]:
    rho_p = (1 - p) * ideal.photon_density().matrix + p * np.eye(16) / 16
    f = qops.fidelity(mle_state(moments_from_state(rho_p))[0].matrix, ideal.photon_density().matrix)
    ok = ok and f < prev + 1e-12
    prev = f
    print(f"  depol p={p}: F {f:.6f}")
print("monotone degradation:", ok)
