import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, estimate_moments, moments_from_state,
    qops, synthesize_shots, target_state,
)
from slowlight.tomography import (
    resample_moments, _StateProblem, _draw_hermitian_rows, _project_density_batch,
    _mats_from_coords, _coords_from_mats, STOP_TOL,
)

ideal = target_state("cluster4_2d").photon_density()
full = apply_channels(ideal, ChannelStack(), fed_back_photons=(1,), cz_gates=1)
base02 = estimate_moments(*synthesize_shots(full, n_noise=0.2, count=1_000_000, seed=11))
truth = moments_from_state(full, count=500_000_000, variance_source=base02)
tab = resample_moments(truth, seed=0)
problem = _StateProblem(tab)
rho_b, info_b = problem.solve()
R = 200
rng = np.random.Generator(np.random.Philox(key=[0, 0xB007]))
drawn = _draw_hermitian_rows(problem.signatures, problem.targets, problem.variances, R, rng)

# reference solutions via scalar APG at tight tolerance
t0 = time.time()
refs = []
for k in range(R):
    rho_s, _ = problem.solve(targets=drawn[k], x0=rho_b.matrix)
    refs.append(rho_s.matrix)
refs = np.array(refs)
print(f"scalar refs: {time.time()-t0:.0f}s")
ref_fids = np.array([qops.fidelity(m, ideal.matrix) for m in refs])

D = problem.design_real
w = problem.weights_real
H = D.T @ (D * w[:, None])
lam, Q = np.linalg.eigh(H)
dim = problem.dim
targets_r = np.hstack([np.real(drawn), np.imag(drawn)])
b = 2.0 * ((w * targets_r) @ D)          # (R,256)

def admm(sigma, iters):
    denom = 2.0 * lam + sigma
    z = np.tile(_coords_from_mats(rho_b.matrix[None], dim)[0], (R, 1))
    u = np.zeros_like(z)
    for it in range(iters):
        rhs = b + sigma * (z - u)
        x = ((rhs @ Q) / denom) @ Q.T
        z_new = _coords_from_mats(_project_density_batch(_mats_from_coords(x + u, dim)), dim)
        dual = sigma * np.linalg.norm(z_new - z, axis=1)
        z = z_new
        u += x - z
        primal = np.linalg.norm(x - z, axis=1)
    return z, primal, dual

lam_pos = lam[lam > 1e-9 * lam.max()]
print(f"H spectrum: {lam.min():.3e} .. {lam.max():.3e} median {np.median(lam_pos):.3e} gm {np.exp(np.mean(np.log(lam_pos))):.3e}")
for sigma_scale, iters in [(np.exp(np.mean(np.log(lam_pos))), 150),
                           (np.median(lam_pos), 150),
                           (0.1*np.median(lam_pos), 150),
                           (np.exp(np.mean(np.log(lam_pos))), 300)]:
    t0 = time.time()
    z, primal, dual = admm(2.0*sigma_scale, iters)
    dt = time.time() - t0
    mats = _mats_from_coords(z, dim)
    fids = np.array([qops.fidelity(m, ideal.matrix) for m in mats])
    print(f"sigma {2*sigma_scale:.3e} iters {iters}: max|dF| {np.max(np.abs(fids-ref_fids)):.2e} "
          f"primal max {primal.max():.2e} dual max {dual.max():.2e} [{dt:.1f}s]")
