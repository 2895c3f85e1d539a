import time
import numpy as np
from slowlight import (
    ChannelStack, apply_channels, estimate_moments, moments_from_state,
    qops, synthesize_shots, target_state,
)
from slowlight.tomography import (
    resample_moments, _StateProblem, _draw_hermitian_rows, _project_density_batch,
    _mats_from_coords, _coords_from_mats,
)

ideal = target_state("cluster4_2d").photon_density()
full = apply_channels(ideal, ChannelStack(), fed_back_photons=(1,), cz_gates=1)

def admm_balanced(problem, drawn, x0_mat, tol=1e-7, max_iters=5000, verbose=False):
    D, w, dim = problem.design_real, problem.weights_real, problem.dim
    H = D.T @ (D * w[:, None])
    lam, Q = np.linalg.eigh(H)
    gm = np.exp(np.mean(np.log(lam[lam > 1e-9 * lam.max()])))
    sigma = 0.2 * gm
    targets_r = np.hstack([np.real(drawn), np.imag(drawn)])
    b = 2.0 * ((w * targets_r) @ D)
    R = drawn.shape[0]
    z = np.tile(_coords_from_mats(x0_mat[None], dim)[0], (R, 1))
    u = np.zeros_like(z)
    for it in range(1, max_iters + 1):
        denom = 2.0 * lam + sigma
        x = ((b + sigma * (z - u)) @ Q / denom) @ Q.T
        z_new = _coords_from_mats(_project_density_batch(_mats_from_coords(x + u, dim)), dim)
        dz = np.linalg.norm(z_new - z, axis=1)
        z = z_new
        u += x - z
        primal = np.linalg.norm(x - z, axis=1)
        if verbose and it % 250 == 0:
            print(f"  it {it}: primal {primal.max():.2e} dz {dz.max():.2e} sigma {sigma:.2e}")
        if primal.max() < tol and dz.max() < tol:
            return z, it
        if it % 50 == 0:
            p_med, d_med = np.median(primal), np.median(dz)
            if p_med > 10.0 * d_med:
                sigma *= 2.0; u /= 2.0
            elif d_med > 10.0 * p_med:
                sigma /= 2.0; u *= 2.0
    return z, max_iters + 1

for nu, count in [(0.2, 500_000_000), (3.5, 1_000_000)]:
    base = estimate_moments(*synthesize_shots(full, n_noise=nu, count=1_000_000, seed=11))
    tab = (resample_moments(moments_from_state(full, count=count, variance_source=base), seed=0)
           if count != 1_000_000 else base)
    problem = _StateProblem(tab)
    rho_b, _ = problem.solve()
    rng = np.random.Generator(np.random.Philox(key=[0, 0xB007]))
    drawn = _draw_hermitian_rows(problem.signatures, problem.targets, problem.variances, 50, rng)
    refs = np.array([problem.solve(targets=drawn[k], x0=rho_b.matrix)[0].matrix for k in range(50)])
    ref_fids = np.array([qops.fidelity(m, ideal.matrix) for m in refs])
    t0 = time.time()
    z, its = admm_balanced(problem, drawn, rho_b.matrix, verbose=True)
    mats = _mats_from_coords(z, problem.dim)
    fids = np.array([qops.fidelity(m, ideal.matrix) for m in mats])
    print(f"nu={nu}: its {its} max|dF| {np.max(np.abs(fids-ref_fids)):.2e} [{time.time()-t0:.1f}s]")
