import numpy as np
import cmath
from slowlight.waveguide import WaveguideSpec, wavenumber, gamma_1d, round_trip_delay
from slowlight.dynamics import (LatticeSystem, evolve, emit_shaped,
                                mirror_scatter, transmitted_fraction, cz_phase,
                                cz_overlap, pulse_bandwidth, taper_reflection,
                                taper_transmittance, taper_echo_train,
                                end_reflection, FAR_DETUNED)
from slowlight.fluxcontrol import erf_envelope

TWO_PI = 2 * np.pi
spec = WaveguideSpec.device()
G_UC = TWO_PI * 35.16e6
G_EF = np.sqrt(2) * G_UC
G_M = TWO_PI * 57e6
XI_PULSE = np.sqrt(40.8 / 145.6)

print("=== a) bandwidth: lattice vs single-mode Markov oracle ===")
te, xe = erf_envelope(80e-9, 0.0, XI_PULSE, 216e-9, 0.2e-9)
rec80 = emit_shaped(spec, te, xe, emitter_g=G_EF)
bw_lat = pulse_bandwidth(rec80)
# Markov: da/dt=-G(t)/2 a, aout=sqrt(G) a
gam = 2 * (np.interp(te, te, xe) * G_EF) ** 2 / spec.hop_j
a = np.exp(-0.5 * np.concatenate([[0], np.cumsum(0.5 * (gam[1:] + gam[:-1]) * np.diff(te))]))
aout = np.sqrt(gam) * a
pad = np.concatenate([aout, np.zeros(15 * len(aout))])
pw = np.abs(np.fft.fftshift(np.fft.fft(pad))) ** 2
fr = np.fft.fftshift(np.fft.fftfreq(len(pad), te[1] - te[0]))
half = pw.max() / 2
ab = np.nonzero(pw >= half)[0]
bw_markov = fr[ab[-1]] - fr[ab[0]]
print(f"lattice FWHM {bw_lat/1e6:.4f} MHz, markov {bw_markov/1e6:.4f} MHz, ratio {bw_lat/bw_markov:.4f}")
print(f"emitted {rec80.emitted_energy:.6f} remaining {rec80.remaining_norm:.2e} ledger {abs(rec80.emitted_energy+rec80.remaining_norm-1):.2e}")

print("=== b) cz at three bandwidths ===")
sys_cz = LatticeSystem(spec, G_EF, 0.0, G_M)
for tr in (80e-9, 40e-9, 25e-9):
    te2, xe2 = erf_envelope(tr, 0.0, XI_PULSE, 2.7 * tr, 0.2e-9)
    rtmp = emit_shaped(spec, te2, xe2, emitter_g=G_EF)
    bw = pulse_bandwidth(rtmp)
    oe, rece = cz_phase(sys_cz, "e", te2, xe2)
    print(f"t_r={tr*1e9:.0f}ns bw={bw/1e6:.2f}MHz |O|={abs(oe):.4f} "
          f"phase_dev={abs(abs(cmath.phase(oe))-np.pi):.4f}")

print("=== c) echo train vs sim (device taper, plain emission) ===")
times, energies = taper_echo_train(spec, n_echoes=2)
print("analytic times(ns)", times * 1e9, "energies", energies)
recE = emit_shaped(spec, te, xe, emitter_g=G_EF, horizon=216e-9 + 4.2 * spec.n_cells / spec.hop_j)
tot = recE.emitted_energy
cen = 145e-9
rt = spec.n_cells / spec.hop_j
w0 = (0.0, cen + 0.62 * rt)
w1 = (cen + 0.62 * rt, cen + 1.62 * rt)
w2 = (cen + 1.62 * rt, cen + 2.62 * rt)
f0, f1, f2 = (recE.energy_between(*w) for w in (w0, w1, w2))
print(f"sim fractions: main {f0:.4f} echo1 {f1:.4f} echo2 {f2:.4f} total {tot:.4f} remaining {recE.remaining_norm:.4f}")
print(f"analytic T {energies[0]:.4f} TR {energies[1]:.4f} TR^2 {energies[2]:.4f}")
print(f"ratios sim e1/main {f1/f0:.4f} e2/e1 {f2/f1:.4f} analytic R {energies[1]/energies[0]:.4f}")

print("=== d) port-side reflection formula (reciprocity oracle) ===")
def port_reflection(sp, omega, sign):
    k = wavenumber(sp, omega)
    e = omega - sp.center
    sig = sp.hop_j * np.exp(sign * 1j * k)
    heff = np.array([[sp.taper_detuning1 + sig, sp.taper_hop],
                     [sp.taper_hop, sp.taper_detuning2 - 0.5j * sp.output_rate]])
    g = np.linalg.inv(e * np.eye(2) - heff)
    return 1.0 - 1j * sp.output_rate * g[1, 1]

matched = WaveguideSpec(n_cells=60, hop_j=spec.hop_j, center=spec.center,
                        taper_hop=spec.hop_j, output_rate=2 * spec.hop_j)
for sign in (+1, -1):
    errs, merrs = [], []
    for off in np.linspace(-1.4, 1.4, 11):
        w = spec.center + off * spec.hop_j
        rc = taper_reflection(spec, w)
        rp = port_reflection(spec, w, sign)
        errs.append(abs(abs(rc) - abs(rp)))
        merrs.append(abs(port_reflection(matched, w, sign)) - abs(taper_reflection(matched, w)))
    print(f"sign {sign:+d}: max | |r_chain|-|r_port| | = {max(errs):.2e}, matched diff {max(np.abs(merrs)):.2e}")
print("matched r at center: chain", abs(taper_reflection(matched, spec.center)),
      "port +", abs(port_reflection(matched, spec.center, +1)),
      "port -", abs(port_reflection(matched, spec.center, -1)))

print("=== e) long-lattice wavepacket vs analytic ===")
def wavepacket_run(sp, sigma=10.0, a0=None):
    syslat = LatticeSystem(sp, 0.0)
    n = sp.n_cells
    if a0 is None:
        a0 = n // 2
    cells = np.arange(1, n + 1)
    psi = np.zeros(syslat.dim, dtype=complex)
    psi[1:n + 1] = np.exp(-(cells - a0) ** 2 / (4 * sigma ** 2)) * np.exp(-1j * np.pi / 2 * cells)
    psi /= np.linalg.norm(psi)
    horizon = (n - a0 + 5 * sigma) / (2 * sp.hop_j) * 2.2
    rec = evolve(syslat, psi, horizon)
    # spectral average of analytic transmission over packet weight
    kk = np.linspace(np.pi / 2 - 4 / (2 * sigma), np.pi / 2 + 4 / (2 * sigma), 401)
    wk = np.exp(-2 * sigma ** 2 * (kk - np.pi / 2) ** 2)
    tk = 1 - np.abs(taper_reflection(sp, sp.center + 2 * sp.hop_j * np.cos(kk))) ** 2
    t_pred = np.trapezoid(wk * tk, kk) / np.trapezoid(wk, kk)
    return rec.emitted_energy, t_pred, rec

long_dev = WaveguideSpec(n_cells=160, hop_j=spec.hop_j, center=spec.center,
                         taper_detuning1=spec.taper_detuning1,
                         taper_detuning2=spec.taper_detuning2,
                         taper_hop=spec.taper_hop, output_rate=spec.output_rate)
em, pred, recw = wavepacket_run(long_dev)
print(f"device taper: sim {em:.5f} analytic {pred:.5f} rel {abs(em-pred)/pred:.2e}")
long_matched = WaveguideSpec(n_cells=160, hop_j=spec.hop_j, center=spec.center,
                             taper_hop=spec.hop_j, output_rate=2 * spec.hop_j)
em2, pred2, _ = wavepacket_run(long_matched)
print(f"matched taper: sim {em2:.5f} analytic {pred2:.5f}")
print(f"device T/dB {taper_transmittance(spec)} with-loss dB {10*np.log10(taper_transmittance(spec)[0]*np.sqrt(1-0.13)):.3f}")

print("=== f) chevron pattern numbers ===")
sys_ch = LatticeSystem(spec, G_UC, coupling_scale=0.22)
rch = evolve(sys_ch, "emitter", 400e-9)
pop = rch.emitter_population()
i_min = np.argmin(pop[rch.t < 210e-9])
mask_rev = (rch.t > 210e-9) & (rch.t < 300e-9)
i_rev = np.argmax(pop[mask_rev])
print(f"min pop {pop[i_min]:.4f} at {rch.t[i_min]*1e9:.1f}ns, revival max {pop[mask_rev][i_rev]:.4f} at {rch.t[mask_rev][i_rev]*1e9:.1f}ns")
sys_det = LatticeSystem(spec, G_UC, coupling_scale=0.22,
                        emitter_detuning=TWO_PI * 30e6)
rdet = evolve(sys_det, "emitter", 200e-9)
p150 = np.interp(150e-9, rdet.t, rdet.emitter_population())
p150r = np.interp(150e-9, rch.t, pop)
print(f"pop at 150ns: resonant {p150r:.4f} detuned30MHz {p150:.4f}")

print("=== g) decay fits ===")
for xi, t0, t1 in ((0.22, 10e-9, 150e-9), (0.10, 20e-9, 200e-9)):
    s = LatticeSystem(spec, G_UC, coupling_scale=xi)
    r = evolve(s, "emitter", t1 + 10e-9)
    m = (r.t >= t0) & (r.t <= t1)
    slope = np.polyfit(r.t[m], np.log(r.emitter_population()[m]), 1)[0]
    closed = gamma_1d(xi * G_UC, spec.hop_j, "end")
    print(f"xi={xi}: fit {-slope:.4e} closed {closed:.4e} ratio {-slope/closed:.4f}")

print("=== h) monotone in delta ===")
res = []
for d in (0.0, 0.15, 0.33, 0.5):
    tenv, xenv = erf_envelope(15e-9, d, XI_PULSE, 30e-9, 0.1e-9)
    r = emit_shaped(spec, tenv, xenv, emitter_g=G_EF, horizon=30e-9)
    res.append(r.emitter_population()[-1])
print("residuals", [f"{x:.5f}" for x in res])

print("=== i) mirror + delay ===")
sys_m = LatticeSystem(spec, G_EF, 0.0, G_M)
recm = mirror_scatter(sys_m, te, xe, (0.0, 385e-9), horizon=1e-6)
frac = transmitted_fraction(recm, (0.0, 385e-9))
print(f"transmitted fraction {frac:.4f} ledger {abs(recm.emitted_energy+recm.remaining_norm-1):.2e}")
rec_far = mirror_scatter(sys_m, te, xe, (-2.0, -1.0), horizon=1e-6)
m_late = recm.t > 400e-9
t_ref = recm.t[m_late][np.argmax(recm.flux[m_late])]
t_main = rec_far.peak_time()
delay = t_ref - t_main
print(f"reflected peak {t_ref*1e9:.1f}ns main {t_main*1e9:.1f}ns delay {delay*1e9:.2f}ns "
      f"round_trip {round_trip_delay(spec)*1e9:.2f}ns rel {abs(delay-round_trip_delay(spec))/round_trip_delay(spec):.4f}")
far_same = np.allclose(rec_far.a_out, emit_shaped(sys_m, te, xe, horizon=1e-6).a_out, atol=1e-12)
print("far-detuned identical to emit_shaped:", far_same)

print("=== j) re-field sign flip ===")
og, recg = cz_phase(sys_cz, "g", te, xe)
oe, rece = cz_phase(sys_cz, "e", te, xe)
cen2 = float(np.trapezoid(te * xe ** 2, te) / np.trapezoid(xe ** 2, te))
rt2 = spec.n_cells / spec.hop_j
mwin = (recg.t >= cen2 + 0.9 * rt2) & (recg.t <= cen2 + 1.7 * rt2)
corr = np.trapezoid(recg.a_out[mwin].real * rece.a_out[mwin].real, recg.t[mwin])
norm = np.sqrt(np.trapezoid(recg.a_out[mwin].real ** 2, recg.t[mwin]) *
               np.trapezoid(rece.a_out[mwin].real ** 2, recg.t[mwin]))
print(f"Re-field correlation {corr/norm:.4f} (expect near -1)")

print("=== k) end_reflection analytic cz invariant band ===")
devs = []
for off_hz in np.linspace(-145.6e6 / 8, 145.6e6 / 8, 21):
    w = spec.center + TWO_PI * off_hz
    r_e = end_reflection(spec, w, G_EF)
    r_g = end_reflection(spec, w, 0.0)
    devs.append(abs(cmath.phase(r_e / r_g) - np.pi) if cmath.phase(r_e / r_g) > 0
                else abs(cmath.phase(r_e / r_g) + np.pi))
print(f"max |phase dev| over +-Gamma/8 band: {max(devs):.4f} rad")
r_res = end_reflection(spec, spec.center, G_EF)
r_bare = end_reflection(spec, spec.center, 0.0)
print(f"center ratio {r_res/r_bare}")
