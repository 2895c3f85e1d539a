"""Flux-modulated transmon control: tuning curves, modulation sidebands,
pulse envelopes and flux-line pre-distortion.

The emitter is parked at a static bias and a fast sinusoidal flux tone
converts its transition into a comb of sidebands; the first lower sideband
carries the engineered emission.  Everything here is classical waveform
arithmetic; the quantum propagation lives in `dynamics`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.signal import lfilter
from scipy.special import erf

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TransmonSpec:
    """Flux-tunable transmon summary used by the control layer.

    omega_ge_max : top-sweet-spot g-e transition (rad/s)
    eta          : anharmonicity omega_ef - omega_ge (rad/s, negative)
    asymmetry    : SQUID junction asymmetry d in [0, 1); 0 = symmetric
    t1, t2_star  : lifetimes (s); t1 may be None when unused
    thermal_pop  : residual excited-state population at idle
    """

    omega_ge_max: float
    eta: float
    asymmetry: float = 0.0
    t1: float | None = None
    t2_star: float | None = None
    thermal_pop: float = 0.0

    def __post_init__(self):
        if self.eta >= 0.0:
            raise ValueError("transmon.eta must be negative")
        if not 0.0 <= self.asymmetry < 1.0:
            raise ValueError("transmon.asymmetry must lie in [0, 1)")
        if not 0.0 <= self.thermal_pop < 0.5:
            raise ValueError("transmon.thermal_pop must lie in [0, 0.5)")

    @classmethod
    def from_hz(cls, f_ge_max_hz, eta_hz, f_ge_min_hz=None, asymmetry=None,
                t1=None, t2_star=None, thermal_pop=0.0):
        """Build from Hz inputs; asymmetry fit from f_ge_min when given."""
        w_max = TWO_PI * f_ge_max_hz
        eta = TWO_PI * eta_hz
        if asymmetry is None:
            if f_ge_min_hz is None:
                asymmetry = 0.0
            else:
                w_min = TWO_PI * f_ge_min_hz
                if w_min >= w_max:
                    raise ValueError("transmon.f_ge_min must be below f_ge_max")
                asymmetry = ((w_min - eta) / (w_max - eta)) ** 2
        return cls(omega_ge_max=w_max, eta=eta, asymmetry=asymmetry,
                   t1=t1, t2_star=t2_star, thermal_pop=thermal_pop)

    @classmethod
    def emitter(cls):
        """The emission qubit: 6.21 GHz sweet spot, -273 MHz anharmonicity."""
        return cls.from_hz(6.21e9, -273e6, t2_star=561e-9, thermal_pop=0.01)

    def omega_ge(self, phi):
        """g-e transition vs flux (in flux quanta), standard asymmetric form."""
        phi = np.asarray(phi, dtype=float)
        d2 = self.asymmetry ** 2
        mod = (d2 + (1.0 - d2) * np.cos(np.pi * phi) ** 2) ** 0.25
        return (self.omega_ge_max - self.eta) * mod + self.eta

    def omega_ef(self, phi):
        return self.omega_ge(phi) + self.eta

    def transition_curve(self, transition: str):
        if transition == "ge":
            return self.omega_ge
        if transition == "ef":
            return self.omega_ef
        raise ValueError(f"unknown transition {transition!r}")


@dataclass(frozen=True)
class FluxTone:
    """Constant-amplitude modulation tone Phi(t) = Phi_B + Phi_DC + Phi_AC sin(w t)."""

    phi_bias: float
    phi_ac: float
    omega_mod: float
    phi_dc: float = 0.0

    def __post_init__(self):
        if self.phi_ac < 0.0:
            raise ValueError("flux.phi_ac must be non-negative")
        if self.omega_mod <= 0.0:
            raise ValueError("flux.omega_mod must be positive")


@dataclass(frozen=True)
class SidebandSpectrum:
    """Fourier content of the modulated transition phase factor.

    amplitudes[i] is xi_s for s = orders[i]; the spectral line sits at
    (mean transition frequency) - s * omega_mod, so s = +1 is the first
    lower sideband used for emission.
    """

    orders: np.ndarray
    amplitudes: np.ndarray
    mean_frequency: float
    dc_shift: float
    omega_mod: float

    @property
    def emission_amplitude(self) -> complex:
        """xi of the s = +1 lower sideband."""
        return complex(self.amplitudes[np.nonzero(self.orders == 1)[0][0]])

    def amplitude(self, s: int) -> complex:
        idx = np.nonzero(self.orders == s)[0]
        if len(idx) == 0:
            raise ValueError(f"sideband order {s} not resolved")
        return complex(self.amplitudes[idx[0]])


def _as_curve(spec_or_curve, transition):
    if callable(spec_or_curve):
        return spec_or_curve
    return spec_or_curve.transition_curve(transition)


def sideband_spectrum(spec, tone: FluxTone, transition="ef",
                      periods=64, samples_per_period=64) -> SidebandSpectrum:
    """Decompose exp(-i phase(t)) of the modulated transition into sidebands.

    `spec` is a TransmonSpec or a bare callable flux -> angular frequency.
    The drive must be sampled over an integer number of modulation periods
    with an integer number of samples per period; this keeps the sampled
    phase factor exactly periodic, so the sideband weights absorb all
    spectral energy and sum to one to machine precision.
    """
    if periods < 1 or samples_per_period < 8:
        raise ValueError("need >= 1 period and >= 8 samples per period")
    curve = _as_curve(spec, transition)
    n = periods * samples_per_period
    period = TWO_PI / tone.omega_mod
    dt = period / samples_per_period
    t = np.arange(n + 1) * dt
    # integrate relative to the static point to keep the phase small
    w_ref = float(curve(tone.phi_bias + tone.phi_dc))
    phi_t = tone.phi_bias + tone.phi_dc + tone.phi_ac * np.sin(tone.omega_mod * t)
    w = np.asarray(curve(phi_t), dtype=float) - w_ref
    inc = 0.5 * dt * (w[:-1] + w[1:])
    phase = np.concatenate(([0.0], np.cumsum(inc)))
    w_mean = w_ref + phase[-1] / t[-1]
    v = np.exp(-1j * (phase[:-1] - (w_mean - w_ref) * t[:-1]))
    spect = np.fft.fft(v) / n
    orders = np.arange(-(samples_per_period // 2), samples_per_period // 2)
    amps = spect[(orders * periods) % n]
    return SidebandSpectrum(
        orders=orders,
        amplitudes=amps,
        mean_frequency=w_mean,
        dc_shift=w_mean - float(curve(tone.phi_bias)),
        omega_mod=tone.omega_mod,
    )


def _cycle_mean(curve, phi_bias, phi_dc, phi_ac, samples=512):
    """Mean transition frequency over one modulation cycle (vectorized)."""
    theta = (np.arange(samples) + 0.5) * (TWO_PI / samples)
    phi = (np.asarray(phi_bias) + np.asarray(phi_dc))[..., None] \
        + np.asarray(phi_ac)[..., None] * np.sin(theta)
    return np.asarray(curve(phi)).mean(axis=-1)


def _solve_dc(curve, phi_bias, amp, target, hint=0.0):
    """Root of (cycle mean - target) vs DC offset near `hint`, or None.

    Expands a search window around the hint until the shift changes sign;
    the modulation can pull the mean so far down that no offset restores
    it, in which case None is returned.
    """

    def fun(dc):
        return float(_cycle_mean(curve, phi_bias, dc, amp)) - target

    for width in (0.005, 0.02, 0.08, 0.3, 0.7):
        grid = hint + np.linspace(-width, width, 17)
        vals = np.array([fun(g) for g in grid])
        sgn = np.signbit(vals)
        flips = np.nonzero(sgn[:-1] != sgn[1:])[0]
        if len(flips):
            best = flips[np.argmin(np.abs(grid[flips] - hint))]
            return brentq(fun, grid[best], grid[best + 1], xtol=1e-12)
    return None


def dc_correction(spec, phi_bias, phi_ac, omega_mod=None, transition="ef",
                  tol=TWO_PI * 1.0e3):
    """Static flux offset that restores the cycle-averaged frequency.

    Modulation drags the mean transition away from its static value; the
    returned Phi_DC (same shape as phi_ac) cancels that shift to within
    `tol` (rad/s).  Raises when no offset can restore the frequency, which
    happens once the drive swings over too much of the tuning curve.
    """
    curve = _as_curve(spec, transition)
    phi_ac = np.atleast_1d(np.asarray(phi_ac, dtype=float))
    target = float(curve(phi_bias))

    out = np.empty_like(phi_ac)
    hint = 0.0
    for i in np.argsort(phi_ac):
        amp = phi_ac[i]
        if amp == 0.0:
            out[i] = 0.0
            continue
        dc = _solve_dc(curve, phi_bias, amp, target, hint)
        if dc is None:
            raise ValueError(
                f"no static offset restores the mean frequency at "
                f"phi_ac={amp:.4f} (bias {phi_bias:.4f})")
        if abs(float(_cycle_mean(curve, phi_bias, dc, amp)) - target) > tol:
            raise ValueError("dc correction did not converge to tolerance")
        out[i] = hint = dc
    return out if out.size > 1 else float(out[0])


def erf_envelope(t_r: float, delta: float, xi_max: float,
                 window: float, dt: float):
    """Smooth turn-on envelope xi(t) = xi_max * erf(t / t_r + delta)^2.

    Returns (t, xi) sampled on [0, window).  delta > 0 starts the envelope
    part-way up its rise, trading bandwidth for a faster turn-on.
    """
    if t_r <= 0.0 or dt <= 0.0 or window <= dt:
        raise ValueError("envelope timing parameters must be positive")
    if delta < 0.0:
        raise ValueError("envelope delta must be non-negative")
    t = np.arange(0.0, window, dt)
    xi = xi_max * erf(t / t_r + delta) ** 2
    return t, xi


@dataclass(frozen=True)
class AmplitudeTable:
    """Monotone map from drive amplitude to emission-sideband weight.

    Tabulated on a fixed grid at one (bias, modulation frequency) working
    point, with the DC correction track computed per amplitude.  Frozen and
    read-only after construction, so it is safe to share across threads.
    """

    phi_bias: float
    omega_mod: float
    transition: str
    phi_ac: np.ndarray
    xi_abs: np.ndarray
    phi_dc: np.ndarray

    @property
    def xi_max(self) -> float:
        return float(self.xi_abs[-1])

    def amplitude_for(self, xi):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi < 0.0):
            raise ValueError("sideband target must be non-negative")
        if np.any(xi > self.xi_max):
            raise ValueError(
                f"sideband target {float(np.max(xi)):.4f} exceeds the "
                f"attainable maximum {self.xi_max:.4f} at this working point")
        return np.interp(xi, self.xi_abs, self.phi_ac)

    def dc_for(self, xi):
        return np.interp(np.asarray(xi, dtype=float), self.xi_abs, self.phi_dc)


@lru_cache(maxsize=16)
def build_amplitude_table(spec: TransmonSpec, phi_bias: float,
                          omega_mod: float, transition: str = "ef",
                          points: int = 512) -> AmplitudeTable:
    """Tabulate |xi_+1| vs Phi_AC with per-amplitude DC correction.

    The table stops where the DC correction stops being solvable or at the
    first local maximum of |xi_+1|, whichever comes first, so the stored
    map is strictly monotone and invertible by linear interpolation.
    """
    curve = spec.transition_curve(transition)
    target = float(curve(phi_bias))
    cap = 0.5 - abs(phi_bias)
    amps = np.linspace(0.0, cap * 0.999, points)
    dcs = np.zeros_like(amps)
    xi = np.zeros_like(amps)
    hint = 0.0
    end = len(amps)
    for i in range(1, len(amps)):
        dc = _solve_dc(curve, phi_bias, amps[i], target, hint)
        if dc is None:
            end = i
            break
        dcs[i] = hint = dc
        tone = FluxTone(phi_bias, amps[i], omega_mod, dc)
        xi[i] = abs(sideband_spectrum(spec, tone, transition).emission_amplitude)
    peak = int(np.argmax(xi[:end]))
    end = min(end, peak + 1)
    keep = np.concatenate(([True], np.diff(xi[:end]) > 0.0))
    return AmplitudeTable(
        phi_bias=phi_bias, omega_mod=omega_mod, transition=transition,
        phi_ac=amps[:end][keep], xi_abs=xi[:end][keep], phi_dc=dcs[:end][keep])


@dataclass(frozen=True)
class FluxDrive:
    """Sampled two-track flux waveform: fast tone amplitude + slow offset."""

    phi_bias: float
    omega_mod: float
    t: np.ndarray
    phi_ac: np.ndarray
    phi_dc: np.ndarray

    def to_csv(self, path):
        header = "time_s,phi_ac_Phi0,phi_dc_Phi0"
        data = np.column_stack([self.t, self.phi_ac, self.phi_dc])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def drive_from_envelope(spec: TransmonSpec, phi_bias: float, omega_mod: float,
                        t: np.ndarray, xi_target: np.ndarray,
                        transition: str = "ef", points: int = 512) -> FluxDrive:
    """Invert a target sideband envelope into the two flux tracks.

    Raises when the envelope asks for more sideband weight than the working
    point can deliver; the message quotes the attainable maximum.
    """
    table = build_amplitude_table(spec, phi_bias, omega_mod, transition, points)
    xi_target = np.asarray(xi_target, dtype=float)
    return FluxDrive(
        phi_bias=phi_bias,
        omega_mod=omega_mod,
        t=np.asarray(t, dtype=float),
        phi_ac=table.amplitude_for(xi_target),
        phi_dc=table.dc_for(xi_target),
    )


# ---------------------------------------------------------------------------
# flux-line pre-distortion


@dataclass(frozen=True)
class ResponseTerm:
    """One fitted kernel of the step response: amp * exp(-t/tau) * cos(w t + phase)."""

    amp: float
    tau: float
    omega: float
    phase: float


def _model_step(t, terms):
    s = np.ones_like(t)
    for term in terms:
        s = s + term.amp * np.exp(-t / term.tau) * np.cos(term.omega * t + term.phase)
    return s


def _fit_terms(t, s, x0):
    """Joint refinement of a flat [amp, tau, omega, phase]*n parameter vector."""
    dt = t[1] - t[0]
    n_par = len(x0) // 4

    def residual_of(x):
        trail = [ResponseTerm(*x[i:i + 4]) for i in range(0, len(x), 4)]
        return _model_step(t, trail) - s

    lo = np.array([-2.0, dt / 2.0, 0.0, -np.pi] * n_par)
    hi = np.array([2.0, t[-1] * 100.0, np.pi / dt, np.pi] * n_par)
    x0 = np.clip(np.asarray(x0, dtype=float), lo + 1e-15, hi - 1e-15)
    scale = np.array([0.02, t[-1] / 10.0, 1.0 / dt / 50.0, 1.0] * n_par)
    return least_squares(residual_of, x0, bounds=(lo, hi), x_scale=scale,
                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)


def fit_step_response(t: np.ndarray, s: np.ndarray, max_terms: int = 4,
                      rms_tol: float = 1e-4):
    """Fit the normalised step response with up to `max_terms` kernels.

    Each kernel is amp * exp(-t/tau) * cos(omega t + phase).  Terms are
    added greedily: a candidate is fitted to the current residual alone
    (seeded both as a pure decay and at the residual's dominant Fourier
    component), then all terms are refined jointly.  Stops once the RMS
    misfit drops below `rms_tol`.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    dt = t[1] - t[0]
    terms: list[ResponseTerm] = []

    for _ in range(max_terms):
        resid = _model_step(t, terms) - s
        rms = float(np.sqrt(np.mean(resid ** 2)))
        if rms < rms_tol:
            break
        r = -resid
        amp0 = float(r[np.argmax(np.abs(r[:max(1, len(r) // 20)]))])
        if amp0 == 0.0:
            amp0 = 1e-6
        mag = np.abs(r)
        down = np.nonzero(mag < np.abs(amp0) / np.e)[0]
        tau0 = t[down[0]] if len(down) and down[0] > 0 else t[-1] / 4.0
        spec_r = np.abs(np.fft.rfft(r))
        spec_r[0] = 0.0
        w_fft = TWO_PI * int(np.argmax(spec_r)) / (len(r) * dt)
        best = None
        for w0 in (0.0, w_fft):
            for tau_seed in (tau0, tau0 / 5.0, tau0 * 5.0):
                # candidate alone against the residual (offset back to 1)
                sol = _fit_terms(t, 1.0 + r, [amp0, tau_seed, w0, 0.0])
                if best is None or sol.cost < best.cost:
                    best = sol
        x_joint = []
        for term in terms:
            x_joint.extend([term.amp, term.tau, term.omega, term.phase])
        x_joint.extend(best.x)
        sol = _fit_terms(t, s, x_joint)
        terms = [ResponseTerm(*sol.x[i:i + 4]) for i in range(0, len(sol.x), 4)]
    return terms


def _step_to_kernel(step: np.ndarray) -> np.ndarray:
    """Discrete impulse response whose running sum reproduces `step`."""
    h = np.empty_like(step)
    h[0] = step[0]
    h[1:] = np.diff(step)
    return h


def apply_distortion(step: np.ndarray, waveform: np.ndarray) -> np.ndarray:
    """Push a waveform through the channel described by its step response."""
    h = _step_to_kernel(np.asarray(step, dtype=float))
    return np.convolve(h, np.asarray(waveform, dtype=float))[:len(waveform)]


def predistort_square(t: np.ndarray, step: np.ndarray, target: np.ndarray,
                      max_terms: int = 4, fir_len: int = 64) -> np.ndarray:
    """Pre-compensated waveform for a channel with the given step response.

    Fits <= `max_terms` exponential / oscillatory-exponential kernels to the
    modelled response, applies their exact inverse recursively, then adds a
    short FIR stage that cancels the residual model mismatch over the first
    `fir_len` samples.  Convolving the channel with the result reproduces
    `target` to well within 0.2 percent once the output has risen.
    """
    t = np.asarray(t, dtype=float)
    step = np.asarray(step, dtype=float)
    target = np.asarray(target, dtype=float)
    tail = slice(int(0.9 * len(step)), None)
    s_inf = float(np.mean(step[tail]))
    if s_inf <= 0.0:
        raise ValueError("step response settles at a non-positive value")
    # extrapolate the late-time drift over the record length; a response
    # still sliding toward its asymptote cannot be normalised reliably
    slope = np.polyfit(t[tail], step[tail], 1)[0]
    if abs(slope) * (t[-1] - t[0]) > 0.01 * s_inf:
        raise ValueError("step response has not settled within the record")
    s = step / s_inf

    terms = fit_step_response(t, s, max_terms=max_terms)
    h_model = _step_to_kernel(_model_step(t, terms))
    h_true = _step_to_kernel(s)

    # inverse of the fitted kernels: FIR h_model has an exact IIR inverse
    w_iir = lfilter([1.0], h_model, target)
    # short-scale FIR correction for what the fit missed
    d = lfilter([1.0], h_model, h_true)
    imp = np.zeros(min(fir_len, len(t)))
    imp[0] = 1.0
    c = lfilter([1.0], d[:len(imp)], imp)
    w = np.convolve(c, w_iir)[:len(target)]
    return w / s_inf
