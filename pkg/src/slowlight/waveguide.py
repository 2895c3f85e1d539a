"""Coupled-resonator slow-light waveguide: dispersion, delay and decay rates.

All frequencies are stored internally as angular frequencies (rad/s).
Constructors and accessors that talk to the outside world use Hz and carry an
explicit ``_hz`` suffix, always meaning the quantity divided by 2*pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WaveguideSpec:
    """Geometry and rates of the resonator chain, taper and output load.

    Parameters
    ----------
    n_cells : int
        Number of unit cells in the periodic section.
    hop_j : float
        Nearest-neighbour photon hopping rate J (rad/s), positive.
    center : float
        Passband center frequency omega_p (rad/s).
    taper_detuning1, taper_detuning2 : float
        On-site detunings of the two taper cells from omega_p (rad/s).
    taper_hop : float
        Hopping rate between the two taper cells (rad/s).
    output_rate : float
        Loading rate kappa of the last taper cell into the output line (rad/s).
    roundtrip_loss : float
        Fractional energy loss per round trip, in [0, 1).
    """

    n_cells: int
    hop_j: float
    center: float
    taper_detuning1: float = 0.0
    taper_detuning2: float = 0.0
    taper_hop: float = 0.0
    output_rate: float = 0.0
    roundtrip_loss: float = 0.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("waveguide.n_cells must be at least 2")
        if self.hop_j <= 0.0:
            raise ValueError("waveguide.hop_J must be positive")
        if self.output_rate < 0.0:
            raise ValueError("waveguide.output_rate must be non-negative")
        if not 0.0 <= self.roundtrip_loss < 1.0:
            raise ValueError("channels.roundtrip_loss must lie in [0, 1)")

    @classmethod
    def from_hz(cls, n_cells, hop_j_hz, center_hz, taper_detuning1_hz=0.0,
                taper_detuning2_hz=0.0, taper_hop_hz=0.0, output_rate_hz=0.0,
                roundtrip_loss=0.0):
        return cls(
            n_cells=int(n_cells),
            hop_j=TWO_PI * hop_j_hz,
            center=TWO_PI * center_hz,
            taper_detuning1=TWO_PI * taper_detuning1_hz,
            taper_detuning2=TWO_PI * taper_detuning2_hz,
            taper_hop=TWO_PI * taper_hop_hz,
            output_rate=TWO_PI * output_rate_hz,
            roundtrip_loss=roundtrip_loss,
        )

    @classmethod
    def device(cls):
        """Fitted device parameters of the 50-cell chain with matched taper."""
        return cls.from_hz(
            n_cells=50,
            hop_j_hz=33.96e6,
            center_hz=4.823e9,
            taper_detuning1_hz=-6.0e6,
            taper_detuning2_hz=-70.0e6,
            taper_hop_hz=45.4e6,
            output_rate_hz=148.0e6,
            roundtrip_loss=0.13,
        )

    @property
    def hop_j_hz(self) -> float:
        return self.hop_j / TWO_PI

    @property
    def center_hz(self) -> float:
        return self.center / TWO_PI

    @property
    def band_edges(self):
        """(lower, upper) passband edges in rad/s."""
        return (self.center - 2.0 * self.hop_j, self.center + 2.0 * self.hop_j)

    @property
    def bandwidth(self) -> float:
        """Full passband width 4 J (rad/s)."""
        return 4.0 * self.hop_j


def dispersion(spec: WaveguideSpec, k) -> np.ndarray:
    """Band frequency omega(k) = omega_p + 2 J cos(k) for k in (0, pi).

    k is the Bloch wavenumber in units of the inverse lattice constant.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0.0) or np.any(k >= np.pi):
        raise ValueError("wavenumber must lie strictly inside (0, pi)")
    return spec.center + 2.0 * spec.hop_j * np.cos(k)


def wavenumber(spec: WaveguideSpec, omega) -> np.ndarray:
    """Inverse of ``dispersion`` on the passband interior."""
    omega = np.asarray(omega, dtype=float)
    x = (omega - spec.center) / (2.0 * spec.hop_j)
    if np.any(np.abs(x) >= 1.0 - 1e-9):
        raise ValueError("frequency must lie strictly inside the passband")
    return np.arccos(x)


def group_delay_per_cell(spec: WaveguideSpec, omega) -> np.ndarray:
    """One-way traversal time of a single cell at omega: 1 / |d omega / d k|.

    Diverges toward the band edges; omega must be strictly inside the band.
    """
    k = wavenumber(spec, omega)
    return 1.0 / (2.0 * spec.hop_j * np.sin(k))


def round_trip_delay(spec: WaveguideSpec, omega=None) -> float:
    """Round-trip time through the chain and back at omega (default: center).

    At band center this reduces to tau_d = N / J.
    """
    if omega is None:
        omega = spec.center
    return float(2.0 * spec.n_cells * group_delay_per_cell(spec, omega))


def gamma_1d(g: float, hop_j: float, geometry: str = "end") -> float:
    """Waveguide emission rate of a resonant two-level emitter.

    geometry "end" (emitter terminates the chain): Gamma = 2 g^2 / J.
    geometry "side" (emitter hangs off one cell):  Gamma = g^2 / J.
    All quantities angular; the ratio convention makes the result unit-safe.
    """
    if geometry == "end":
        return 2.0 * g * g / hop_j
    if geometry == "side":
        return g * g / hop_j
    raise ValueError(f"unknown coupling geometry {geometry!r}")


@dataclass(frozen=True)
class CircuitParams:
    """Lumped-element parameters of one qubit-waveguide coupling section.

    Capacitances in farads, inductance in henries.  c_sigma is the qubit's
    total self-capacitance excluding the coupler c_qg.
    """

    l0: float
    c0: float
    cg: float
    c_qg: float
    c_sigma: float

    def __post_init__(self):
        for name in ("l0", "c0", "cg", "c_qg", "c_sigma"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"circuit parameter {name} must be positive")


def coupling_from_circuit(params: CircuitParams, omega_p: float) -> float:
    """Qubit-waveguide coupling g from the capacitance network.

    g = c_qg / (2 sqrt((c0 + 2 cg)(c_sigma + c_qg))) * omega_p, in the same
    angular units as omega_p.  Valid in the weak-coupling regime
    c_qg << c_sigma; a ratio above ~0.2 raises, since the perturbative
    expression no longer applies.
    """
    ratio = params.c_qg / params.c_sigma
    if ratio > 0.2:
        raise ValueError(
            f"coupler/self capacitance ratio {ratio:.2f} too large for the "
            "perturbative coupling formula")
    denom = 2.0 * np.sqrt((params.c0 + 2.0 * params.cg) *
                          (params.c_sigma + params.c_qg))
    return params.c_qg / denom * omega_p
