"""Single-sideband noise spectra through a scanned filter cavity.

A slightly undercoupled two-mirror cavity is scanned across one beam before
direct detection.  Near resonance with one sideband the cavity attenuates
and phase-shifts that sideband while the carrier and the other sideband
reflect almost untouched, so the photocurrent noise at the analysis
frequency Omega samples a detuning-dependent linear combination of the four
quadratures of that beam's two sidebands.

All detunings are expressed in cavity half-linewidths: ``delta_norm =
detuning / linewidth``.  The amplitude reflection of the (singly resonant,
lossless-mirror) cavity is

    r(delta) = 1 - (1 - sqrt(r0)) / (1 + 2 i delta)

with ``r0`` the on-resonance power reflectivity.  The detection weights of
the upper/lower sideband operators are

    beta_plus  = e^{i phi_d} conj(r(delta)) r(delta - omega_bar)
    beta_minus = e^{i phi_d} conj(r(delta)) r(delta + omega_bar)

(carrier factor conj(r) times the sideband's own reflection), where phi_d is
the demodulation phase.  The measured quantity is the variance of

    x(delta) = Re(beta_plus) p_+ - Im(beta_plus) q_+
             + Re(beta_minus) p_- + Im(beta_minus) q_-

normalized by the coefficient norm so that vacuum input gives exactly 1
(shot-noise units) at every detuning, then degraded by the detection
efficiency: S -> eta S + (1 - eta).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .gaussian import CovarianceMatrix, is_physical

__all__ = [
    "CavityParams",
    "reflection",
    "measurement_coeffs",
    "coeff_vector",
    "single_beam_spectrum",
    "cross_spectrum",
    "direct_spectrum",
    "SpectrumTrace",
    "CrossTrace",
    "default_grid",
    "simulate_traces",
]

_BEAM_SLICE = {"probe": slice(0, 4), "conjugate": slice(4, 8)}


@dataclass
class CavityParams:
    """Filter cavity and detection parameters.

    ``linewidth_hz`` is the half width (Gamma/2pi) used to normalize
    detunings; ``finesse`` is carried as metadata only.  A warning is issued
    when the analysis frequency does not resolve the sidebands
    (omega < sqrt(2) * linewidth).
    """

    linewidth_hz: float = 3.37e6
    omega_hz: float = 7e6
    r0_power: float = 0.5
    eta_det: float = 0.83
    finesse: float = 87.4

    def __post_init__(self) -> None:
        if not 0.0 < self.r0_power <= 1.0:
            raise ValueError("r0_power must be in (0, 1]")
        if not 0.0 < self.eta_det <= 1.0:
            raise ValueError("eta_det must be in (0, 1]")
        if self.linewidth_hz <= 0.0:
            raise ValueError("linewidth_hz must be positive")
        if self.omega_hz < np.sqrt(2.0) * self.linewidth_hz:
            warnings.warn(
                "analysis frequency does not resolve the sidebands "
                f"(omega = {self.omega_hz:.3g} Hz < sqrt(2) * linewidth "
                f"= {np.sqrt(2) * self.linewidth_hz:.3g} Hz)",
                UserWarning,
                stacklevel=2,
            )

    @property
    def omega_bar(self) -> float:
        """Analysis frequency in units of the cavity linewidth."""
        return self.omega_hz / self.linewidth_hz


def reflection(delta_norm, r0_power: float = 0.5):
    """Cavity amplitude reflection at normalized detuning (vectorized)."""
    d = np.asarray(delta_norm, dtype=float)
    return 1.0 - (1.0 - np.sqrt(r0_power)) / (1.0 + 2j * d)


def measurement_coeffs(
    delta_norm: float, cavity: CavityParams, demod_phase_rad: float = 0.0
) -> tuple[complex, complex]:
    """Complex detection weights (beta_plus, beta_minus) of the sidebands."""
    ob = cavity.omega_bar
    r_carrier = np.conj(reflection(delta_norm, cavity.r0_power))
    phase = np.exp(1j * demod_phase_rad)
    beta_plus = phase * r_carrier * reflection(delta_norm - ob, cavity.r0_power)
    beta_minus = phase * r_carrier * reflection(delta_norm + ob, cavity.r0_power)
    return complex(beta_plus), complex(beta_minus)


def coeff_vector(
    delta_norm: float, cavity: CavityParams, demod_phase_rad: float = 0.0
) -> np.ndarray:
    """Quadrature weights over (p_+, q_+, p_-, q_-) of one beam."""
    bp, bm = measurement_coeffs(delta_norm, cavity, demod_phase_rad)
    return np.array([bp.real, -bp.imag, bm.real, bm.imag])


def _beam_block(cov: CovarianceMatrix, beam: str) -> np.ndarray:
    if cov.basis != "sideband":
        raise ValueError("spectra are computed in the sideband basis")
    return cov.matrix[_BEAM_SLICE[beam], _BEAM_SLICE[beam]]


def single_beam_spectrum(
    cov: CovarianceMatrix,
    beam: str,
    delta_norm,
    cavity: CavityParams,
    demod_phase_rad: float = 0.0,
    include_detection: bool = True,
    require_physical: bool = True,
) -> np.ndarray:
    """Normalized noise power of one beam versus cavity detuning.

    Vacuum input gives exactly 1 at every detuning.  With
    ``include_detection`` the detection efficiency is folded in
    (S -> eta S + 1 - eta); disable it to see the ideal spectrum.
    """
    if require_physical and not is_physical(cov):
        raise ValueError(
            "covariance is not a physical state; pass require_physical=False "
            "to evaluate anyway"
        )
    block = _beam_block(cov, beam)
    deltas = np.atleast_1d(np.asarray(delta_norm, dtype=float))
    out = np.empty(deltas.shape)
    for k, d in enumerate(deltas):
        c = coeff_vector(d, cavity, demod_phase_rad)
        out[k] = c @ block @ c / (c @ c)
    if include_detection:
        out = cavity.eta_det * out + (1.0 - cavity.eta_det)
    return out if np.ndim(delta_norm) else float(out[0])


def cross_spectrum(
    cov: CovarianceMatrix,
    delta_pr_norm,
    delta_cj_norm,
    cavity: CavityParams,
    demod_phase_pr_rad: float = 0.0,
    demod_phase_cj_rad: float = 0.0,
    include_detection: bool = True,
    require_physical: bool = True,
) -> np.ndarray:
    """Normalized probe-conjugate noise correlation for paired detunings.

    Each beam passes its own cavity at its own detuning; the two
    photocurrents are correlated and normalized by the two coefficient
    norms, so the result is symmetric between substituting either beam by
    vacuum (which gives 0).
    """
    if require_physical and not is_physical(cov):
        raise ValueError(
            "covariance is not a physical state; pass require_physical=False "
            "to evaluate anyway"
        )
    if cov.basis != "sideband":
        raise ValueError("spectra are computed in the sideband basis")
    cross = cov.matrix[_BEAM_SLICE["probe"], _BEAM_SLICE["conjugate"]]
    dp = np.atleast_1d(np.asarray(delta_pr_norm, dtype=float))
    dc = np.atleast_1d(np.asarray(delta_cj_norm, dtype=float))
    if dp.shape != dc.shape:
        raise ValueError("probe and conjugate detuning grids must match")
    out = np.empty(dp.shape)
    for k in range(dp.size):
        cp = coeff_vector(dp[k], cavity, demod_phase_pr_rad)
        cc = coeff_vector(dc[k], cavity, demod_phase_cj_rad)
        out[k] = cp @ cross @ cc / np.sqrt((cp @ cp) * (cc @ cc))
    if include_detection:
        out = cavity.eta_det * out
    return out if np.ndim(delta_pr_norm) else float(out[0])


def direct_spectrum(
    cov: CovarianceMatrix,
    beam: str,
    demod_phase_rad: float = 0.0,
    eta_det: float = 1.0,
) -> float:
    """Noise power of one beam with the cavity removed (r = 1 everywhere).

    Both sidebands then enter with equal weight, which measures a rotated
    mixture of the symmetric p and antisymmetric q quadratures and has no
    detuning dependence.
    """
    block = _beam_block(cov, beam)
    c = np.array(
        [
            np.cos(demod_phase_rad),
            -np.sin(demod_phase_rad),
            np.cos(demod_phase_rad),
            np.sin(demod_phase_rad),
        ]
    )
    s = float(c @ block @ c / (c @ c))
    return eta_det * s + (1.0 - eta_det)


@dataclass
class SpectrumTrace:
    """One single-beam cavity scan."""

    beam: str
    delta_norm: np.ndarray
    values: np.ndarray
    demod_phase_rad: float = 0.0
    kind: str = field(default="single", init=False)


@dataclass
class CrossTrace:
    """One scan of correlated probe/conjugate detunings."""

    delta_pr_norm: np.ndarray
    delta_cj_norm: np.ndarray
    values: np.ndarray
    demod_phase_pr_rad: float = 0.0
    demod_phase_cj_rad: float = 0.0
    kind: str = field(default="cross", init=False)


def default_grid() -> np.ndarray:
    """Canonical acquisition grid: 201 points over +/-15 linewidths."""
    return np.linspace(-15.0, 15.0, 201)


_PHASE_PAIRS = ((0.0, 0.0), (0.0, np.pi / 2), (np.pi / 2, 0.0), (np.pi / 2, np.pi / 2))


def simulate_traces(
    cov: CovarianceMatrix,
    cavity: CavityParams,
    grid: np.ndarray | None = None,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[SpectrumTrace | CrossTrace]:
    """Full acquisition set for covariance reconstruction.

    Produces, on the given detuning grid:

    * single-beam scans of both beams at demodulation phases 0 and pi/2;
    * cross scans with synchronized detunings (delta, delta) and with
      counter-scanned detunings (delta, -delta), each at the four phase
      combinations (0, 0), (0, pi/2), (pi/2, 0), (pi/2, pi/2).

    Together these 12 traces determine all 36 entries of the four-mode
    covariance (synchronized cross scans alone leave two cross-block
    directions unconstrained).  Optional white noise of standard deviation
    ``noise_sigma`` (shot-noise units) is added to every sample.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be >= 0")
    if noise_sigma > 0.0 and rng is None:
        rng = np.random.default_rng()

    def _noisy(values: np.ndarray) -> np.ndarray:
        if noise_sigma > 0.0:
            return values + rng.normal(0.0, noise_sigma, size=values.shape)
        return values

    traces: list[SpectrumTrace | CrossTrace] = []
    for beam in ("probe", "conjugate"):
        for phase in (0.0, np.pi / 2):
            vals = single_beam_spectrum(cov, beam, grid, cavity, phase)
            traces.append(
                SpectrumTrace(
                    beam=beam,
                    delta_norm=grid.copy(),
                    values=_noisy(vals),
                    demod_phase_rad=phase,
                )
            )
    for sign in (+1.0, -1.0):
        for php, phc in _PHASE_PAIRS:
            vals = cross_spectrum(cov, grid, sign * grid, cavity, php, phc)
            traces.append(
                CrossTrace(
                    delta_pr_norm=grid.copy(),
                    delta_cj_norm=sign * grid,
                    values=_noisy(vals),
                    demod_phase_pr_rad=php,
                    demod_phase_cj_rad=phc,
                )
            )
    return traces
