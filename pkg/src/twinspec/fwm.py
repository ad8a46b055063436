"""Four-wave-mixing twin-beam source model.

A phase-insensitive amplifier pumped near a resonance couples sidebands in
pairs: the probe sideband at carrier detuning +Omega with the conjugate
sideband at -Omega, and vice versa.  Each pair is a two-mode squeezed vacuum
whose gain is the amplifier gain evaluated at that pair's own detuning from
the pump, delta +/- Omega.  When the gain profile is asymmetric about the
operating point the two pairs see different gains, which makes the upper and
lower sidebands of each beam unequally populated.

The default profile is a Lorentzian resonance; any object with a
``gain(delta_hz)`` method can be used instead (see ``synthesize_state``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    CovarianceMatrix,
    apply_loss,
    change_basis,
    symplectic_eigenvalues,
)

__all__ = [
    "PluginContractError",
    "FwmParams",
    "TabulatedGainProfile",
    "reference_fwm_params",
    "pair_gains",
    "mean_intensity_gain",
    "synthesize_state",
]


class PluginContractError(ValueError):
    """A user-supplied gain profile returned values no amplifier can have."""


@dataclass
class FwmParams:
    """Lorentzian gain profile of the mixing process.

    gain(delta) = 1 + (g_max - 1) / (1 + ((delta - delta_max) / width)^2)

    ``phase_slope_rad_per_hz`` gives the pair-correlation phase a linear
    dependence on the pair detuning offset (zero slope keeps the canonical
    p-p / q-(-q) correlations).  ``loss_eta_medium`` is the power
    transmission of the medium after the gain region, applied uniformly to
    all four modes.
    """

    delta_max_hz: float
    g_max: float
    width_hz: float
    phase_slope_rad_per_hz: float = 0.0
    loss_eta_medium: float = 1.0

    def __post_init__(self) -> None:
        if self.g_max < 1.0:
            raise ValueError(f"g_max must be >= 1, got {self.g_max}")
        if self.width_hz <= 0.0:
            raise ValueError(f"width_hz must be positive, got {self.width_hz}")
        if not 0.0 <= self.loss_eta_medium <= 1.0:
            raise ValueError("loss_eta_medium must be in [0, 1]")

    def gain(self, delta_hz):
        """Amplifier power gain at pump detuning ``delta_hz`` (vectorized)."""
        x = (np.asarray(delta_hz, dtype=float) - self.delta_max_hz) / self.width_hz
        return 1.0 + (self.g_max - 1.0) / (1.0 + x**2)

    def pair_phase(self, offset_hz: float) -> float:
        """Correlation phase of the sideband pair at detuning offset +/-Omega."""
        return self.phase_slope_rad_per_hz * offset_hz

    @classmethod
    def through_points(
        cls,
        point1: tuple[float, float],
        point2: tuple[float, float],
        delta_max_hz: float,
        **kwargs,
    ) -> "FwmParams":
        """Lorentzian with given peak position passing through two points.

        Solves for width and g_max from two (delta_hz, gain) samples; the
        points must be distinct in |delta - delta_max| and have gains > 1 on
        the same side of the resonance for a solution to exist.
        """
        (d1, g1), (d2, g2) = point1, point2
        if g1 <= 1.0 or g2 <= 1.0:
            raise ValueError("gain samples must exceed 1")
        x1 = d1 - delta_max_hz
        x2 = d2 - delta_max_hz
        denom = (g2 - 1.0) * x2**2 - (g1 - 1.0) * x1**2
        if denom == 0.0:
            raise ValueError("gain samples do not determine a Lorentzian width")
        inv_w2 = (g1 - g2) / denom
        if inv_w2 <= 0.0:
            raise ValueError("no Lorentzian through the given points")
        width = 1.0 / np.sqrt(inv_w2)
        g_max = 1.0 + (g1 - 1.0) * (1.0 + inv_w2 * x1**2)
        return cls(delta_max_hz=delta_max_hz, g_max=g_max, width_hz=width, **kwargs)


@dataclass
class TabulatedGainProfile:
    """Gain profile given by measured samples, linearly interpolated."""

    delta_hz: np.ndarray
    gains: np.ndarray

    def __post_init__(self) -> None:
        self.delta_hz = np.asarray(self.delta_hz, dtype=float)
        self.gains = np.asarray(self.gains, dtype=float)
        if self.delta_hz.shape != self.gains.shape or self.delta_hz.ndim != 1:
            raise ValueError("delta_hz and gains must be 1-d arrays of equal length")

    def gain(self, delta_hz):
        return np.interp(delta_hz, self.delta_hz, self.gains)


def reference_fwm_params(**kwargs) -> FwmParams:
    """Profile reproducing the reference operating point.

    At pump detuning 75 MHz with 7 MHz sidebands the two pair gains are
    exactly 15 and 9 (pair detunings 82 and 68 MHz), with the resonance
    peak at 95 MHz.
    """
    return FwmParams.through_points(
        (82e6, 15.0), (68e6, 9.0), delta_max_hz=95e6, **kwargs
    )


def pair_gains(profile, delta_hz: float, omega_hz: float) -> tuple[float, float]:
    """Gains of the two sideband pairs at operating point (delta, Omega).

    Pair 1 couples (probe upper, conjugate lower) and sits at delta + Omega;
    pair 2 couples (probe lower, conjugate upper) at delta - Omega.
    """
    return float(profile.gain(delta_hz + omega_hz)), float(
        profile.gain(delta_hz - omega_hz)
    )


def mean_intensity_gain(profile, delta_hz: float) -> tuple[float, float]:
    """Power gains (probe, conjugate) of the bright carriers: (G, G - 1)."""
    g = float(profile.gain(delta_hz))
    return g, g - 1.0


def _pair_blocks(v: np.ndarray, i: int, j: int, gain: float, phase: float) -> None:
    a = 2.0 * gain - 1.0
    c = 2.0 * np.sqrt(gain * (gain - 1.0))
    two_phi = 2.0 * phase
    cross = c * np.array(
        [
            [np.cos(two_phi), np.sin(two_phi)],
            [np.sin(two_phi), -np.cos(two_phi)],
        ]
    )
    v[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = a * np.eye(2)
    v[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = a * np.eye(2)
    v[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = cross
    v[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = cross.T


def synthesize_state(
    profile,
    omega_hz: float,
    delta_hz: float,
    basis: str = "sideband",
) -> CovarianceMatrix:
    """Four-mode covariance of the twin-beam field at one operating point.

    ``profile`` is an :class:`FwmParams` or any object with a
    ``gain(delta_hz)`` method (and optionally ``pair_phase(offset_hz)`` and a
    ``loss_eta_medium`` attribute).  Sideband mode order is (probe upper,
    probe lower, conjugate upper, conjugate lower); pair 1 fills modes
    (0, 3), pair 2 modes (1, 2).

    Raises :class:`PluginContractError` if the profile returns gains < 1 or
    non-finite, or if the resulting pair states fail the two-mode-squeezing
    consistency check before loss.
    """
    g1, g2 = pair_gains(profile, delta_hz, omega_hz)
    for g in (g1, g2):
        if not np.isfinite(g) or g < 1.0:
            raise PluginContractError(
                f"gain profile returned {g!r}; an amplifier gain must be finite and >= 1"
            )
    if hasattr(profile, "pair_phase"):
        phi1 = float(profile.pair_phase(+omega_hz))
        phi2 = float(profile.pair_phase(-omega_hz))
    else:
        phi1 = phi2 = 0.0

    v = np.eye(8)
    _pair_blocks(v, 0, 3, g1, phi1)
    _pair_blocks(v, 1, 2, g2, phi2)

    # Before loss each pair must be a pure two-mode squeezed state.
    for i, j in ((0, 3), (1, 2)):
        rows = np.array([2 * i, 2 * i + 1, 2 * j, 2 * j + 1])
        nu = symplectic_eigenvalues(v[np.ix_(rows, rows)])
        if np.abs(nu - 1.0).max() > 1e-6:
            raise PluginContractError(
                "pair covariance is not a pure two-mode squeezed state "
                f"(symplectic eigenvalues {nu})"
            )

    eta = float(getattr(profile, "loss_eta_medium", 1.0))
    if eta < 1.0:
        v = apply_loss(v, eta)

    cov = CovarianceMatrix(
        v,
        basis="sideband",
        omega_hz=float(omega_hz),
        delta_hz=float(delta_hz),
        meta={
            "pair_gains": [g1, g2],
            "pair_phases_rad": [phi1, phi2],
            "loss_eta_medium": eta,
        },
    )
    return cov if basis == "sideband" else change_basis(cov, basis)
