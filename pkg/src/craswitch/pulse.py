"""Ingoing single-photon wave packet and the shared frequency grid.

The photon arrives in the input waveguide as an exponentially decaying
wave packet whose front reaches the terminal resonator at t = 0.  Its
spectral density is the Lorentzian

    xi(omega) = sqrt(1/(2*pi*tau_p)) / [(omega - omega_0) + i/(2*tau_p)]

of full width at half maximum gamma_0 = 1/tau_p, and the corresponding
drive function entering the terminal-resonator equation of motion is

    Xi(t) = sqrt(2*pi/tau_p) * exp(-t/(2*tau_p) - i*omega_0*t),  t >= 0.

Note on phases: the inverse Fourier transform of the Lorentzian above,
``integral d(omega) exp(-i*omega*t) * xi(omega)``, evaluates to
``-1j * Xi(t)``.  The extra ``-1j`` is a global phase of the single
photon and drops out of every probability, so :meth:`Pulse.drive`
returns the real-prefactor form; the phase does matter when input and
re-emitted fields are interfered, and the observables module accounts
for it there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Pulse", "SpectralGrid"]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Pulse:
    """Lorentzian single-photon wave packet.

    Parameters
    ----------
    omega_0 : float
        Carrier angular frequency [rad/us].  The transport code
        defaults this to the chain frequency (band centre).
    tau_p : float
        Pulse duration [us]; the spectral FWHM is ``1/tau_p``.
    """

    omega_0: float
    tau_p: float

    def __post_init__(self) -> None:
        if self.tau_p <= 0:
            raise ValueError("tau_p must be positive")
        if self.omega_0 <= 0:
            raise ValueError("omega_0 must be positive")

    @property
    def gamma_0(self) -> float:
        """Spectral bandwidth (FWHM of |xi|^2) in rad/us."""
        return 1.0 / self.tau_p

    @property
    def narrowband(self) -> bool:
        """True when gamma_0/omega_0 < 1e-2 (model validity flag)."""
        return self.gamma_0 / self.omega_0 < 1e-2

    def spectrum(self, omega) -> np.ndarray:
        """Spectral amplitude xi(omega); accepts scalars or arrays.

        Normalized so that ``integral |xi|^2 d(omega) = 1`` over the
        full line.
        """
        omega = np.asarray(omega, dtype=float)
        return (
            math.sqrt(1.0 / (TWO_PI * self.tau_p))
            / ((omega - self.omega_0) + 0.5j / self.tau_p)
        )

    def drive(self, t) -> np.ndarray:
        """Drive amplitude Xi(t) in the lab frame.

        Zero for t < 0 (the front arrives at t = 0); the t = 0 sample
        takes the full limit value, |Xi(0+)|^2 = 2*pi/tau_p.
        """
        t = np.asarray(t, dtype=float)
        envelope = np.where(
            t >= 0.0,
            math.sqrt(TWO_PI / self.tau_p) * np.exp(-t / (2.0 * self.tau_p)),
            0.0,
        )
        return envelope * np.exp(-1j * self.omega_0 * t)

    def drive_rotating(self, t, frame_omega: float) -> np.ndarray:
        """Drive amplitude in a frame rotating at ``frame_omega``.

        Returns ``Xi(t) * exp(+1j*frame_omega*t)``; only the residual
        detuning ``omega_0 - frame_omega`` oscillates.
        """
        t = np.asarray(t, dtype=float)
        envelope = np.where(
            t >= 0.0,
            math.sqrt(TWO_PI / self.tau_p) * np.exp(-t / (2.0 * self.tau_p)),
            0.0,
        )
        return envelope * np.exp(-1j * (self.omega_0 - frame_omega) * t)

    def input_probability(self, t) -> np.ndarray:
        """Probability that the photon has entered the device by time t.

        ``integral_0^t |Xi|^2/(2*pi) d(tau) = 1 - exp(-t/tau_p)``; the
        reference curve for the probability-flux self-test.
        """
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0.0, 1.0 - np.exp(-t / self.tau_p), 0.0)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform frequency grid shared by all spectral quadratures.

    Using one common grid for ingoing and outgoing spectra makes the
    truncated-tail bias cancel in overlap ratios.  ``halfwidth`` is in
    units of the pulse bandwidth 1/tau_p; ``extra_halfwidth`` widens
    the grid by an absolute amount in rad/us (the transport code adds
    the chain bandwidth 2J, since the scattered spectrum spans the
    whole passband however narrow the pulse is).  The point count is
    raised as needed to keep the spacing below gamma_0/8, so the
    Lorentzian line itself stays resolved on wide grids.
    """

    omega: np.ndarray

    @classmethod
    def standard(
        cls,
        pulse: Pulse,
        halfwidth: float = 40.0,
        points: int = 4001,
        extra_halfwidth: float = 0.0,
    ) -> "SpectralGrid":
        if halfwidth <= 0 or points < 3:
            raise ValueError("need halfwidth > 0 and at least 3 grid points")
        h = halfwidth / pulse.tau_p + extra_halfwidth
        # resolve the Lorentzian core: spacing <= gamma_0/8
        min_points = int(math.ceil(16.0 * h * pulse.tau_p)) + 1
        n = max(points, min_points)
        return cls(omega=np.linspace(pulse.omega_0 - h, pulse.omega_0 + h, n))

    @property
    def spacing(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid quadrature of ``values`` sampled on the grid."""
        return float(np.trapezoid(values, dx=self.spacing))
