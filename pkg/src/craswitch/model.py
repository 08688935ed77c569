"""Device parameters, derived operating point, and validity diagnostics.

The device is a chain of ``n_res`` (odd) coupled resonators with
nearest-neighbour hopping ``J``.  The two terminal resonators exchange
photons with semi-infinite waveguides at rates ``kappa_1`` and
``kappa_2``; the central resonator is dispersively coupled to a
three-level ladder system whose lower pair (|g>, |e>) acts as the
control qubit and whose upper transition (|e> <-> |f>) carries the
switching interaction of strength ``g_ef``.

In the dispersive regime the |g> <-> |e> transition merely pulls the
central-resonator frequency by a qubit-state-dependent shift chi, so
the bare frequencies ``omega_c`` and ``omega_ef`` can be tuned such
that

* qubit in |g>: the dressed central resonator sits exactly at the
  chain frequency ``omega_r`` (uniform chain, maximal transmission);
* qubit in |e>: the dressed |e> <-> |f> transition is resonant with the
  dressed central resonator, producing dipole-induced reflection.

This module computes that operating point and the closed-form
diagnostics (passband structure, photon loss, coherence budget, RWA
margin) that decide whether a parameter set is physically trustworthy.

Unit conventions
----------------
All frequencies and rates are stored as *angular* frequencies in
rad/us, all times in us.  Linear frequencies quoted in MHz convert via
1 MHz <-> 2*pi rad/us, so ``omega/(2*pi)`` in internal units reads
directly in MHz.  Helpers :func:`from_mhz` / :func:`to_mhz` perform the
conversion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DetuningTooSmall",
    "DeviceParams",
    "OperatingPoint",
    "BandReport",
    "LossReport",
    "from_mhz",
    "to_mhz",
    "derive_operating_point",
    "passband_diagnostics",
    "loss_diagnostics",
    "cra_loss_probability",
    "travel_time",
    "validity_summary",
]

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

#: dispersive-regime cut |lambda| < 0.1
LAMBDA_THRESHOLD = 0.1
#: chain-loss flag Lambda_cra < 0.05
CRA_LOSS_THRESHOLD = 0.05
#: coherence flag tau_coh >= 10 * travel time
COHERENCE_MARGIN = 10.0
#: rotating-wave flag: fastest coupling / slowest carrier < 0.05
RWA_THRESHOLD = 0.05


def from_mhz(value_mhz: float) -> float:
    """Convert a linear frequency in MHz to an angular one in rad/us."""
    return TWO_PI * value_mhz


def to_mhz(omega: float) -> float:
    """Convert an angular frequency in rad/us to a linear one in MHz."""
    return omega / TWO_PI


class DetuningTooSmall(ValueError):
    """Qubit-chain detuning too small for a real dispersive solution.

    Raised when (omega_ge - omega_r)^2 <= 4 * g_ge^2, i.e. the
    quadratic fixing the central-resonator frequency has no real root
    and no dispersive operating point exists.
    """


@dataclass(frozen=True)
class DeviceParams:
    """Raw device parameters, all angular frequencies in rad/us.

    ``g_ge`` defaults to ``g_ef / sqrt(2)`` (the harmonic-ladder ratio
    of a weakly anharmonic artificial atom); passing it explicitly
    overrides that relation and is logged, since every headline result
    assumes the default.
    """

    omega_r: float          # chain-resonator frequency
    omega_ge: float         # qubit |g> <-> |e> transition frequency
    g_ef: float             # central resonator <-> |e>,|f> coupling
    J: float                # nearest-neighbour hopping
    kappa_1: float          # input-waveguide exchange rate (terminal -N)
    kappa_2: float          # output-waveguide exchange rate (terminal +N)
    n_res: int = 7          # odd number of chain resonators, >= 3
    g_ge: float | None = None   # |g>,|e> coupling; default g_ef/sqrt(2)
    gamma_res: float = 0.0      # per-resonator loss rate, diagnostics only
    tau_coh: float = math.inf   # qubit coherence time [us], diagnostics only

    def __post_init__(self) -> None:
        if self.n_res < 3 or self.n_res % 2 == 0:
            raise ValueError(f"n_res must be odd and >= 3, got {self.n_res}")
        if self.omega_r <= 0 or self.omega_ge <= 0:
            raise ValueError("omega_r and omega_ge must be positive")
        for name in ("g_ef", "J", "kappa_1", "kappa_2", "gamma_res"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tau_coh <= 0:
            raise ValueError("tau_coh must be positive")
        if self.g_ge is None:
            object.__setattr__(self, "g_ge", self.g_ef / math.sqrt(2.0))
        elif self.g_ge < 0:
            raise ValueError("g_ge must be >= 0")
        elif not math.isclose(self.g_ge, self.g_ef / math.sqrt(2.0),
                              rel_tol=1e-12, abs_tol=0.0):
            logger.info(
                "g_ge = %g rad/us overrides the default g_ef/sqrt(2) = %g",
                self.g_ge, self.g_ef / math.sqrt(2.0),
            )

    @property
    def n_half(self) -> int:
        """N in n_res = 2N + 1: sites are indexed -N ... +N."""
        return (self.n_res - 1) // 2

    @property
    def uses_default_ge_coupling(self) -> bool:
        return math.isclose(self.g_ge, self.g_ef / math.sqrt(2.0),
                            rel_tol=1e-12, abs_tol=0.0)


@dataclass(frozen=True)
class OperatingPoint:
    """Derived frequencies for the tuned switch.

    The tuning enforces two resonance conditions exactly:
    ``omega_c - chi == omega_r`` (uniform chain for qubit in |g>) and
    ``omega_c + chi == omega_a`` (dressed resonance for qubit in |e>),
    which together force ``omega_ef = omega_r + 3*chi``.
    """

    omega_c: float          # bare central-resonator frequency
    omega_ef: float         # bare |e> <-> |f> transition frequency
    chi: float              # dispersive shift g_ge^2 / (omega_ge - omega_c)
    lam: float              # dispersive ratio g_ge / (omega_ge - omega_c)
    omega_a: float          # dressed transition omega_ef - chi
    alpha_rel: float        # relative anharmonicity (omega_ef - omega_ge)/omega_ge
    delta_pm: tuple[float, float]   # JC detunings chi +/- g_ef from omega_r
    dispersive_valid: bool = field(compare=False)  # |lam| < 0.1


def derive_operating_point(p: DeviceParams) -> OperatingPoint:
    """Derive the tuned operating point from raw device parameters.

    The central-resonator frequency solves the quadratic
    ``(omega_c - omega_r) * (omega_ge - omega_c) = g_ge**2`` on the
    branch closest to ``omega_r`` (the dispersive branch).  The root is
    evaluated in the subtraction-free form

        chi = 2*g_ge**2 / (D + sign(D)*sqrt(D**2 - 4*g_ge**2)),
        D = omega_ge - omega_r,

    so the identities below survive at machine precision even for
    large detunings.

    Returns
    -------
    OperatingPoint
        With ``omega_c = omega_r + chi`` and ``omega_ef = omega_r + 3*chi``.

    Raises
    ------
    DetuningTooSmall
        If ``D**2 <= 4*g_ge**2`` (no real dispersive root).
    """
    d = p.omega_ge - p.omega_r
    disc = d * d - 4.0 * p.g_ge * p.g_ge
    if disc <= 0.0 or d == 0.0:
        raise DetuningTooSmall(
            f"need (omega_ge - omega_r)^2 > 4*g_ge^2; "
            f"got detuning {d:g} rad/us vs 2*g_ge = {2 * p.g_ge:g} rad/us"
        )
    chi = 2.0 * p.g_ge * p.g_ge / (d + math.copysign(math.sqrt(disc), d))
    omega_c = p.omega_r + chi
    omega_ef = p.omega_r + 3.0 * chi
    omega_a = omega_ef - chi
    lam = p.g_ge / (p.omega_ge - omega_c)
    return OperatingPoint(
        omega_c=omega_c,
        omega_ef=omega_ef,
        chi=chi,
        lam=lam,
        omega_a=omega_a,
        alpha_rel=(omega_ef - p.omega_ge) / p.omega_ge,
        delta_pm=(chi + p.g_ef, chi - p.g_ef),
        dispersive_valid=abs(lam) < LAMBDA_THRESHOLD,
    )


@dataclass(frozen=True)
class BandReport:
    """Passband structure of the resonator chain."""

    band_min: float             # omega_r - 2J
    band_max: float             # omega_r + 2J
    mode_frequencies: np.ndarray    # E_n = omega_r - 2J cos(n pi/(n_res+1)), n=1..n_res
    qubit_in_gap: bool          # |omega_ge - omega_r| > 2J
    dressed_in_band: bool       # |omega_a - omega_r| <= 2J


def passband_diagnostics(p: DeviceParams, op: OperatingPoint) -> BandReport:
    """Chain passband edges, normal-mode frequencies, and placement flags.

    The chain of ``n_res`` identical resonators supports standing-wave
    modes at ``E_n = omega_r - 2J*cos(n*pi/(n_res + 1))`` filling a
    passband of width 4J centred on ``omega_r``.  The qubit transition
    must sit in the band gap (no direct relaxation channel), while the
    dressed switching transition must sit inside the passband to be
    reachable by the photon.

    The mode list is assembled mirror-symmetrically, so
    ``E_n + E_{n_res + 1 - n} == 2*omega_r`` holds exactly in floating
    point, not merely to rounding.
    """
    m = p.n_res + 1
    half = np.cos(np.arange(1, m // 2) * math.pi / m)  # n = 1 .. (n_res-1)/2
    cosines = np.concatenate([half, [0.0], -half[::-1]])
    modes = p.omega_r - 2.0 * p.J * cosines
    return BandReport(
        band_min=p.omega_r - 2.0 * p.J,
        band_max=p.omega_r + 2.0 * p.J,
        mode_frequencies=modes,
        qubit_in_gap=abs(p.omega_ge - p.omega_r) > 2.0 * p.J,
        dressed_in_band=abs(op.omega_a - p.omega_r) <= 2.0 * p.J,
    )


def cra_loss_probability(n_res: int, gamma_res: float, J: float) -> float:
    """Photon-loss probability while traversing the chain.

    Each resonator contributes independently, giving
    ``Lambda_cra = n_res * gamma_res / (2J)``.  Pure formula helper so
    the estimate can be evaluated for any site count.
    """
    return n_res * gamma_res / (2.0 * J)


def travel_time(n_res: int, J: float, tau_p: float) -> float:
    """Wave-packet dwell time: pulse duration plus chain traversal.

    ``tau_tvl = tau_p + n_res / (2J)`` with 1/(2J) the per-resonator
    hop time at band centre.
    """
    return tau_p + n_res / (2.0 * J)


@dataclass(frozen=True)
class LossReport:
    """Closed-form loss and coherence diagnostics."""

    lambda_cra: float           # chain loss probability n_res*gamma_res/(2J)
    tau_tvl: float              # travel time tau_p + n_res/(2J) [us]
    cra_loss_negligible: bool   # lambda_cra < 0.05
    coherence_ok: bool          # tau_coh >= 10 * tau_tvl


def loss_diagnostics(p: DeviceParams, tau_p: float) -> LossReport:
    """Evaluate photon-loss and qubit-coherence criteria for a pulse.

    These are advisory flags, never hard errors: the scattering model
    itself is lossless, and the flags report whether neglecting
    dissipation was justified for the given pulse duration.
    """
    if p.J <= 0:
        raise ValueError("loss diagnostics require J > 0")
    lam_cra = cra_loss_probability(p.n_res, p.gamma_res, p.J)
    tau_tvl = travel_time(p.n_res, p.J, tau_p)
    return LossReport(
        lambda_cra=lam_cra,
        tau_tvl=tau_tvl,
        cra_loss_negligible=lam_cra < CRA_LOSS_THRESHOLD,
        coherence_ok=p.tau_coh >= COHERENCE_MARGIN * tau_tvl,
    )


def validity_summary(p: DeviceParams, op: OperatingPoint, tau_p: float) -> dict:
    """All validity flags in one dictionary (CLI ``diagnose`` payload).

    Collects the dispersive, band-placement, loss, coherence and
    rotating-wave criteria, each with the number it was judged on.
    The RWA margin compares the fastest coupling rate against the
    slowest carrier frequency.
    """
    band = passband_diagnostics(p, op)
    loss = loss_diagnostics(p, tau_p)
    rwa_ratio = max(p.J, p.g_ge, p.g_ef, p.kappa_1, p.kappa_2) / min(
        p.omega_r, op.omega_c)
    return {
        "lambda": op.lam,
        "dispersive_valid": op.dispersive_valid,
        "alpha_rel": op.alpha_rel,
        "qubit_in_gap": band.qubit_in_gap,
        "dressed_in_band": band.dressed_in_band,
        "band_min_mhz": to_mhz(band.band_min),
        "band_max_mhz": to_mhz(band.band_max),
        "lambda_cra": loss.lambda_cra,
        "cra_loss_negligible": loss.cra_loss_negligible,
        "tau_tvl_us": loss.tau_tvl,
        "coherence_ok": loss.coherence_ok,
        "rwa_ratio": rwa_ratio,
        "rwa_valid": rwa_ratio < RWA_THRESHOLD,
    }
