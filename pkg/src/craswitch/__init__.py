"""Single-photon transport through a qutrit-controlled resonator chain.

A coupled-resonator array carries an itinerant microwave photon between
two waveguides; a three-level ladder system attached to the central
resonator either lets the photon pass or reflects it, conditioned on
the state of the |g>,|e> control qubit.  The package computes the
routing figures of merit — transmission, reflection, switching
contrast, outgoing-spectrum distortion — as functions of all device
parameters, by direct integration of the single-excitation equations
of motion, with an independent stationary-scattering oracle for
validation and a deterministic sweep CLI on top.

Layout: :mod:`~craswitch.model` (device parameters and operating-point
derivation), :mod:`~craswitch.pulse` (ingoing wave packet and spectral
grids), :mod:`~craswitch.dynamics` (equations of motion and the batched
adaptive integrator), :mod:`~craswitch.observables` (figures of merit),
:mod:`~craswitch.oracle` (frequency-domain cross-checks),
:mod:`~craswitch.sweep_cli` (configs, sweeps, and the ``craswitch``
command).
"""

__version__ = "0.1.0"

from .model import (
    BandReport,
    DetuningTooSmall,
    DeviceParams,
    LossReport,
    OperatingPoint,
    cra_loss_probability,
    derive_operating_point,
    from_mhz,
    loss_diagnostics,
    passband_diagnostics,
    to_mhz,
    travel_time,
    validity_summary,
)
from .pulse import Pulse, SpectralGrid
from .dynamics import (
    Generator,
    NonConvergence,
    Trajectory,
    assemble_generator,
    flux_balance_residual,
    integrate,
    integrate_batch,
)
from .observables import (
    GridTooNarrow,
    OutgoingSpectra,
    ScatteringResult,
    contrast_and_upsilon,
    input_side_emission,
    outgoing_spectra,
    reflection,
    scattering_batch,
    transmission,
)
from .oracle import (
    SingularSystem,
    default_grid,
    expected_reflection,
    expected_transmission,
    oracle_scattering,
    scattering_amplitudes,
    single_cell_transmission,
    stationary_reflection,
    stationary_transmission,
    tridiagonal_transmission,
)

__all__ = [
    "__version__",
    "BandReport",
    "DetuningTooSmall",
    "DeviceParams",
    "Generator",
    "GridTooNarrow",
    "LossReport",
    "NonConvergence",
    "OperatingPoint",
    "OutgoingSpectra",
    "Pulse",
    "ScatteringResult",
    "SingularSystem",
    "SpectralGrid",
    "Trajectory",
    "assemble_generator",
    "contrast_and_upsilon",
    "cra_loss_probability",
    "default_grid",
    "derive_operating_point",
    "expected_reflection",
    "expected_transmission",
    "flux_balance_residual",
    "from_mhz",
    "input_side_emission",
    "integrate",
    "integrate_batch",
    "loss_diagnostics",
    "oracle_scattering",
    "outgoing_spectra",
    "passband_diagnostics",
    "reflection",
    "scattering_amplitudes",
    "scattering_batch",
    "single_cell_transmission",
    "stationary_reflection",
    "stationary_transmission",
    "to_mhz",
    "transmission",
    "travel_time",
    "tridiagonal_transmission",
    "validity_summary",
]
