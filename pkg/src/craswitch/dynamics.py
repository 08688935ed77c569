"""Single-excitation equations of motion and their adaptive integrator.

State vector and generator
--------------------------
In the single-excitation sector the system is described by the complex
amplitude vector

    psi = (A_{-N}, ..., A_{-1}, A_0, A_1, ..., A_N, S_ef),

where A_n is the photon amplitude in chain resonator n and S_ef the
qutrit |e> <-> |f> coherence.  The amplitudes obey the driven linear
system

    i d(psi)/dt = M psi + zeta(t) e_drive,

with M the (n_res+1) x (n_res+1) generator: a tridiagonal chain block
(hopping J), the central diagonal pulled to the qubit-state-dependent
value omega_c + (2*eta_q - 1)*chi, anti-Hermitian terminal entries
-i*kappa_1/2 and -i*kappa_2/2 from the waveguide coupling, and a
qutrit row attached to the central site with strength eta_q * g_ef.
The drive zeta(t) = f_1 * Xi(t) acts on the input terminal only, with
f_1 = sqrt(kappa_1/(2*pi)).

Everything is integrated in a frame rotating at the chain frequency
omega_r (configurable), which removes the multi-GHz carrier and leaves
spectral radii of order 2*pi*100 rad/us — a non-stiff system that an
explicit adaptive Runge-Kutta handles in ~1e-4 us steps.

Integrator
----------
A Dormand-Prince 5(4) pair with the classic quartic dense-output
interpolant, specialised in two ways that the transport observables
need:

* **Batching.**  Many parameter points share one time span; their
  states are stacked into a (batch, dim) array advanced with a shared
  adaptive step (error-controlled on the worst member).  A batch costs
  barely more than a single system, because step overhead dominates at
  these dimensions.

* **Quadrature components.**  The observables are time integrals —
  terminal occupations int |A_{+/-N}|^2 dtau and the input-emission
  overlap int conj(b_in) A_{-N} dtau.  These are appended to the ODE
  state and advanced by the same Runge-Kutta weights, so cumulative
  integrals carry the integrator's own accuracy instead of a separate
  quadrature error, and the probability-flux identity can be checked
  at every accepted step.

Tolerances default to rtol=1e-9, atol=1e-12 so that all downstream
acceptance checks are dominated by physics truncation (finite
observation time, finite grids), not by integration error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import TWO_PI, DeviceParams, OperatingPoint
from .pulse import Pulse

__all__ = [
    "Generator",
    "Trajectory",
    "NonConvergence",
    "assemble_generator",
    "flux_balance_residual",
    "integrate",
    "integrate_batch",
]


class NonConvergence(RuntimeError):
    """Adaptive step size underflowed; integration cannot proceed.

    ``time`` holds the instant at which the controller gave up.
    """

    def __init__(self, time: float, message: str = ""):
        self.time = time
        super().__init__(
            message or f"step size underflow at t = {time:g} us")


@dataclass(frozen=True)
class Generator:
    """Qubit-conditioned generator of the driven linear system.

    ``matrix`` contains the full non-Hermitian generator including the
    terminal -i*kappa/2 entries; stripped of those two boundary terms
    it is Hermitian.  ``eta`` is the excited-state population
    |<e|q>|^2 of the control qubit, 0 or 1.
    """

    matrix: np.ndarray      # complex, (n_res+1, n_res+1)
    drive_index: int        # position of A_{-N} (driven amplitude)
    out_index: int          # position of A_{+N} (transmitted amplitude)
    drive_coeff: float      # f_1 = sqrt(kappa_1/(2*pi))
    qubit_state: str        # "g" or "e"
    eta: int                # |<e|q>|^2
    frame_omega: float      # rotating-frame carrier [rad/us]
    kappa_1: float
    kappa_2: float

    def __post_init__(self) -> None:
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def assemble_generator(
    p: DeviceParams,
    op: OperatingPoint,
    q: str,
    frame_omega: float | None = None,
) -> Generator:
    """Build the generator for control-qubit state ``q`` ("g" or "e").

    In the default frame (rotating at omega_r) the chain diagonal
    vanishes, the central entry is 0 for q = "g" and 2*chi for q = "e"
    (by the tuning conditions), and the qutrit diagonal is
    omega_a - omega_r.  The qutrit coupling enters symmetrically as
    eta_q * g_ef on both off-diagonal entries: the source term in the
    S_ef equation carries eta_q, and for q = "g" the reverse coupling
    multiplies an S_ef that stays identically zero, so scaling both
    entries leaves the dynamics unchanged while keeping the generator
    Hermitian apart from its boundary terms — and makes the g-branch
    manifestly independent of g_ef.
    """
    if q not in ("g", "e"):
        raise ValueError(f"qubit state must be 'g' or 'e', got {q!r}")
    eta = 1 if q == "e" else 0
    frame = p.omega_r if frame_omega is None else frame_omega
    n = p.n_res
    dim = n + 1
    center = (n - 1) // 2
    m = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(n)
    m[idx, idx] = p.omega_r - frame
    m[center, center] = (op.omega_c + (2 * eta - 1) * op.chi) - frame
    m[idx[:-1], idx[:-1] + 1] = p.J
    m[idx[:-1] + 1, idx[:-1]] = p.J
    m[n, n] = op.omega_a - frame
    m[center, n] = eta * p.g_ef
    m[n, center] = eta * p.g_ef
    m[0, 0] += -0.5j * p.kappa_1
    m[n - 1, n - 1] += -0.5j * p.kappa_2
    return Generator(
        matrix=m,
        drive_index=0,
        out_index=n - 1,
        drive_coeff=math.sqrt(p.kappa_1 / TWO_PI),
        qubit_state=q,
        eta=eta,
        frame_omega=frame,
        kappa_1=p.kappa_1,
        kappa_2=p.kappa_2,
    )


@dataclass
class Trajectory:
    """Sampled solution of the driven single-excitation system.

    ``amplitudes[k]`` is the state vector at ``times[k]`` in the frame
    rotating at ``frame_omega``.  The ``cum_*`` arrays are the
    quadrature components at the same instants, accumulated on the
    adaptive grid (not by re-integrating the samples):

    * ``cum_out``  — int_0^t |A_{+N}|^2 dtau
    * ``cum_in``   — int_0^t |A_{-N}|^2 dtau
    * ``cum_cross``— int_0^t conj(b_in) A_{-N} dtau, with
      b_in = Xi * exp(i*frame*t) / sqrt(2*pi) the ingoing field

    ``fine_times``/``fine_in``/``fine_out`` sample the two terminal
    amplitudes on the (usually much denser) grid requested for
    spectral transforms.  When the integration was run with
    ``record_steps=True``, ``step_times``/``step_states`` hold the
    full augmented state at every accepted step for the
    probability-flux self-test.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    cum_out: np.ndarray
    cum_in: np.ndarray
    cum_cross: np.ndarray
    qubit_state: str
    frame_omega: float
    kappa_1: float
    kappa_2: float
    pulse: Pulse
    fine_times: np.ndarray | None = None
    fine_in: np.ndarray | None = None
    fine_out: np.ndarray | None = None
    n_steps: int = 0
    n_rejected: int = 0
    step_times: np.ndarray | None = None
    step_states: np.ndarray | None = None      # (n_steps+1, dim+3)

    @property
    def norm(self) -> np.ndarray:
        """Total excitation probability in chain + qutrit per sample."""
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau and dense-output coefficients
# ---------------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
])
# fifth-order weights; the seventh stage f(t+h, y1) is the next step's
# first stage (FSAL)
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# error weights b5 - b4 over all seven stages
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output polynomial: y(t0 + x*h) = y0 + h * K^T P [x, x^2, x^3, x^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class _Batch:
    """Stacked right-hand side for a batch of driven systems."""

    def __init__(self, gens: list[Generator], pulses: list[Pulse]):
        dims = {g.dim for g in gens}
        frames = {g.frame_omega for g in gens}
        if len(dims) != 1:
            raise ValueError("all generators in a batch must share one dimension")
        if len(frames) != 1:
            raise ValueError("all generators in a batch must share the frame")
        self.dim = dims.pop()
        self.frame = frames.pop()
        self.nb = len(gens)
        self.mats = np.stack([g.matrix for g in gens])
        self.out_index = gens[0].out_index
        self.in_index = gens[0].drive_index
        if any(g.out_index != self.out_index or g.drive_index != self.in_index
               for g in gens):
            raise ValueError("generators in a batch must share the index layout")
        self.sqrt_k1 = np.array([math.sqrt(g.kappa_1) for g in gens])
        self.tau_p = np.array([p.tau_p for p in pulses])
        self.delta0 = np.array([p.omega_0 - self.frame for p in pulses])
        self.inv_sqrt_tau = 1.0 / np.sqrt(self.tau_p)
        # hot-loop constants: b_in(t) = inv_sqrt_tau * exp(_exp_coeff * t)
        self._exp_coeff = -0.5 / self.tau_p - 1j * self.delta0
        self._drive = -1j * self.sqrt_k1

    def b_in(self, t: float) -> np.ndarray:
        """Ingoing field amplitude Xi~(t)/sqrt(2*pi) per batch member."""
        if t < 0.0:
            return np.zeros(self.nb, dtype=complex)
        return self.inv_sqrt_tau * np.exp(self._exp_coeff * t)

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        """d(state)/dt for the augmented state (nb, dim + 3).

        Layout per member: [psi (dim), q_out, q_in, q_cross] with
        q_out' = |A_out|^2, q_in' = |A_in|^2, q_cross' = conj(b_in) A_in.
        """
        y = state[:, : self.dim]
        dy = -1j * np.matmul(self.mats, y[:, :, None])[:, :, 0]
        b = self.b_in(t)
        dy[:, self.in_index] += self._drive * b
        out = np.empty_like(state)
        out[:, : self.dim] = dy
        a_out = y[:, self.out_index]
        a_in = y[:, self.in_index]
        out[:, self.dim] = a_out.real**2 + a_out.imag**2
        out[:, self.dim + 1] = a_in.real**2 + a_in.imag**2
        out[:, self.dim + 2] = np.conj(b) * a_in
        return out


def _dense_eval(y_old, k, h, theta, components=None):
    """Dense-output states at fractions ``theta`` of the current step.

    ``k`` has shape (7, nb, n_state); returns (len(theta), nb, n_comp).
    """
    powers = np.vander(theta, 5, increasing=True)[:, 1:]    # theta..theta^4
    if components is not None:
        k = k[:, :, components]
        y_old = y_old[:, components]
    nb, nc = y_old.shape
    q = _P.T @ k.reshape(7, nb * nc)                        # (4, nb*nc)
    return y_old[None] + (h * (powers @ q)).reshape(len(theta), nb, nc)


def integrate_batch(
    gens: list[Generator],
    pulses: list[Pulse],
    t_end: float,
    samples: int = 2000,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    fine_times: np.ndarray | None = None,
    record_steps: bool = False,
    max_steps: int = 5_000_000,
) -> list[Trajectory]:
    """Integrate several driven systems over [0, t_end] in lock-step.

    All systems share the adaptive step sequence (error-controlled on
    the worst member), the uniform sample grid, and the optional
    ``fine_times`` grid on which the two terminal amplitudes are
    recorded for spectral transforms.  Initial amplitudes are zero:
    the chain and qutrit start in vacuum and all excitation arrives
    through the drive.

    Returns one :class:`Trajectory` per generator.

    Raises
    ------
    NonConvergence
        If the step size underflows or ``max_steps`` is exhausted.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if len(gens) != len(pulses):
        raise ValueError("need one pulse per generator")
    batch = _Batch(gens, pulses)
    nb, dim = batch.nb, batch.dim
    nstate = dim + 3

    sample_times = np.linspace(0.0, t_end, samples)
    do_fine = fine_times is not None
    if do_fine:
        fine_times = np.asarray(fine_times, dtype=float)
        fine_vals = np.zeros((len(fine_times), nb, 2), dtype=complex)

    y = np.zeros((nb, nstate), dtype=complex)
    t = 0.0
    out_samples = np.zeros((samples, nb, nstate), dtype=complex)
    si = 1            # sample pointer; sample 0 is the zero state at t = 0
    fi = 0
    if do_fine:
        while fi < len(fine_times) and fine_times[fi] <= 0.0:
            fi += 1   # leading fine samples at t <= 0 stay zero

    if record_steps:
        rec_t = [0.0]
        rec_y = [y.copy()]

    # terminal components for the fine grid: (input, output)
    fine_comps = np.array([batch.in_index, batch.out_index])

    f = batch.rhs(t, y)
    # initial step: resolve the fastest rate in the generator or drive
    rho = float(np.max(np.sum(np.abs(batch.mats), axis=2)))
    rho = max(rho, float(np.max(1.0 / batch.tau_p)))
    h = min(t_end * 1e-3, 0.05 / rho) if rho > 0 else t_end * 1e-3
    max_step = t_end / 10.0
    min_step = 1e-13 * max(t_end, 1.0)

    k = np.empty((7, nb, nstate), dtype=complex)
    kflat = k.reshape(7, nb * nstate)
    n_accepted = 0
    n_rejected = 0
    just_rejected = False

    while t < t_end * (1.0 - 1e-15):
        if n_accepted + n_rejected >= max_steps:
            raise NonConvergence(t, f"exceeded {max_steps} steps at t = {t:g} us")
        h = min(h, max_step, t_end - t)
        if h < min_step:
            raise NonConvergence(t)

        k[0] = f
        for s in range(1, 6):
            ys = y + (h * (_A[s, :s] @ kflat[:s])).reshape(nb, nstate)
            k[s] = batch.rhs(t + _C[s] * h, ys)
        y_new = y + (h * (_B @ kflat[:6])).reshape(nb, nstate)
        f_new = batch.rhs(t + h, y_new)
        k[6] = f_new

        err_vec = (h * (_E @ kflat)).reshape(nb, nstate)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = np.abs(err_vec)
        ratio /= scale
        ratio *= ratio
        err = math.sqrt(float(ratio.mean(axis=1).max()))

        if err <= 1.0:
            t_new = t + h
            # dense output for display samples and spectral fine grid
            sj = si
            while sj < samples and sample_times[sj] <= t_new * (1 + 1e-15):
                sj += 1
            if sj > si:
                theta = (sample_times[si:sj] - t) / h
                out_samples[si:sj] = _dense_eval(y, k, h, theta)
                si = sj
            if do_fine:
                fj = fi
                nf = len(fine_times)
                while fj < nf and fine_times[fj] <= t_new * (1 + 1e-15):
                    fj += 1
                if fj > fi:
                    theta = (fine_times[fi:fj] - t) / h
                    fine_vals[fi:fj] = _dense_eval(y, k, h, theta, fine_comps)
                    fi = fj
            t, y, f = t_new, y_new, f_new
            n_accepted += 1
            if record_steps:
                rec_t.append(t)
                rec_y.append(y.copy())
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            if just_rejected:
                factor = min(1.0, factor)
            h *= factor
            just_rejected = False
        else:
            n_rejected += 1
            just_rejected = True
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)

    out_samples[samples - 1] = y   # exact terminal state, not interpolated
    if do_fine and fi < len(fine_times):
        fine_vals[fi:] = y[None, :, fine_comps]

    step_t = np.array(rec_t) if record_steps else None
    trajs = []
    for b in range(nb):
        trajs.append(Trajectory(
            times=sample_times,
            amplitudes=out_samples[:, b, :dim].copy(),
            cum_out=out_samples[:, b, dim].real.copy(),
            cum_in=out_samples[:, b, dim + 1].real.copy(),
            cum_cross=out_samples[:, b, dim + 2].copy(),
            qubit_state=gens[b].qubit_state,
            frame_omega=batch.frame,
            kappa_1=gens[b].kappa_1,
            kappa_2=gens[b].kappa_2,
            pulse=pulses[b],
            fine_times=fine_times if do_fine else None,
            fine_in=fine_vals[:, b, 0].copy() if do_fine else None,
            fine_out=fine_vals[:, b, 1].copy() if do_fine else None,
            n_steps=n_accepted,
            n_rejected=n_rejected,
            step_times=step_t,
            step_states=np.stack([s[b] for s in rec_y]) if record_steps else None,
        ))
    return trajs


def integrate(
    gen: Generator,
    pulse: Pulse,
    t_end: float,
    samples: int = 2000,
    **kwargs,
) -> Trajectory:
    """Integrate a single driven system; see :func:`integrate_batch`."""
    return integrate_batch([gen], [pulse], t_end, samples, **kwargs)[0]


def flux_balance_residual(traj: Trajectory) -> np.ndarray:
    """Probability-flux residual at every recorded step.

    For each accepted step the identity

        norm + kappa_2 * q_out + int_0^t |b_out|^2 dtau  =  1 - exp(-t/tau_p)

    must hold, where b_out = b_in - i*sqrt(kappa_1)*A_{-N} is the total
    outgoing field on the input side and the right-hand side is the
    probability injected by the pulse up to t.  Requires a trajectory
    integrated with ``record_steps=True``.  Returns the signed residual
    per step; its magnitude measures accumulated integration error.
    """
    if traj.step_states is None:
        raise ValueError("trajectory was not integrated with record_steps=True")
    dim = traj.amplitudes.shape[1]
    states = traj.step_states
    t = traj.step_times
    norm = np.sum(np.abs(states[:, :dim]) ** 2, axis=1)
    q_out = states[:, dim].real
    q_in = states[:, dim + 1].real
    q_cross = states[:, dim + 2]
    # int |b_out|^2 = int |b_in|^2 + kappa_1*q_in + 2*sqrt(kappa_1)*Im(q_cross)
    injected = traj.pulse.input_probability(t)
    out_side = injected + traj.kappa_1 * q_in \
        + 2.0 * math.sqrt(traj.kappa_1) * np.imag(q_cross)
    return norm + traj.kappa_2 * q_out + out_side - injected
