"""Pulsed 650 nm excitation dynamics and the double-excitation error budget.

The coherent system is the six-level block {four D3/2 sublevels, two P1/2
sublevels}.  No field couples S1/2, so ground-state population is tracked in
four classical sinks labelled by the Zeeman level reached (down/up) and by
which P1/2 sublevel sourced the decay: decays from P1/2(+1/2) feed the "good"
sinks, decays from P1/2(-1/2) the "bad" ones.  Decays back into D3/2 re-enter
the coherent block untagged and can be re-excited by the drive, which is the
error mechanism this module quantifies.

The sigma-minus drive couples the two Delta-m = -1 transitions on the red
line, D3/2(+3/2) <-> P1/2(+1/2) and D3/2(+1/2) <-> P1/2(-1/2), with relative
Rabi amplitudes set by the square roots of their Clebsch-Gordan weights.

Evolution is a master equation with channel-resolved jump operators,
integrated with a classical fixed-step fourth-order Runge-Kutta rule.  The
generator is linear, so total probability (trace plus sinks) is conserved to
rounding at every step; convergence is checked by step halving rather than
adaptive control, which keeps scans bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .atomic import AtomSpec, Sublevel, Term, decay_channels
from .errors import ValidationError

COHERENT_LEVELS: tuple[Sublevel, ...] = (
    Sublevel(Term.D32, -1.5),
    Sublevel(Term.D32, -0.5),
    Sublevel(Term.D32, +0.5),
    Sublevel(Term.D32, +1.5),
    Sublevel(Term.P12, -0.5),
    Sublevel(Term.P12, +0.5),
)
SINK_LABELS = ("s_down_good", "s_up_good", "s_down_bad", "s_up_bad")

_DIM = len(COHERENT_LEVELS)
_NSINK = len(SINK_LABELS)
_SIZE = _DIM * _DIM + _NSINK


def basis_index(level: Sublevel) -> int:
    try:
        return COHERENT_LEVELS.index(level)
    except ValueError:
        raise ValidationError(f"{level} is not in the coherent block") from None


def _sink_index(m_s: float, good: bool) -> int:
    return (0 if m_s < 0 else 1) + (0 if good else 2)


@dataclass(frozen=True)
class PulseSpec:
    """Square excitation pulse: duration t_p (ns), Rabi rate omega (rad/ns).

    omega defaults to pi/t_p, the area-pi convention used throughout the
    error scans.  detuning is a single scalar laser detuning applied to both
    driven transitions (rad/ns); Zeeman splittings within D3/2 are not
    modeled.
    """

    t_p: float
    omega: Optional[float] = None
    detuning: float = 0.0
    shape: str = "square"

    def __post_init__(self):
        if not self.t_p > 0:
            raise ValidationError(f"t_p={self.t_p} must be positive")
        if self.shape != "square":
            raise ValidationError(f"unsupported pulse shape {self.shape!r}")
        if self.omega is None:
            object.__setattr__(self, "omega", math.pi / self.t_p)
        if self.omega < 0:
            raise ValidationError("omega must be nonnegative")


class DynamicState:
    """Density matrix over the coherent block plus the four ground-state sinks."""

    __slots__ = ("rho", "sinks")

    def __init__(self, rho: np.ndarray, sinks: np.ndarray):
        self.rho = np.asarray(rho, dtype=complex).reshape(_DIM, _DIM)
        self.sinks = np.asarray(sinks, dtype=float).reshape(_NSINK)

    @classmethod
    def pure(cls, level: Sublevel) -> "DynamicState":
        rho = np.zeros((_DIM, _DIM), dtype=complex)
        i = basis_index(level)
        rho[i, i] = 1.0
        return cls(rho, np.zeros(_NSINK))

    def population(self, level: Sublevel) -> float:
        i = basis_index(level)
        return float(self.rho[i, i].real)

    def sink(self, label: str) -> float:
        return float(self.sinks[SINK_LABELS.index(label)])

    def sink_total(self) -> float:
        return float(self.sinks.sum())

    def total_probability(self) -> float:
        return float(self.rho.trace().real + self.sinks.sum())

    def validate(self, atol: float = 1e-9) -> None:
        if abs(self.total_probability() - 1.0) > atol:
            raise ValidationError(
                f"state not normalized: trace+sinks = {self.total_probability()!r}"
            )
        if np.max(np.abs(self.rho - self.rho.conj().T)) > atol:
            raise ValidationError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(self.rho).min() < -atol:
            raise ValidationError("density matrix is not positive semidefinite")
        if self.sinks.min() < -atol:
            raise ValidationError("sink populations must be nonnegative")

    def copy(self) -> "DynamicState":
        return DynamicState(self.rho.copy(), self.sinks.copy())


@dataclass
class BlochTrajectory:
    times: np.ndarray
    states: list[DynamicState]

    @property
    def final(self) -> DynamicState:
        return self.states[-1]


@dataclass
class ErrorCurve:
    """Double-excitation error versus pulse duration."""

    t_p: np.ndarray
    epsilon_d: np.ndarray

    def write_csv(self, fileobj) -> None:
        fileobj.write("t_p_ns,epsilon_d\n")
        for tp, eps in zip(self.t_p, self.epsilon_d):
            fileobj.write(f"{tp:.11e},{eps:.11e}\n")


def _pack(state: DynamicState) -> np.ndarray:
    y = np.empty(_SIZE, dtype=complex)
    y[: _DIM * _DIM] = state.rho.ravel()
    y[_DIM * _DIM :] = state.sinks
    return y


def _unpack(y: np.ndarray) -> DynamicState:
    rho = y[: _DIM * _DIM].reshape(_DIM, _DIM).copy()
    sinks = y[_DIM * _DIM :].real.copy()
    return DynamicState(rho, sinks)


def _generator(atom: AtomSpec, omega: float, detuning: float) -> np.ndarray:
    """Linear generator acting on [vec(rho), sinks]."""
    ham = np.zeros((_DIM, _DIM), dtype=complex)
    if omega > 0.0:
        drive = [
            ch for ch in atom.channels if ch.q == -1 and ch.lower.term is Term.D32
        ]
        ref = next(ch.cg2 for ch in drive if ch.lower.mj == 1.5)
        for ch in drive:
            amp = omega * math.sqrt(ch.cg2 / ref)
            iu, il = basis_index(ch.upper), basis_index(ch.lower)
            ham[iu, il] += amp / 2.0
            ham[il, iu] += amp / 2.0
        if detuning:
            for m in (-0.5, +0.5):
                ip = basis_index(Sublevel(Term.P12, m))
                ham[ip, ip] -= detuning

    eye = np.eye(_DIM)
    rho_block = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    total_rate = np.zeros(_DIM)
    gen = np.zeros((_SIZE, _SIZE), dtype=complex)
    for m_up in (-0.5, +0.5):
        upper = Sublevel(Term.P12, m_up)
        iu = basis_index(upper)
        for ch, rate in decay_channels(upper, atom):
            total_rate[iu] += rate
            if ch.lower.term is Term.D32:
                jump = np.zeros((_DIM, _DIM))
                jump[basis_index(ch.lower), iu] = 1.0
                rho_block += rate * np.kron(jump, jump)
            else:
                k = _sink_index(ch.lower.mj, good=(m_up > 0))
                gen[_DIM * _DIM + k, iu * _DIM + iu] += rate
    decay = np.diag(total_rate)
    rho_block -= 0.5 * (np.kron(decay, eye) + np.kron(eye, decay))
    gen[: _DIM * _DIM, : _DIM * _DIM] += rho_block
    return gen


def _rk4_step_matrix(gen: np.ndarray, dt: float) -> np.ndarray:
    """One-step transfer matrix of classical RK4 for the linear system y' = G y."""
    step = np.eye(_SIZE, dtype=complex)
    term = np.eye(_SIZE, dtype=complex)
    scaled = gen * dt
    for k in (1, 2, 3, 4):
        term = term @ scaled / k
        step = step + term
    return step


def _check_dt(atom: AtomSpec, omega: float, dt: float) -> None:
    if not dt > 0:
        raise ValidationError(f"dt={dt} must be positive")
    if dt > atom.tau_e / 200 * (1 + 1e-12):
        raise ValidationError(
            f"dt={dt} too large: must be <= tau_e/200 = {atom.tau_e / 200}"
        )
    if omega > 0 and dt > (2 * math.pi / omega) / 100 * (1 + 1e-12):
        raise ValidationError(
            f"dt={dt} too large: must resolve the Rabi period with >= 100 steps"
        )


def evolve(
    atom: AtomSpec,
    pulse: PulseSpec,
    initial: DynamicState,
    dt: float,
    t_end: float,
    record_stride: int = 1,
) -> BlochTrajectory:
    """Integrate the master equation from t=0 through the pulse and beyond.

    The drive is on for t in [0, t_p) and off afterwards; t_end must be at
    least t_p.  Returns the sampled trajectory including both segment
    boundaries.  Steps are sized so each segment is covered by an integer
    number of equal steps no larger than dt.
    """
    _check_dt(atom, pulse.omega, dt)
    if t_end < pulse.t_p * (1 - 1e-12):
        raise ValidationError(f"t_end={t_end} shorter than the pulse t_p={pulse.t_p}")
    if record_stride < 1:
        raise ValidationError("record_stride must be >= 1")
    initial.validate(atol=1e-9)

    segments = [(pulse.t_p, _generator(atom, pulse.omega, pulse.detuning))]
    if t_end > pulse.t_p:
        segments.append((t_end - pulse.t_p, _generator(atom, 0.0, 0.0)))

    y = _pack(initial)
    times = [0.0]
    states = [initial.copy()]
    t0 = 0.0
    for length, gen in segments:
        nsteps = max(1, math.ceil(length / dt - 1e-12))
        h = length / nsteps
        step = _rk4_step_matrix(gen, h)
        for i in range(1, nsteps + 1):
            y = step @ y
            if i % record_stride == 0 or i == nsteps:
                times.append(t0 + i * h)
                states.append(_unpack(y))
        t0 += length
    return BlochTrajectory(np.asarray(times), states)


def double_excitation_error(
    atom: AtomSpec,
    t_p: float,
    detuning: float = 0.0,
    dt: Optional[float] = None,
) -> float:
    """Fraction of ground-state population fed by the wrong P1/2 sublevel.

    Starts from the D3/2(+3/2) stretch state, applies an area-pi square pulse
    (omega = pi/t_p), then lets the system decay freely until the sink totals
    have converged (at least 15 lifetimes, in 5-lifetime chunks until the
    total changes by < 1e-9).  Returns (bad sinks) / (all sinks).

    When dt is omitted, the pulse segment is stepped at min(tau_e/400,
    t_p/200) and the drive-free tail at tau_e/400 (the tail has no Rabi
    timescale to resolve).  An explicit dt is used for both segments.
    """
    if not t_p > 0:
        raise ValidationError(f"t_p={t_p} must be positive")
    pulse = PulseSpec(t_p=t_p, detuning=detuning)
    if dt is None:
        pulse_dt = min(atom.tau_e / 400.0, t_p / 200.0)
        tail_dt = atom.tau_e / 400.0
    else:
        pulse_dt = tail_dt = dt
    _check_dt(atom, pulse.omega, pulse_dt)
    _check_dt(atom, 0.0, tail_dt)

    y = _pack(DynamicState.pure(Sublevel(Term.D32, +1.5)))

    n_pulse = max(1, math.ceil(t_p / pulse_dt - 1e-12))
    step = _rk4_step_matrix(_generator(atom, pulse.omega, detuning), t_p / n_pulse)
    for _ in range(n_pulse):
        y = step @ y

    chunk = 5.0 * atom.tau_e
    n_tail = max(1, math.ceil(chunk / tail_dt - 1e-12))
    step = _rk4_step_matrix(_generator(atom, 0.0, 0.0), chunk / n_tail)
    sink_slice = slice(_DIM * _DIM, None)
    previous = float(y[sink_slice].real.sum())
    for n_chunks in range(1, 17):
        for _ in range(n_tail):
            y = step @ y
        current = float(y[sink_slice].real.sum())
        if n_chunks >= 3 and current - previous < 1e-9:
            break
        previous = current

    sinks = y[sink_slice].real
    total = sinks.sum()
    if total <= 0.0:
        return 0.0
    return float((sinks[2] + sinks[3]) / total)


def scan_pulse_durations(
    atom: AtomSpec,
    t_p_grid,
    detuning: float = 0.0,
    dt: Optional[float] = None,
) -> ErrorCurve:
    """Double-excitation error evaluated pointwise over a grid of pulse times."""
    grid = np.asarray(t_p_grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("pulse duration grid is empty")
    if not np.all(grid > 0):
        raise ValidationError("pulse durations must be positive")
    eps = np.array(
        [double_excitation_error(atom, tp, detuning=detuning, dt=dt) for tp in grid]
    )
    return ErrorCurve(t_p=grid, epsilon_d=eps)
