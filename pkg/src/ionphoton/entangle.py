"""Ion-photon entangled state model, fringe prediction and fidelity estimation.

The joint state lives on (atom qubit) x (photon polarization qubit) with
basis order (|down H>, |down V>, |up H>, |up V>).  The target Bell state is
(|down H> + |up V>)/sqrt(2).  Collection geometry enters through the
probabilities of radiation_geometry: the sigma-H and pi-V amplitudes form the
coherent Bell block, while the sigma-V weight sits as incoherent |down V>
population.

Measurement model: a half-wave plate rotates the photon qubit about the x
axis of its Bloch sphere (the rotation angle here is the Bloch angle, twice
the physical plate angle), a polarizing splitter sends H to APD1 and V to
APD2, and the atom is read out in z, optionally after a pi/2 pulse of
variable phase.  The lumped error budget holds a uniform depolarization
probability (applied to the state), an atom readout confusion probability
and a multiplicative contrast on the atom analysis rotation; the underlying
physical error sources are not modeled individually.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConditioningError, EstimationError, ValidationError
from .geometry import CollectionProbabilities

BASIS_LABELS = ("down_H", "down_V", "up_H", "up_V")
PSI_D = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0)


@dataclass
class IonPhotonState:
    """4x4 density operator over (atom) x (photon polarization)."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex).reshape(4, 4)

    def validate(self) -> None:
        if abs(self.rho.trace().real - 1.0) > 1e-12 or abs(self.rho.trace().imag) > 1e-12:
            raise ValidationError(f"trace {self.rho.trace()} != 1")
        if np.max(np.abs(self.rho - self.rho.conj().T)) > 1e-12:
            raise ValidationError("density operator not Hermitian")
        if np.linalg.eigvalsh(self.rho).min() < -1e-10:
            raise ValidationError("density operator not positive semidefinite")


@dataclass(frozen=True)
class ErrorBudget:
    """Lumped phenomenological errors: depolarization, readout confusion,
    and contrast of the atom analysis rotation."""

    depol: float = 0.0
    readout_err: float = 0.0
    rotation_contrast: float = 1.0

    def __post_init__(self):
        for name in ("depol", "readout_err", "rotation_contrast"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}={value} outside [0, 1]")


IDEAL_BUDGET = ErrorBudget()


@dataclass(frozen=True)
class MeasurementSettings:
    """One measurement configuration: photon Bloch rotation, optional atom
    pi/2 pulse phase, shot count and RNG seed."""

    photon_rotation: float
    atom_rotation: Optional[float] = None
    shots: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError("shots must be >= 1")

    @property
    def setting_value(self) -> float:
        return self.photon_rotation if self.atom_rotation is None else self.atom_rotation


def bell_fidelity(state: IonPhotonState) -> float:
    """Overlap of the state with the target Bell state."""
    return float(np.real(PSI_D @ state.rho @ PSI_D))


def build_state(
    probs: CollectionProbabilities,
    kappa: float = 1.0,
    budget: ErrorBudget = IDEAL_BUDGET,
) -> IonPhotonState:
    """Collected ion-photon density operator for a given aperture.

    Coherent block over {|down H>, |up V>} with populations (p_sigma_h, p_pi)
    and coherence kappa*sqrt(p_sigma_h*p_pi); p_sigma_v sits on |down V> as
    lost population.  The budget's depolarization then mixes in identity:
    rho -> (1 - depol) rho + depol I/4.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValidationError(f"kappa={kappa} outside [0, 1]")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = probs.p_sigma_h
    rho[1, 1] = probs.p_sigma_v
    rho[3, 3] = probs.p_pi
    coherence = kappa * math.sqrt(probs.p_sigma_h * probs.p_pi)
    rho[0, 3] = coherence
    rho[3, 0] = coherence
    rho = (1.0 - budget.depol) * rho + budget.depol * np.eye(4) / 4.0
    state = IonPhotonState(rho)
    state.validate()
    return state


def _photon_rotation(psi: float) -> np.ndarray:
    c, s = math.cos(psi / 2.0), math.sin(psi / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _atom_half_pi(phi: float) -> np.ndarray:
    # pi/2 rotation about the equatorial axis at azimuth phi
    off = -1j / math.sqrt(2.0)
    return np.array(
        [[1.0 / math.sqrt(2.0), off * np.exp(-1j * phi)], [off * np.exp(1j * phi), 1.0 / math.sqrt(2.0)]]
    )


def _atom_blocks(rho: np.ndarray, psi: float) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized 2x2 atom matrices conditioned on APD1 (H) and APD2 (V)."""
    u = np.kron(np.eye(2), _photon_rotation(psi))
    rotated = u @ rho @ u.conj().T
    blocks = []
    for j in (0, 1):
        idx = np.array([j, 2 + j])
        blocks.append(rotated[np.ix_(idx, idx)])
    return blocks[0], blocks[1]


def _confuse(p_up: np.ndarray, readout_err: float):
    return readout_err + (1.0 - 2.0 * readout_err) * p_up


@dataclass
class FringePrediction:
    """Analytic conditional probabilities P(up | APD) over a setting grid."""

    setting: np.ndarray
    p_up_apd1: np.ndarray
    p_up_apd2: np.ndarray

    def write_csv(self, fileobj) -> None:
        fileobj.write("setting_value,p_up_apd1,p_up_apd2\n")
        for s, a, b in zip(self.setting, self.p_up_apd1, self.p_up_apd2):
            fileobj.write(f"{s:.12g},{a:.12g},{b:.12g}\n")


def fringe_z(
    state: IonPhotonState,
    psi_grid,
    budget: ErrorBudget = IDEAL_BUDGET,
) -> FringePrediction:
    """P(up | APD) versus photon rotation angle (z-basis correlation fringe)."""
    psi_grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    p1 = np.empty(psi_grid.size)
    p2 = np.empty(psi_grid.size)
    for k, psi in enumerate(psi_grid):
        for j, block in enumerate(_atom_blocks(state.rho, psi)):
            weight = block.trace().real
            if weight < 1e-14:
                raise ConditioningError(
                    f"APD{j + 1} has zero detection probability at setting {psi}"
                )
            (p1 if j == 0 else p2)[k] = block[1, 1].real / weight
    return FringePrediction(
        setting=psi_grid,
        p_up_apd1=_confuse(p1, budget.readout_err),
        p_up_apd2=_confuse(p2, budget.readout_err),
    )


def _x_fringe_conditionals(
    state: IonPhotonState, phi: float, budget: ErrorBudget
) -> tuple[np.ndarray, np.ndarray]:
    """(weights, conditional P(up)) per APD for the coherence protocol."""
    weights = np.empty(2)
    p_up = np.empty(2)
    u = _atom_half_pi(phi)
    for j, block in enumerate(_atom_blocks(state.rho, math.pi / 2.0)):
        weight = block.trace().real
        if weight < 1e-14:
            raise ConditioningError(f"APD{j + 1} has zero detection probability")
        ideal = float(np.real(u[1] @ block @ u[1].conj()) / weight)
        mean = 0.5 * (block[0, 0].real + block[1, 1].real) / weight
        scaled = mean + budget.rotation_contrast * (ideal - mean)
        weights[j] = weight
        p_up[j] = _confuse(scaled, budget.readout_err)
    return weights, p_up


def fringe_x(
    state: IonPhotonState,
    phi_grid,
    budget: ErrorBudget = IDEAL_BUDGET,
) -> FringePrediction:
    """P(up | APD) versus atom pi/2-pulse phase, photon fixed at a pi/2 rotation.

    For the ideal Bell state this is (1 +- cos(phi))/2; in general the fringe
    amplitude equals the magnitude of the |down H>-|up V> coherence.
    """
    phi_grid = np.atleast_1d(np.asarray(phi_grid, dtype=float))
    p1 = np.empty(phi_grid.size)
    p2 = np.empty(phi_grid.size)
    for k, phi in enumerate(phi_grid):
        _, p_up = _x_fringe_conditionals(state, phi, budget)
        p1[k], p2[k] = p_up
    return FringePrediction(setting=phi_grid, p_up_apd1=p1, p_up_apd2=p2)


def measurement_probabilities(
    state: IonPhotonState,
    settings: MeasurementSettings,
    budget: ErrorBudget = IDEAL_BUDGET,
) -> np.ndarray:
    """Joint outcome probabilities [up&APD1, down&APD1, up&APD2, down&APD2]."""
    if settings.atom_rotation is None:
        block1, block2 = _atom_blocks(state.rho, settings.photon_rotation)
        joints = []
        for block in (block1, block2):
            up, down = block[1, 1].real, block[0, 0].real
            joints.append((up, down))
    else:
        weights, p_up_raw = _x_fringe_conditionals(state, settings.atom_rotation, budget)
        # p_up_raw already includes confusion; weights are the APD probabilities
        joints = [(w * p, w * (1.0 - p)) for w, p in zip(weights, p_up_raw)]
        probs = np.array([joints[0][0], joints[0][1], joints[1][0], joints[1][1]])
        return np.clip(probs, 0.0, None)
    r = budget.readout_err
    out = []
    for up, down in joints:
        out.extend([(1 - r) * up + r * down, (1 - r) * down + r * up])
    return np.clip(np.array(out), 0.0, None)


@dataclass
class FringeCounts:
    """Measured (or synthetic) counts per setting and APD."""

    setting: np.ndarray
    apd1_up: np.ndarray
    apd1_down: np.ndarray
    apd2_up: np.ndarray
    apd2_down: np.ndarray

    def write_csv(self, fileobj) -> None:
        fileobj.write("setting_value,apd,atom_up,atom_down\n")
        for k, s in enumerate(self.setting):
            fileobj.write(f"{s:.12g},1,{self.apd1_up[k]},{self.apd1_down[k]}\n")
            fileobj.write(f"{s:.12g},2,{self.apd2_up[k]},{self.apd2_down[k]}\n")

    @classmethod
    def read_csv(cls, fileobj) -> "FringeCounts":
        rows: dict[float, dict[int, tuple[int, int]]] = {}
        order: list[float] = []
        for line in fileobj:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("setting_value"):
                continue
            s, apd, up, down = line.split(",")
            s = float(s)
            if s not in rows:
                rows[s] = {}
                order.append(s)
            rows[s][int(apd)] = (int(up), int(down))
        setting = np.array(order)
        get = lambda s, apd, i: rows[s].get(apd, (0, 0))[i]
        return cls(
            setting=setting,
            apd1_up=np.array([get(s, 1, 0) for s in order]),
            apd1_down=np.array([get(s, 1, 1) for s in order]),
            apd2_up=np.array([get(s, 2, 0) for s in order]),
            apd2_down=np.array([get(s, 2, 1) for s in order]),
        )


def z_protocol_settings(psi_grid, shots: int, seed: int) -> list[MeasurementSettings]:
    return [
        MeasurementSettings(photon_rotation=float(psi), shots=shots, seed=seed + k)
        for k, psi in enumerate(np.atleast_1d(psi_grid))
    ]


def x_protocol_settings(phi_grid, shots: int, seed: int) -> list[MeasurementSettings]:
    return [
        MeasurementSettings(
            photon_rotation=math.pi / 2.0, atom_rotation=float(phi), shots=shots, seed=seed + k
        )
        for k, phi in enumerate(np.atleast_1d(phi_grid))
    ]


def simulate_measurements(
    state: IonPhotonState,
    settings: Sequence[MeasurementSettings],
    budget: ErrorBudget = IDEAL_BUDGET,
) -> FringeCounts:
    """Multinomial draws from the analytic outcome probabilities, one RNG
    substream per setting."""
    if not settings:
        raise ValidationError("at least one measurement setting required")
    values, a1u, a1d, a2u, a2d = [], [], [], [], []
    for setting in settings:
        probs = measurement_probabilities(state, setting, budget)
        total = probs.sum()
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValidationError(f"outcome probabilities sum to {total}, state not normalized")
        counts = np.random.default_rng(setting.seed).multinomial(setting.shots, probs / total)
        values.append(setting.setting_value)
        a1u.append(counts[0])
        a1d.append(counts[1])
        a2u.append(counts[2])
        a2d.append(counts[3])
    return FringeCounts(
        setting=np.array(values),
        apd1_up=np.array(a1u),
        apd1_down=np.array(a1d),
        apd2_up=np.array(a2u),
        apd2_down=np.array(a2d),
    )


def _fit_fringe(phi: np.ndarray, y: np.ndarray, variances: Optional[np.ndarray]):
    """Least-squares fit y ~ m + a cos(phi) + b sin(phi) with fixed period.

    Returns (amplitude, variance of amplitude).  variances of the points
    propagate through the normal equations; pass None for exact inputs.
    """
    if phi.size < 3:
        raise EstimationError("x-basis fringe needs at least 3 usable settings")
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    gram = design.T @ design
    try:
        solve = np.linalg.solve(gram, design.T)
    except np.linalg.LinAlgError:
        raise EstimationError("degenerate fringe fit: settings do not constrain the sinusoid") from None
    coeff = solve @ y
    amp = math.hypot(coeff[1], coeff[2])
    if variances is None:
        return amp, 0.0
    cov = solve @ np.diag(variances) @ solve.T
    if amp < 1e-12:
        return amp, float(cov[1, 1] + cov[2, 2])
    grad = np.array([0.0, coeff[1] / amp, coeff[2] / amp])
    return amp, float(grad @ cov @ grad)


def _z_populations(z_counts: FringeCounts):
    at_zero = np.nonzero(np.abs(z_counts.setting) < 1e-9)[0]
    if at_zero.size == 0:
        raise EstimationError("z-basis counts must include the zero-rotation setting")
    k = at_zero[0]
    shots = (
        z_counts.apd1_up[k] + z_counts.apd1_down[k] + z_counts.apd2_up[k] + z_counts.apd2_down[k]
    )
    if shots == 0:
        raise EstimationError("no shots recorded at the zero-rotation setting")
    p_down_apd1 = z_counts.apd1_down[k] / shots
    p_up_apd2 = z_counts.apd2_up[k] / shots
    var = (
        p_down_apd1 * (1 - p_down_apd1) / shots
        + p_up_apd2 * (1 - p_up_apd2) / shots
        - 2 * p_down_apd1 * p_up_apd2 / shots
    )
    return p_down_apd1, p_up_apd2, max(var, 0.0)


def _x_amplitudes(x_counts: FringeCounts):
    amps, amp_vars = [], []
    for up, down in (
        (x_counts.apd1_up, x_counts.apd1_down),
        (x_counts.apd2_up, x_counts.apd2_down),
    ):
        totals = up + down
        usable = totals > 0
        if not usable.any():
            raise EstimationError("an APD branch has no detections in the x-basis data")
        phi = x_counts.setting[usable]
        n = totals[usable].astype(float)
        y = up[usable] / n
        smoothed = (up[usable] + 0.5) / (n + 1.0)
        variances = smoothed * (1.0 - smoothed) / n
        amp, var = _fit_fringe(phi, y, variances)
        amps.append(amp)
        amp_vars.append(var)
    return amps, amp_vars


def estimate_fidelity(z_counts: FringeCounts, x_counts: FringeCounts) -> tuple[float, float]:
    """Bell-state fidelity from the two fringe data sets.

    F = (P(down & APD1) + P(up & APD2))/2 at zero photon rotation, plus half
    the fitted peak-to-peak contrast of the x-basis fringes (averaged over the
    two APDs with inverse-variance weights).  On exact probabilities this is
    the standard population-plus-coherence lower bound on the true fidelity.
    """
    p_down_apd1, p_up_apd2, z_var = _z_populations(z_counts)
    amps, amp_vars = _x_amplitudes(x_counts)
    if all(v > 0 for v in amp_vars):
        w = np.array([1.0 / v for v in amp_vars])
        amp = float(np.dot(w, amps) / w.sum())
        amp_var = 1.0 / w.sum()
    else:
        amp = float(np.mean(amps))
        amp_var = float(np.mean(amp_vars)) / 2.0
    fidelity = 0.5 * (p_down_apd1 + p_up_apd2) + amp
    sigma = math.sqrt(0.25 * z_var + amp_var)
    return fidelity, sigma


DEFAULT_PHI_GRID = np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)


def predicted_fidelity(
    state: IonPhotonState,
    budget: ErrorBudget = IDEAL_BUDGET,
    phi_grid: Optional[np.ndarray] = None,
) -> float:
    """The fidelity estimator evaluated on exact (infinite-shot) probabilities.

    With a nonzero budget this is the apparent fidelity the experiment would
    report; with an ideal budget it equals the true Bell overlap for states
    whose coherence is real and nonnegative (every build_state output).
    """
    grid = DEFAULT_PHI_GRID if phi_grid is None else np.asarray(phi_grid, dtype=float)
    joints = measurement_probabilities(
        state, MeasurementSettings(photon_rotation=0.0), budget
    )
    z_part = 0.5 * (joints[1] + joints[2])
    fringes = fringe_x(state, grid, budget)
    amp1, _ = _fit_fringe(grid, fringes.p_up_apd1, None)
    amp2, _ = _fit_fringe(grid, fringes.p_up_apd2, None)
    return z_part + 0.5 * (amp1 + amp2)


def fit_depolarization(f_mix: float, f_target: float) -> float:
    """Depolarization probability that degrades a state of fidelity f_mix to
    f_target: solves f_target = (1 - p) f_mix + p/4."""
    if f_target > f_mix:
        raise ValidationError(f"target fidelity {f_target} exceeds the mixing-limited {f_mix}")
    if f_target < 0.25:
        raise ValidationError("target fidelity below the fully-mixed floor of 1/4")
    p = (f_mix - f_target) / (f_mix - 0.25)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"fitted depolarization {p} outside [0, 1]")
    return p
