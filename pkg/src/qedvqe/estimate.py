"""H2 Hamiltonian handling, logical decoding, and energy/variance/SEM estimation.

The estimator treats the five Pauli terms as independently measured: the Z
terms share the computational-basis table, the XX term uses the
Hadamard-rotated table, and the variance model sums g_i^2 (1 - <P_i>^2)
without cross-term covariance. SEM combines the per-term pieces in
quadrature using each basis's post-selected sample count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .postselect import EmptySelectionError
from .qcore import ROLE_DATA, Circuit, pauli_word
from .sim import MeasurementLayout, ShotTable

MODE_UNENCODED = "unencoded"
MODE_ENCODED = "encoded"


@dataclass(frozen=True)
class PauliTerm:
    coeff: float
    word: str  # per logical qubit, e.g. "ZI"

    def __post_init__(self):
        if not math.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")
        if len(self.word) != 2 or any(c not in "IXYZ" for c in self.word):
            raise ValueError("word must be two of I/X/Y/Z")


@dataclass(frozen=True)
class H2Hamiltonian:
    """g0 I + g1 Z0 + g2 Z1 + g3 Z0Z1 + g4 X0X1, coefficients in Hartree."""

    g0: float
    g1: float
    g2: float
    g3: float
    g4: float
    geometry_angstrom: float = 0.74

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return (
            PauliTerm(self.g0, "II"),
            PauliTerm(self.g1, "ZI"),
            PauliTerm(self.g2, "IZ"),
            PauliTerm(self.g3, "ZZ"),
            PauliTerm(self.g4, "XX"),
        )

    def matrix(self) -> np.ndarray:
        return sum(t.coeff * pauli_word(t.word) for t in self.terms)

    def logical_matrix(self) -> np.ndarray:
        """Physical observable over (a1, q0..q3, a2) realizing the logical terms."""
        words = ("IIIIII", "IZZIII", "IZIZII", "IIZZII", "IIXXII")
        coeffs = (self.g0, self.g1, self.g2, self.g3, self.g4)
        return sum(c * pauli_word(w) for c, w in zip(coeffs, words))

    def closed_form_energy(self, theta: float) -> float:
        """Noiseless energy of the ansatz state at angle theta."""
        return (
            self.g0
            + (self.g1 + self.g2) * math.cos(theta)
            + self.g3
            + self.g4 * math.sin(theta)
        )

    def analytic_minimum(self):
        theta = math.atan2(-self.g4, -(self.g1 + self.g2))
        if theta > math.pi / 2:
            theta -= math.pi
        elif theta < -math.pi / 2:
            theta += math.pi
        candidates = (theta, theta + math.pi, theta - math.pi)
        best = min(candidates, key=self.closed_form_energy)
        return best, self.closed_form_energy(best)


def default_h2() -> H2Hamiltonian:
    return H2Hamiltonian(
        g0=-0.349833, g1=-0.388748, g2=-0.388748, g3=0.0111772, g4=0.181771
    )


THETA_STAR = -0.22967
E_STAR_HA = -1.13712


@dataclass
class EnergyEstimate:
    mean: float  # Ha
    variance: float  # Ha^2
    sem: float  # Ha
    n_used: dict[str, int]
    eta: dict[str, float] = field(default_factory=lambda: {"Z": 1.0, "X": 1.0})


def decode_logical(bits) -> tuple[int, int] | None:
    """Parity decode of four data bits; odd-parity strings are outside the codespace."""
    b = [int(v) for v in bits]
    if len(b) != 4:
        raise ValueError("expected four data bits")
    if sum(b) % 2 == 1:
        return None
    return (b[0] ^ b[1], b[0] ^ b[2])


def _data_positions(layout: MeasurementLayout, mode: str) -> tuple[int, ...]:
    pos = layout.positions_of_role(ROLE_DATA)
    want = 2 if mode == MODE_UNENCODED else 4
    if len(pos) != want:
        raise ValueError(f"{mode} mode needs {want} data qubits, layout has {len(pos)}")
    return pos


def _term_means(weighted: dict[str, float], layout: MeasurementLayout, mode: str, basis: str):
    """Weighted means of the term observables available in one basis.

    Z basis yields (Z0, Z1, Z0Z1); X basis yields the XX product. In encoded
    mode the logical values are physical parities of the data bits:
    Z0 -> q0^q1, Z1 -> q0^q2, and both the ZZ and XX products -> q1^q2.
    """
    pos = _data_positions(layout, mode)
    total = sum(weighted.values())
    if total <= 0.0:
        raise EmptySelectionError("no surviving samples")
    acc = np.zeros(3 if basis == "Z" else 1)
    for key, w in weighted.items():
        b = [int(key[p]) for p in pos]
        if mode == MODE_UNENCODED:
            v1, v2, vp = b[0], b[1], b[0] ^ b[1]
        else:
            v1, v2, vp = b[0] ^ b[1], b[0] ^ b[2], b[1] ^ b[2]
        if basis == "Z":
            acc += w * np.array([1 - 2 * v1, 1 - 2 * v2, 1 - 2 * vp])
        else:
            acc += w * np.array([1 - 2 * vp])
    return acc / total


def _combine(ham: H2Hamiltonian, z_means, xx_mean, n_z, n_x, eta) -> EnergyEstimate:
    gs = (ham.g1, ham.g2, ham.g3, ham.g4)
    means = (z_means[0], z_means[1], z_means[2], xx_mean)
    ns = (n_z, n_z, n_z, n_x)
    mean = ham.g0 + sum(g * m for g, m in zip(gs, means))
    pieces = [g * g * max(0.0, 1.0 - m * m) for g, m in zip(gs, means)]
    variance = sum(pieces)
    sem2 = sum(p / n for p, n in zip(pieces, ns) if n) if all(ns) else 0.0
    return EnergyEstimate(
        mean=mean,
        variance=variance,
        sem=math.sqrt(sem2),
        n_used={"Z": n_z, "X": n_x},
        eta=dict(eta),
    )


def energy_from_shots(
    z_table: ShotTable,
    x_table: ShotTable,
    ham: H2Hamiltonian,
    mode: str = MODE_UNENCODED,
    eta=None,
) -> EnergyEstimate:
    """Estimate the energy from post-selected Z- and X-basis tables."""
    if z_table.n_shots == 0 or x_table.n_shots == 0:
        raise EmptySelectionError("post-selection rejected every shot")
    z_means = _term_means(z_table.counts, z_table.layout, mode, "Z")
    (xx,) = _term_means(x_table.counts, x_table.layout, mode, "X")
    return _combine(
        ham, z_means, xx, z_table.n_shots, x_table.n_shots,
        eta or {"Z": 1.0, "X": 1.0},
    )


def energy_from_distributions(
    z_probs: dict[str, float],
    x_probs: dict[str, float],
    layout: MeasurementLayout,
    ham: H2Hamiltonian,
    mode: str = MODE_UNENCODED,
    eta=None,
) -> EnergyEstimate:
    """Infinite-shot estimate from exact outcome distributions (SEM = 0)."""
    z_means = _term_means(z_probs, layout, mode, "Z")
    (xx,) = _term_means(x_probs, layout, mode, "X")
    return _combine(ham, z_means, xx, 0, 0, eta or {"Z": 1.0, "X": 1.0})


def scan_theta(runner, n_points: int = 150, lo: float = -math.pi, hi: float = math.pi):
    """Grid minimization: runner(theta) -> EnergyEstimate.

    Returns (theta_min, [(theta, estimate), ...]); exact energy ties break
    toward smaller |theta|.
    """
    if n_points < 2:
        raise ValueError("need at least two grid points")
    grid = np.linspace(lo, hi, n_points)
    curve = [(float(t), runner(float(t))) for t in grid]
    theta_min, _ = min(curve, key=lambda te: (te[1].mean, abs(te[0])))
    return theta_min, curve


def shot_budget(variance: float, target_sem: float) -> int:
    """Shots needed so that sqrt(variance / N) <= target_sem, rounded up."""
    if variance < 0.0 or target_sem <= 0.0:
        raise ValueError("variance must be >= 0 and target_sem > 0")
    if variance == 0.0:
        return 1
    ratio = variance / (target_sem * target_sem)
    return max(1, math.ceil(ratio - 1e-9))


# ---------------------------------------------------------------------------
# electronic-integral reduction and device cost
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Integrals:
    """One- and two-body integrals of the 4-spin-orbital H2 Hamiltonian."""

    h00: float
    h11: float
    h22: float
    h33: float
    h2002: float
    h3113: float
    h2112: float
    h0330: float
    h2103: float
    h2013: float
    h2332: float = 0.0
    h2323: float = 0.0
    h0110: float = 0.0
    h0101: float = 0.0

    def __post_init__(self, tol: float = 1e-10):
        if abs(self.h2013 - self.h2103) > tol:
            raise ValueError("integral symmetry violated: h2013 != h2103")
        if abs(self.h2112 - self.h0330) > tol:
            raise ValueError("integral symmetry violated: h2112 != h0330")


def integrals_to_coeffs(ints: Integrals) -> tuple[float, float, float, float, float]:
    """Closed-form reduction of the integrals to the five qubit coefficients.

    Derived by restricting the second-quantized Hamiltonian to the four
    spin-singlet occupation states and expanding the projectors in Pauli
    words; the brute-force restriction is the test oracle. g1 carries the
    (h00, h11) orbital pair and multiplies the Z of the qubit recording that
    pair's occupation (the second ket symbol); for physical inputs, where
    each spatial orbital appears with both spins (h00 = h22, h11 = h33), the
    two Z coefficients coincide.
    """
    g0 = 0.5 * (ints.h00 + ints.h11 + ints.h22 + ints.h33) + 0.25 * (
        ints.h2002 + ints.h3113 + ints.h2112 + ints.h0330
    )
    g1 = 0.5 * (ints.h00 - ints.h11) + 0.25 * (
        ints.h2002 - ints.h3113 - ints.h2112 + ints.h0330
    )
    g2 = 0.5 * (ints.h22 - ints.h33) + 0.25 * (
        ints.h2002 - ints.h3113 + ints.h2112 - ints.h0330
    )
    g3 = 0.25 * (ints.h2002 + ints.h3113 - ints.h2112 - ints.h0330)
    g4 = ints.h2103
    return (g0, g1, g2, g3, g4)


@dataclass(frozen=True)
class ResourceCount:
    n_1q: int
    n_2q: int
    n_meas: int
    shots: int

    def __post_init__(self):
        if min(self.n_1q, self.n_2q, self.n_meas, self.shots) < 0:
            raise ValueError("resource counts must be nonnegative")

    @classmethod
    def of_circuit(cls, circuit: Circuit, shots: int) -> "ResourceCount":
        n1, n2, nm = circuit.gate_counts()
        return cls(n1, n2, nm, shots)


def hqc_cost(rc: ResourceCount) -> float:
    """Device-credit cost: 5 + (N1q + 10 N2q + 5 Nm) / 5000 * shots."""
    return 5.0 + (rc.n_1q + 10 * rc.n_2q + 5 * rc.n_meas) / 5000.0 * rc.shots
