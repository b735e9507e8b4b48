"""Dense complex linear algebra: state representations, gate matrices, circuit IR.

Conventions used throughout the package:

* qubit 0 is the leftmost ket symbol and the most significant bit of an
  amplitude index, so ``|q0 q1⟩ = |01⟩`` has amplitude index 1;
* ``RY(t) = exp(-i t Y / 2)``, ``RZ(t) = exp(-i t Z / 2)``;
* measurements are terminal Z-basis reads (no mid-circuit measurement).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 24

ROLE_DATA = "data"
ROLE_A1 = "ancilla_a1"
ROLE_A2 = "ancilla_a2"
ROLE_RED = "red_readout"
ROLE_SYNDROME = "syndrome"
ROLES = (ROLE_DATA, ROLE_A1, ROLE_A2, ROLE_RED, ROLE_SYNDROME)

_SQ2 = 1.0 / math.sqrt(2.0)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_FIXED_1Q = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
}

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

PARAMETRIC_KINDS = ("RY", "RZ")
UNITARY_1Q_KINDS = tuple(_FIXED_1Q) + PARAMETRIC_KINDS
UNITARY_2Q_KINDS = ("CNOT", "SWAP")
NONUNITARY_KINDS = ("MEASURE_Z", "RESET")
GATE_KINDS = UNITARY_1Q_KINDS + UNITARY_2Q_KINDS + NONUNITARY_KINDS


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2.0), math.sin(t / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex
    )


@dataclass(frozen=True)
class Gate:
    """One circuit operation: kind, target qubit(s), optional control and angle."""

    kind: str
    targets: tuple[int, ...]
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in PARAMETRIC_KINDS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} requires one finite angle")
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")
        if self.kind == "CNOT":
            if self.control is None or len(self.targets) != 1:
                raise ValueError("CNOT takes a control and one target")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control")
        n_targets = 2 if self.kind == "SWAP" else 1
        if len(self.targets) != n_targets:
            raise ValueError(f"{self.kind} takes {n_targets} target(s)")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("gate qubits must be distinct")
        if any(q < 0 for q in self.qubits):
            raise ValueError("negative qubit index")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is not None:
            return (self.control,) + self.targets
        return self.targets

    @property
    def is_unitary(self) -> bool:
        return self.kind not in NONUNITARY_KINDS

    def matrix(self) -> np.ndarray:
        """Unitary acting on ``self.qubits`` (most significant qubit first)."""
        if self.kind in _FIXED_1Q:
            return _FIXED_1Q[self.kind]
        if self.kind == "RY":
            return _ry(self.angle)
        if self.kind == "RZ":
            return _rz(self.angle)
        if self.kind == "CNOT":
            return _CNOT
        if self.kind == "SWAP":
            return _SWAP
        raise ValueError(f"{self.kind} has no unitary matrix")

    def to_text(self) -> str:
        parts = [self.kind] + [str(q) for q in self.qubits]
        if self.angle is not None:
            parts.append(repr(self.angle))
        return " ".join(parts)


def h(q):
    return Gate("H", (q,))


def x(q):
    return Gate("X", (q,))


def y(q):
    return Gate("Y", (q,))


def z(q):
    return Gate("Z", (q,))


def s(q):
    return Gate("S", (q,))


def ry(angle, q):
    return Gate("RY", (q,), angle=float(angle))


def rz(angle, q):
    return Gate("RZ", (q,), angle=float(angle))


def cnot(control, target):
    return Gate("CNOT", (target,), control=control)


def swap(a, b):
    return Gate("SWAP", (a, b))


def measure(q):
    return Gate("MEASURE_Z", (q,))


def reset(q):
    return Gate("RESET", (q,))


def gate_from_text(line: str) -> Gate:
    parts = line.split()
    kind = parts[0]
    if kind in PARAMETRIC_KINDS:
        qubits, angle = [int(p) for p in parts[1:-1]], float(parts[-1])
    else:
        qubits, angle = [int(p) for p in parts[1:]], None
    if kind == "CNOT":
        return Gate(kind, (qubits[1],), control=qubits[0])
    return Gate(kind, tuple(qubits), angle=angle)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a fixed register with per-qubit role tags.

    All measurements are terminal: a MEASURE_Z on qubit q must come after the
    last unitary touching q. This is validated at construction.
    """

    n_qubits: int
    ops: tuple[Gate, ...]
    roles: tuple[str, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "roles", tuple(self.roles))
        if self.n_qubits < 1 or self.n_qubits > MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        if len(self.roles) != self.n_qubits:
            raise ValueError("roles must tag every qubit")
        for r in self.roles:
            if r not in ROLES:
                raise ValueError(f"unknown role {r!r}")
        measured = set()
        for op in self.ops:
            if any(q >= self.n_qubits for q in op.qubits):
                raise ValueError(f"gate {op} out of range for {self.n_qubits} qubits")
            if op.kind == "MEASURE_Z":
                measured.add(op.targets[0])
            elif op.is_unitary and measured.intersection(op.qubits):
                raise ValueError("unitary after measurement: terminal model only")

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        return tuple(sorted(op.targets[0] for op in self.ops if op.kind == "MEASURE_Z"))

    def unitary_ops(self) -> tuple[Gate, ...]:
        return tuple(op for op in self.ops if op.is_unitary)

    def gate_counts(self):
        """Return (n_1q, n_2q, n_meas) over the gate list."""
        n1 = sum(1 for op in self.ops if op.is_unitary and len(op.qubits) == 1)
        n2 = sum(1 for op in self.ops if op.is_unitary and len(op.qubits) == 2)
        nm = sum(1 for op in self.ops if op.kind == "MEASURE_Z")
        return n1, n2, nm

    def qubit_names(self) -> tuple[str, ...]:
        """Stable display names: a1, q0..q3, a2, sX/sZ, and RED readout pairs."""
        names = []
        counters = {ROLE_DATA: 0, ROLE_RED: 0, ROLE_SYNDROME: 0}
        n_plain = self.n_qubits - self.roles.count(ROLE_RED)
        red_pair = ("r", "s") if n_plain == 2 else ("k", "l")
        for role in self.roles:
            if role == ROLE_A1:
                names.append("a1")
            elif role == ROLE_A2:
                names.append("a2")
            elif role == ROLE_DATA:
                names.append(f"q{counters[ROLE_DATA]}")
                counters[ROLE_DATA] += 1
            elif role == ROLE_SYNDROME:
                names.append(("sX", "sZ")[counters[ROLE_SYNDROME] % 2])
                counters[ROLE_SYNDROME] += 1
            else:
                i = counters[ROLE_RED]
                names.append(f"{red_pair[i % 2]}{i // 2}")
                counters[ROLE_RED] += 1
        return tuple(names)

    def to_text(self) -> str:
        """Line-oriented serialization: one gate per line, KIND qubits [angle]."""
        return "\n".join(op.to_text() for op in self.ops) + "\n"


def circuit_from_text(text: str, n_qubits: int, roles, label="") -> Circuit:
    ops = tuple(gate_from_text(line) for line in text.splitlines() if line.strip())
    return Circuit(n_qubits, ops, tuple(roles), label)


def compose(*circuits: Circuit) -> Circuit:
    """Concatenate circuits over the same register (later measurements win)."""
    first = circuits[0]
    for c in circuits[1:]:
        if c.n_qubits != first.n_qubits or c.roles != first.roles:
            raise ValueError("compose requires identical registers")
    ops = []
    for c in circuits:
        ops.extend(op for op in c.ops if op.kind != "MEASURE_Z" or c is circuits[-1])
    return Circuit(first.n_qubits, tuple(ops), first.roles, label=first.label)


# ---------------------------------------------------------------------------
# state representations
# ---------------------------------------------------------------------------


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite amplitude")


class StateVector:
    """Pure state over n qubits; amplitude index bits follow qubit order."""

    __slots__ = ("n_qubits", "amps")

    def __init__(self, n_qubits: int, amps: np.ndarray):
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if amps.shape != (2**n_qubits,):
            raise ValueError("amplitude length must be 2**n_qubits")
        _check_finite(amps)
        self.n_qubits = n_qubits
        self.amps = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def outer(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amps, self.amps.conj()))


class DensityMatrix:
    """Mixed state over n qubits, stored dense."""

    __slots__ = ("n_qubits", "mat")

    def __init__(self, n_qubits: int, mat: np.ndarray, validate: bool = False):
        mat = np.asarray(mat, dtype=complex)
        dim = 2**n_qubits
        if mat.shape != (dim, dim):
            raise ValueError("density matrix shape must be (2**n, 2**n)")
        _check_finite(mat)
        self.n_qubits = n_qubits
        self.mat = mat
        if validate:
            self.validate()

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        mat[0, 0] = 1.0
        return cls(n_qubits, mat)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, self.mat.copy())

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def validate(self, tol_herm=1e-10, tol_trace=1e-10, tol_eig=1e-10):
        if np.max(np.abs(self.mat - self.mat.conj().T)) > tol_herm:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(self.mat) - 1.0) > tol_trace:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(self.mat).min() < -tol_eig:
            raise ValueError("density matrix has a negative eigenvalue")

    def diagonal(self) -> np.ndarray:
        return self.mat.diagonal().real.copy()


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _apply_matrix_axes(tensor: np.ndarray, mat: np.ndarray, axes) -> np.ndarray:
    """Contract mat (acting on len(axes) qubit indices) into the given tensor axes."""
    k = len(axes)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, tensor, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(out, tuple(range(k)), tuple(axes))


def apply_unitary_sv(amps: np.ndarray, n: int, mat: np.ndarray, qubits) -> np.ndarray:
    t = _apply_matrix_axes(amps.reshape((2,) * n), mat, qubits)
    return t.reshape(-1)


def apply_unitary_dm(mat_rho: np.ndarray, n: int, mat: np.ndarray, qubits) -> np.ndarray:
    t = mat_rho.reshape((2,) * (2 * n))
    t = _apply_matrix_axes(t, mat, qubits)
    t = _apply_matrix_axes(t, mat.conj(), [n + q for q in qubits])
    return t.reshape(2**n, 2**n)


def apply_gate(state, gate: Gate):
    """Apply a unitary gate to a StateVector or DensityMatrix, returning a new state."""
    if not gate.is_unitary:
        raise ValueError(f"{gate.kind} is not unitary; handled by the simulator")
    if any(q >= state.n_qubits for q in gate.qubits):
        raise ValueError("gate qubit out of range")
    mat = gate.matrix()
    if isinstance(state, StateVector):
        return StateVector(state.n_qubits, apply_unitary_sv(state.amps, state.n_qubits, mat, gate.qubits))
    if isinstance(state, DensityMatrix):
        return DensityMatrix(state.n_qubits, apply_unitary_dm(state.mat, state.n_qubits, mat, gate.qubits))
    raise TypeError("state must be StateVector or DensityMatrix")


def kron(a, b):
    """Tensor product; the left factor occupies the lower qubit indices."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1 and b.ndim == 1:
        size = a.size * b.size
    else:
        size = a.shape[0] * b.shape[0]
    if size > 2**MAX_QUBITS:
        raise ValueError(f"kron result exceeds {MAX_QUBITS}-qubit limit")
    return np.kron(a, b)


def kron_all(*factors):
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        out = kron(out, f)
    return out


def pauli_word(word: str) -> np.ndarray:
    """Dense matrix for a Pauli word like 'ZIXY' (index 0 = leftmost = qubit 0)."""
    table = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
    return kron_all(*(table[c] for c in word))


def expectation(rho: DensityMatrix, observable: np.ndarray, herm_tol=1e-10, imag_tol=1e-9) -> float:
    """Tr(O rho) for a Hermitian observable; discards sub-tolerance imaginary residue."""
    obs = np.asarray(observable, dtype=complex)
    if obs.shape != rho.mat.shape:
        raise ValueError("observable dimension mismatch")
    if np.max(np.abs(obs - obs.conj().T)) > herm_tol:
        raise ValueError("observable not Hermitian")
    val = complex(np.trace(obs @ rho.mat))
    if abs(val.imag) >= imag_tol:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return val.real


def bits_to_index(bits) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(idx: int, n: int) -> tuple[int, ...]:
    return tuple((idx >> (n - 1 - i)) & 1 for i in range(n))


def bitstring(idx: int, n: int) -> str:
    return format(idx, f"0{n}b")
