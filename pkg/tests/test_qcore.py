import math

import numpy as np
import pytest

from qedvqe import qcore
from qedvqe.qcore import (
    Circuit,
    DensityMatrix,
    Gate,
    ROLE_DATA,
    StateVector,
    apply_gate,
    cnot,
    compose,
    expectation,
    h,
    kron,
    measure,
    pauli_word,
    ry,
    rz,
    swap,
)

SQ2 = 1 / math.sqrt(2)


def run_circuit(circ):
    sv = StateVector.zero(circ.n_qubits)
    for op in circ.unitary_ops():
        sv = apply_gate(sv, op)
    return sv


def random_circuit(rng, n, depth):
    ops = []
    for _ in range(depth):
        kind = rng.choice(["h", "s", "ry", "rz", "cnot", "swap", "x", "y", "z"])
        q = int(rng.integers(n))
        if kind in ("cnot", "swap"):
            q2 = int(rng.integers(n - 1))
            q2 = q2 if q2 < q else q2 + 1
            ops.append(cnot(q, q2) if kind == "cnot" else swap(q, q2))
        elif kind in ("ry", "rz"):
            angle = float(rng.uniform(-math.pi, math.pi))
            ops.append(ry(angle, q) if kind == "ry" else rz(angle, q))
        else:
            ops.append(Gate(kind.upper(), (q,)))
    return Circuit(n, tuple(ops), (ROLE_DATA,) * n)


def test_h_on_zero():
    sv = apply_gate(StateVector.zero(1), h(0))
    assert np.allclose(sv.amps, [SQ2, SQ2])


def test_cnot_builds_bell_pair():
    sv = apply_gate(StateVector.zero(2), h(0))
    sv = apply_gate(sv, cnot(0, 1))
    assert np.allclose(sv.amps, [SQ2, 0, 0, SQ2])


def test_ry_then_cnot_matches_half_angle_amplitudes():
    theta = -0.22967
    sv = apply_gate(StateVector.zero(2), ry(theta, 0))
    sv = apply_gate(sv, cnot(0, 1))
    # direct trigonometry oracle: (0.9934137, 0, 0, -0.1145827)
    want = [math.cos(theta / 2), 0, 0, math.sin(theta / 2)]
    assert np.allclose(sv.amps.real, want, atol=1e-12)
    assert np.allclose(sv.amps.imag, 0)
    assert sv.amps[0].real == pytest.approx(0.993415, abs=5e-6)
    assert sv.amps[3].real == pytest.approx(-0.114585, abs=5e-6)


def test_apply_gate_on_density_matches_pure_evolution():
    rng = np.random.default_rng(7)
    circ = random_circuit(rng, 3, 12)
    sv = StateVector.zero(3)
    rho = DensityMatrix.zero(3)
    for op in circ.ops:
        sv = apply_gate(sv, op)
        rho = apply_gate(rho, op)
        assert np.max(np.abs(rho.mat - sv.outer().mat)) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_unitarity_preserved_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    sv = StateVector.zero(n)
    for op in random_circuit(rng, n, 20).ops:
        sv = apply_gate(sv, op)
        assert abs(sv.norm() - 1.0) < 1e-10


def test_apply_gate_rejects_out_of_range_and_nonunitary():
    sv = StateVector.zero(2)
    with pytest.raises(ValueError):
        apply_gate(sv, h(5))
    with pytest.raises(ValueError):
        apply_gate(sv, measure(0))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("RY", (0,))  # missing angle
    with pytest.raises(ValueError):
        Gate("H", (0,), angle=1.0)
    with pytest.raises(ValueError):
        Gate("RZ", (0,), angle=float("nan"))
    with pytest.raises(ValueError):
        Gate("SWAP", (1, 1))


def test_kron_identities_and_ordering():
    assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))
    ket0 = np.array([1, 0], dtype=complex)
    ket1 = np.array([0, 1], dtype=complex)
    v = kron(ket0, ket1)  # |01> with q0 leftmost
    assert np.allclose(v, [0, 1, 0, 0])
    zz = pauli_word("ZZ")
    ket11 = kron(ket1, ket1)
    assert np.allclose(zz @ ket11, ket11)  # (-1)(-1) = +1


def test_kron_associativity():
    rng = np.random.default_rng(3)
    a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    assert np.allclose(kron(kron(a, b), c), kron(a, kron(b, c)))


def test_kron_overflow_guard():
    big = np.eye(2 ** 13)
    with pytest.raises(ValueError):
        kron(kron(big, big), np.eye(4))


def test_expectation_basics():
    z = pauli_word("Z")
    rho0 = StateVector(1, [1, 0]).outer()
    assert expectation(rho0, z) == pytest.approx(1.0)
    mixed = DensityMatrix(1, np.eye(2) / 2)
    assert expectation(mixed, z) == pytest.approx(0.0)


def test_expectation_errors():
    rho = DensityMatrix.zero(1)
    with pytest.raises(ValueError):
        expectation(rho, np.eye(4))
    with pytest.raises(ValueError):
        expectation(rho, np.array([[0, 1], [0, 0]], dtype=complex))


def test_expectation_linearity():
    rng = np.random.default_rng(11)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = DensityMatrix(2, (m @ m.conj().T) / np.trace(m @ m.conj().T).real)
    a = pauli_word("ZX")
    b = pauli_word("YY")
    alpha, beta = 0.37, -1.21
    lhs = expectation(rho, alpha * a + beta * b)
    rhs = alpha * expectation(rho, a) + beta * expectation(rho, b)
    assert abs(lhs - rhs) < 1e-10


def test_states_reject_non_finite_values():
    with pytest.raises(ValueError):
        StateVector(1, [np.nan, 0])
    with pytest.raises(ValueError):
        DensityMatrix(1, np.array([[np.inf, 0], [0, 0]]))


def test_density_validate_flags_bad_states():
    with pytest.raises(ValueError):
        DensityMatrix(1, np.array([[1, 1], [0, 0]], dtype=complex), validate=True)
    with pytest.raises(ValueError):
        DensityMatrix(1, np.diag([0.7, 0.7]).astype(complex), validate=True)


def test_circuit_terminal_measurement_invariant():
    with pytest.raises(ValueError):
        Circuit(1, (measure(0), h(0)), (ROLE_DATA,))
    # measurement on another qubit is fine
    Circuit(2, (measure(0), h(1), measure(1)), (ROLE_DATA, ROLE_DATA))


def test_circuit_text_roundtrip():
    circ = Circuit(
        2,
        (h(0), rz(0.5, 1), cnot(0, 1), measure(0), measure(1)),
        (ROLE_DATA, ROLE_DATA),
        label="t",
    )
    text = circ.to_text()
    assert text.splitlines()[0] == "H 0"
    assert text.splitlines()[2] == "CNOT 0 1"
    back = qcore.circuit_from_text(text, 2, circ.roles)
    assert back.ops == circ.ops


def test_compose_concatenates_and_keeps_last_measurements():
    a = Circuit(2, (h(0),), (ROLE_DATA, ROLE_DATA))
    b = Circuit(2, (cnot(0, 1), measure(0), measure(1)), (ROLE_DATA, ROLE_DATA))
    c = compose(a, b)
    assert [op.kind for op in c.ops] == ["H", "CNOT", "MEASURE_Z", "MEASURE_Z"]
    sv = run_circuit(c)
    assert np.allclose(sv.amps, [SQ2, 0, 0, SQ2])
