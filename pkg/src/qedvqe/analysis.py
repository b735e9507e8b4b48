"""Fidelity, codespace projectors, projected states, and logical-error metrics.

Projector conventions (register order a1, q0..q3, a2 for the ansatz; a1,
q0..q3 for the preparation study):

* PI_A keeps a1 = 0 and a2 = 0;
* PI_P keeps the span of the four logical codewords (strictly the four
  |x>-bar kets, not the full even-parity subspace) and a2 = 0;
* PI_AP is their product. S_A / S_P / S_AP are the 5-qubit analogues without
  the a2 factor.

Shot-level parity post-selection keeps *all* even-parity strings and is
therefore a strictly coarser filter than PI_P, which also rejects the
relative-phase partners of the codewords; both objects exist here because
the study uses each in its own context.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .builders import codeword
from .qcore import DensityMatrix, kron_all

PROJECTOR_KINDS = ("PI_A", "PI_P", "PI_AP", "S_A", "S_P", "S_AP")

_I2 = np.eye(2, dtype=complex)
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)


def _code_projector() -> np.ndarray:
    out = np.zeros((16, 16), dtype=complex)
    for l1 in (0, 1):
        for l2 in (0, 1):
            v = codeword(l1, l2)
            out += np.outer(v, v.conj())
    return out


def build_projector(kind: str) -> np.ndarray:
    """Hermitian idempotent projector for the requested post-selection rule."""
    if kind not in PROJECTOR_KINDS:
        raise ValueError(f"unknown projector kind {kind!r}")
    code = _code_projector()
    eye4 = np.eye(16, dtype=complex)
    if kind == "PI_A":
        return kron_all(_P0, eye4, _P0)
    if kind == "PI_P":
        return kron_all(_I2, code, _P0)
    if kind == "PI_AP":
        return kron_all(_P0, code, _P0)
    if kind == "S_A":
        return kron_all(_P0, eye4)
    if kind == "S_P":
        return kron_all(_I2, code)
    return kron_all(_P0, code)


def project_state(rho: DensityMatrix, kind: str, min_support: float = 1e-14) -> DensityMatrix:
    """Normalized projected state Pi rho Pi / Tr(Pi rho Pi)."""
    pi = build_projector(kind)
    return project_with(rho, pi, min_support)


def project_with(rho: DensityMatrix, projector: np.ndarray, min_support: float = 1e-14) -> DensityMatrix:
    mat = projector @ rho.mat @ projector.conj().T
    weight = np.trace(mat).real
    if weight <= min_support:
        raise ValueError("projection has vanishing support (total rejection)")
    return DensityMatrix(rho.n_qubits, mat / weight)


def qubit_value_projector(n_qubits: int, qubit: int, value: int) -> np.ndarray:
    factors = [_I2] * n_qubits
    factors[qubit] = _P0 if value == 0 else np.array([[0, 0], [0, 1]], dtype=complex)
    return kron_all(*factors)


def project_qubit(rho: DensityMatrix, qubit: int, value: int, min_support: float = 1e-14) -> DensityMatrix:
    """Condition a density matrix on a computational value of one qubit."""
    return project_with(rho, qubit_value_projector(rho.n_qubits, qubit, value), min_support)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    # eigenvalues at roundoff scale are zero; their square roots would
    # otherwise inject sqrt(eps)-sized bias into trace formulas
    floor = 1e-13 * max(vals.max(initial=0.0), 1e-300)
    vals = np.where(vals > floor, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho1: DensityMatrix, rho2: DensityMatrix, pure_tol: float = 1e-10) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho2) rho1 sqrt(rho2)))^2.

    When either argument is rank one the pure-state shortcut <psi|rho|psi>
    is used; the two routes agree to the stated tolerance and the general
    eigendecomposition route remains available for mixed/mixed pairs.
    """
    if rho1.mat.shape != rho2.mat.shape:
        raise ValueError("fidelity needs equal dimensions")
    for a, b in ((rho1, rho2), (rho2, rho1)):
        vals, vecs = np.linalg.eigh(a.mat)
        if vals[:-1].max(initial=0.0) < pure_tol:
            psi = vecs[:, -1]
            return float(np.clip((psi.conj() @ b.mat @ psi).real, 0.0, 1.0))
    s2 = _psd_sqrt(rho2.mat)
    inner = _psd_sqrt(s2 @ rho1.mat @ s2)
    return float(np.clip(np.trace(inner).real ** 2, 0.0, 1.0))


@dataclass(frozen=True)
class LogicalErrorReport:
    """Error-probability split of a noisy encoded state against the ideal one.

    p_eps_all is any deviation from the ideal state, p_eps_NL the weight
    outside the codespace (detectable), p_eps_L their difference (logical,
    undetectable), and p_eps_A the codespace-weight excess of the
    a1-projected state.
    """

    p_ideal: float
    p_logical: float
    p_eps_all: float
    p_eps_NL: float
    p_eps_L: float
    p_eps_A: float

    def __post_init__(self):
        for name in ("p_ideal", "p_logical", "p_eps_all", "p_eps_NL", "p_eps_L", "p_eps_A"):
            v = getattr(self, name)
            if not -1e-10 <= v <= 1.0 + 1e-10:
                raise ValueError(f"{name}={v} outside [0, 1]")


def logical_error_report(rho_noisy: DensityMatrix, rho_ideal: DensityMatrix) -> LogicalErrorReport:
    """Logical/non-logical error split over the a2=0 branch of the encoded register."""
    vals = np.linalg.eigh(rho_ideal.mat)[0]
    if vals[:-1].max(initial=0.0) > 1e-10:
        raise ValueError("rho_ideal must be pure")
    p_ideal = float(np.trace(rho_noisy.mat @ rho_ideal.mat).real)
    p_logical = float(np.trace(build_projector("PI_P") @ rho_noisy.mat).real)
    p_ap = float(np.trace(build_projector("PI_AP") @ rho_noisy.mat).real)
    p_eps_all = 1.0 - p_ideal
    p_eps_nl = 1.0 - p_logical
    return LogicalErrorReport(
        p_ideal=p_ideal,
        p_logical=p_logical,
        p_eps_all=p_eps_all,
        p_eps_NL=p_eps_nl,
        p_eps_L=p_eps_all - p_eps_nl,
        p_eps_A=p_ap - p_ideal,
    )
