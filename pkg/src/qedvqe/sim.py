"""Execution backends: exact density-matrix evolution and stochastic trajectories.

The trajectory backend unravels each attached channel into stochastic Pauli
insertions plus jump/no-jump amplitude-damping branches on statevectors, so
it reaches register sizes (18 qubits with readout encoding) that the density
backend cannot. Each shot draws from its own counter-based RNG stream keyed
by (master seed, shot index), which makes results independent of how shots
are partitioned into batches or workers.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .noise import DampingNoise, NoisyCircuit, PauliNoise, ReadoutParams
from .qcore import (
    Circuit,
    DensityMatrix,
    StateVector,
    apply_unitary_dm,
    apply_unitary_sv,
    bitstring,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
)

DENSITY_QUBIT_CAP = 12


@dataclass(frozen=True)
class MeasurementLayout:
    """Measured qubits in ascending index order, with their roles and names."""

    qubits: tuple[int, ...]
    roles: tuple[str, ...]
    names: tuple[str, ...]

    @classmethod
    def of(cls, circuit: Circuit) -> "MeasurementLayout":
        measured = circuit.measured_qubits
        names = circuit.qubit_names()
        return cls(
            measured,
            tuple(circuit.roles[q] for q in measured),
            tuple(names[q] for q in measured),
        )

    def positions_of_role(self, role: str) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == role)

    def position_of_role(self, role: str) -> int:
        pos = self.positions_of_role(role)
        if len(pos) != 1:
            raise ValueError(f"layout has {len(pos)} qubits of role {role!r}")
        return pos[0]


@dataclass
class ShotTable:
    """Raw measured bitstring counts; index 0 of a key is the first measured qubit."""

    counts: dict[str, int]
    n_shots: int
    layout: MeasurementLayout
    seed: int
    basis: str = "Z"

    def __post_init__(self):
        if sum(self.counts.values()) != self.n_shots:
            raise ValueError("counts must sum to n_shots")
        for key in self.counts:
            if len(key) != len(self.layout.qubits):
                raise ValueError("bitstring length must match measured qubits")

    def merged(self, other: "ShotTable") -> "ShotTable":
        if other.layout != self.layout or other.basis != self.basis:
            raise ValueError("cannot merge tables with different layouts")
        counts = dict(self.counts)
        for k, v in other.counts.items():
            counts[k] = counts.get(k, 0) + v
        return ShotTable(counts, self.n_shots + other.n_shots, self.layout, self.seed, self.basis)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.layout.names) + ["count"])
        for key in sorted(self.counts):
            writer.writerow(list(key) + [self.counts[key]])
        return buf.getvalue()


@dataclass(frozen=True)
class TrajectoryConfig:
    n_shots: int
    seed: int = 0
    max_qubits: int = 20

    def __post_init__(self):
        if self.n_shots < 1:
            raise ValueError("n_shots must be >= 1")


# ---------------------------------------------------------------------------
# density backend
# ---------------------------------------------------------------------------


def _pauli_channel_dm(mat, n, ch: PauliNoise):
    out = (1.0 - ch.p_total) * mat
    for p, sigma in ((ch.p_x, PAULI_X), (ch.p_y, PAULI_Y), (ch.p_z, PAULI_Z)):
        if p > 0.0:
            out = out + p * apply_unitary_dm(mat, n, sigma, (ch.qubit,))
    return out

def _damping_channel_dm(mat, n, ch: DampingNoise):
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - ch.gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(ch.gamma)], [0.0, 0.0]], dtype=complex)
    return (
        apply_unitary_dm(mat, n, k0, (ch.qubit,))
        + apply_unitary_dm(mat, n, k1, (ch.qubit,))
    )

def _reset_channel_dm(mat, n, qubit):
    k0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    k1 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return (
        apply_unitary_dm(mat, n, k0, (qubit,))
        + apply_unitary_dm(mat, n, k1, (qubit,))
    )


def evolve_density(noisy: NoisyCircuit, max_qubits: int = DENSITY_QUBIT_CAP) -> DensityMatrix:
    """Exact mixed state after all gates and channels, before measurement/readout."""
    circ = noisy.circuit
    n = circ.n_qubits
    if n > max_qubits:
        raise ValueError(f"density backend capped at {max_qubits} qubits, got {n}")
    mat = DensityMatrix.zero(n).mat
    for ch in noisy.pre_channels:
        mat = _pauli_channel_dm(mat, n, ch)
    for op, slot in zip(circ.ops, noisy.channels):
        if op.kind == "MEASURE_Z":
            pass
        elif op.kind == "RESET":
            mat = _reset_channel_dm(mat, n, op.targets[0])
        else:
            mat = apply_unitary_dm(mat, n, op.matrix(), op.qubits)
        for ch in slot:
            if isinstance(ch, PauliNoise):
                mat = _pauli_channel_dm(mat, n, ch)
            else:
                mat = _damping_channel_dm(mat, n, ch)
    tr = np.trace(mat).real
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"evolved density trace drifted to {tr}")
    return DensityMatrix(n, mat)


def _readout_kernel(readout: ReadoutParams) -> np.ndarray:
    # column = true bit, row = read bit
    return np.array(
        [
            [1.0 - readout.p_flip0, readout.p_flip1],
            [readout.p_flip0, 1.0 - readout.p_flip1],
        ]
    )


def born_distribution(rho: DensityMatrix, readout: ReadoutParams = ReadoutParams()) -> dict[str, float]:
    """Diagonal Born probabilities convolved with independent readout flips."""
    probs = rho.diagonal()
    probs = np.clip(probs, 0.0, None)
    n = rho.n_qubits
    if not readout.trivial:
        t = probs.reshape((2,) * n)
        kern = _readout_kernel(readout)
        for q in range(n):
            t = np.moveaxis(np.tensordot(kern, t, axes=([1], [q])), 0, q)
        probs = t.reshape(-1)
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError("distribution does not sum to 1")
    return {bitstring(i, n): float(p) for i, p in enumerate(probs) if p > 1e-15}


def distribution_over_measured(probs: dict[str, float], circuit: Circuit) -> dict[str, float]:
    """Marginalize a full-register distribution onto the measured qubits."""
    measured = circuit.measured_qubits
    out: dict[str, float] = {}
    for key, p in probs.items():
        sub = "".join(key[q] for q in measured)
        out[sub] = out.get(sub, 0.0) + p
    return out


# ---------------------------------------------------------------------------
# trajectory backend
# ---------------------------------------------------------------------------


def _shot_generator(seed: int, shot_index: int) -> np.random.Generator:
    # Counter-based stream: each shot owns a disjoint 2^128-draw block.
    counter = np.array([0, 0, shot_index, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=counter))


def _half_planes(amps: np.ndarray, qubit: int):
    """Views of the qubit=0 and qubit=1 halves of a statevector."""
    view = amps.reshape(2**qubit, 2, -1)
    return view[:, 0, :], view[:, 1, :]


class _Trajectory:
    """Sequential statevector evolution replaying pre-drawn uniforms.

    States are kept unnormalized while damping no-jump factors accumulate;
    since p_jump = gamma * pop1 / norm^2 never exceeds gamma, a jump decision
    only needs the occupation when its uniform falls below gamma, which keeps
    the common no-jump case to a single half-plane scaling.
    """

    def __init__(self, noisy: NoisyCircuit):
        self.noisy = noisy
        self.n = noisy.circuit.n_qubits
        self.locations = noisy.noise_locations()
        self.n_loc = len(self.locations)

    def _pop1_frac(self, amps, qubit):
        """Occupation of |1> on the qubit, relative to the current norm."""
        _, a1 = _half_planes(amps, qubit)
        w1 = float(np.vdot(a1, a1).real)
        total = float(np.vdot(amps, amps).real)
        return w1 / total if total > 0.0 else 0.0

    def _apply_1q(self, amps, mat, qubit):
        a0, a1 = _half_planes(amps, qubit)
        t = mat[0, 0] * a0 + mat[0, 1] * a1
        a1[...] = mat[1, 0] * a0 + mat[1, 1] * a1
        a0[...] = t

    def _quad_view(self, amps, qa, qb):
        """5-D view exposing qubits qa < qb as explicit axes 1 and 3."""
        return amps.reshape(2**qa, 2, 2 ** (qb - qa - 1), 2, -1)

    def _apply_gate(self, amps, op):
        if len(op.qubits) == 1:
            self._apply_1q(amps, op.matrix(), op.qubits[0])
        elif op.kind == "CNOT":
            c, t = op.control, op.targets[0]
            view = self._quad_view(amps, min(c, t), max(c, t))
            if c < t:
                p0, p1 = view[:, 1, :, 0, :], view[:, 1, :, 1, :]
            else:
                p0, p1 = view[:, 0, :, 1, :], view[:, 1, :, 1, :]
            tmp = p0.copy()
            p0[...] = p1
            p1[...] = tmp
        elif op.kind == "SWAP":
            a, b = sorted(op.targets)
            view = self._quad_view(amps, a, b)
            tmp = view[:, 0, :, 1, :].copy()
            view[:, 0, :, 1, :] = view[:, 1, :, 0, :]
            view[:, 1, :, 0, :] = tmp
        else:
            amps[...] = apply_unitary_sv(amps, self.n, op.matrix(), op.qubits)

    def _apply_channel(self, amps, ch, u):
        if isinstance(ch, PauliNoise):
            if u >= ch.p_total:
                return
            a0, a1 = _half_planes(amps, ch.qubit)
            if u < ch.p_x:  # X
                t = a0.copy()
                a0[...] = a1
                a1[...] = t
            elif u < ch.p_x + ch.p_y:  # Y
                t = a0.copy()
                a0[...] = -1j * a1
                a1[...] = 1j * t
            else:  # Z
                a1[...] *= -1.0
            return
        # damping: p_jump <= gamma, so u >= gamma settles no-jump cheaply
        if u < ch.gamma and u < ch.gamma * self._pop1_frac(amps, ch.qubit):
            a0, a1 = _half_planes(amps, ch.qubit)
            a0[...] = a1
            a1[...] = 0.0
        else:
            _, a1 = _half_planes(amps, ch.qubit)
            a1[...] *= np.sqrt(1.0 - ch.gamma)

    def run(self, u_loc: np.ndarray) -> np.ndarray:
        """Evolve one shot; u_loc holds one uniform per noise location."""
        amps = StateVector.zero(self.n).amps
        k = 0
        for ch in self.noisy.pre_channels:
            self._apply_channel(amps, ch, u_loc[k])
            k += 1
        for op, slot in zip(self.noisy.circuit.ops, self.noisy.channels):
            if op.kind == "MEASURE_Z":
                pass
            elif op.kind == "RESET":
                # builders never emit RESET (fresh-ancilla policy); the exact
                # channel is mixed-state only, so it lives in the density backend
                raise ValueError("RESET is not supported by the trajectory backend")
            else:
                self._apply_gate(amps, op)
            for ch in slot:
                self._apply_channel(amps, ch, u_loc[k])
                k += 1
        return amps

    def no_jump_reference(self):
        """One sweep with no Pauli faults and no damping jumps.

        Returns (final normalized amps, [(location, p_jump), ...]) so the
        common fault-free shot can be resolved without evolving.
        """
        amps = StateVector.zero(self.n).amps
        thresholds = []
        k = len(self.noisy.pre_channels)
        for op, slot in zip(self.noisy.circuit.ops, self.noisy.channels):
            if op.is_unitary:
                self._apply_gate(amps, op)
            for ch in slot:
                if isinstance(ch, DampingNoise):
                    p_jump = ch.gamma * self._pop1_frac(amps, ch.qubit)
                    thresholds.append((k, p_jump))
                    _, a1 = _half_planes(amps, ch.qubit)
                    a1[...] *= np.sqrt(1.0 - ch.gamma)
                k += 1
        return amps / np.linalg.norm(amps), thresholds


def sample_shots(
    noisy: NoisyCircuit, cfg: TrajectoryConfig, shot_offset: int = 0
) -> ShotTable:
    """Sample shots by stochastic fault insertion on statevectors.

    Shot i (global index shot_offset + i) consumes only its own RNG stream:
    one uniform per noise location, one for the terminal Z-basis outcome, and
    one per measured qubit for readout flips. Fault-free shots reuse a cached
    reference evolution; shots with any fault are evolved individually.
    """
    circ = noisy.circuit
    if circ.n_qubits > cfg.max_qubits:
        raise ValueError(
            f"trajectory backend capped at {cfg.max_qubits} qubits, got {circ.n_qubits}"
        )
    measured = circ.measured_qubits
    if not measured:
        raise ValueError("circuit has no terminal measurements")
    if any(op.kind == "RESET" for op in circ.ops):
        raise ValueError("RESET is not supported by the trajectory backend")
    layout = MeasurementLayout.of(circ)
    traj = _Trajectory(noisy)

    ref_amps, damp_thresholds = traj.no_jump_reference()
    ref_cdf = np.cumsum(np.abs(ref_amps) ** 2)
    ref_cdf[-1] = 1.0

    pauli_idx = np.array(
        [i for i, (_, ch) in enumerate(traj.locations) if isinstance(ch, PauliNoise)],
        dtype=int,
    )
    pauli_p = np.array(
        [ch.p_total for _, ch in traj.locations if isinstance(ch, PauliNoise)]
    )
    damp_idx = np.array([k for k, _ in damp_thresholds], dtype=int)
    damp_p = np.array([p for _, p in damp_thresholds])

    flip_p = np.array(
        [noisy.readout.p_flip0, noisy.readout.p_flip1]
    )
    skip_readout = noisy.readout.trivial
    n_meas = len(measured)
    n_loc = traj.n_loc

    counts: dict[str, int] = {}
    for i in range(cfg.n_shots):
        gen = _shot_generator(cfg.seed, shot_offset + i)
        u_loc = gen.random(n_loc) if n_loc else np.empty(0)
        fault_free = bool(
            np.all(u_loc[pauli_idx] >= pauli_p) if pauli_idx.size else True
        ) and bool(np.all(u_loc[damp_idx] >= damp_p) if damp_idx.size else True)
        u_out = gen.random()
        if fault_free:
            idx = int(np.searchsorted(ref_cdf, u_out, side="right"))
        else:
            amps = traj.run(u_loc)
            cdf = np.cumsum(np.abs(amps) ** 2)
            cdf /= cdf[-1]
            idx = int(np.searchsorted(cdf, u_out, side="right"))
        bits = [(idx >> (circ.n_qubits - 1 - q)) & 1 for q in measured]
        if not skip_readout:
            u_read = gen.random(n_meas)
            bits = [b ^ (u < flip_p[b]) for b, u in zip(bits, u_read)]
        key = "".join("1" if b else "0" for b in bits)
        counts[key] = counts.get(key, 0) + 1
    return ShotTable(counts, cfg.n_shots, layout, cfg.seed, "Z")


def sample_shots_batched(
    noisy: NoisyCircuit, cfg: TrajectoryConfig, batch_size: int = 10000
) -> ShotTable:
    """Split shots into <= batch_size batches over global shot indices and merge.

    Because every shot owns its own RNG stream, the merged table is
    identical to a single unbatched run with the same configuration.
    """
    table = None
    done = 0
    while done < cfg.n_shots:
        take = min(batch_size, cfg.n_shots - done)
        part = sample_shots(
            noisy,
            TrajectoryConfig(take, cfg.seed, cfg.max_qubits),
            shot_offset=done,
        )
        table = part if table is None else table.merged(part)
        done += take
    return table


# ---------------------------------------------------------------------------
# exact classical model of the readout-encoding gadget
# ---------------------------------------------------------------------------


def red_vote_kernel(*, flip_cnot=0.0, gamma=0.0, p_init=0.0,
                    readout: ReadoutParams = ReadoutParams()):
    """Exact per-qubit kernel of the [3,1] readout gadget with unanimous vote.

    Everything downstream of the ansatz is diagonal in the computational
    basis, so the two copy-CNOTs plus their noise act as a classical channel
    on each measured bit: X/Y components of depolarizing noise flip the bit,
    damping sends 1 -> 0, init faults pre-flip the fresh ancillas, and
    readout flips act on all three reads. Returns a 2x2 matrix K with
    K[c, b] = P(triple unanimous with value c | true bit b).
    """
    # joint distribution over (q, k, l), little-endian bit order q + 2k + 4l
    def flip(dist, bit_pos, alpha):
        if alpha <= 0.0:
            return dist
        flipped = dist[[s ^ (1 << bit_pos) for s in range(8)]]
        return (1.0 - alpha) * dist + alpha * flipped

    def damp(dist, bit_pos, g):
        if g <= 0.0:
            return dist
        out = dist.copy()
        for s in range(8):
            if (s >> bit_pos) & 1:
                moved = g * dist[s]
                out[s] -= moved
                out[s ^ (1 << bit_pos)] += moved
        return out

    def asym_flip(dist, bit_pos, p0, p1):
        out = dist.copy()
        for s in range(8):
            p = p1 if (s >> bit_pos) & 1 else p0
            moved = p * dist[s]
            out[s] -= moved
            out[s ^ (1 << bit_pos)] += moved
        return out

    def cnot(dist, ctrl_pos, tgt_pos):
        out = np.zeros_like(dist)
        for s in range(8):
            t = s ^ (1 << tgt_pos) if (s >> ctrl_pos) & 1 else s
            out[t] += dist[s]
        return out

    kernel = np.zeros((2, 2))
    for b in (0, 1):
        dist = np.zeros(8)
        dist[b] = 1.0
        for anc in (1, 2):  # init faults on the fresh ancillas
            dist = flip(dist, anc, p_init)
        for anc in (1, 2):
            dist = cnot(dist, 0, anc)
            dist = flip(dist, 0, flip_cnot)
            dist = damp(dist, 0, gamma)
            dist = flip(dist, anc, flip_cnot)
            dist = damp(dist, anc, gamma)
        for pos in (0, 1, 2):
            dist = asym_flip(dist, pos, readout.p_flip0, readout.p_flip1)
        kernel[0, b] = dist[0b000]
        kernel[1, b] = dist[0b111]
    return kernel


def red_vote_kernel_for(model) -> np.ndarray:
    """Vote kernel with flip/damp/init rates taken from a noise model."""
    from .noise import DepolarizingParams, DeviceModel

    if isinstance(model, DepolarizingParams):
        return red_vote_kernel(flip_cnot=2.0 * model.p2 / 3.0)
    if isinstance(model, DeviceModel):
        r2 = model.emission_ratio_2q
        return red_vote_kernel(
            flip_cnot=2.0 * (1.0 - r2) * model.depol.p2 / 3.0,
            gamma=r2 * model.depol.p2,
            p_init=model.p_init,
            readout=model.readout,
        )
    if isinstance(model, ReadoutParams):
        return red_vote_kernel(readout=model)
    raise TypeError("model must be DepolarizingParams, DeviceModel, or ReadoutParams")


def red_vote_distribution(probs: dict[str, float], kernel: np.ndarray):
    """Push a measured-bit distribution through the vote kernel.

    Returns (normalized distribution over collapsed bits, survival fraction).
    """
    if not probs:
        raise ValueError("empty distribution")
    n = len(next(iter(probs)))
    t = np.zeros((2,) * n)
    for key, p in probs.items():
        t[tuple(int(c) for c in key)] += p
    for q in range(n):
        t = np.moveaxis(np.tensordot(kernel, t, axes=([1], [q])), 0, q)
    flat = t.reshape(-1)
    eta = float(flat.sum())
    out = {
        bitstring(i, n): float(p / eta) for i, p in enumerate(flat) if p > 0.0
    }
    return out, eta
