"""Noise channels and named noise-model configurations applied per gate class.

The depolarizing convention: a noise parameter p means total error
probability p, split p/3 per Pauli. Two-qubit gates get independent
single-qubit channels on both qubits, each with the two-qubit parameter.
Device models divert a configured fraction of each gate's error weight into
amplitude damping (spontaneous emission to |0>), add per-qubit
initialization flips, and tag terminal measurements with asymmetric readout
flip probabilities. Noise attaches to gates only; idle qubits are noiseless.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

from .qcore import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, Circuit, kron

log = logging.getLogger(__name__)


def _check_prob(value, name):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class DepolarizingParams:
    """Per-gate depolarizing probabilities; p1 defaults to p2/10."""

    p2: float
    p1: float | None = None

    def __post_init__(self):
        if self.p1 is None:
            object.__setattr__(self, "p1", self.p2 / 10.0)
        _check_prob(self.p1, "p1")
        _check_prob(self.p2, "p2")


@dataclass(frozen=True)
class ReadoutParams:
    """Asymmetric readout flips: p_flip0 = P(read 1 | 0), p_flip1 = P(read 0 | 1)."""

    p_flip0: float = 0.0
    p_flip1: float = 0.0

    def __post_init__(self):
        _check_prob(self.p_flip0, "p_flip0")
        _check_prob(self.p_flip1, "p_flip1")

    @property
    def trivial(self) -> bool:
        return self.p_flip0 == 0.0 and self.p_flip1 == 0.0


@dataclass(frozen=True)
class DeviceModel:
    """Device-style noise: depolarizing + emission + init flips + readout flips.

    The crosstalk fields are accepted for config compatibility but not
    simulated (they are orders of magnitude below the dominant channels);
    attach_noise logs when they are nonzero.
    """

    depol: DepolarizingParams
    readout: ReadoutParams = ReadoutParams()
    p_init: float = 0.0
    emission_ratio_1q: float = 0.0
    emission_ratio_2q: float = 0.0
    crosstalk_meas: float = 0.0
    crosstalk_init: float = 0.0

    def __post_init__(self):
        for name in ("p_init", "emission_ratio_1q", "emission_ratio_2q",
                     "crosstalk_meas", "crosstalk_init"):
            _check_prob(getattr(self, name), name)


# Config keys mirror the device data-sheet row names verbatim.
_CONFIG_KEYS = {
    "Single-qubit Fault Probability (p1)": "p1",
    "Two-qubit Fault Probability (p2)": "p2",
    "Bit Flip Measurement Probability (0 outcome)": "p_flip0",
    "Bit Flip Measurement Probability (1 outcome)": "p_flip1",
    "Crosstalk Measurement Fault Probability": "crosstalk_meas",
    "Initialization Fault Probability": "p_init",
    "Crosstalk Initialization Probability": "crosstalk_init",
    "Ratio of Single-Qubit Spontaneous Emission to p1": "emission_ratio_1q",
    "Ratio of Single-Qubit Spontaneous Emission in Two-Qubit Gate to p2": "emission_ratio_2q",
}

H11E_PARAMS = {
    "Single-qubit Fault Probability (p1)": 2.1e-5,
    "Two-qubit Fault Probability (p2)": 8.8e-4,
    "Bit Flip Measurement Probability (0 outcome)": 1.0e-3,
    "Bit Flip Measurement Probability (1 outcome)": 4.0e-3,
    "Crosstalk Measurement Fault Probability": 1.45e-5,
    "Initialization Fault Probability": 3.62e-5,
    "Crosstalk Initialization Probability": 5.020e-6,
    "Ratio of Single-Qubit Spontaneous Emission to p1": 0.54,
    "Ratio of Single-Qubit Spontaneous Emission in Two-Qubit Gate to p2": 0.43,
}


def device_model_from_config(mapping: dict) -> DeviceModel:
    """Build a DeviceModel from data-sheet row names; unknown keys warn, never fail."""
    values = {}
    for key, raw in mapping.items():
        if key in _CONFIG_KEYS:
            values[_CONFIG_KEYS[key]] = float(raw)
        else:
            warnings.warn(f"unknown noise config key ignored: {key!r}", stacklevel=2)
    depol = DepolarizingParams(p2=values.pop("p2", 0.0), p1=values.pop("p1", None))
    readout = ReadoutParams(values.pop("p_flip0", 0.0), values.pop("p_flip1", 0.0))
    return DeviceModel(depol=depol, readout=readout, **values)


def load_device_model(path) -> DeviceModel:
    with open(path) as fh:
        return device_model_from_config(json.load(fh))


def default_device_model() -> DeviceModel:
    return device_model_from_config(dict(H11E_PARAMS))


def depolarize_kraus(p: float, arity: int = 1):
    """Weighted-unitary form of the depolarizing channel.

    Returns [(weight, U)] with weights summing to one; the Kraus operators
    are sqrt(weight) * U, so completeness holds by construction. Arity 2 is
    the independent composition of the single-qubit channel on both qubits,
    each with the same parameter.
    """
    _check_prob(p, "p")
    if arity == 1:
        return [
            (1.0 - p, PAULI_I.copy()),
            (p / 3.0, PAULI_X.copy()),
            (p / 3.0, PAULI_Y.copy()),
            (p / 3.0, PAULI_Z.copy()),
        ]
    if arity == 2:
        single = depolarize_kraus(p, 1)
        return [(wa * wb, kron(ua, ub)) for wa, ua in single for wb, ub in single]
    raise ValueError("arity must be 1 or 2")


@dataclass(frozen=True)
class PauliNoise:
    """Stochastic single-qubit Pauli insertion after a gate."""

    qubit: int
    p_x: float
    p_y: float
    p_z: float

    @property
    def p_total(self) -> float:
        return self.p_x + self.p_y + self.p_z

    @classmethod
    def depolarizing(cls, qubit: int, p: float) -> "PauliNoise":
        return cls(qubit, p / 3.0, p / 3.0, p / 3.0)


@dataclass(frozen=True)
class DampingNoise:
    """Amplitude damping (spontaneous emission to |0>) with probability gamma."""

    qubit: int
    gamma: float


@dataclass(frozen=True)
class PauliFault:
    """A sampled fault: Pauli insertion or damping jump at a gate location."""

    location: int
    qubit: int
    kind: str  # 'X' | 'Y' | 'Z' | 'DAMP'


@dataclass(frozen=True)
class NoisyCircuit:
    """A circuit with channel assignments per gate, init flips, and readout flips.

    ``channels[i]`` lists the noise applied after ``circuit.ops[i]``;
    ``pre_channels`` holds the initialization bit-flip channels applied at
    circuit start.
    """

    circuit: Circuit
    channels: tuple[tuple, ...]
    pre_channels: tuple = ()
    readout: ReadoutParams = ReadoutParams()

    def __post_init__(self):
        if len(self.channels) != len(self.circuit.ops):
            raise ValueError("channel list must align with the gate list")

    @property
    def has_damping(self) -> bool:
        return any(isinstance(c, DampingNoise) for slot in self.channels for c in slot)

    def noise_locations(self):
        """Flattened (location, channel) pairs; pre-channels use location -1."""
        out = [(-1, c) for c in self.pre_channels]
        for i, slot in enumerate(self.channels):
            out.extend((i, c) for c in slot)
        return out


def noiseless(circuit: Circuit) -> NoisyCircuit:
    return NoisyCircuit(circuit, tuple(() for _ in circuit.ops))


def attach_noise(circuit: Circuit, model) -> NoisyCircuit:
    """Attach the model's channels gate by gate.

    Every 1q gate is followed by the single-qubit channel, every 2q gate by
    independent channels on both its qubits. For a DeviceModel, the emission
    ratio of each gate's error weight becomes amplitude damping and the
    remainder stays depolarizing; init flips and readout flips are attached
    at the boundaries.
    """
    if isinstance(model, DepolarizingParams):
        depol, readout, p_init = model, ReadoutParams(), 0.0
        r1 = r2 = 0.0
    elif isinstance(model, DeviceModel):
        depol, readout, p_init = model.depol, model.readout, model.p_init
        r1, r2 = model.emission_ratio_1q, model.emission_ratio_2q
        if model.crosstalk_meas or model.crosstalk_init:
            log.info(
                "crosstalk parameters (%g, %g) accepted but not simulated",
                model.crosstalk_meas, model.crosstalk_init,
            )
    else:
        raise TypeError("model must be DepolarizingParams or DeviceModel")

    def slot_for(qubit, p, ratio):
        out = []
        if p * (1.0 - ratio) > 0.0:
            out.append(PauliNoise.depolarizing(qubit, p * (1.0 - ratio)))
        if p * ratio > 0.0:
            out.append(DampingNoise(qubit, p * ratio))
        return out

    channels = []
    for op in circuit.ops:
        if not op.is_unitary:
            channels.append(())
            continue
        slot = []
        p, ratio = (depol.p1, r1) if len(op.qubits) == 1 else (depol.p2, r2)
        for q in op.qubits:
            slot.extend(slot_for(q, p, ratio))
        channels.append(tuple(slot))

    pre = tuple(
        PauliNoise(q, p_init, 0.0, 0.0) for q in range(circuit.n_qubits)
    ) if p_init > 0.0 else ()
    return NoisyCircuit(circuit, tuple(channels), pre, readout)
