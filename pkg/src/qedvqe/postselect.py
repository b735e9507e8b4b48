"""Shot-filtering rules: a2 branch selection, PSA/PSP/PSAP, and the RED vote.

Survival fractions follow the study's normalization: the QED strategies are
normalized to the a2=0-selected population, while the readout-encoding vote
is normalized to the raw shot total (it runs first in the pipeline).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .builders import RedLayout
from .qcore import ROLE_A1, ROLE_A2, ROLE_DATA, ROLE_RED
from .sim import MeasurementLayout, ShotTable

STRATEGY_NONE = "NONE"
STRATEGY_PSA = "PSA"
STRATEGY_PSP = "PSP"
STRATEGY_PSAP = "PSAP"
STRATEGIES = (STRATEGY_NONE, STRATEGY_PSA, STRATEGY_PSP, STRATEGY_PSAP)


class EmptySelectionError(RuntimeError):
    """Post-selection rejected every shot; downstream estimates are undefined."""


@dataclass(frozen=True)
class Strategy:
    kind: str

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}")


@dataclass(frozen=True)
class SurvivalStats:
    """Fraction retained by a filter, with its binomial standard error."""

    eta: float
    sigma_eta: float
    n_before: int
    n_after: int

    @classmethod
    def of(cls, n_before: int, n_after: int) -> "SurvivalStats":
        eta = n_after / n_before
        sigma = math.sqrt(max(0.0, eta * (1.0 - eta)) / n_before)
        return cls(eta, sigma, n_before, n_after)


def _filtered(table: ShotTable, keep, layout=None) -> ShotTable:
    counts = {k: v for k, v in table.counts.items() if keep(k)}
    return ShotTable(
        counts, sum(counts.values()), layout or table.layout, table.seed, table.basis
    )


def select_a2_branch(table: ShotTable, branch: int) -> ShotTable:
    """Keep rows whose a2 bit equals the requested branch."""
    if branch not in (0, 1):
        raise ValueError("branch must be 0 or 1")
    pos = table.layout.position_of_role(ROLE_A2)
    return _filtered(table, lambda key: int(key[pos]) == branch)


def _strategy_predicate(layout: MeasurementLayout, strategy: Strategy):
    a1 = layout.position_of_role(ROLE_A1) if strategy.kind in (STRATEGY_PSA, STRATEGY_PSAP) else None
    parity = strategy.kind in (STRATEGY_PSP, STRATEGY_PSAP)
    data = layout.positions_of_role(ROLE_DATA)
    if parity and len(data) != 4:
        raise ValueError("parity post-selection needs the four encoded data qubits")

    def keep(key: str) -> bool:
        if a1 is not None and key[a1] == "1":
            return False
        if parity and sum(int(key[p]) for p in data) % 2 == 1:
            return False
        return True

    return keep


def apply_strategy(table: ShotTable, strategy: Strategy):
    """Apply a QED post-selection rule to an a2-selected table.

    PSA discards a1=1 rows, PSP discards odd data parity (keeping both a1
    values), PSAP discards either. Returns the filtered table and the
    survival statistics, normalized to the input population.
    """
    if table.n_shots == 0:
        raise EmptySelectionError("cannot post-select an empty table")
    if strategy.kind == STRATEGY_NONE:
        return table, SurvivalStats.of(table.n_shots, table.n_shots)
    out = _filtered(table, _strategy_predicate(table.layout, strategy))
    return out, SurvivalStats.of(table.n_shots, out.n_shots)


def select_a2_probs(probs: dict[str, float], layout: MeasurementLayout, branch: int):
    """Distribution twin of select_a2_branch; returns (renormalized map, branch weight)."""
    pos = layout.position_of_role(ROLE_A2)
    kept = {k: p for k, p in probs.items() if int(k[pos]) == branch}
    weight = sum(kept.values())
    if weight <= 0.0:
        raise EmptySelectionError("a2 branch has no weight")
    return {k: p / weight for k, p in kept.items()}, weight


def apply_strategy_probs(probs: dict[str, float], layout: MeasurementLayout, strategy: Strategy):
    """Distribution twin of apply_strategy; returns (renormalized map, eta)."""
    if strategy.kind == STRATEGY_NONE:
        return dict(probs), 1.0
    keep = _strategy_predicate(layout, strategy)
    kept = {k: p for k, p in probs.items() if keep(k)}
    eta = sum(kept.values())
    if eta <= 0.0:
        raise EmptySelectionError("post-selection removed all weight")
    return {k: p / eta for k, p in kept.items()}, eta


def red_vote(raw: ShotTable, layout: RedLayout):
    """Keep rows whose readout triples are unanimous, collapsing each triple.

    The collapsed table covers the original measured qubits only; survival is
    normalized to the raw shot total.
    """
    if raw.n_shots == 0:
        raise EmptySelectionError("cannot vote on an empty table")
    meas = raw.layout
    index_of = {q: i for i, q in enumerate(meas.qubits)}
    try:
        triples = [
            (index_of[m], index_of[a], index_of[b]) for m, a, b in layout.triples
        ]
    except KeyError as exc:
        raise ValueError(f"RED layout names unmeasured qubit {exc}") from exc
    red_positions = {p for _, a, b in triples for p in (a, b)}
    if meas.positions_of_role(ROLE_RED) != tuple(sorted(red_positions)):
        raise ValueError("RED layout does not match the table's readout qubits")
    keep_positions = [i for i in range(len(meas.qubits)) if i not in red_positions]

    counts: dict[str, int] = {}
    kept = 0
    for key, c in raw.counts.items():
        if all(key[m] == key[a] == key[b] for m, a, b in triples):
            sub = "".join(key[i] for i in keep_positions)
            counts[sub] = counts.get(sub, 0) + c
            kept += c
    collapsed = MeasurementLayout(
        tuple(meas.qubits[i] for i in keep_positions),
        tuple(meas.roles[i] for i in keep_positions),
        tuple(meas.names[i] for i in keep_positions),
    )
    table = ShotTable(counts, kept, collapsed, raw.seed, raw.basis)
    return table, SurvivalStats.of(raw.n_shots, kept)
