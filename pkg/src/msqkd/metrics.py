"""Qubit efficiency, communication cost and the reference comparison table.

Counting is per raw-key bit under noiseless operation. Each round TP
prepares one Bell pair (two qubits), every measuring user resends one fresh
qubit, and the travelling qubit crosses ``L + 1`` hops. A round yields a key
bit only when all ``L`` users measure, which happens with probability
``2^-L``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .protocol import Case, TrialLog


def _check_parties(parties: int) -> None:
    if parties < 2:
        raise ValueError("need at least two parties")


def qubit_efficiency(parties: int) -> Fraction:
    """Raw-key bits per qubit prepared: ``1 / (2^(L+1) + L 2^(L-1))``."""
    _check_parties(parties)
    return Fraction(1, 2 ** (parties + 1) + parties * 2 ** (parties - 1))


def communication_cost(parties: int) -> int:
    """Qubit transmissions per raw-key bit: ``(L + 1) 2^L``."""
    _check_parties(parties)
    return (parties + 1) * 2**parties


@dataclass(frozen=True)
class ReferenceRow:
    label: str
    #: tolerated noise in percent, None where no bound was given
    noise_tolerance: float | None
    qubit_efficiency: Fraction
    communication_cost: int
    scalable: bool


#: Reported figures for comparable mediated SQKD protocols, stored as constants.
REFERENCE_ROWS = (
    ReferenceRow("Krawec (2015)", 10.65, Fraction(1, 24), 32, False),
    ReferenceRow("Krawec (improved)", 13.04, Fraction(1, 24), 32, False),
    ReferenceRow("Liu et al.", None, Fraction(1, 16), 24, False),
    ReferenceRow("Lin et al.", None, Fraction(1, 24), 32, False),
    ReferenceRow("Chen et al.", None, Fraction(1, 8), 12, True),
    ReferenceRow("Guskind et al. (2022)", 9.1, Fraction(1, 12), 16, False),
    ReferenceRow("This protocol", 13.19, Fraction(1, 12), 12, True),
)


@dataclass
class PerformanceReport:
    parties: int
    qubit_efficiency: Fraction
    communication_cost_qubits: int
    reference_rows: list[ReferenceRow] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0 < self.qubit_efficiency < 1:
            raise ValueError("qubit efficiency must lie in (0, 1)")
        if self.communication_cost_qubits < self.parties + 1:
            raise ValueError("communication cost below one transmission per hop")

    def rows(self) -> list[tuple[str, str, str, str, str]]:
        def tol(x: float | None) -> str:
            return "-" if x is None else f"{x:g}%"

        out = [(r.label, tol(r.noise_tolerance), str(r.qubit_efficiency), str(r.communication_cost),
                "yes" if r.scalable else "no") for r in self.reference_rows]
        if self.parties != 2:
            out.append((f"This protocol (L={self.parties})", "-", str(self.qubit_efficiency),
                        str(self.communication_cost_qubits), "yes"))
        return out

    def to_text(self) -> str:
        header = ("protocol", "noise tolerance", "qubit efficiency", "communication cost", "scalable")
        rows = [header, *self.rows()]
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["protocol", "noise_tolerance", "qubit_efficiency", "communication_cost", "scalable"])
        w.writerows(self.rows())
        return buf.getvalue()


def comparison_table(parties: int = 2) -> PerformanceReport:
    return PerformanceReport(parties, qubit_efficiency(parties), communication_cost(parties), list(REFERENCE_ROWS))


@dataclass(frozen=True)
class ResourceAccounting:
    rounds: int
    key_bits: int
    qubits_prepared: int
    transmissions: int

    @property
    def qubit_efficiency(self) -> float:
        return self.key_bits / self.qubits_prepared

    @property
    def communication_cost(self) -> float:
        return self.transmissions / self.key_bits


def resource_accounting(log: TrialLog) -> ResourceAccounting:
    """Count prepared qubits and hop transmissions in a simulated run."""
    key_bits = int(np.count_nonzero(log.cases == Case.CASE2))
    if key_bits == 0:
        raise ValueError("log contains no key-generating rounds")
    rounds = len(log)
    prepared = 2 * rounds + int(np.count_nonzero(log.measured))
    return ResourceAccounting(rounds, key_bits, prepared, (log.parties + 1) * rounds)
