"""Monte-Carlo engine for the circular mediated protocol and its L-party forms.

Every round, TP keeps one half of a |phi+> pair and sends the other half
around the ring C1 -> C2 -> ... -> CL -> TP. Each user independently either
reflects the qubit or measures it in Z and resends the result. TP then
Bell-measures its retained half together with the returned qubit and
announces the outcome (``mediated`` variant), or, when every user measured,
reads the returned qubit in Z and joins the key (``sqkd`` variant).

Sifting:

* all users reflected            -> ``case1`` (honesty check)
* all measured, phi+/phi- (or Z) -> ``case2`` (key material)
* all measured, psi+/psi-        -> ``discarded_psi``
* anything else                  -> ``case3`` (discarded)
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .attacks import StochasticChannel, perturb_block
from .errors import NoKeyError
from .qmath import Bell

#: rounds per independently seeded block; part of the reproducibility contract
BLOCK_SIZE = 1 << 16
VARIANTS = ("mediated", "sqkd")
#: announcement code used for TP's Z-basis reading in sqkd key rounds
Z_READOUT = -1


class Case(IntEnum):
    CASE1 = 0
    CASE2 = 1
    CASE3 = 2
    DISCARDED_PSI = 3

    @property
    def label(self) -> str:
        return ("case1", "case2", "case3", "discarded_psi")[self]


@dataclass(frozen=True)
class ProtocolConfig:
    parties: int = 2
    rounds: int = 10_000
    variant: str = "mediated"
    seed: int = 0
    test_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.parties < 2:
            raise ValueError("need at least two parties")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class TrialRecord:
    round_index: int
    measured: tuple[bool, ...]
    outcomes: tuple[int | None, ...]
    #: Bell outcome, or None when TP read the returned qubit in Z (sqkd)
    announcement: Bell | None
    case: Case
    tp_outcome: int | None = None

    @property
    def choices(self) -> str:
        return "".join("M" if m else "R" for m in self.measured)


def classify_case(measured: Sequence[bool], announcement: Bell | None, variant: str = "mediated") -> Case:
    """Sift one round from the users' choices and TP's announcement."""
    measured = [bool(m) for m in measured]
    if not any(measured):
        return Case.CASE1
    if all(measured):
        if variant == "sqkd" or announcement is None:
            return Case.CASE2
        return Case.CASE2 if Bell(announcement).consistent else Case.DISCARDED_PSI
    return Case.CASE3


def _classify_block(measured: np.ndarray, announce: np.ndarray) -> np.ndarray:
    all_m = measured.all(axis=1)
    none_m = ~measured.any(axis=1)
    cases = np.full(len(announce), Case.CASE3, dtype=np.int8)
    cases[none_m] = Case.CASE1
    consistent = (announce == Bell.PHI_PLUS) | (announce == Bell.PHI_MINUS) | (announce == Z_READOUT)
    cases[all_m & consistent] = Case.CASE2
    cases[all_m & ~consistent] = Case.DISCARDED_PSI
    return cases


def _simulate_rows(
    config: ProtocolConfig,
    channel: StochasticChannel,
    rng: np.random.Generator,
    n: int,
) -> tuple[np.ndarray, ...]:
    measured = rng.integers(0, 2, size=(n, config.parties)).astype(bool)
    source_bits = rng.integers(0, 2, size=n)
    outcomes, announce, returned = perturb_block(channel, measured, source_bits, rng)
    if config.variant == "sqkd":
        # TP reads the returned qubit in Z instead of a Bell measurement
        all_m = measured.all(axis=1)
        announce = np.where(all_m, Z_READOUT, announce).astype(np.int8)
        returned = np.where(all_m, returned, -1).astype(np.int8)
    else:
        returned = np.full(n, -1, dtype=np.int8)
    return measured, outcomes, announce, returned


def run_round(
    config: ProtocolConfig,
    adversary: StochasticChannel,
    rng: np.random.Generator,
    round_index: int = 0,
) -> TrialRecord:
    """Simulate a single round with the caller's random stream."""
    measured, outcomes, announce, returned = _simulate_rows(config, adversary, rng, 1)
    a = int(announce[0])
    announcement = None if a == Z_READOUT else Bell(a)
    m = tuple(bool(x) for x in measured[0])
    return TrialRecord(
        round_index=round_index,
        measured=m,
        outcomes=tuple(None if o < 0 else int(o) for o in outcomes[0]),
        announcement=announcement,
        case=classify_case(m, announcement, config.variant),
        tp_outcome=None if returned[0] < 0 else int(returned[0]),
    )


@dataclass
class TrialLog:
    """Column-oriented record of every round; indexing yields TrialRecords."""

    measured: np.ndarray
    outcomes: np.ndarray
    announce: np.ndarray
    tp_outcome: np.ndarray
    cases: np.ndarray
    test_mask: np.ndarray

    def __len__(self) -> int:
        return len(self.cases)

    def __getitem__(self, k: int) -> TrialRecord:
        a = int(self.announce[k])
        return TrialRecord(
            round_index=int(k),
            measured=tuple(bool(x) for x in self.measured[k]),
            outcomes=tuple(None if o < 0 else int(o) for o in self.outcomes[k]),
            announcement=None if a == Z_READOUT else Bell(a),
            case=Case(int(self.cases[k])),
            tp_outcome=None if self.tp_outcome[k] < 0 else int(self.tp_outcome[k]),
        )

    def __iter__(self) -> Iterator[TrialRecord]:
        return (self[k] for k in range(len(self)))

    @property
    def parties(self) -> int:
        return self.measured.shape[1]

    def case_counts(self) -> dict[str, int]:
        counts = np.bincount(self.cases, minlength=4)
        return {Case(k).label: int(counts[k]) for k in range(4)}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round_index", "choices", "outcomes", "announcement", "case"])
            for k in range(len(self)):
                choices = "".join("M" if m else "R" for m in self.measured[k])
                outs = "".join("-" if o < 0 else str(int(o)) for o in self.outcomes[k])
                a = int(self.announce[k])
                ann = f"z{int(self.tp_outcome[k])}" if a == Z_READOUT else Bell(a).label
                w.writerow([k, choices, outs, ann, Case(int(self.cases[k])).label])


@dataclass
class NoiseEstimate:
    q: float
    qm: float | None
    qr: float
    q_se: float = 0.0
    qm_se: float | None = 0.0
    qr_se: float = 0.0

    def as_dict(self) -> dict:
        return {"q": self.q, "qm": self.qm, "qr": self.qr,
                "q_se": self.q_se, "qm_se": self.qm_se, "qr_se": self.qr_se}


@dataclass
class SiftedStatistics:
    """Observed (or exactly computed) statistics of the two sifting branches.

    ``announcement_table[m, i, j]`` is the joint probability, within
    all-measure rounds, that TP announces Bell outcome ``m`` while the first
    user holds ``i`` and the last user holds ``j``. ``reflect_bell`` is the
    announcement distribution in all-reflect rounds. Standard errors are
    zero for exact statistics.
    """

    announcement_table: np.ndarray | None
    reflect_bell: np.ndarray
    noise: NoiseEstimate
    announcement_se: np.ndarray | None = None
    reflect_se: np.ndarray | None = None
    pair_table: np.ndarray | None = None
    parties: int = 2
    variant: str = "mediated"
    exact: bool = False
    counts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.reflect_bell = np.asarray(self.reflect_bell, dtype=float)
        if self.reflect_se is None:
            self.reflect_se = np.zeros(4)
        if self.announcement_table is not None:
            self.announcement_table = np.asarray(self.announcement_table, dtype=float).reshape(4, 2, 2)
            if self.announcement_se is None:
                self.announcement_se = np.zeros((4, 2, 2))
            if self.pair_table is None:
                self.pair_table = self.announcement_table.sum(axis=0)

    @classmethod
    def from_tables(
        cls,
        announcement_table: np.ndarray,
        reflect_bell: np.ndarray,
        *,
        exact: bool = True,
        **kwargs,
    ) -> "SiftedStatistics":
        t = np.asarray(announcement_table, dtype=float).reshape(4, 2, 2)
        return cls(t, np.asarray(reflect_bell, dtype=float), noise_from_tables(t, reflect_bell),
                   exact=exact, **kwargs)

    def _table(self) -> np.ndarray:
        if self.announcement_table is None:
            raise ValueError("no Bell-announcement table for this variant")
        return self.announcement_table

    @property
    def alice_marginal(self) -> np.ndarray:
        return self._table().sum(axis=(0, 2))

    @property
    def p_c(self) -> np.ndarray:
        """P(Bob j and consistent announcement | Alice i)."""
        t = self._table()
        return (t[0] + t[1]) / _safe(self.alice_marginal)[:, None]

    @property
    def p_w(self) -> np.ndarray:
        """P(Bob j and inconsistent announcement | Alice i)."""
        t = self._table()
        return (t[2] + t[3]) / _safe(self.alice_marginal)[:, None]

    @property
    def p(self) -> np.ndarray:
        """Raw-key distribution built from ``p_c`` (accepted rounds)."""
        pc = self.p_c
        return pc / _safe(pc.sum())

    @property
    def q(self) -> np.ndarray:
        """Raw-key distribution from the joint accepted-announcement table."""
        t = self._table()
        acc = t[0] + t[1]
        return acc / _safe(acc.sum())

    def as_dict(self) -> dict:
        out: dict = {
            "parties": self.parties,
            "variant": self.variant,
            "exact": self.exact,
            "counts": self.counts,
            "reflect_bell": dict(zip((b.label for b in Bell), self.reflect_bell.tolist())),
            "reflect_se": self.reflect_se.tolist(),
            "noise": self.noise.as_dict(),
        }
        if self.pair_table is not None:
            out["pair_table"] = np.asarray(self.pair_table).tolist()
        if self.announcement_table is not None:
            out.update({
                "announcement_table": self.announcement_table.tolist(),
                "announcement_se": self.announcement_se.tolist(),
                "p_c": self.p_c.tolist(),
                "p_w": self.p_w.tolist(),
                "p": self.p.tolist(),
                "q_table": self.q.tolist(),
            })
        return out

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.as_dict(), indent=2) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "SiftedStatistics":
        reflect = data["reflect_bell"]
        if isinstance(reflect, dict):
            reflect = [reflect[b.label] for b in Bell]
        table = data.get("announcement_table")
        se = data.get("announcement_se")
        noise = data.get("noise")
        if table is not None:
            t = np.asarray(table, dtype=float).reshape(4, 2, 2)
            est = noise_from_tables(t, reflect)
            if noise:
                est = NoiseEstimate(**{k: noise.get(k, getattr(est, k)) for k in est.as_dict()})
        else:
            t = None
            est = NoiseEstimate(**noise)
        return cls(
            t,
            np.asarray(reflect, dtype=float),
            est,
            announcement_se=None if se is None else np.asarray(se, dtype=float),
            reflect_se=None if data.get("reflect_se") is None else np.asarray(data["reflect_se"], dtype=float),
            pair_table=None if data.get("pair_table") is None else np.asarray(data["pair_table"], dtype=float),
            parties=int(data.get("parties", 2)),
            variant=data.get("variant", "mediated"),
            exact=bool(data.get("exact", False)),
            counts=dict(data.get("counts", {})),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SiftedStatistics":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _safe(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, np.inf)


def noise_from_tables(table: np.ndarray, reflect_bell: Sequence[float]) -> NoiseEstimate:
    """Read (Q, Q_M, Q_R) off exact tables.

    Q_M counts announcements whose consistency class contradicts the users'
    agreement: psi for equal outcomes, phi for different ones.
    """
    t = np.asarray(table, dtype=float).reshape(4, 2, 2)
    total = t.sum()
    off = ~np.eye(2, dtype=bool)
    q = t[:, off].sum() / total
    qm = (t[:2][:, off].sum() + t[2:][:, ~off].sum()) / total
    n_r = float(np.sum(reflect_bell))
    # Q_R is unobservable without all-reflect rounds
    qr = 1.0 - float(reflect_bell[0]) / n_r if n_r > 0 else math.nan
    return NoiseEstimate(float(q), float(qm), float(qr))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(block)])


def _threads() -> int:
    env = os.environ.get("SQKD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def simulate_trials(config: ProtocolConfig, adversary: StochasticChannel) -> TrialLog:
    """Run every round; output is independent of the thread count."""
    n_blocks = math.ceil(config.rounds / BLOCK_SIZE)

    def block(b: int):
        n = min(BLOCK_SIZE, config.rounds - b * BLOCK_SIZE)
        return _simulate_rows(config, adversary, _block_rng(config.seed, b), n)

    if n_blocks > 1 and _threads() > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]

    measured, outcomes, announce, returned = (np.concatenate(col) for col in zip(*parts))
    cases = _classify_block(measured, announce)
    test_mask = _select_test_subset(cases, config)
    return TrialLog(measured, outcomes, announce, returned, cases, test_mask)


def _select_test_subset(cases: np.ndarray, config: ProtocolConfig) -> np.ndarray:
    idx = np.flatnonzero(cases == Case.CASE2)
    mask = np.zeros(len(cases), dtype=bool)
    if len(idx) == 0:
        return mask
    k = min(len(idx), max(1, round(config.test_fraction * len(idx))))
    rng = np.random.default_rng([int(config.seed) & 0xFFFFFFFFFFFFFFFF, 0x7E57])
    mask[rng.choice(idx, size=k, replace=False)] = True
    return mask


def estimate_statistics(log: TrialLog, variant: str = "mediated") -> SiftedStatistics:
    """Estimate the statistics tables from publicly revealed rounds only.

    Revealed: every all-reflect round, every psi-discarded round, and the
    sampled test subset of case2. Accepted-round cells are rescaled by the
    (public) fraction of consistent announcements.
    """
    cases = log.cases
    first = log.outcomes[:, 0].astype(int)
    last = log.outcomes[:, -1].astype(int)
    counts = log.case_counts()

    refl = cases == Case.CASE1
    n_rr = int(refl.sum())
    refl_counts = np.bincount(log.announce[refl], minlength=4)[:4].astype(float)
    reflect = refl_counts / max(n_rr, 1)
    reflect_se = np.sqrt(reflect * (1 - reflect) / max(n_rr, 1))
    qr = 1.0 - reflect[0] if n_rr else math.nan
    qr_se = math.sqrt(qr * (1 - qr) / n_rr) if n_rr else math.nan

    all_m = (cases == Case.CASE2) | (cases == Case.DISCARDED_PSI)
    n_mm = int(all_m.sum())
    test = log.test_mask
    n_test = int(test.sum())
    n_cons = counts["case2"]
    f = n_cons / n_mm if n_mm else 0.0
    counts = {**counts, "all_measure": n_mm, "test": n_test, "key": n_cons - n_test}

    if variant == "sqkd":
        pair = np.zeros((2, 2))
        np.add.at(pair, (first[test], log.tp_outcome[test].astype(int)), 1)
        pair /= max(n_test, 1)
        q = pair[0, 1] + pair[1, 0]
        noise = NoiseEstimate(float(q), None, float(qr), math.sqrt(q * (1 - q) / max(n_test, 1)), None, qr_se)
        return SiftedStatistics(None, reflect, noise, reflect_se=reflect_se, pair_table=pair,
                                parties=log.parties, variant=variant, counts=counts)

    psi = cases == Case.DISCARDED_PSI
    n_psi = np.zeros((4, 2, 2))
    np.add.at(n_psi, (log.announce[psi].astype(int), first[psi], last[psi]), 1)
    n_t = np.zeros((4, 2, 2))
    np.add.at(n_t, (log.announce[test].astype(int), first[test], last[test]), 1)

    table = np.zeros((4, 2, 2))
    se = np.zeros((4, 2, 2))
    if n_mm:
        table[2:] = n_psi[2:] / n_mm
        se[2:] = np.sqrt(table[2:] * (1 - table[2:]) / n_mm)
    if n_test:
        pi = n_t[:2] / n_test
        table[:2] = f * pi
        # delta method for the product of two independent binomial estimates
        se[:2] = np.sqrt(pi**2 * f * (1 - f) / n_mm + f**2 * pi * (1 - pi) / n_test)

    est = noise_from_tables(table, reflect) if table.sum() > 0 else NoiseEstimate(0.0, 0.0, qr)
    off = ~np.eye(2, dtype=bool)

    def mixed_se(psi_mass: float, cons_share: float) -> float:
        v = psi_mass * (1 - psi_mass) / max(n_mm, 1)
        v += cons_share**2 * f * (1 - f) / max(n_mm, 1) + f**2 * cons_share * (1 - cons_share) / max(n_test, 1)
        return math.sqrt(v)

    pi_all = n_t[:2].sum(axis=0) / max(n_test, 1)
    q_se = mixed_se(float(table[2:][:, off].sum()), float(pi_all[off].sum()))
    qm_se = mixed_se(float(table[2:][:, ~off].sum()), float(pi_all[off].sum()))
    noise = NoiseEstimate(est.q, est.qm, float(qr), q_se, qm_se, qr_se)
    return SiftedStatistics(table, reflect, noise, announcement_se=se, reflect_se=reflect_se,
                            parties=log.parties, variant=variant, counts=counts)


class SimulationResult(NamedTuple):
    trials: TrialLog
    stats: SiftedStatistics
    keys: dict[str, np.ndarray]


def run_simulation(config: ProtocolConfig, adversary: StochasticChannel) -> SimulationResult:
    """Run, sift and estimate. Raw keys are the case2 outcomes outside the test subset."""
    log = simulate_trials(config, adversary)
    counts = log.case_counts()
    if counts["case2"] == 0:
        raise NoKeyError(f"no case2 rounds in {config.rounds} rounds; nothing to build a key from")
    for label, n in counts.items():
        if n == 0 and label != "discarded_psi":
            warnings.warn(f"{label} never occurred in {config.rounds} rounds", RuntimeWarning, stacklevel=2)

    key_rows = (log.cases == Case.CASE2) & ~log.test_mask
    keys = {f"C{k + 1}": log.outcomes[key_rows, k].astype(np.uint8) for k in range(config.parties)}
    if config.variant == "sqkd":
        keys["TP"] = log.tp_outcome[key_rows].astype(np.uint8)
    stats = estimate_statistics(log, config.variant)
    return SimulationResult(log, stats, keys)
