"""Adversary models for the mediating third party (TP).

Three representations coexist:

* :class:`CollectiveAttack` -- a semi-honest TP that prepares honest Bell
  pairs but interacts with the travelling qubit through ``U1`` (between the
  first and second user) and ``U2`` (between the second user and the return
  to TP). The ancilla starts in ``|0>``.
* :class:`UntrustedAttack` -- TP prepares an arbitrary source state on
  (sent qubit, ancilla), applies a unitary ``V1`` and finally an isometry
  ``V2`` that writes the public announcement into a 4-level register.
* :class:`StochasticChannel` -- a classical error model on the observed
  statistics, parameterised by the noise triple ``(Q, Q_M, Q_R)``; this is
  what the Monte-Carlo engine samples from.

Operators act on ``qubit (x) ancilla``, qubit first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from . import qmath
from .errors import AttackSpecError, InadmissibleNoiseError
from .qmath import Bell


@dataclass(frozen=True)
class NoiseParameters:
    """Error triple: Bob/Alice disagreement ``q``, wrong announcement in
    measure rounds ``qm``, wrong announcement in reflect rounds ``qr``."""

    q: float
    qm: float
    qr: float

    def __post_init__(self) -> None:
        for name in ("q", "qm", "qr"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise InadmissibleNoiseError(f"{name}={value} is not a probability")

    @classmethod
    def uniform(cls, q: float) -> "NoiseParameters":
        return cls(q, q, q)

    def check_admissible(self) -> None:
        """Raise unless matched-key events dominate (``q, qm < 1/2``)."""
        if not (self.q < 0.5 and self.qm < 0.5):
            raise InadmissibleNoiseError(
                f"need q < 0.5 and qm < 0.5 for the key-rate bounds, got q={self.q}, qm={self.qm}"
            )

    def as_dict(self) -> dict[str, float]:
        return {"q": self.q, "qm": self.qm, "qr": self.qr}


def _check_square(name: str, m: np.ndarray, dim: int) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim, dim):
        raise AttackSpecError(f"{name} must be {dim}x{dim}, got {m.shape}")
    if not qmath.is_unitary(m):
        raise AttackSpecError(f"{name} is not unitary within {qmath.EVOLVED_TOL:g}")
    return m


@dataclass(frozen=True, eq=False)
class CollectiveAttack:
    ancilla_dim: int
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self) -> None:
        if self.ancilla_dim < 1:
            raise AttackSpecError("ancilla_dim must be at least 1")
        dim = 2 * self.ancilla_dim
        object.__setattr__(self, "u1", _check_square("U1", self.u1, dim))
        object.__setattr__(self, "u2", _check_square("U2", self.u2, dim))
        self.u1.setflags(write=False)
        self.u2.setflags(write=False)


@dataclass(frozen=True, eq=False)
class UntrustedAttack:
    ancilla_dim: int
    source: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self) -> None:
        d = self.ancilla_dim
        if d < 1:
            raise AttackSpecError("ancilla_dim must be at least 1")
        source = np.asarray(self.source, dtype=complex)
        if source.shape != (2 * d,):
            raise AttackSpecError(f"source must have {2 * d} amplitudes, got {source.shape}")
        if abs(np.linalg.norm(source) - 1) > qmath.CONSTRUCTION_TOL:
            raise AttackSpecError("source state is not normalised")
        v1 = _check_square("V1", self.v1, 2 * d)
        v2 = np.asarray(self.v2, dtype=complex)
        if v2.shape != (4 * d, 2 * d):
            raise AttackSpecError(f"V2 must be {4 * d}x{2 * d} (register(4) x ancilla <- qubit x ancilla), got {v2.shape}")
        if not qmath.is_isometry(v2):
            raise AttackSpecError(f"V2 is not an isometry within {qmath.EVOLVED_TOL:g}")
        for name, arr in (("source", source), ("v1", v1), ("v2", v2)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class StochasticChannel:
    noise: NoiseParameters
    #: how reflect-round errors split over (phi-, psi+, psi-)
    wrong_bell_split: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        split = tuple(float(x) for x in self.wrong_bell_split)
        if len(split) != 3 or any(x < 0 for x in split) or abs(sum(split) - 1) > qmath.CONSTRUCTION_TOL:
            raise AttackSpecError(f"wrong_bell_split must be 3 nonnegative weights summing to 1, got {split}")
        object.__setattr__(self, "wrong_bell_split", split)

    @property
    def reflect_distribution(self) -> np.ndarray:
        """Announcement distribution over (phi+, phi-, psi+, psi-) in all-reflect rounds."""
        qr = self.noise.qr
        return np.array([1 - qr, *(qr * w for w in self.wrong_bell_split)])


Adversary = Union[CollectiveAttack, UntrustedAttack, StochasticChannel]


def identity_attack(ancilla_dim: int = 1) -> CollectiveAttack:
    """Honest TP: both interactions are the identity."""
    eye = np.eye(2 * ancilla_dim, dtype=complex)
    return CollectiveAttack(ancilla_dim, eye, eye.copy())


def random_collective_attack(ancilla_dim: int, seed: int) -> CollectiveAttack:
    if not 1 <= ancilla_dim <= 8:
        raise AttackSpecError("ancilla_dim must be in [1, 8]")
    rng = np.random.default_rng([int(seed), ancilla_dim, 0xC011])
    dim = 2 * ancilla_dim
    return CollectiveAttack(ancilla_dim, qmath.random_unitary(dim, rng), qmath.random_unitary(dim, rng))


def perturbed_collective_attack(ancilla_dim: int, strength: float, seed: int) -> CollectiveAttack:
    """Weak attack: ``U1``, ``U2`` are random unitaries within ``strength`` of the identity."""
    if not 1 <= ancilla_dim <= 8:
        raise AttackSpecError("ancilla_dim must be in [1, 8]")
    rng = np.random.default_rng([int(seed), ancilla_dim, 0x9E57])
    dim = 2 * ancilla_dim
    return CollectiveAttack(
        ancilla_dim,
        qmath.near_identity_unitary(dim, strength, rng),
        qmath.near_identity_unitary(dim, strength, rng),
    )


def entangling_probe_attack() -> CollectiveAttack:
    """U1 copies the qubit's Z value into a fresh ancilla (|a,0> -> |a,a>); U2 = I.

    On the 2-dim ancilla this is a CNOT with the travelling qubit as control.
    """
    cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    return CollectiveAttack(2, cnot, np.eye(4, dtype=complex))


def _bell_announcement_isometry(extra: int = 1) -> np.ndarray:
    """V2 for an honest TP whose ancilla is its half ``H`` (x) an idle ``extra``-level system.

    Maps ``|b'> (x) |h, r>`` to ``sum_m <Bell_m|h, b'> |m> (x) |0, r>``.
    """
    d = 2 * extra
    v2 = np.zeros((4 * d, 2 * d), dtype=complex)
    for b in (0, 1):
        for hq in (0, 1):
            amps = qmath.BELL_STATES.conj() @ qmath.ket(hq, b)
            for r in range(extra):
                for m in Bell:
                    v2[m * d + r, b * d + hq * extra + r] = amps[m]
    return v2


def honest_source() -> UntrustedAttack:
    """Untrusted-TP model instantiated with honest behaviour.

    The source is |phi+> with TP's half as the ancilla, ``V1 = I`` and ``V2``
    is a faithful Bell measurement whose result is written to the register.
    """
    source = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    return UntrustedAttack(2, source, np.eye(4, dtype=complex), _bell_announcement_isometry())


def perturbed_untrusted_attack(extra: int, strength: float, seed: int) -> UntrustedAttack:
    """Honest behaviour on an ancilla of dimension ``2 * extra``, with the source,
    ``V1`` and ``V2`` each rotated by a random unitary within ``strength`` of the identity."""
    if not 1 <= extra <= 4:
        raise AttackSpecError("extra must be in [1, 4]")
    rng = np.random.default_rng([int(seed), extra, 0x9E58])
    d = 2 * extra
    source = np.zeros(2 * d, dtype=complex)
    source[0] = source[d + extra] = 1 / math.sqrt(2)
    source = qmath.near_identity_unitary(2 * d, strength, rng) @ source
    v1 = qmath.near_identity_unitary(2 * d, strength, rng)
    v2 = qmath.near_identity_unitary(4 * d, strength, rng) @ _bell_announcement_isometry(extra)
    return UntrustedAttack(d, source / np.linalg.norm(source), v1, v2)


def random_untrusted_attack(ancilla_dim: int, seed: int) -> UntrustedAttack:
    if not 1 <= ancilla_dim <= 8:
        raise AttackSpecError("ancilla_dim must be in [1, 8]")
    rng = np.random.default_rng([int(seed), ancilla_dim, 0x0A77])
    d = ancilla_dim
    source = qmath.random_state(2 * d, rng)
    v1 = qmath.random_unitary(2 * d, rng)
    v2 = qmath.random_unitary(4 * d, rng)[:, : 2 * d]
    return UntrustedAttack(d, source, v1, v2)


# -- stochastic channel ------------------------------------------------------


@dataclass
class RoundContext:
    """Noiseless facts of one round: who measured, and the value the first
    measuring party obtained (a fair coin for an honest Bell source)."""

    measured: tuple[bool, ...]
    source_bit: int = 0


@dataclass
class RoundOutcome:
    outcomes: tuple[int | None, ...]
    announcement: Bell | None
    #: TP's Z-basis result on the returned qubit (always recorded)
    returned_bit: int | None = field(default=None)


def perturb_block(
    channel: StochasticChannel,
    measured: np.ndarray,
    source_bits: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised channel application over a block of rounds.

    ``measured`` is a boolean array (rounds, parties). Returns the outcome
    matrix (-1 where the party reflected), Bell announcements and the bit
    value of the qubit TP gets back.

    Noise model: each measuring party after the first sees the previous
    measuring party's value flipped with probability ``q``. In all-measure
    rounds the announcement's consistency class is wrong with probability
    ``qm``; in all-reflect rounds a wrong Bell outcome is announced with
    probability ``qr``. Consistent announcements split evenly between phi+
    and phi-, inconsistent ones between psi+ and psi-. Mixed rounds are
    announced truthfully.
    """
    noise = channel.noise
    measured = np.asarray(measured, dtype=bool)
    rounds, parties = measured.shape
    # draw every variate up front so block layout never changes the stream
    flips = rng.random((rounds, parties)) < noise.q
    wrong_m = rng.random(rounds) < noise.qm
    reflect_u = rng.random(rounds)
    split_u = rng.random(rounds)

    outcomes = np.full((rounds, parties), -1, dtype=np.int8)
    value = np.asarray(source_bits, dtype=np.int8).copy()
    seen = np.zeros(rounds, dtype=bool)
    for col in range(parties):
        m = measured[:, col]
        flip = m & seen & flips[:, col]
        value = np.where(flip, value ^ 1, value)
        outcomes[:, col] = np.where(m, value, -1)
        seen |= m
    returned = value

    all_measure = measured.all(axis=1)
    all_reflect = ~measured.any(axis=1)
    # TP's retained half collapsed to the source bit whenever anyone measured
    consistent = returned == np.asarray(source_bits, dtype=np.int8)
    consistent = np.where(all_measure & wrong_m, ~consistent, consistent)
    phase = split_u < 0.5
    announce = np.where(consistent, np.where(phase, Bell.PHI_PLUS, Bell.PHI_MINUS),
                        np.where(phase, Bell.PSI_PLUS, Bell.PSI_MINUS)).astype(np.int8)

    cdf = np.cumsum(channel.reflect_distribution)
    reflect_announce = np.searchsorted(cdf, reflect_u * cdf[-1], side="right").clip(0, 3)
    announce = np.where(all_reflect, reflect_announce, announce).astype(np.int8)
    returned = np.where(all_reflect, -1, returned).astype(np.int8)
    return outcomes, announce, returned


def sample_stochastic(
    channel: StochasticChannel,
    context: RoundContext,
    rng: np.random.Generator,
) -> RoundOutcome:
    """Apply the stochastic channel to a single round."""
    outcomes, announce, returned = perturb_block(
        channel,
        np.array([context.measured], dtype=bool),
        np.array([context.source_bit]),
        rng,
    )
    outs = tuple(None if o < 0 else int(o) for o in outcomes[0])
    ret = None if returned[0] < 0 else int(returned[0])
    return RoundOutcome(outs, Bell(int(announce[0])), ret)


# -- JSON specification files ------------------------------------------------


def _decode_array(name: str, data: Any) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise AttackSpecError(f"{name}: expected nested arrays of [re, im] pairs") from exc
    if arr.ndim < 2 or arr.shape[-1] != 2:
        raise AttackSpecError(f"{name}: innermost entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _encode_array(arr: np.ndarray) -> list:
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _require(spec: dict, key: str) -> Any:
    if key not in spec:
        raise AttackSpecError(f"attack specification is missing '{key}'")
    return spec[key]


def attack_from_dict(spec: dict) -> Adversary:
    kind = spec.get("type")
    if kind == "collective":
        d = int(_require(spec, "ancilla_dim"))
        return CollectiveAttack(d, _decode_array("U1", _require(spec, "U1")), _decode_array("U2", _require(spec, "U2")))
    if kind == "untrusted":
        d = int(_require(spec, "ancilla_dim"))
        return UntrustedAttack(
            d,
            _decode_array("source", _require(spec, "source")),
            _decode_array("V1", _require(spec, "V1")),
            _decode_array("V2", _require(spec, "V2")),
        )
    if kind == "stochastic":
        noise = _require(spec, "noise")
        try:
            params = NoiseParameters(float(noise["q"]), float(noise["qm"]), float(noise["qr"]))
        except (KeyError, TypeError) as exc:
            raise AttackSpecError("noise must be an object with q, qm, qr") from exc
        split = spec.get("wrong_bell_split", (1 / 3, 1 / 3, 1 / 3))
        return StochasticChannel(params, tuple(split))
    raise AttackSpecError(f"unknown attack type {kind!r}; expected collective, untrusted or stochastic")


def attack_to_dict(attack: Adversary) -> dict:
    if isinstance(attack, CollectiveAttack):
        return {"type": "collective", "ancilla_dim": attack.ancilla_dim,
                "U1": _encode_array(attack.u1), "U2": _encode_array(attack.u2)}
    if isinstance(attack, UntrustedAttack):
        return {"type": "untrusted", "ancilla_dim": attack.ancilla_dim,
                "source": _encode_array(attack.source),
                "V1": _encode_array(attack.v1), "V2": _encode_array(attack.v2)}
    return {"type": "stochastic", "noise": attack.noise.as_dict(),
            "wrong_bell_split": list(attack.wrong_bell_split)}


def load_attack(path: str | Path) -> Adversary:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AttackSpecError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(spec, dict):
        raise AttackSpecError(f"{path}: top level must be a JSON object")
    return attack_from_dict(spec)


def save_attack(attack: Adversary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(attack_to_dict(attack), indent=1) + "\n")
