"""Exact (no sampling) evolution of the two-party protocol under unitary attacks.

Measurement by a classical user is modelled as collapse-and-continue: the
Z-basis post-measurement state is carried forward and stands in for the
freshly prepared replacement qubit.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import qmath
from .attacks import CollectiveAttack, StochasticChannel, UntrustedAttack
from .errors import AttackSpecError
from .protocol import SiftedStatistics
from .qmath import Bell

#: register growth makes the noiseless L-party evolution impractical beyond this
MAX_EXACT_PARTIES = 4


def _apply(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return op @ rho @ op.conj().T


def exact_statistics_semi_honest(attack: CollectiveAttack) -> SiftedStatistics:
    """Statistics tables of the honest |phi+> source under ``U1``/``U2``.

    Register order is (H, travelling qubit, ancilla) where H is TP's
    retained half.
    """
    if not isinstance(attack, CollectiveAttack):
        raise AttackSpecError("expected a CollectiveAttack")
    d = attack.ancilla_dim
    dims = [2, 2, d]
    w1 = np.kron(np.eye(2), attack.u1)
    w2 = np.kron(np.eye(2), attack.u2)
    if w1.shape[0] != 4 * d:
        raise AttackSpecError("attack dimension does not match its ancilla")
    rho0 = np.kron(qmath.projector(qmath.BELL_STATES[Bell.PHI_PLUS]), qmath.projector(qmath.basis(d, 0)))

    table = np.zeros((4, 2, 2))
    p_alice, after_alice = qmath.z_measure(rho0, 1, dims)
    for i in (0, 1):
        if after_alice[i] is None:
            continue
        p_bob, after_bob = qmath.z_measure(_apply(w1, after_alice[i]), 1, dims)
        for j in (0, 1):
            if after_bob[j] is None:
                continue
            rho_hq = qmath.partial_trace(_apply(w2, after_bob[j]), dims, keep=[0, 1])
            table[:, i, j] = p_alice[i] * p_bob[j] * qmath.bell_measure(rho_hq)

    rho_r = _apply(w2, _apply(w1, rho0))
    reflect = qmath.bell_measure(qmath.partial_trace(rho_r, dims, keep=[0, 1]))
    return SiftedStatistics.from_tables(table, reflect)


def exact_statistics_untrusted(attack: UntrustedAttack) -> SiftedStatistics:
    """Statistics tables for an arbitrary source with ``V1`` and isometry ``V2``.

    ``announcement_table[m, i, j]`` is the joint probability of Alice ``i``,
    Bob ``j`` and announcement ``m`` given both measured.
    """
    if not isinstance(attack, UntrustedAttack):
        raise AttackSpecError("expected an UntrustedAttack")
    d = attack.ancilla_dim
    if attack.v2.shape != (4 * d, 2 * d):
        raise AttackSpecError("V2 dimensions do not match the ancilla")
    dims = [2, d]

    def announcement_probs(vec: np.ndarray) -> np.ndarray:
        out = attack.v2 @ vec
        reg = qmath.partial_trace(qmath.projector(out), [4, d], keep=[0])
        return np.clip(np.diag(reg).real, 0.0, None)

    table = np.zeros((4, 2, 2))
    p_alice, after_alice = qmath.z_measure(attack.source, 0, dims)
    for i in (0, 1):
        if after_alice[i] is None:
            continue
        p_bob, after_bob = qmath.z_measure(attack.v1 @ after_alice[i], 0, dims)
        for j in (0, 1):
            if after_bob[j] is None:
                continue
            table[:, i, j] = p_alice[i] * p_bob[j] * announcement_probs(after_bob[j])

    reflect = announcement_probs(attack.v1 @ attack.source)
    return SiftedStatistics.from_tables(table, reflect)


def channel_statistics(channel: StochasticChannel, parties: int = 2) -> SiftedStatistics:
    """Closed-form tables the stochastic channel induces (first vs last user).

    For two users the accepted cells reproduce ``(1-Q)(1-Q_M)`` and
    ``Q Q_M`` conditional on Alice's value, split evenly over phi+/phi-.
    """
    n = channel.noise
    # disagreement after parties-1 independent hop flips
    q = (1 - (1 - 2 * n.q) ** (parties - 1)) / 2
    same_cons = (1 - q) * (1 - n.qm)
    diff_cons = q * n.qm
    same_incons = (1 - q) * n.qm
    diff_incons = q * (1 - n.qm)
    table = np.zeros((4, 2, 2))
    for i in (0, 1):
        for m in (0, 1):
            table[m, i, i] = same_cons / 4
            table[m, i, 1 - i] = diff_cons / 4
        for m in (2, 3):
            table[m, i, i] = same_incons / 4
            table[m, i, 1 - i] = diff_incons / 4
    return SiftedStatistics.from_tables(table, channel.reflect_distribution, parties=parties)


# -- branch vectors and exact conditional entropies ---------------------------


def semi_honest_branch_vectors(attack: CollectiveAttack) -> dict[tuple[int, int, int], np.ndarray]:
    """Unnormalised ancilla vectors ``E^j_{i,k}`` keyed by ``(j, i, k)``.

    ``U1|a,0> = sum_b |b, E_k>`` with ``k = 2a + b``, and
    ``U2|i, E_k> = sum_j |j, E^j_{i,k}>``.
    """
    d = attack.ancilla_dim
    e: dict[int, np.ndarray] = {}
    for a in (0, 1):
        out = (attack.u1 @ np.kron(qmath.basis(2, a), qmath.basis(d, 0))).reshape(2, d)
        for b in (0, 1):
            # E0/E1 follow |0,0>, E3/E2 follow |1,0> with E3 on the unflipped value
            k = {(0, 0): 0, (0, 1): 1, (1, 0): 2, (1, 1): 3}[a, b]
            e[k] = out[b]
    vectors = {}
    for k, vec in e.items():
        i = {0: 0, 1: 1, 2: 0, 3: 1}[k]  # qubit value travelling with E_k
        out = (attack.u2 @ np.kron(qmath.basis(2, i), vec)).reshape(2, d)
        for j in (0, 1):
            vectors[j, i, k] = out[j]
    return vectors


def _conditional_entropy_ab(probs: np.ndarray) -> float:
    """H(A|B) for a 2x2 joint table indexed [a, b]."""
    return qmath.shannon_entropy(probs) - qmath.shannon_entropy(probs.sum(axis=0))


def _s_a_given_t(rho_at: np.ndarray, dim_t: int) -> float:
    rho_t = qmath.partial_trace(rho_at, [2, dim_t], keep=[1])
    return qmath.von_neumann_entropy(rho_at) - qmath.von_neumann_entropy(rho_t)


def exact_key_rate_semi_honest(attack: CollectiveAttack) -> float:
    """S(A|T) - H(A|B) of the accepted raw-key state, by diagonalisation."""
    e = semi_honest_branch_vectors(attack)
    # accepted branches: (Alice, Bob) -> ancilla vector
    branch = {(0, 0): e[0, 0, 0], (0, 1): e[0, 1, 1], (1, 0): e[1, 0, 2], (1, 1): e[1, 1, 3]}
    return _exact_rate({ab: [v] for ab, v in branch.items()}, attack.ancilla_dim)


def untrusted_branch_vectors(attack: UntrustedAttack) -> dict[tuple[int, int, int], np.ndarray]:
    """Unnormalised ``g^m_{i,j}`` keyed by ``(m, i, j)``."""
    d = attack.ancilla_dim
    g = attack.source.reshape(2, d)
    vectors = {}
    for i in (0, 1):
        gij = (attack.v1 @ np.kron(qmath.basis(2, i), g[i])).reshape(2, d)
        for j in (0, 1):
            out = (attack.v2 @ np.kron(qmath.basis(2, j), gij[j])).reshape(4, d)
            for m in range(4):
                vectors[m, i, j] = out[m]
    return vectors


def exact_key_rate_untrusted(attack: UntrustedAttack) -> float:
    """S(A|T) - H(A|B) for the accepted state, TP holding the public ``m``."""
    g = untrusted_branch_vectors(attack)
    d = attack.ancilla_dim
    branch = {}
    for i, j in itertools.product((0, 1), repeat=2):
        # announcement register kept by TP: embed g^m into |m> (x) ancilla
        branch[i, j] = [np.kron(qmath.basis(2, m), g[m, i, j]) for m in (0, 1)]
    return _exact_rate(branch, 2 * d)


def _exact_rate(branch: dict[tuple[int, int], list[np.ndarray]], dim_t: int) -> float:
    probs = np.array([[sum(np.vdot(v, v).real for v in branch[a, b]) for b in (0, 1)] for a in (0, 1)])
    total = probs.sum()
    if total <= 0:
        raise ValueError("attack leaves no accepted raw-key mass")
    rho_at = np.zeros((2 * dim_t, 2 * dim_t), dtype=complex)
    for (a, _b), vecs in branch.items():
        for v in vecs:
            rho_at += np.kron(qmath.projector(qmath.basis(2, a)), qmath.projector(v))
    rho_at /= total
    return _s_a_given_t(rho_at, dim_t) - _conditional_entropy_ab(probs / total)


# -- noiseless multi-party evolution ----------------------------------------


def exact_multiparty_noiseless(parties: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Exact honest-run statistics for every choice pattern of ``parties`` users.

    Returns ``{"MRM": (bell_probs, outcome_probs)}`` where ``outcome_probs``
    is the distribution over the measuring users' joint record (as an
    integer bit string, first user most significant).
    """
    if not 2 <= parties <= MAX_EXACT_PARTIES:
        raise ValueError(f"exact multi-party evolution supports 2..{MAX_EXACT_PARTIES} users")
    n = 2 + parties  # H, travelling qubit, one record qubit per user
    dims = [2] * n
    psi0 = np.kron(qmath.BELL_STATES[Bell.PHI_PLUS], qmath.ket(*([0] * parties)))

    def cnot(control: int, target: int) -> np.ndarray:
        idx = np.arange(2**n)
        bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
        flipped = idx ^ (bits[:, control] << (n - 1 - target))
        return np.eye(2**n)[flipped]

    out = {}
    for pattern in itertools.product((False, True), repeat=parties):
        psi = psi0
        for k, m in enumerate(pattern):
            if m:
                psi = cnot(1, 2 + k) @ psi
        rho = qmath.projector(psi)
        bell = qmath.bell_measure(qmath.partial_trace(rho, dims, keep=[0, 1]))
        kept = [2 + k for k, m in enumerate(pattern) if m]
        if kept:
            rec = np.diag(qmath.partial_trace(rho, dims, keep=kept)).real.copy()
        else:
            rec = np.ones(1)
        out["".join("M" if m else "R" for m in pattern)] = (bell, rec)
    return out
