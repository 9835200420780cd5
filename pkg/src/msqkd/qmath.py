"""Small-register quantum state algebra and entropy functions.

Matrices and state vectors are plain ``numpy`` complex arrays. Registers are
ordered left to right in tensor products, so ``tensor(a, b)`` puts ``a`` on
the most significant index.

All entropies are in bits.
"""

from __future__ import annotations

import math
from enum import IntEnum
from functools import reduce
from typing import Sequence

import numpy as np

#: Hermiticity / normalisation tolerance for freshly constructed objects.
CONSTRUCTION_TOL = 1e-12
#: Tolerance after long evolution chains (products of several unitaries).
EVOLVED_TOL = 1e-10
#: Outcomes with smaller probability have no post-measurement state.
ABSENT_PROB = 1e-15
#: Eigenvalues within this distance outside [0, 1] are clamped silently.
EIGEN_CLAMP = 1e-10


class Bell(IntEnum):
    """Bell-basis outcomes, indexed as the announcement register ``m``."""

    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3

    @property
    def label(self) -> str:
        return ("phi+", "phi-", "psi+", "psi-")[self]

    @property
    def consistent(self) -> bool:
        """True for phi+/phi-, the announcements accepted for key generation."""
        return self in (Bell.PHI_PLUS, Bell.PHI_MINUS)

    @classmethod
    def from_label(cls, label: str) -> "Bell":
        return cls(("phi+", "phi-", "psi+", "psi-").index(label))


_S = 1 / math.sqrt(2)
#: Rows are |phi+>, |phi->, |psi+>, |psi->, in the basis |00>, |01>, |10>, |11>.
BELL_STATES = np.array(
    [
        [_S, 0, 0, _S],
        [_S, 0, 0, -_S],
        [0, _S, _S, 0],
        [0, _S, -_S, 0],
    ],
    dtype=complex,
)


def ket(*bits: int) -> np.ndarray:
    """Computational basis vector for a string of qubit values."""
    index = 0
    for b in bits:
        index = 2 * index + int(b)
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[index] = 1.0
    return v


def basis(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (or two vectors)."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor(*ops: np.ndarray) -> np.ndarray:
    return reduce(tensor_product, ops)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).conj().T


def is_hermitian(m: np.ndarray, tol: float = CONSTRUCTION_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, atol=tol, rtol=0)


def is_isometry(m: np.ndarray, tol: float = EVOLVED_TOL) -> bool:
    """True when the columns of ``m`` are orthonormal (``m^dagger m = I``)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        return False
    return np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=tol, rtol=0)


def is_unitary(m: np.ndarray, tol: float = EVOLVED_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and is_isometry(m, tol)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def near_identity_unitary(dim: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """``exp(i strength H)`` for a random Hermitian ``H`` with Gaussian entries."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * np.exp(1j * strength * w)) @ v.conj().T


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return projector(state) if state.ndim == 1 else state


def _check_dims(dim: int, subsystem_dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in subsystem_dims]
    if any(d < 1 for d in dims) or math.prod(dims) != dim:
        raise ValueError(f"subsystem dims {dims} do not factor dimension {dim}")
    return dims


def partial_trace(rho: np.ndarray, subsystem_dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density operator on the subsystems listed in ``keep``.

    Kept subsystems appear in ascending index order in the result.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho must be a square matrix")
    dims = _check_dims(rho.shape[0], subsystem_dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} subsystems")

    t = rho.reshape(dims + dims)
    # trace from the highest index down so remaining axis numbers stay valid
    for k in reversed(range(n)):
        if k in keep:
            continue
        cur = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + cur)
    kept = math.prod(dims[k] for k in keep)
    return t.reshape(kept, kept)


def _check_density(rho: np.ndarray, tol: float) -> None:
    if not is_hermitian(rho, tol):
        raise ValueError("density operator is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"density operator has trace {tr.real:.3g}, expected 1")


def bell_measure(rho: np.ndarray, tol: float = EVOLVED_TOL) -> np.ndarray:
    """Outcome probabilities of a Bell-basis measurement on two qubits.

    Returns the distribution over (phi+, phi-, psi+, psi-).
    """
    rho = _as_density(rho)
    if rho.shape != (4, 4):
        raise ValueError("bell_measure expects a two-qubit (4x4) operator")
    _check_density(rho, tol)
    probs = np.einsum("ki,ij,kj->k", BELL_STATES.conj(), rho, BELL_STATES).real
    return np.clip(probs, 0.0, None)


def z_measure(
    state: np.ndarray,
    qubit: int,
    subsystem_dims: Sequence[int] | None = None,
) -> tuple[np.ndarray, list[np.ndarray | None]]:
    """Computational-basis measurement of one qubit of a register.

    ``state`` may be a density matrix or a (possibly sub-normalised) state
    vector; post-measurement states come back in the same form, renormalised.
    Outcomes with probability below ``ABSENT_PROB`` get ``None``.
    """
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    if subsystem_dims is None:
        n = int(round(math.log2(dim)))
        subsystem_dims = [2] * n
    dims = _check_dims(dim, subsystem_dims)
    if not 0 <= qubit < len(dims) or dims[qubit] != 2:
        raise ValueError(f"subsystem {qubit} is not a qubit of register {dims}")

    before = math.prod(dims[:qubit])
    after = math.prod(dims[qubit + 1 :])
    probs = np.zeros(2)
    posts: list[np.ndarray | None] = []
    for b in (0, 1):
        mask = np.zeros((before, 2, after), dtype=bool)
        mask[:, b, :] = True
        mask = mask.ravel()
        if state.ndim == 1:
            branch = np.where(mask, state, 0)
            p = float(np.vdot(branch, branch).real)
            probs[b] = p
            posts.append(branch / math.sqrt(p) if p >= ABSENT_PROB else None)
        else:
            branch = state * np.outer(mask, mask)
            p = float(np.trace(branch).real)
            probs[b] = p
            posts.append(branch / p if p >= ABSENT_PROB else None)
    return probs, posts


def shannon_entropy(p: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise ValueError("probabilities must be nonnegative")
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def eigvalsh(m: np.ndarray) -> np.ndarray:
    if not is_hermitian(m, EVOLVED_TOL):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(np.asarray(m, dtype=complex))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy S(rho) in bits."""
    w = eigvalsh(rho)
    if np.any(w < -EIGEN_CLAMP) or np.any(w > 1 + EIGEN_CLAMP):
        raise ValueError("spectrum outside [0, 1]; not a density operator")
    return shannon_entropy(np.clip(w, 0.0, 1.0))


def eig2_hermitian(m: np.ndarray) -> tuple[float, float]:
    """Closed-form eigenvalues of a 2x2 Hermitian matrix, largest first."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("eig2_hermitian expects a 2x2 matrix")
    if not is_hermitian(m, CONSTRUCTION_TOL):
        raise ValueError("matrix is not Hermitian")
    a, d = m[0, 0].real, m[1, 1].real
    half_trace = (a + d) / 2
    radius = math.hypot((a - d) / 2, abs(m[0, 1]))
    return half_trace + radius, half_trace - radius
