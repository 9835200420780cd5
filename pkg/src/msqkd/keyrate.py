"""Asymptotic key-rate lower bounds and noise thresholds.

Two adversary scenarios are covered:

``semi-honest``
    TP prepares honest Bell pairs and attacks with collective unitaries.
    ``S(A|T)`` is bounded through an auxiliary consistency flag and the
    2x2 operator ``sigma_1``, whose off-diagonal overlap is bounded below
    from the all-reflect error rate.

``untrusted``
    TP may prepare anything and announce anything. ``S(A|T)`` is bounded
    with :func:`pairwise_entropy_bound`, with the
    ancilla overlaps bounded from the all-reflect announcement statistics.

Rates are returned unclamped (negative values mean no key) so that root
finding sees the sign change.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Literal, Sequence, Union

import numpy as np

from .attacks import NoiseParameters
from .errors import DegenerateStatisticsError, NoSignChangeError
from .protocol import SiftedStatistics
from .qmath import binary_entropy, eig2_hermitian, shannon_entropy


class Scenario(str, Enum):
    SEMI_HONEST = "semi-honest"
    UNTRUSTED = "untrusted"


Source = Union[NoiseParameters, SiftedStatistics]
MismatchPolicy = Literal["cauchy-schwarz", "zero"]

#: bisection bracket for thresholds; stays inside the admissible region
THRESHOLD_BRACKET = (0.0, 0.25)


def conditional_entropy_ab(p: np.ndarray | Sequence[Sequence[float]]) -> float:
    """H(A|B) = H(A,B) - H(B) for a 2x2 joint table ``p[a][b]``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (2, 2):
        raise ValueError("expected a 2x2 joint distribution")
    if np.any(p < -1e-12):
        raise ValueError("joint distribution has negative entries")
    if abs(p.sum() - 1) > 1e-10:
        raise ValueError(f"joint distribution sums to {p.sum():.12g}, expected 1")
    return max(0.0, shannon_entropy(p) - shannon_entropy(p.sum(axis=0)))


# -- semi-honest TP ------------------------------------------------------------


@dataclass
class SemiHonestIntermediates:
    p: np.ndarray
    H_A_given_B: float
    xi1: float
    xi2: float
    overlap_raw: float
    overlap_lower: float
    lambda_plus: float
    lambda_minus: float
    S_sigma1: float
    rate: float
    normalization: float
    clamps: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "H_A_given_B", "xi1", "xi2", "overlap_raw", "overlap_lower",
            "lambda_plus", "lambda_minus", "S_sigma1", "rate", "normalization")}
        d["p"] = self.p.tolist()
        d["clamps"] = list(self.clamps)
        return d


def _reflect(stats: SiftedStatistics) -> np.ndarray:
    reflect = np.asarray(stats.reflect_bell, dtype=float)
    if not reflect.sum() > 0:
        raise DegenerateStatisticsError("no all-reflect rounds; Q_R cannot be estimated")
    return reflect


def _semi_honest_tables(source: Source) -> tuple[np.ndarray, float]:
    """(p_c conditional table, Q_R) from either input form."""
    if isinstance(source, NoiseParameters):
        source.check_admissible()
        q, qm = source.q, source.qm
        same = (1 - q) * (1 - qm)
        diff = q * qm
        return np.array([[same, diff], [diff, same]]), source.qr
    reflect = _reflect(source)
    return np.asarray(source.p_c, dtype=float), float(1 - reflect[0] / reflect.sum())


def semi_honest_overlap_raw(p_c: np.ndarray, qr: float) -> float:
    """Unclamped lower bound on Re<E^0_{0,0}|E^1_{1,3}> from the reflect error rate."""
    e00, e01 = p_c[0]
    e10, e11 = p_c[1]
    r = math.sqrt
    return (
        2
        - 2 * qr
        - (r(e00 * e10) + r(e01 * e11) + r(e01 * e10))
        - 0.5 * (r(e00) + r(e01)) ** 2
        - 0.5 * (r(e10) + r(e11)) ** 2
    )


def semi_honest_overlap_bound(stats: Source) -> float:
    """Overlap lower bound, clamped to ``[0, sqrt(p_c00 p_c11)]``."""
    p_c, qr = _semi_honest_tables(stats)
    raw = semi_honest_overlap_raw(p_c, qr)
    return min(max(raw, 0.0), math.sqrt(p_c[0, 0] * p_c[1, 1]))


def semi_honest_key_rate(source: Source) -> SemiHonestIntermediates:
    """Lower bound on S(A|T) - H(A|B) for a semi-honest TP."""
    p_c, qr = _semi_honest_tables(source)
    e00, e11 = p_c[0, 0], p_c[1, 1]
    n = float(p_c.sum())
    if n <= 0 or e00 + e11 <= 0:
        raise DegenerateStatisticsError("no accepted matched-key mass")
    p = p_c / n
    clamps = []

    raw = semi_honest_overlap_raw(p_c, qr)
    overlap = raw
    if overlap < 0:
        overlap = 0.0
        clamps.append("overlap<0")
    cap = math.sqrt(e00 * e11)
    if overlap > cap:
        overlap = cap
        clamps.append("overlap>cauchy-schwarz")

    # sigma_1 in the Gram form: diag entries are the branch norms, off-diagonal the overlap
    sigma1 = np.array([[e00, overlap], [overlap, e11]]) / (e00 + e11)
    lam_p, lam_m = eig2_hermitian(sigma1)
    s_sigma1 = shannon_entropy([max(lam_p, 0.0), max(lam_m, 0.0)])

    xi1 = float(p[0, 0] + p[1, 1])
    xi2 = float(p[0, 1] + p[1, 0])
    h_b = shannon_entropy([p[0, 0] + p[1, 0], p[0, 1] + p[1, 1]])
    rate = float(h_b - xi2 - xi1 * s_sigma1 - shannon_entropy([xi1, xi2]))
    return SemiHonestIntermediates(
        p=p,
        H_A_given_B=conditional_entropy_ab(p),
        xi1=xi1,
        xi2=xi2,
        overlap_raw=raw,
        overlap_lower=overlap,
        lambda_plus=float(lam_p),
        lambda_minus=float(lam_m),
        S_sigma1=s_sigma1,
        rate=rate,
        normalization=n,
        clamps=clamps,
    )


# -- untrusted TP --------------------------------------------------------------


def _lambda(e: float, f: float, re: float) -> float:
    return 0.5 + math.sqrt((e - f) ** 2 + 4 * re * re) / (2 * (e + f))


def pairwise_entropy_bound(pairs: Iterable[tuple[float, float, float]], n: float) -> float:
    """Lower bound on S(A|T) for a state pairing ancilla vectors E_i (A=0) with F_i (A=1).

    Each pair is ``(<E|E>, <F|F>, Re<E|F>)`` and ``n`` the total mass.
    """
    pairs = [tuple(map(float, pr)) for pr in pairs]
    total = sum(e + f for e, f, _ in pairs)
    if n <= 0 or abs(total - n) > 1e-10 * max(1.0, n):
        raise ValueError(f"normalisation {n} does not match total pair mass {total}")
    bound = 0.0
    for e, f, re in pairs:
        if e < 0 or f < 0:
            raise ValueError("vector norms must be nonnegative")
        if abs(re) > math.sqrt(e * f) * (1 + 1e-12) + 1e-15:
            raise ValueError(f"|Re<E|F>| = {abs(re):.6g} violates Cauchy-Schwarz bound {math.sqrt(e * f):.6g}")
        s = e + f
        if s <= 0:
            continue
        lam = min(_lambda(e, f, re), 1.0)
        bound += (s / n) * (binary_entropy(e / s) - binary_entropy(lam))
    return bound


@dataclass
class UntrustedIntermediates:
    g_norms: np.ndarray
    q: np.ndarray
    overlap_match: list[float]
    overlap_mismatch: list[float]
    overlap_raw: list[float]
    lam: np.ndarray
    S_A_given_T: float
    H_A_given_B: float
    rate: float
    N_prime: float
    reflect: np.ndarray
    mismatch_policy: str
    clamps: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "g_norms": self.g_norms.tolist(),
            "q": self.q.tolist(),
            "overlap_match": list(self.overlap_match),
            "overlap_mismatch": list(self.overlap_mismatch),
            "overlap_raw": list(self.overlap_raw),
            "lambda": self.lam.tolist(),
            "S_A_given_T": self.S_A_given_T,
            "H_A_given_B": self.H_A_given_B,
            "rate": self.rate,
            "N_prime": self.N_prime,
            "mismatch_policy": self.mismatch_policy,
            "clamps": list(self.clamps),
        }


def _untrusted_tables(source: Source) -> tuple[np.ndarray, np.ndarray]:
    """Announcement-resolved norm tables ``g[m, i, j]`` for m in {0, 1} and
    the reflect-branch probability each ``m`` is compared with.

    From noise parameters the per-user-conditional tables are used, and the
    phi- error share ``Q_R / 3`` serves both announcements. From measured
    statistics the joint probabilities and the observed announcement
    frequencies are used.
    """
    if isinstance(source, NoiseParameters):
        source.check_admissible()
        q, qm, qr = source.q, source.qm, source.qr
        same = 0.5 * (1 - q) * (1 - qm)
        diff = 0.5 * q * qm
        g = np.array([[[same, diff], [diff, same]]] * 2)
        return g, np.array([qr / 3, qr / 3])
    t = source.announcement_table
    if t is None:
        raise DegenerateStatisticsError("statistics carry no Bell-announcement table")
    reflect = _reflect(source)
    return np.asarray(t[:2], dtype=float), reflect[:2] / reflect.sum()


def untrusted_overlap_raw(g: np.ndarray, p_reflect: float) -> float:
    """Unclamped lower bound on |Re<g_{0,0}|g_{1,1}>| for one announcement."""
    g00, g01 = g[0]
    g10, g11 = g[1]
    r = math.sqrt
    return (
        abs(0.5 * p_reflect - 0.5 * float(g.sum()))
        - r(g00 * g01)
        - r(g00 * g10)
        - r(g11 * g10)
        - r(g01 * g11)
        - r(g01 * g10)
    )


def untrusted_overlap_bound(
    stats: Source,
    m: int,
    mismatch_policy: MismatchPolicy = "cauchy-schwarz",
) -> tuple[float, float]:
    """(match, mismatch) overlap values for announcement ``m``.

    ``match`` bounds Re<g^m_{0,0}|g^m_{1,1}> from below and is clamped to
    ``[0, sqrt(g00 g11)]``. ``mismatch`` is set to its Cauchy-Schwarz
    maximum ``sqrt(g01 g10)`` by default, or to 0 with ``"zero"``.
    """
    g, p_ref = _untrusted_tables(stats)
    return _overlaps(g[m], p_ref[m], mismatch_policy)[:2]


def _overlaps(g: np.ndarray, p_ref: float, policy: MismatchPolicy) -> tuple[float, float, float]:
    raw = untrusted_overlap_raw(g, p_ref)
    match = min(max(raw, 0.0), math.sqrt(g[0, 0] * g[1, 1]))
    if policy == "cauchy-schwarz":
        mismatch = math.sqrt(g[0, 1] * g[1, 0])
    elif policy == "zero":
        mismatch = 0.0
    else:
        raise ValueError(f"unknown mismatch policy {policy!r}")
    return match, mismatch, raw


def untrusted_key_rate(
    source: Source,
    mismatch_policy: MismatchPolicy | None = None,
) -> UntrustedIntermediates:
    """Lower bound on S(A|T) - H(A|B) for an untrusted TP.

    ``mismatch_policy`` controls Re<g^m_{0,1}|g^m_{1,0}>. ``None`` picks
    ``"cauchy-schwarz"`` for noise parameters (the closed-form evaluation) and
    ``"zero"`` for statistics; only the latter is a valid worst case for
    arbitrary adversaries.
    """
    if mismatch_policy is None:
        mismatch_policy = "cauchy-schwarz" if isinstance(source, NoiseParameters) else "zero"
    g, p_ref = _untrusted_tables(source)
    n_prime = float(g.sum())
    if n_prime <= 0:
        raise DegenerateStatisticsError("no phi+/phi- announcements in all-measure rounds")

    clamps: list[str] = []
    matches, mismatches, raws = [], [], []
    pairs = []
    lam = np.zeros((2, 2))
    for m in (0, 1):
        match, mismatch, raw = _overlaps(g[m], p_ref[m], mismatch_policy)
        if raw < 0:
            clamps.append(f"m={m}: overlap<0")
        elif raw > match:
            clamps.append(f"m={m}: overlap>cauchy-schwarz")
        matches.append(match)
        mismatches.append(mismatch)
        raws.append(raw)
        # pair Alice-0 vectors g_{0,j} with Alice-1 vectors g_{1,1-j}
        for j, re in ((0, match), (1, mismatch)):
            e, f = g[m, 0, j], g[m, 1, 1 - j]
            pairs.append((e, f, re))
            lam[j, m] = min(_lambda(e, f, re), 1.0) if e + f > 0 else 1.0

    s_at = pairwise_entropy_bound(pairs, n_prime)
    q = (g[0] + g[1]) / n_prime
    h_ab = conditional_entropy_ab(q)
    return UntrustedIntermediates(
        g_norms=g,
        q=q,
        overlap_match=matches,
        overlap_mismatch=mismatches,
        overlap_raw=raws,
        lam=lam,
        S_A_given_T=s_at,
        H_A_given_B=h_ab,
        rate=s_at - h_ab,
        N_prime=n_prime,
        reflect=p_ref,
        mismatch_policy=mismatch_policy,
        clamps=clamps,
    )


# -- evaluation helpers --------------------------------------------------------


def key_rate(scenario: Scenario | str, source: Source) -> float:
    scenario = Scenario(scenario)
    if scenario is Scenario.SEMI_HONEST:
        return semi_honest_key_rate(source).rate
    return untrusted_key_rate(source).rate


def rate_at(scenario: Scenario | str, q: float) -> float:
    """Key rate with Q = Q_M = Q_R = q."""
    return key_rate(scenario, NoiseParameters.uniform(q))


@dataclass
class ThresholdResult:
    scenario: str
    threshold_Q: float
    bracket: tuple[float, float]
    iterations: int


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> tuple[float, tuple[float, float], int]:
    """Bisection on a sign change; returns (root, final bracket, iterations)."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo, (lo, lo), 0
    if f_hi == 0:
        return hi, (hi, hi), 0
    if (f_lo > 0) == (f_hi > 0):
        raise NoSignChangeError(f"no sign change on [{lo}, {hi}]: f={f_lo:.6g}, {f_hi:.6g}")
    it = 0
    while hi - lo >= tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        it += 1
        if f_mid == 0:
            return mid, (mid, mid), it
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi), it


def noise_threshold(scenario: Scenario | str, tolerance: float = 1e-6) -> ThresholdResult:
    """Largest Q (with Q = Q_M = Q_R) at which the rate bound stays positive."""
    scenario = Scenario(scenario)
    root, bracket, it = bisect_root(lambda q: rate_at(scenario, q), *THRESHOLD_BRACKET, tol=tolerance)
    return ThresholdResult(scenario.value, root, bracket, it)


@dataclass
class SweepCurve:
    scenario: str
    points: list[tuple[float, float]]
    #: grid indices below the first root where the rate increased
    monotonicity_violations: list[int] = field(default_factory=list)


def sweep(scenario: Scenario | str, q_lo: float, q_hi: float, steps: int) -> SweepCurve:
    """Rate on a uniform grid of Q = Q_M = Q_R."""
    scenario = Scenario(scenario)
    if not (0.0 <= q_lo < q_hi <= 0.5):
        raise ValueError("need 0 <= q_lo < q_hi <= 0.5")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    grid = np.linspace(q_lo, q_hi, steps)
    # the admissibility check rejects exactly 0.5
    points = [(float(q), rate_at(scenario, min(float(q), 0.5 - 1e-12))) for q in grid]
    violations = []
    for k in range(1, len(points)):
        if points[k - 1][1] <= 0:
            break
        if points[k][1] > points[k - 1][1] + 1e-12:
            violations.append(k)
    if violations:
        warnings.warn(f"{scenario.value} rate not monotone at grid points {violations}", RuntimeWarning, stacklevel=2)
    return SweepCurve(scenario.value, points, violations)
