import itertools

import numpy as np
import pytest

from emulator import sample_rounds
from msqkd import attacks, exact, qmath
from msqkd.errors import AttackSpecError


def test_identity_attack_noiseless_table():
    for d in (1, 2, 3):
        s = exact.exact_statistics_semi_honest(attacks.identity_attack(d))
        expected = np.zeros((4, 2, 2))
        expected[0] = expected[1] = np.eye(2) / 4
        assert np.allclose(s.announcement_table, expected, atol=1e-12)
        assert np.allclose(s.reflect_bell, [1, 0, 0, 0], atol=1e-12)


def test_honest_source_matches_identity_attack():
    u = exact.exact_statistics_untrusted(attacks.honest_source())
    c = exact.exact_statistics_semi_honest(attacks.identity_attack())
    assert np.allclose(u.announcement_table, c.announcement_table, atol=1e-12)
    assert np.allclose(u.reflect_bell, c.reflect_bell, atol=1e-12)


def test_flipping_v1_moves_all_mass_to_psi():
    h = attacks.honest_source()
    flip = np.kron(np.array([[0, 1], [1, 0]]), np.eye(2))
    s = exact.exact_statistics_untrusted(attacks.UntrustedAttack(2, h.source, flip, h.v2))
    t = s.announcement_table
    assert np.allclose(t[:2], 0, atol=1e-12)
    assert np.allclose(t[2:].sum(axis=0), [[0, 0.5], [0.5, 0]])
    assert s.noise.q == pytest.approx(1.0) and s.noise.qm == pytest.approx(0.0)


def test_entangling_probe_tables():
    s = exact.exact_statistics_semi_honest(attacks.entangling_probe_attack())
    assert np.allclose(s.reflect_bell, [0.5, 0.5, 0, 0], atol=1e-12)
    # Z-basis copying is invisible to measuring users
    assert np.allclose(s.pair_table, np.eye(2) / 2, atol=1e-12)
    assert np.allclose(s.p_c, np.eye(2), atol=1e-12)
    assert s.noise.q == pytest.approx(0) and s.noise.qm == pytest.approx(0) and s.noise.qr == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(6))
def test_tables_are_probability_distributions(seed):
    for d in (1, 2, 4):
        for s in (
            exact.exact_statistics_semi_honest(attacks.random_collective_attack(d, seed)),
            exact.exact_statistics_untrusted(attacks.random_untrusted_attack(d, seed)),
        ):
            assert np.isclose(s.announcement_table.sum(), 1.0, atol=1e-10)
            assert np.isclose(s.reflect_bell.sum(), 1.0, atol=1e-10)
            assert s.announcement_table.min() >= 0


def test_semi_honest_tables_match_branch_vectors():
    a = attacks.random_collective_attack(3, 17)
    e = exact.semi_honest_branch_vectors(a)
    s = exact.exact_statistics_semi_honest(a)
    # Alice holds k // 2, Bob measured k % 2; j is the value returned to TP
    norms = np.zeros((2, 2))
    for (j, i, k), v in e.items():
        assert i == k % 2
        norms[k // 2, i] += np.vdot(v, v).real
    assert np.allclose(norms / 2, s.pair_table, atol=1e-12)


def test_untrusted_branch_vectors_reproduce_tables():
    u = attacks.random_untrusted_attack(2, 4)
    g = exact.untrusted_branch_vectors(u)
    s = exact.exact_statistics_untrusted(u)
    for m, i, j in itertools.product(range(4), (0, 1), (0, 1)):
        assert np.isclose(np.vdot(g[m, i, j], g[m, i, j]).real, s.announcement_table[m, i, j], atol=1e-12)


def test_exact_rates_for_honest_behaviour():
    assert np.isclose(exact.exact_key_rate_semi_honest(attacks.identity_attack(2)), 1.0, atol=1e-12)
    assert np.isclose(exact.exact_key_rate_untrusted(attacks.honest_source()), 1.0, atol=1e-12)


def test_entangling_probe_leaks_everything():
    # the probe holds a perfect copy of Alice's value: S(A|T) = 0, H(A|B) = 0
    assert np.isclose(exact.exact_key_rate_semi_honest(attacks.entangling_probe_attack()), 0.0, atol=1e-12)


def test_untrusted_rejects_wrong_type():
    with pytest.raises(AttackSpecError):
        exact.exact_statistics_untrusted(attacks.identity_attack())
    with pytest.raises(AttackSpecError):
        exact.exact_statistics_semi_honest(attacks.honest_source())


@pytest.mark.parametrize("d,seed", [(1, 0), (2, 1), (3, 2)])
def test_sampling_emulator_agrees_with_exact_tables(d, seed):
    a = attacks.random_collective_attack(d, seed)
    s = exact.exact_statistics_semi_honest(a)
    mm, rr = sample_rounds(a.u1, a.u2, d, 24_000, seed=100 + seed)
    n_mm, n_rr = mm.sum(), rr.sum()
    expected = s.announcement_table.ravel() * n_mm
    observed = mm.ravel()
    keep = expected > 5
    chi2 = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
    # 16 cells at most: the 0.9999 quantile of chi-square(15) is about 44
    assert chi2 < 44
    z = (rr - s.reflect_bell * n_rr) / np.sqrt(np.maximum(s.reflect_bell * (1 - s.reflect_bell) * n_rr, 1e-12))
    assert np.all(np.abs(z[s.reflect_bell > 1e-3]) < 4)
    assert np.all(rr[s.reflect_bell < 1e-12] == 0)


def test_multiparty_noiseless_evolution():
    for parties in (2, 3, 4):
        out = exact.exact_multiparty_noiseless(parties)
        assert len(out) == 2**parties
        for pattern, (bell, rec) in out.items():
            assert np.isclose(bell.sum(), 1.0)
            if "M" not in pattern:
                assert np.allclose(bell, [1, 0, 0, 0])
            else:
                assert np.allclose(bell, [0.5, 0.5, 0, 0])
                # every measuring user records the same value
                k = pattern.count("M")
                assert np.allclose(rec[[0, 2**k - 1]], [0.5, 0.5])
    with pytest.raises(ValueError):
        exact.exact_multiparty_noiseless(exact.MAX_EXACT_PARTIES + 1)


def test_channel_statistics_two_party_cells():
    ch = attacks.StochasticChannel(attacks.NoiseParameters(0.1, 0.2, 0.3))
    s = exact.channel_statistics(ch)
    assert np.allclose(s.p_c, [[0.9 * 0.8, 0.1 * 0.2], [0.1 * 0.2, 0.9 * 0.8]])
    assert np.isclose(s.noise.q, 0.1) and np.isclose(s.noise.qm, 0.2) and np.isclose(s.noise.qr, 0.3)
    assert qmath.Bell(int(np.argmax(s.reflect_bell))) is qmath.Bell.PHI_PLUS
