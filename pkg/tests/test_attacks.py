import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqkd import attacks, qmath
from msqkd.attacks import (
    CollectiveAttack,
    NoiseParameters,
    RoundContext,
    StochasticChannel,
    UntrustedAttack,
)
from msqkd.errors import AttackSpecError, InadmissibleNoiseError
from msqkd.qmath import Bell


def test_noise_parameters_validation():
    assert NoiseParameters.uniform(0.1) == NoiseParameters(0.1, 0.1, 0.1)
    with pytest.raises(InadmissibleNoiseError):
        NoiseParameters(-0.1, 0, 0)
    with pytest.raises(InadmissibleNoiseError):
        NoiseParameters(0, 0, 1.2)
    NoiseParameters(0.6, 0, 0)  # a probability, just not admissible for the bounds
    with pytest.raises(InadmissibleNoiseError):
        NoiseParameters(0.6, 0, 0).check_admissible()
    with pytest.raises(ValueError):
        NoiseParameters(0.1, 0.5, 0).check_admissible()


def test_collective_attack_rejects_non_unitary():
    with pytest.raises(AttackSpecError):
        CollectiveAttack(1, 2 * np.eye(2), np.eye(2))
    with pytest.raises(AttackSpecError):
        CollectiveAttack(2, np.eye(2), np.eye(4))


def test_untrusted_attack_rejects_bad_shapes():
    h = attacks.honest_source()
    with pytest.raises(AttackSpecError):
        UntrustedAttack(2, h.source, h.v1, h.v2[:, :3])
    with pytest.raises(AttackSpecError):
        UntrustedAttack(2, 2 * h.source, h.v1, h.v2)
    with pytest.raises(AttackSpecError):
        UntrustedAttack(2, h.source, h.v1, 2 * h.v2)


def test_attack_arrays_are_read_only():
    a = attacks.identity_attack(2)
    with pytest.raises(ValueError):
        a.u1[0, 0] = 3


def test_constructors_are_deterministic_and_valid():
    for d in (1, 2, 3, 4):
        a, b = attacks.random_collective_attack(d, 9), attacks.random_collective_attack(d, 9)
        assert np.array_equal(a.u1, b.u1)
        u = attacks.random_untrusted_attack(d, 9)
        assert qmath.is_isometry(u.v2)
    assert not np.array_equal(attacks.random_collective_attack(2, 1).u1, attacks.random_collective_attack(2, 2).u1)


def test_entangling_probe_copies_z_value():
    a = attacks.entangling_probe_attack()
    for bit in (0, 1):
        assert np.allclose(a.u1 @ qmath.ket(bit, 0), qmath.ket(bit, bit))


def test_honest_source_isometry():
    h = attacks.honest_source()
    assert qmath.is_isometry(h.v2)
    assert h.ancilla_dim == 2
    assert np.allclose(h.v1, np.eye(4))


def test_perturbed_attacks_reduce_to_honest():
    a = attacks.perturbed_collective_attack(3, 0.0, 1)
    assert np.allclose(a.u1, np.eye(6)) and np.allclose(a.u2, np.eye(6))
    u = attacks.perturbed_untrusted_attack(1, 0.0, 1)
    h = attacks.honest_source()
    assert np.allclose(u.v2, h.v2) and np.allclose(u.source, h.source)


def test_reflect_distribution():
    ch = StochasticChannel(NoiseParameters(0, 0, 0.3), (0.5, 0.25, 0.25))
    assert np.allclose(ch.reflect_distribution, [0.7, 0.15, 0.075, 0.075])
    with pytest.raises(AttackSpecError):
        StochasticChannel(NoiseParameters(0, 0, 0), (0.5, 0.5, 0.5))


def test_noiseless_channel_is_faithful():
    ch = StochasticChannel(NoiseParameters(0, 0, 0))
    rng = np.random.default_rng(0)
    for bit in (0, 1):
        out = attacks.sample_stochastic(ch, RoundContext((True, True, True), bit), rng)
        assert out.outcomes == (bit, bit, bit)
        assert out.announcement in (Bell.PHI_PLUS, Bell.PHI_MINUS)
        out = attacks.sample_stochastic(ch, RoundContext((False, False), bit), rng)
        assert out.announcement is Bell.PHI_PLUS


def test_mixed_rounds_announced_truthfully():
    ch = StochasticChannel(NoiseParameters(0.4, 0.4, 0.4))
    rng = np.random.default_rng(1)
    measured = np.array([[True, False]] * 2000 + [[False, True]] * 2000)
    outcomes, announce, returned = attacks.perturb_block(ch, measured, np.zeros(4000, dtype=np.int8), rng)
    assert np.all(np.isin(announce, [Bell.PHI_PLUS, Bell.PHI_MINUS]))
    assert np.all(returned == 0)


def test_perturb_block_flip_rate():
    ch = StochasticChannel(NoiseParameters(0.2, 0.0, 0.0))
    rng = np.random.default_rng(2)
    n = 200_000
    measured = np.ones((n, 2), dtype=bool)
    outcomes, announce, _ = attacks.perturb_block(ch, measured, rng.integers(0, 2, n), rng)
    rate = np.mean(outcomes[:, 0] != outcomes[:, 1])
    assert abs(rate - 0.2) < 4 * np.sqrt(0.2 * 0.8 / n)
    # with Q_M = 0 the consistency class tracks agreement exactly
    agree = outcomes[:, 0] == outcomes[:, 1]
    assert np.array_equal(agree, announce < 2)


def test_attack_json_roundtrip(tmp_path):
    specs = [
        attacks.random_collective_attack(2, 3),
        attacks.random_untrusted_attack(2, 3),
        StochasticChannel(NoiseParameters(0.1, 0.2, 0.3), (0.2, 0.3, 0.5)),
    ]
    for k, a in enumerate(specs):
        path = tmp_path / f"a{k}.json"
        attacks.save_attack(a, path)
        b = attacks.load_attack(path)
        assert type(b) is type(a)
        if isinstance(a, StochasticChannel):
            assert a == b
        elif isinstance(a, CollectiveAttack):
            assert np.allclose(a.u1, b.u1) and np.allclose(a.u2, b.u2)
        else:
            assert np.allclose(a.source, b.source) and np.allclose(a.v1, b.v1) and np.allclose(a.v2, b.v2)


def test_attack_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(AttackSpecError, match="invalid JSON"):
        attacks.load_attack(bad)
    bad.write_text(json.dumps({"type": "collective", "ancilla_dim": 1, "U1": [[[1, 0], [0, 0]], [[0, 0], [2, 0]]],
                               "U2": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}))
    with pytest.raises(AttackSpecError, match="unitary"):
        attacks.load_attack(bad)
    bad.write_text(json.dumps({"type": "martian"}))
    with pytest.raises(AttackSpecError, match="unknown attack type"):
        attacks.load_attack(bad)
    bad.write_text(json.dumps({"type": "untrusted", "ancilla_dim": 1}))
    with pytest.raises(AttackSpecError, match="missing"):
        attacks.load_attack(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_random_attacks_satisfy_invariants(seed, d):
    a = attacks.random_collective_attack(d, seed)
    assert qmath.is_unitary(a.u1) and qmath.is_unitary(a.u2)
    u = attacks.random_untrusted_attack(d, seed)
    assert qmath.is_unitary(u.v1) and qmath.is_isometry(u.v2)
    assert np.isclose(np.linalg.norm(u.source), 1.0)
