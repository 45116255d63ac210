import numpy as np
import pytest

from bitrans.anchors import (DeltaBank, EmptyAnchorSetError, RhoPolicy,
                             anchor_distances, bank_distance, select_anchors)


def test_bank_contains_all_pairwise_differences():
    xs = np.array([[0.0], [1.0], [2.0]])
    bank = DeltaBank.build(xs)
    got = set(bank.deltas.ravel().tolist())
    assert {-2.0, -1.0, 0.0, 1.0, 2.0} <= got


def test_bank_repeated_point_gives_zero():
    bank = DeltaBank.build(np.array([[5.0], [5.0]]))
    assert set(bank.deltas.ravel().tolist()) == {0.0}


def test_bank_cap_and_determinism():
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, 1, (30, 2))
    b1 = DeltaBank.build(xs, cap=50, seed=4)
    b2 = DeltaBank.build(xs, cap=50, seed=4)
    assert len(b1) == 50
    assert np.array_equal(b1.deltas, b2.deltas)
    assert np.any(np.all(b1.deltas == 0.0, axis=1))


def test_bank_needs_two_points():
    with pytest.raises(ValueError):
        DeltaBank.build(np.array([[1.0]]))


def test_bank_distance_examples():
    bank = DeltaBank(np.array([[0.0, 0.0]]))
    assert bank_distance(bank, np.array([3.0, 4.0])) == 5.0
    rng = np.random.default_rng(1)
    bank = DeltaBank(rng.standard_normal((40, 3)))
    for _ in range(20):
        v = rng.standard_normal(3)
        brute = min(np.linalg.norm(v - d) for d in bank.deltas)
        assert np.isclose(bank.distance(v), brute, atol=1e-12)
    assert bank.distance(bank.deltas[7]) == 0.0


def test_rho_policy_validation():
    with pytest.raises(ValueError):
        RhoPolicy.fixed(-1.0)
    with pytest.raises(ValueError):
        RhoPolicy.percentile(0.0)
    with pytest.raises(ValueError):
        RhoPolicy("bogus")


def test_select_anchors_training_point_included():
    rng = np.random.default_rng(2)
    xs = rng.uniform(0, 1, (15, 2))
    bank = DeltaBank.build(xs)
    for policy in (RhoPolicy.nearest(), RhoPolicy.fixed(0.0),
                   RhoPolicy.percentile(50)):
        idx, rho = select_anchors(xs[4], xs, bank, policy)
        dists = anchor_distances(xs[4], xs, bank)
        assert dists[4] == 0.0
        assert 4 in idx


def test_select_anchors_fixed_rho_enumeration():
    xs = np.array([[0.0], [1.0], [2.0]])
    bank = DeltaBank.build(xs)
    idx, rho = select_anchors(np.array([3.0]), xs, bank, RhoPolicy.fixed(0.0))
    assert rho == 0.0
    assert set(idx.tolist()) == {1, 2}


def test_select_anchors_fixed_rho_empty_raises():
    xs = np.array([[0.0], [1.0]])
    bank = DeltaBank.build(xs)
    with pytest.raises(EmptyAnchorSetError):
        select_anchors(np.array([100.0]), xs, bank, RhoPolicy.fixed(0.5))


def test_select_anchors_percentile_size():
    rng = np.random.default_rng(3)
    xs = rng.uniform(0, 1, (100, 1))
    bank = DeltaBank.build(xs, cap=500, seed=0)
    idx, _ = select_anchors(np.array([1.7]), xs, bank, RhoPolicy.percentile(10))
    assert idx.size >= 10


def test_select_anchors_matches_brute_force_double_loop():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(5, 20))
        d = int(rng.integers(1, 4))
        xs = rng.uniform(-1, 1, (n, d))
        bank = DeltaBank.build(xs)
        x_test = rng.uniform(-2, 2, d)
        idx, rho = select_anchors(x_test, xs, bank, RhoPolicy.nearest())
        dists = np.array([min(np.sqrt(np.sum((x_test - xi - dl) ** 2))
                              for dl in bank.deltas) for xi in xs])
        brute = np.flatnonzero(dists <= dists.min())
        assert set(idx.tolist()) == set(brute.tolist())


def test_bank_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    bank = DeltaBank(rng.standard_normal((12, 2)))
    path = tmp_path / "bank.csv"
    bank.save_csv(path)
    back = DeltaBank.load_csv(path)
    assert np.array_equal(bank.deltas, back.deltas)
