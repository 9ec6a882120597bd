import struct

import numpy as np
import pytest

from pinchnoma.errors import CorruptArtifact, ShapeError
from pinchnoma.model import ChannelState, SystemConfig
from pinchnoma.neural.cnn import forward, init_model
from pinchnoma.neural.data import generate_dataset, read_dataset_csv, write_dataset_csv
from pinchnoma.neural.io import load_model, model_bytes, model_from_bytes, save_model
from pinchnoma.neural.train import infer_allocation, raw_allocation
from pinchnoma.power import maxmin_power

CFG = SystemConfig().replace(antennas=3, users=3)


@pytest.fixture(scope="module")
def optimized():
    return generate_dataset(CFG, n_train=4, n_test=2, placement_mode="optimized", seed=5)


def test_empty_train_split():
    train, test = generate_dataset(CFG, n_train=0, n_test=3, placement_mode="gaussian", seed=1)
    assert len(train) == 0 and len(test) == 3
    assert train.features().shape == (0, 3, 2)


@pytest.mark.parametrize("mode", ["optimized", "fixed", "gaussian"])
def test_label_contract(mode, optimized):
    train, test = optimized if mode == "optimized" else generate_dataset(CFG, 6, 2, mode, seed=2)
    for d in (train, test):
        P = CFG.total_power_w
        assert np.all(d.targets >= 0)
        assert np.all(np.abs(d.targets.sum(axis=1) - P) <= 1e-9 * P)
        for g, q in zip(d.gains, d.targets):
            assert np.array_equal(maxmin_power(ChannelState(g), P, CFG.noise_power_w).q_opt.q, q)


def test_same_seed_same_bits(optimized):
    again = generate_dataset(CFG, n_train=4, n_test=2, placement_mode="optimized", seed=5)
    for a, b in zip(optimized, again):
        assert np.array_equal(a.gains, b.gains) and np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.norm_mean, b.norm_mean)
    other, _ = generate_dataset(CFG, n_train=4, n_test=2, placement_mode="optimized", seed=6)
    assert not np.array_equal(other.gains, optimized[0].gains)


def test_splits_are_independent_streams(optimized):
    train, test = optimized
    assert not np.any(np.isin(test.gains, train.gains))


def test_fractions_sum_to_one_in_rank_order(optimized):
    train, _ = optimized
    f = train.fractions()
    assert f.sum(axis=1) == pytest.approx(np.ones(len(train)))
    pw = np.abs(np.take_along_axis(train.gains, train.orders(), axis=1)) ** 2
    assert np.all(np.diff(pw, axis=1) >= 0)


def test_gaussian_mode_scale():
    train, _ = generate_dataset(CFG.replace(users=4), n_train=3000, n_test=0, placement_mode="gaussian", seed=3)
    var = np.mean(np.abs(train.gains) ** 2)
    assert var == pytest.approx(CFG.eta / CFG.waveguide_height_m**2, rel=0.05)
    assert abs(np.mean(train.gains)) <= 4 * np.sqrt(var / train.gains.size)


def test_unknown_mode():
    with pytest.raises(ValueError):
        generate_dataset(CFG, 1, 1, "uniform")


def test_csv_round_trip(tmp_path, optimized):
    train, _ = optimized
    path = tmp_path / "train.csv"
    write_dataset_csv(path, train)
    back = read_dataset_csv(path)
    assert np.array_equal(back.gains, train.gains)
    assert np.array_equal(back.targets, train.targets)
    assert np.array_equal(back.budgets, train.budgets)
    assert (back.antennas, back.users) == (3, 3)


def test_csv_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ShapeError):
        read_dataset_csv(p)


def _model(K=3, seed=0):
    m = init_model(K, np.random.default_rng(seed))
    m.norm_mean, m.norm_std = np.array([1e-6, -2e-6]), np.array([3e-5, 4e-5])
    return m


def test_model_round_trip_bit_identical(tmp_path, optimized):
    m = _model()
    save_model(tmp_path / "m.pcnn", m)
    back = load_model(tmp_path / "m.pcnn")
    for k in m.params:
        assert np.array_equal(m.params[k], back.params[k])
    assert back.dropout_rate == m.dropout_rate
    for st_ in optimized[1].states():
        assert np.array_equal(raw_allocation(m, st_, 1.0), raw_allocation(back, st_, 1.0))
    assert model_bytes(back) == model_bytes(m)


@pytest.mark.parametrize("corrupt", [
    lambda b: b[:20] + bytes([b[20] ^ 1]) + b[21:],     # flipped payload bit
    lambda b: b"XCNN" + b[4:],                          # magic
    lambda b: b[:-9] + b[-4:],                          # truncated
    lambda b: b"",                                      # empty
])
def test_corrupt_model_rejected(corrupt):
    with pytest.raises(CorruptArtifact):
        model_from_bytes(corrupt(model_bytes(_model())))


def test_version_and_shape_checks():
    import zlib
    b = bytearray(model_bytes(_model())[:-4])
    b[4:6] = struct.pack("<H", 2)
    with pytest.raises(CorruptArtifact, match="version"):
        model_from_bytes(bytes(b) + struct.pack("<I", zlib.crc32(bytes(b))))
    b = bytearray(model_bytes(_model())[:-4])
    b[6:8] = struct.pack("<H", 4)
    with pytest.raises(CorruptArtifact):
        model_from_bytes(bytes(b) + struct.pack("<I", zlib.crc32(bytes(b))))


def test_inference_projects_and_maps_back(optimized):
    m = _model()
    for st_ in optimized[1].states():
        q = infer_allocation(m, st_, 2.0).q
        assert np.all(q >= 0) and q.sum() <= 2.0 * (1 + 1e-12)
        raw = raw_allocation(m, st_, 2.0)
        frac = forward(m, m.standardize(np.column_stack([st_.gains.real, st_.gains.imag])[st_.sic_order]))
        assert np.array_equal(raw[st_.sic_order], frac * 2.0)


def test_inference_k_mismatch():
    with pytest.raises(ShapeError):
        raw_allocation(_model(K=3), ChannelState([1.0, 2.0]), 1.0)
