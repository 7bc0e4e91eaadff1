import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mnist_train_path, requires_mnist
from gsnade.data import (BINARY, CONTINUOUS, DataFormatError, Dataset,
                         MinibatchPlan, binarize, gen_spiral, idx_image_shape,
                         load_mnist_idx, load_spiral_csv, next_minibatch,
                         save_mnist_idx, save_spiral_csv)


class TestGenSpiral:
    def test_empty(self):
        ds = gen_spiral(0, 0.1, 7)
        assert ds.n_examples == 0
        assert ds.n_dims == 2
        assert ds.kind == CONTINUOUS

    def test_noiseless_points_lie_on_curve(self):
        ds = gen_spiral(1000, 0.0, 7)
        radii = np.linalg.norm(ds.examples, axis=1)
        t = radii / 0.04
        assert np.all(t >= 3.0 - 1e-9) and np.all(t <= 12.0 + 1e-9)
        expected = np.column_stack([0.04 * t * np.sin(t), 0.04 * t * np.cos(t)])
        assert np.max(np.abs(ds.examples - expected)) < 1e-12

    def test_mean_radius_matches_analytic(self):
        # E||p|| ~= E[0.04 * U(3, 12)] = 0.3; Monte Carlo at n=1e5
        ds = gen_spiral(100_000, 0.02, 7)
        mean_r = np.linalg.norm(ds.examples, axis=1).mean()
        assert abs(mean_r - 0.3) < 0.01

    def test_orthogonal_residual_std_matches_jitter(self):
        # signed distance to a dense polyline of the curve is the orthogonal
        # jitter component; its std must be within 5% of the requested sigma
        from scipy.spatial import cKDTree

        sigma = 0.02
        ds = gen_spiral(100_000, sigma, 3)
        t = np.linspace(3.0, 12.0, 300_001)
        curve = np.column_stack([0.04 * t * np.sin(t), 0.04 * t * np.cos(t)])
        tree = cKDTree(curve)
        dist, idx = tree.query(ds.examples, workers=-1)
        # sign via the cross product with the local tangent
        tangent = np.gradient(curve, axis=0)
        tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
        v = ds.examples - curve[idx]
        signed = tangent[idx, 0] * v[:, 1] - tangent[idx, 1] * v[:, 0]
        assert abs(np.std(signed) - sigma) < 0.05 * sigma

    def test_deterministic(self):
        a = gen_spiral(50, 0.1, 123)
        b = gen_spiral(50, 0.1, 123)
        assert np.array_equal(a.examples, b.examples)


def _write_idx(path, magic, dims, payload):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        for dim in dims:
            fh.write(struct.pack(">I", dim))
        fh.write(payload)


class TestIdxLoader:
    def test_small_file_scales_to_unit(self, tmp_path):
        path = tmp_path / "imgs"
        _write_idx(path, 0x00000803, [2, 2, 2], bytes([255] * 8))
        ds = load_mnist_idx(path)
        assert ds.examples.shape == (2, 4)
        assert np.all(ds.examples == 1.0)
        assert ds.kind == CONTINUOUS

    def test_label_magic_rejected(self, tmp_path):
        path = tmp_path / "labels"
        _write_idx(path, 0x00000801, [4, 1, 1], bytes(4))
        with pytest.raises(DataFormatError, match="magic"):
            load_mnist_idx(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "imgs"
        _write_idx(path, 0x00000803, [2, 2, 2], bytes([0] * 5))
        with pytest.raises(DataFormatError, match="truncated"):
            load_mnist_idx(path)

    def test_max_examples(self, tmp_path):
        path = tmp_path / "imgs"
        _write_idx(path, 0x00000803, [3, 1, 2], bytes([0, 51, 102, 153, 204, 255]))
        ds = load_mnist_idx(path, max_examples=2)
        assert ds.examples.shape == (2, 2)
        assert np.allclose(ds.examples, [[0, 51 / 255], [102 / 255, 153 / 255]])

    def test_roundtrip_through_save(self, tmp_path):
        path = tmp_path / "imgs"
        rng = np.random.default_rng(0)
        ds = Dataset((rng.random((5, 4)) < 0.5).astype(float), BINARY)
        save_mnist_idx(ds, path, image_shape=(2, 2))
        back = load_mnist_idx(path)
        assert np.array_equal(back.examples, ds.examples)
        assert idx_image_shape(path) == (2, 2)

    @requires_mnist
    def test_real_mnist_dimensions(self):
        ds = load_mnist_idx(mnist_train_path())
        assert ds.examples.shape == (60000, 784)
        assert ds.examples.min() == 0.0
        assert ds.examples.max() == 1.0


class TestBinarize:
    def test_threshold_ties_go_up(self):
        ds = Dataset(np.array([[0.4, 0.5, 0.6]]), CONTINUOUS)
        out = binarize(ds, 0.5)
        assert np.array_equal(out.examples, [[0.0, 1.0, 1.0]])
        assert out.kind == BINARY

    def test_all_zeros(self):
        ds = Dataset(np.zeros((3, 4)), CONTINUOUS)
        out = binarize(ds, 0.5)
        assert np.all(out.examples == 0.0)
        assert out.kind == BINARY

    def test_double_binarize_rejected(self):
        ds = Dataset(np.zeros((2, 2)), CONTINUOUS)
        out = binarize(ds, 0.5)
        with pytest.raises(ValueError, match="already binary"):
            binarize(out, 0.5)

    @requires_mnist
    def test_real_mnist_digit_fractions(self):
        ds = load_mnist_idx(mnist_train_path(), max_examples=1000)
        out = binarize(ds, 0.5)
        fractions = out.examples.mean(axis=1)
        assert np.all(fractions > 0.0) and np.all(fractions < 1.0)


class TestMinibatch:
    @settings(deadline=None, max_examples=25)
    @given(n=st.integers(1, 40), batch=st.integers(1, 40), seed=st.integers(0, 99))
    def test_epoch_covers_dataset_exactly(self, n, batch, seed):
        if batch > n:
            return
        ds = Dataset(np.arange(n, dtype=float).reshape(n, 1), CONTINUOUS)
        plan = MinibatchPlan(batch_size=batch, seed=seed)
        seen = []
        while plan.epoch == 0:
            X, plan = next_minibatch(ds, plan)
            seen.extend(X[:, 0].tolist())
        assert sorted(seen) == list(range(n))

    def test_two_batches_partition_four(self):
        ds = Dataset(np.arange(4, dtype=float).reshape(4, 1), CONTINUOUS)
        plan = MinibatchPlan(batch_size=2, seed=5)
        b1, plan = next_minibatch(ds, plan)
        b2, plan = next_minibatch(ds, plan)
        assert sorted(np.concatenate([b1, b2])[:, 0].tolist()) == [0, 1, 2, 3]
        assert plan.epoch == 1

    def test_deterministic_given_seed(self):
        ds = Dataset(np.arange(10, dtype=float).reshape(10, 1), CONTINUOUS)
        seqs = []
        for _ in range(2):
            plan = MinibatchPlan(batch_size=3, seed=11)
            got = []
            for _ in range(7):
                X, plan = next_minibatch(ds, plan)
                got.append(X.copy())
            seqs.append(np.concatenate(got))
        assert np.array_equal(seqs[0], seqs[1])

    def test_different_seeds_differ(self):
        n = 100
        ds = Dataset(np.arange(n, dtype=float).reshape(n, 1), CONTINUOUS)
        perms = [MinibatchPlan(batch_size=n, seed=s).permutation(n) for s in (0, 1)]
        assert not np.array_equal(perms[0], perms[1])

    def test_reshuffles_between_epochs(self):
        n = 64
        plan = MinibatchPlan(batch_size=8, seed=3)
        assert not np.array_equal(plan.permutation(n),
                                  MinibatchPlan(8, 3, epoch=1).permutation(n))

    def test_zero_batch_rejected(self):
        ds = Dataset(np.zeros((4, 1)), CONTINUOUS)
        with pytest.raises(ValueError, match="batch_size"):
            next_minibatch(ds, MinibatchPlan(batch_size=0, seed=0))

    def test_oversized_batch_rejected(self):
        ds = Dataset(np.zeros((4, 1)), CONTINUOUS)
        with pytest.raises(ValueError, match="exceeds"):
            next_minibatch(ds, MinibatchPlan(batch_size=5, seed=0))


class TestCsv:
    def test_roundtrip(self, tmp_path):
        ds = gen_spiral(20, 0.05, 2)
        path = tmp_path / "spiral.csv"
        save_spiral_csv(ds, path)
        back = load_spiral_csv(path)
        assert np.array_equal(back.examples, ds.examples)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataFormatError, match="header"):
            load_spiral_csv(path)


class TestDatasetInvariants:
    def test_binary_kind_enforced(self):
        with pytest.raises(ValueError, match="binary"):
            Dataset(np.array([[0.0, 0.5]]), BINARY)

    def test_ragged_rejected(self):
        with pytest.raises(ValueError):
            Dataset(np.array([1.0, 2.0]).reshape(2, 1)[:, :, None], CONTINUOUS)
