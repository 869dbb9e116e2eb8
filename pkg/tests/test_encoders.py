"""Frozen text encoder and image provider tests, including the adjoint."""

import numpy as np
import pytest

from lexcl import encoders as enc
from lexcl.embeddings import EmbeddingTable
from lexcl.errors import InvalidIdError, InvalidInputError


def _params(dim=8, d_out=8, L_max=5, seed=3):
    return enc.make_text_params(dim, d_out, L_max, seed)


def _identity_params(d, L_max=4):
    base = _params(d, d, L_max)
    W = np.eye(d)
    b = np.zeros(d)
    for a in (W, b):
        a.flags.writeable = False
    return enc.FrozenTextParams(W=W, b=b, pos=base.pos, L_max=L_max, seed=0)


def reference_encode(ids, matrix, params):
    """Straight-line re-implementation used as an oracle."""
    ids = list(ids)[: params.L_max]
    L = len(ids)
    h = np.zeros(params.dim)
    for i, tid in enumerate(ids):
        h += matrix[tid].astype(np.float64) + params.pos[i]
    h /= L
    return np.tanh(params.W @ h + params.b)


class TestEncodeText:
    def test_zero_embedding_identity_transform(self):
        d = 6
        p = _identity_params(d)
        table = EmbeddingTable(np.zeros((4, d), dtype=np.float32))
        r = enc.encode_text([0], table, p)
        assert np.allclose(r, np.tanh(p.pos[0]))

    def test_truncation_to_l_max(self):
        p = _params(L_max=3)
        table = EmbeddingTable(np.random.default_rng(0).normal(size=(10, 8)))
        long = enc.encode_text([1, 2, 3, 4, 5, 6], table, p)
        short = enc.encode_text([1, 2, 3], table, p)
        assert np.array_equal(long, short)

    def test_matches_reference(self):
        rng = np.random.default_rng(4)
        p = _params()
        table = EmbeddingTable(rng.normal(size=(16, 8)))
        for _ in range(20):
            ids = rng.integers(0, 16, size=rng.integers(1, 6)).tolist()
            got = enc.encode_text(ids, table, p)
            want = reference_encode(ids, table.matrix, p)
            assert np.allclose(got, want, atol=1e-6)

    def test_output_in_open_unit_interval(self):
        rng = np.random.default_rng(5)
        p = _params()
        table = EmbeddingTable(rng.normal(scale=10.0, size=(8, 8)))
        r = enc.encode_text([0, 1, 2], table, p)
        assert np.all(r > -1.0) and np.all(r < 1.0)

    def test_empty_ids_rejected(self):
        table = EmbeddingTable(np.zeros((2, 8), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            enc.encode_text([], table, _params())

    def test_out_of_range_id(self):
        table = EmbeddingTable(np.zeros((2, 8), dtype=np.float32))
        with pytest.raises(InvalidIdError):
            enc.encode_text([7], table, _params())


class TestEncodeTextGrad:
    def test_zero_upstream(self):
        table = EmbeddingTable(np.random.default_rng(1).normal(size=(6, 8)))
        grads = enc.encode_text_grad([0, 1], table, _params(), np.zeros(8))
        assert all(np.all(g == 0) for g in grads.values())

    def test_repeated_id_doubles(self):
        p = _params()
        table = EmbeddingTable(np.random.default_rng(2).normal(size=(6, 8)))
        up = np.random.default_rng(3).normal(size=8)
        single = enc.encode_text_grad([0, 1], table, p, up)
        # same pooled input: token 0 at both positions of a same-h sequence
        m = table.matrix.copy()
        m[1] = m[0]
        t2 = EmbeddingTable(m)
        double = enc.encode_text_grad([0, 0], t2, p, up)
        ref = enc.encode_text_grad([0, 1], t2, p, up)
        assert np.allclose(double[0], ref[0] + ref[1])

    def test_finite_differences(self):
        rng = np.random.default_rng(6)
        p = _params()
        table = EmbeddingTable(rng.normal(size=(12, 8)))
        up = rng.normal(size=8)
        ids = [3, 7, 3, 1]
        grads = enc.encode_text_grad(ids, table, p, up)
        step = 1e-3
        for tid, g in grads.items():
            for c in range(8):
                plus = table.matrix.astype(np.float64).copy()
                minus = plus.copy()
                plus[tid, c] += step
                minus[tid, c] -= step
                f_plus = up @ reference_encode(ids, plus, p)
                f_minus = up @ reference_encode(ids, minus, p)
                num = (f_plus - f_minus) / (2 * step)
                rel = abs(num - g[c]) / max(abs(num), abs(g[c]), 1e-8)
                assert rel <= 1e-4


class TestFrozenness:
    def test_params_not_writeable(self):
        p = _params()
        with pytest.raises(ValueError):
            p.W[0, 0] = 1.0
        with pytest.raises(ValueError):
            p.pos[0, 0] = 1.0

    def test_same_seed_same_params(self):
        a, b = _params(seed=9), _params(seed=9)
        assert np.array_equal(a.W, b.W)


class TestImageProvider:
    def test_bit_stable_lookup(self):
        prov = enc.ImageFeatureProvider.synthetic(10, 8, seed=1)
        assert np.array_equal(prov.image_feature(3), prov.image_feature(3))

    def test_seeded_regeneration_identical(self):
        a = enc.ImageFeatureProvider.synthetic(10, 8, seed=2)
        b = enc.ImageFeatureProvider.synthetic(10, 8, seed=2)
        assert np.array_equal(a.features, b.features)

    def test_file_round_trip(self, tmp_path):
        prov = enc.ImageFeatureProvider.synthetic(7, 5, seed=3)
        p = tmp_path / "images.feat"
        prov.save(p)
        back = enc.ImageFeatureProvider.from_file(p)
        assert np.array_equal(back.features, prov.features)

    def test_out_of_range_index(self):
        prov = enc.ImageFeatureProvider.synthetic(4, 4, seed=0)
        with pytest.raises(InvalidIdError):
            prov.image_feature(4)

    def test_features_frozen(self):
        prov = enc.ImageFeatureProvider.synthetic(4, 4, seed=0)
        with pytest.raises(ValueError):
            prov.features[0, 0] = 1.0
