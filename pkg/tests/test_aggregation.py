import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record, shuffle_tokens
from vortex.aggregation import aggregate, cls_descriptor, gap_descriptor
from vortex.errors import ValidationError
from vortex.interchange import EmbeddingRecord


def record_from_layers(*layers, image_id="img", cls_token=None):
    return EmbeddingRecord(image_id, np.asarray(layers, dtype=np.float32), cls_token)


def test_two_layer_hand_example():
    # stacked column [3; 4] has norm 5
    out = aggregate(record_from_layers([[3.0]], [[4.0]]))
    np.testing.assert_allclose(out, [[0.6], [0.8]], rtol=0, atol=1e-15)


def test_zero_column_stays_zero():
    layers = np.array([[[1.0, 0.0], [2.0, 0.0]]], dtype=np.float32)
    out = aggregate(EmbeddingRecord("z", layers))
    assert np.array_equal(out[:, 1], [0.0, 0.0])
    assert np.isfinite(out).all()


def test_backbone_scale_shape(rng):
    record = make_record(rng, n_layers=12, n_tokens=196, n_features=768)
    out = aggregate(record)
    assert out.shape == (2352, 768)
    assert out.dtype == np.float64


def test_every_nonzero_column_has_unit_norm(rng):
    out = aggregate(make_record(rng, 3, 17, 29))
    norms = np.linalg.norm(out, axis=0)
    assert np.abs(norms - 1.0).max() <= 1e-10


def test_row_blocks_keep_layer_order():
    out = aggregate(record_from_layers([[1.0], [2.0]], [[3.0], [4.0]]))
    # rows 0..n-1 from layer 1, rows n..2n-1 from layer 2
    assert np.all(np.diff(out[:, 0]) > 0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_permutation_equivariance_exact_on_integer_tokens(perm_seed):
    # integer-valued tokens make the column sums exact, so permuting the
    # input rows must permute the output rows bit-for-bit
    data_rng = np.random.default_rng(42)
    layers = data_rng.integers(-8, 9, size=(2, 6, 5)).astype(np.float32)
    record = EmbeddingRecord("p", layers)
    perm = np.random.default_rng(perm_seed).permutation(6)
    permuted = EmbeddingRecord("p", layers[:, perm, :].copy())
    expected = aggregate(record).reshape(2, 6, 5)[:, perm, :].reshape(12, 5)
    assert np.array_equal(aggregate(permuted), expected)


def test_permutation_equivariance_float(rng):
    record = make_record(rng, 2, 10, 7)
    shuffled = shuffle_tokens(record, np.random.default_rng(3))
    a = np.sort(aggregate(record), axis=0)
    b = np.sort(aggregate(shuffled), axis=0)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_global_scale_is_absorbed(rng):
    record = make_record(rng, 2, 5, 6)
    doubled = EmbeddingRecord(record.image_id, 2.0 * record.layers)
    assert np.array_equal(aggregate(record), aggregate(doubled))


def test_non_finite_rejected(rng):
    record = make_record(rng)
    record.layers[1, 2, 3] = np.inf
    with pytest.raises(ValidationError, match="non-finite"):
        aggregate(record)


def test_gap_mean_example():
    record = record_from_layers([[1.0, 3.0], [3.0, 5.0]])
    np.testing.assert_array_equal(gap_descriptor(record), [2.0, 4.0])


def test_gap_single_token_is_identity():
    record = record_from_layers([[7.0, -1.0]])
    np.testing.assert_array_equal(gap_descriptor(record), [7.0, -1.0])


def test_gap_defaults_to_last_layer():
    record = record_from_layers([[0.0, 0.0]], [[4.0, 6.0]])
    np.testing.assert_array_equal(gap_descriptor(record), [4.0, 6.0])
    np.testing.assert_array_equal(gap_descriptor(record, layer=1), [0.0, 0.0])
    np.testing.assert_array_equal(gap_descriptor(record, layer="all"), [2.0, 3.0])


def test_gap_feature_count_matches_hidden_dim(rng):
    record = make_record(rng, n_layers=2, n_tokens=4, n_features=768)
    assert gap_descriptor(record).shape == (768,)


@pytest.mark.parametrize("layer", [0, 3, "first", 2.5])
def test_gap_invalid_layer(rng, layer):
    with pytest.raises(ValidationError):
        gap_descriptor(make_record(rng, n_layers=2), layer=layer)


def test_cls_returned_unchanged(rng):
    record = make_record(rng, with_cls=True)
    np.testing.assert_array_equal(cls_descriptor(record), record.cls_token.astype(np.float64))
    zero = EmbeddingRecord("z", record.layers, np.zeros(record.n_features, dtype=np.float32))
    assert not cls_descriptor(zero).any()


def test_cls_absent_instructs_reextraction(rng):
    with pytest.raises(ValidationError, match="CLS enabled"):
        cls_descriptor(make_record(rng, with_cls=False))
