import math

import numpy as np
import pytest

from conftest import make_record, shuffle_tokens
from oracles import normal_equations_oracle
from vortex.aggregation import aggregate
from vortex.errors import ValidationError
from vortex.interchange import EmbeddingRecord
from vortex.rae import (
    decoder_term,
    encode_forward,
    sigmoid,
    solve_decoder,
    vortex_descriptor_series,
    vortex_encode,
)


def test_sigmoid_at_zero():
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_sigmoid_saturates_exactly():
    values = sigmoid(np.array([-1000.0, -20.0, 20.0, 1000.0]))
    assert values[0] == 0.0
    assert values[-1] == 1.0
    assert np.all(np.diff(values) >= 0)
    assert np.all((values >= 0) & (values <= 1))


def test_forward_hand_example():
    g = encode_forward(np.array([[0.6], [0.8]]), np.array([1.0]))
    expected = [1 / (1 + math.exp(-0.6)), 1 / (1 + math.exp(-0.8))]
    np.testing.assert_allclose(g, expected, rtol=1e-15)
    np.testing.assert_allclose(g, [0.6457, 0.6900], atol=5e-5)


def test_forward_zero_row_gives_half(rng):
    tokens = np.zeros((3, 4))
    weights = rng.standard_normal((4, 2))
    assert np.all(encode_forward(tokens, weights) == 0.5)


def test_forward_dimension_mismatch():
    with pytest.raises(ValidationError, match="mismatch"):
        encode_forward(np.zeros((2, 3)), np.zeros(4))


def test_decoder_hand_example():
    f = solve_decoder(np.array([1.0, 1.0]), np.array([[2.0, 0.0], [4.0, 6.0]]))
    np.testing.assert_allclose(f, [3.0, 3.0], rtol=0, atol=1e-14)


def test_decoder_single_row_interpolates():
    f = solve_decoder(np.array([1.0]), np.array([[5.0, 7.0]]))
    np.testing.assert_array_equal(f, [5.0, 7.0])


def test_decoder_matches_extended_precision_oracle(rng):
    for q in (1, 2, 3):
        g = rng.standard_normal((6, q))
        chi = rng.standard_normal((6, 4))
        got = np.atleast_2d(solve_decoder(g[:, 0] if q == 1 else g, chi))
        want = normal_equations_oracle(g, chi)
        assert np.linalg.norm(got - want) / np.linalg.norm(want) <= 1e-10


def test_decoder_minimizes_residual(rng):
    g = rng.standard_normal((10, 2))
    chi = rng.standard_normal((10, 5))
    f = solve_decoder(g, chi)
    best = np.linalg.norm(g @ f - chi)
    for _ in range(50):
        delta = rng.standard_normal(f.shape)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert np.linalg.norm(g @ (f + delta) - chi) >= best - 1e-12


def test_decoder_zero_activations_warns_and_returns_zero():
    with pytest.warns(UserWarning, match="zero activation"):
        f = solve_decoder(np.zeros(4), np.ones((4, 3)))
    assert np.array_equal(f, np.zeros(3))


def test_decoder_rank_deficient_reports_not_fails(rng):
    column = rng.random(8)
    g = np.column_stack([column, column])  # rank 1
    chi = rng.standard_normal((8, 3))
    with pytest.warns(UserWarning, match="rank-deficient"):
        f = solve_decoder(g, chi)
    # minimum-norm solution still minimizes the residual
    lstsq = np.linalg.lstsq(g, chi, rcond=None)[0]
    np.testing.assert_allclose(f, lstsq, atol=1e-10)


def test_decoder_ridge_matches_regularized_normal_equations(rng):
    g = rng.standard_normal((12, 3))
    chi = rng.standard_normal((12, 5))
    ridge = 0.7
    want = np.linalg.solve(g.T @ g + ridge * np.eye(3), g.T @ chi)
    np.testing.assert_allclose(solve_decoder(g, chi, ridge=ridge), want, rtol=1e-12)


def test_decoder_shape_errors():
    with pytest.raises(ValidationError, match="row mismatch"):
        solve_decoder(np.ones(3), np.ones((4, 2)))
    with pytest.raises(ValidationError, match="rows"):
        solve_decoder(np.ones((1, 2)), np.ones((1, 2)))


def test_soup_of_one_equals_single_decoder(rng):
    record = make_record(rng)
    tokens = aggregate(record)
    assert np.array_equal(vortex_encode(record, 1), decoder_term(tokens, 1))


def test_soup_additivity_is_exact(rng):
    record = make_record(rng, 2, 6, 10)
    sizes = list(range(1, 32))
    series = vortex_descriptor_series(record, sizes)
    tokens = aggregate(record)
    for m in sizes[1:]:
        assert np.array_equal(series[m], series[m - 1] + decoder_term(tokens, m))


def test_series_matches_standalone_encodes(rng):
    record = make_record(rng)
    series = vortex_descriptor_series(record, [2, 5, 9])
    for m, descriptor in series.items():
        assert np.array_equal(descriptor, vortex_encode(record, m))


def test_descriptor_is_orderless(rng):
    for i in range(5):
        record = make_record(rng, 2, 12, 16, image_id=f"r{i}")
        shuffled = shuffle_tokens(record, np.random.default_rng(i))
        a = vortex_encode(record, 16)
        b = vortex_encode(shuffled, 16)
        assert np.linalg.norm(a - b) / np.linalg.norm(a) <= 1e-6


def test_descriptor_deterministic(rng):
    record = make_record(rng)
    assert vortex_encode(record, 8).tobytes() == vortex_encode(record, 8).tobytes()


def test_backbone_scale_descriptor_width(rng):
    record = make_record(rng, n_layers=2, n_tokens=8, n_features=768)
    assert vortex_encode(record, 2).shape == (768,)


def test_global_scale_invariance_of_descriptor(rng):
    record = make_record(rng)
    doubled = EmbeddingRecord(record.image_id, 2.0 * record.layers)
    assert np.array_equal(vortex_encode(record, 4), vortex_encode(doubled, 4))


def test_invalid_soup_sizes(rng):
    record = make_record(rng)
    with pytest.raises(ValidationError):
        vortex_encode(record, 0)
    with pytest.raises(ValidationError):
        vortex_descriptor_series(record, [])
