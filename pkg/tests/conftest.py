import numpy as np
import pytest

from vortex.interchange import EmbeddingRecord


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    # acceptance criteria always emit one visible pass/fail line
    if report.when == "call" and item.fspath.basename == "test_acceptance.py" and report.failed:
        print(f"\n[ACCEPTANCE] {item.name}: FAIL")


def make_record(rng, n_layers=2, n_tokens=8, n_features=12, image_id="img", with_cls=False):
    layers = rng.standard_normal((n_layers, n_tokens, n_features)).astype(np.float32)
    cls_token = rng.standard_normal(n_features).astype(np.float32) if with_cls else None
    return EmbeddingRecord(image_id, layers, cls_token)


def shuffle_tokens(record, rng):
    """Permute token rows inside every layer, yielding a new record."""
    layers = record.layers.copy()
    for i in range(record.n_layers):
        layers[i] = layers[i][rng.permutation(record.n_tokens)]
    return EmbeddingRecord(record.image_id, layers, record.cls_token)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
