import numpy as np
import pytest

from freqtag import TaggingConfig, default_half_mask
from freqtag.fixtures import gradient_image, two_filter_model


@pytest.fixture
def cfg():
    return TaggingConfig()


@pytest.fixture
def half_mask():
    return default_half_mask(32, 32)


@pytest.fixture
def gradient():
    return gradient_image()


@pytest.fixture
def tiny_model():
    import freqtag
    doc, store = two_filter_model()
    return freqtag.load_model(doc, store)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
