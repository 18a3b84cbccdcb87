import pytest

from kcm import ModelConfig, synth_batch, synth_model


@pytest.fixture
def toy_config():
    return ModelConfig(num_layers=2, hidden_dim=8, num_filters=16,
                       num_heads=2, vocab_size=64, max_seq_len=16)


@pytest.fixture
def toy_bundle(toy_config):
    return synth_model(7, toy_config, 0.0)


@pytest.fixture
def toy_batch(toy_config):
    return synth_batch(11, toy_config, 12)
