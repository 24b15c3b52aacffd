import pytest

from dactag.config import TrainConfig
from dactag.corpus import split_conversations
from dactag.synthetic import cycle_corpus, split_ids


def tiny_config(**overrides):
    base = dict(
        embedding_dim=8,
        filters_per_width=4,
        widths=(2, 3),
        max_len=6,
        batch_size=16,
        optimizer="adagrad",
        learning_rate=0.07,
        dropout=0.0,
        max_epochs=5,
        patience=2,
        seeds=(1,),
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def toy_corpus():
    convs = cycle_corpus(20, 8, n_labels=3, noise=0.0, seed=4)
    return split_conversations(convs, split_ids(convs))
