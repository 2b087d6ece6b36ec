import numpy as np
import pytest

from penet import PEnetConfig, TrainConfig, gaussian_family, generate_dataset, train


@pytest.fixture(scope="session")
def tiny_gaussian_model():
    """A small trained Gaussian-family model for sanity checks (~3 min once
    per session); short sequences keep it cheap while the noise-intensity
    scale is still learned well enough to sanity-check estimates."""
    family = gaussian_family(n_range=(100, 140))
    records, _ = generate_dataset(2024, family, 2000)
    config = TrainConfig(
        dataset="<fixture>",
        model=PEnetConfig.for_family(family),
        batch_size=64,
        max_epochs=25,
        patience=25,
        seed=5,
    )
    model, adam, log = train(config, records, family)
    return {"family": family, "records": records, "model": model,
            "adam": adam, "log": log, "config": config}
