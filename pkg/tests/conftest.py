import os

# single-threaded BLAS so repeated runs are bit-identical; must precede the numpy import
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from pdn.config import DecaySpec, TrainConfig
from pdn.synth import synth_generate
from pdn.training import train

SYNTH_TRAIN, SYNTH_TEST = 5000, 1000


def synth_config(model="pdn", epochs=30, seed=0):
    """Default hyperparameters with inverse decay at its reported constant."""
    return TrainConfig(model=model, epochs=epochs, seed=seed, decay=DecaySpec("inverse", 1.1333))


@pytest.fixture(scope="session")
def synth_split():
    return (synth_generate(SYNTH_TRAIN, np.random.default_rng(11)),
            synth_generate(SYNTH_TEST, np.random.default_rng(12)))


@pytest.fixture(scope="session")
def trained_pdn(synth_split):
    """PDN on the synthetic task; stops early once test accuracy reaches 0.99."""
    tr, te = synth_split
    return train(tr, te, synth_config(), on_epoch=lambda r: r.eval_acc >= 0.99)
