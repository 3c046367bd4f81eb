import pytest

from cobias import AnnealSchedule, ObjectiveConfig, WeightScale, anneal

from helpers import biased_synthetic_pair


@pytest.fixture(scope="session")
def biased_pair():
    """The 10k/5k synthetic optimization/test pair used by the acceptance
    experiments; generation is deterministic so this is safe to share."""
    return biased_synthetic_pair()


@pytest.fixture(scope="session")
def trained_full_objective(biased_pair):
    """Annealing result for the full objective with default settings."""
    opt, _ = biased_pair
    return anneal(opt, WeightScale(30), ObjectiveConfig(), AnnealSchedule(seed=0))
