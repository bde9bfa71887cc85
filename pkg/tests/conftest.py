import numpy as np
import pytest

from median_adversary.services.adversary import DeltaParam, FinalizedInstance, new_adversary


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def delta_20() -> DeltaParam:
    return DeltaParam(1, 20)


@pytest.fixture
def small_instance(delta_20: DeltaParam) -> FinalizedInstance:
    """n=100: one query (10,20), then the output 50 padded to full degree"""
    state = new_adversary(100, delta_20)
    state.answer_query(10, 20)
    state.pad_output_queries(50)
    return state.finalize(50)
