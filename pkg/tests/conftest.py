import pytest
import torch

torch.set_num_threads(1)
torch.use_deterministic_algorithms(True)


@pytest.fixture(autouse=True)
def _torch_seed_hygiene():
    # Tests that rely on torch's global RNG must seed it themselves; this
    # keeps ordering effects out of the suite.
    torch.manual_seed(0)
    yield
