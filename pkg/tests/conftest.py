import numpy as np
import pytest

from mpcmm import builtin_semirings, get_semiring


@pytest.fixture(params=[s.name for s in builtin_semirings()])
def semiring(request):
    return get_semiring(request.param)


def rng_for(seed):
    return np.random.default_rng(seed)
