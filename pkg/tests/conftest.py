import numpy as np
import pytest

from radonridge import _backend


def _backends():
    out = [pytest.param(_backend.python_kernels, id="python")]
    if _backend.compiled_kernels is not None:
        out.append(pytest.param(_backend.compiled_kernels, id="cython"))
    return out


@pytest.fixture(params=_backends())
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
