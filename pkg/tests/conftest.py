import pytest

from actiseq import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    kernels.warmup()
