import pytest

from pebgls import bundled_path, kernels, load_instance


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    kernels.warmup()


@pytest.fixture(scope="session")
def berlin52():
    return load_instance(bundled_path("berlin52.tsp"))


@pytest.fixture(scope="session")
def att532():
    return load_instance(bundled_path("att532.tsp"))
