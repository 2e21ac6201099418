import pytest

from certlap import catalog, estimate_constants

SWEEP = (25, 100, 400, 1600)


@pytest.fixture(scope="session")
def specs():
    return {s.name: s for s in catalog()}


@pytest.fixture(scope="session")
def consts_cache(specs):
    cache = {}

    def get(name, grid_res=64, n_sweep=SWEEP, safety_factor=1.1):
        key = (name, grid_res, tuple(n_sweep), safety_factor)
        if key not in cache:
            cache[key] = estimate_constants(
                specs[name], grid_res=grid_res, n_sweep=n_sweep,
                safety_factor=safety_factor,
            )
        return cache[key]

    return get
