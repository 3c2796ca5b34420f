import numpy as np
import pytest

from scnwd import (
    DecoderConfig,
    build_coupled_base,
    lift,
    regular_block_base,
    uniform_edge_spread,
)


def make_code(dv=3, dc=6, w=2, L=12, z=4, seed=2):
    comps = uniform_edge_spread(regular_block_base(dv, dc), w)
    return lift(build_coupled_base(comps, L), z, seed)


@pytest.fixture(scope="session")
def toy_code():
    """(3,6)-regular chain, w=2, L=12, z=4: small but structurally complete."""
    return make_code()


@pytest.fixture(scope="session")
def proto_code():
    """z=1 lift of the running example protograph, long enough for W=10."""
    return make_code(L=20, z=1, seed=0)


@pytest.fixture(scope="session")
def toy_config():
    return DecoderConfig(W=5, max_iters=4, T=1)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
